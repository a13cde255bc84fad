use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use skysim::SkywayNetwork;
use skysim_gateway::cli::{self, CliError, RunArgs};
use skysim_gateway::serve::{self, AppState, ServeOptions};

#[derive(Parser)]
#[command(name = "skysim", version, about = "Skyway drone-delivery simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write frames.csv, events.csv and summary.json.
    Run(RunArgs),
    /// Check a network document and print every problem found.
    Validate {
        #[arg(long)]
        network: PathBuf,
    },
    /// Serve the HTTP/WebSocket API for the browser viewer.
    Serve {
        #[arg(long, env = "SKYSIM_PORT", default_value_t = serve::DEFAULT_HTTP_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Network to load at startup; the service starts empty otherwise.
        #[arg(long)]
        network: Option<PathBuf>,
    },
}

fn report(e: CliError) -> ExitCode {
    for line in e.lines() {
        eprintln!("{line}");
    }
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let args = Cli::parse();
    let result = match args.command {
        Command::Run(run) => cli::run(&run, &mut io::stderr()).map(|_| ()),
        Command::Validate { network } => cli::validate(&network, &mut io::stdout()),
        Command::Serve { port, host, network } => serve_blocking(&host, port, network),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

fn serve_blocking(host: &str, port: u16, network: Option<PathBuf>) -> Result<(), CliError> {
    let net = match network {
        Some(path) => cli::load_network_file(&path)?,
        None => SkywayNetwork::default(),
    };
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| CliError::Config(vec![format!("bad listen address {host}:{port}: {e}")]))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Io(format!("cannot listen on {addr}: {e}")))?;
        eprintln!("skysim serving on http://{addr}");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        serve::serve(listener, AppState::new(net, ServeOptions::default()), shutdown)
            .await
            .map_err(|e| CliError::Io(e.to_string()))
    })
}
