//! Headless `run` and `validate` commands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::Args;
use skysim::engine::{ControllerSpec, EngineError, Scenario, Simulation};
use skysim::model::ModelError;
use skysim::telemetry::{export_events_csv, export_frames_csv, Recorder, RunSummary};
use skysim::{load_network, SkywayNetwork};

pub const FRAMES_FILE: &str = "frames.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Network document (skysim/1 JSON).
    #[arg(long)]
    pub network: PathBuf,
    /// Scenario document with requests and scheduled faults.
    #[arg(long)]
    pub scenario: PathBuf,
    /// `builtin:greedy`, `builtin:static`, or `tcp:<host>:<port>` to listen for an external controller.
    #[arg(long, default_value = "builtin:greedy")]
    pub controller: ControllerSpec,
    /// Overrides the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the network's time step, seconds.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Run as fast as possible without progress output.
    #[arg(long)]
    pub headless: bool,
    /// Wall-clock pacing when not headless: simulated seconds per real second.
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
    /// Seconds to wait for each controller reply.
    #[arg(long, default_value_t = 30.0)]
    pub decision_timeout: f64,
    /// Seconds to wait for a TCP controller to connect.
    #[arg(long, default_value_t = 60.0)]
    pub accept_timeout: f64,
}

impl RunArgs {
    pub fn new(network: impl Into<PathBuf>, scenario: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            network: network.into(),
            scenario: scenario.into(),
            controller: ControllerSpec::Builtin("greedy".into()),
            seed: None,
            out: out.into(),
            dt: None,
            headless: true,
            speed: 1.0,
            decision_timeout: 30.0,
            accept_timeout: 60.0,
        }
    }
}

/// Failure classes map to distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad input files or arguments.
    Config(Vec<String>),
    /// The controller session broke.
    Session(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Session(_) => 3,
        }
    }

    pub fn lines(&self) -> Vec<String> {
        match self {
            CliError::Config(f) => f.iter().map(|l| format!("error: {l}")).collect(),
            CliError::Session(m) => vec![format!("error: controller session: {m}")],
            CliError::Io(m) => vec![format!("error: {m}")],
        }
    }
}

fn read(path: &Path, what: &str) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Config(vec![format!("cannot read {what} {}: {e}", path.display())]))
}

fn with_path(path: &Path, e: ModelError) -> CliError {
    CliError::Config(e.findings().into_iter().map(|f| format!("{}: {f}", path.display())).collect())
}

pub fn load_network_file(path: &Path) -> Result<SkywayNetwork, CliError> {
    load_network(&read(path, "network")?).map_err(|e| with_path(path, e))
}

/// Loads and cross-checks the inputs of a run, applying `--dt` and `--seed`.
pub fn prepare(args: &RunArgs) -> Result<(SkywayNetwork, Scenario), CliError> {
    let mut net = load_network_file(&args.network)?;
    if let Some(dt) = args.dt {
        let mut settings = net.settings.clone();
        settings.dt_s = dt;
        net.set_settings(settings).map_err(|e| CliError::Config(e.findings()))?;
    }
    let mut scenario = Scenario::load(&read(&args.scenario, "scenario")?).map_err(|e| with_path(&args.scenario, e))?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let findings = scenario.findings(&net);
    if !findings.is_empty() {
        return Err(CliError::Config(
            findings.into_iter().map(|f| format!("{}: {f}", args.scenario.display())).collect(),
        ));
    }
    if !(args.speed.is_finite() && args.speed > 0.0) {
        return Err(CliError::Config(vec![format!("--speed must be > 0, got {}", args.speed)]));
    }
    Ok((net, scenario))
}

/// `skysim run`: simulate and write the three output files.
///
/// Failed drones are part of a successful run; only configuration, I/O, and
/// controller-session problems are errors.
pub fn run(args: &RunArgs, log: &mut dyn Write) -> Result<RunSummary, CliError> {
    let (net, scenario) = prepare(args)?;
    if let ControllerSpec::Tcp(addr) = &args.controller {
        let _ = writeln!(log, "waiting for controller on {addr}");
    }
    let link = args
        .controller
        .open(
            Duration::from_secs_f64(args.accept_timeout),
            Duration::from_secs_f64(args.decision_timeout),
        )
        .map_err(|e| CliError::Session(e.to_string()))?;

    let recorder = std::sync::Arc::new(std::sync::Mutex::new(Recorder::default()));
    let mut sim = Simulation::new(net, scenario, link, Box::new(recorder.clone())).map_err(engine_error)?;
    sim.clock_mut().set_speed_multiplier(args.speed);
    sim.start().map_err(engine_error)?;

    let mut next_report = 0.0;
    loop {
        let began = Instant::now();
        let more = sim.step().map_err(engine_error)?;
        if !args.headless {
            let now = sim.clock().now_s();
            if now >= next_report || !more {
                let flying = sim.drones().filter(|d| d.phase.is_airborne()).count();
                let _ = writeln!(log, "t={now:>8.1}s  airborne={flying}");
                next_report = now + 10.0;
            }
            if let Some(rest) = sim.clock().wall_step().checked_sub(began.elapsed()) {
                std::thread::sleep(rest);
            }
        }
        if !more {
            break;
        }
    }
    let summary = sim.finish().map_err(engine_error)?;
    drop(sim);

    let rec = recorder.lock().expect("recorder lock");
    write_outputs(&args.out, &export_frames_csv(&rec.frames), &export_events_csv(&rec.events), &summary.to_json())?;
    let _ = writeln!(
        log,
        "{} completed, {} failed, {:.3} Wh, {:.1} s simulated -> {}",
        summary.completed,
        summary.failed,
        summary.total_energy_wh,
        summary.total_time_s,
        args.out.display()
    );
    Ok(summary)
}

fn engine_error(e: EngineError) -> CliError {
    match e {
        EngineError::Config(f) => CliError::Config(f),
        other => CliError::Session(other.to_string()),
    }
}

fn write_outputs(dir: &Path, frames: &[u8], events: &[u8], summary: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    fs::write(dir.join(FRAMES_FILE), frames).map_err(io)?;
    fs::write(dir.join(EVENTS_FILE), events).map_err(io)?;
    fs::write(dir.join(SUMMARY_FILE), summary).map_err(io)?;
    Ok(())
}

/// `skysim validate`: prints a one-line summary or every finding.
pub fn validate(path: &Path, log: &mut dyn Write) -> Result<(), CliError> {
    let net = load_network_file(path)?;
    let _ = writeln!(
        log,
        "ok: {} ({} nodes, {} segments)",
        path.display(),
        net.node_count(),
        net.segment_count()
    );
    Ok(())
}
