//! Hosts the HTTP/WebSocket service inside another program, preloaded with the
//! demo network. Stops on Ctrl-C.
//!
//! `cargo run -p skysim-gateway --example embedded_server -- [PORT]`
//!
//! Then, for instance:
//!
//! ```text
//! curl -s localhost:7400/network
//! curl -s -XPOST localhost:7400/sim/start -H 'content-type: application/json' \
//!     -d '{"scenario":{"requests":[{"id":"r1","origin":"depot","destination":"clinic","payload_kg":1}]}}'
//! curl -s -XPOST localhost:7400/sim/resume
//! curl -s localhost:7400/sim/status
//! ```

use skysim::synth::demo_network;
use skysim_gateway::serve::{serve, AppState, ServeOptions, DEFAULT_HTTP_PORT};

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let port = std::env::args().nth(1).map_or(DEFAULT_HTTP_PORT, |p| p.parse().expect("port must be a number"));
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    println!("serving the demo network on http://{}", listener.local_addr()?);
    let state = AppState::new(demo_network(), ServeOptions::default());
    serve(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
