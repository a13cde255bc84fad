//! An external controller process. Start the engine first, e.g.
//!
//! ```text
//! skysim run --network fixtures/demo.json --scenario fixtures/demo_scenario.json \
//!     --controller tcp:127.0.0.1:7401 --out out --headless
//! ```
//!
//! then `cargo run -p skysim --example tcp_controller -- 127.0.0.1:7401`.
//! The policy here wraps the built-in greedy router and logs each exchange;
//! any program speaking the same line protocol can take its place.

use std::time::Duration;

use skysim::protocol::{connect_controller, Controller, Message, DEFAULT_PORT};
use skysim::GreedyController;

struct Logged(GreedyController);

impl Controller for Logged {
    fn handle(&mut self, msg: &Message) -> Option<Message> {
        let reply = self.0.handle(msg);
        match (msg, &reply) {
            (Message::Arrival(a), Some(Message::Decision(d))) => {
                println!("{:>8.1}  {} at {} ({:.2} Wh): {:?}", a.time_s, a.drone_id, a.node_id, a.soc_wh, d.action)
            }
            (Message::Fault { time_s, segment, available }, _) => {
                println!("{time_s:>8.1}  fault {segment} available={available}")
            }
            (Message::Rejection { reason, .. }, _) => println!("          rejected: {reason}"),
            _ => {}
        }
        reply
    }
}

fn main() {
    let addr = std::env::args().nth(1).unwrap_or_else(|| format!("127.0.0.1:{DEFAULT_PORT}"));
    println!("connecting to {addr}");
    match connect_controller(addr.as_str(), &mut Logged(GreedyController::greedy()), Duration::from_secs(60)) {
        Ok(Some(Message::End { summary, .. })) => println!("run ended: {} completed, {} failed", summary.completed, summary.failed),
        Ok(_) => println!("engine closed the session"),
        Err(e) => {
            eprintln!("session error: {e}");
            std::process::exit(1);
        }
    }
}
