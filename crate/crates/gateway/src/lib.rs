//! Front door for the skysim engine: the `skysim` command line and the
//! HTTP/WebSocket service the browser viewer talks to.

pub mod cli;
pub mod serve;
