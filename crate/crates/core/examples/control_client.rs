//! Minimal control-protocol client. Start a session first:
//!
//!     improv serve --config session.toml --control 127.0.0.1:7400
//!     cargo run --example control_client -- 127.0.0.1:7400
//!
//! Prints the banner, pings, lowers the responder's spectral weight and
//! prints three meter snapshots.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;

use serde_json::{json, Value};

fn main() -> anyhow::Result<()> {
    let addr = std::env::args().nth(1).unwrap_or_else(|| "127.0.0.1:7400".into());
    let stream = TcpStream::connect(&addr)?;
    let mut w = stream.try_clone()?;
    let mut lines = BufReader::new(stream).lines();
    println!("banner {}", lines.next().unwrap()?);
    let mut call = |v: Value| -> anyhow::Result<()> {
        writeln!(w, "{v}")?;
        Ok(())
    };
    call(json!({"id": 1, "op": "ping"}))?;
    call(json!({"id": 2, "op": "state"}))?;
    call(json!({"id": 3, "op": "set_weights", "agent": "muse", "weights": [1.0, 0.2, 1.0, 1.0]}))?;
    call(json!({"id": 4, "op": "subscribe"}))?;
    let mut meters = 0;
    for l in lines {
        let v: Value = serde_json::from_str(&l?)?;
        if v["event"] == "meters" {
            let s = &v["snapshot"];
            println!("t={:.2} scene {} performer {} dB", s["t"], s["scene_name"], s["sources"]["performer"]["loudness_db"]);
            meters += 1;
            if meters == 3 {
                break;
            }
        } else {
            println!("reply {v}");
        }
    }
    Ok(())
}
