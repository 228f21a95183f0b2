//! Builds the synthetic fixture (corpus, models, session config) in a temp
//! dir, runs 30 s of simulated performance and prints what each agent did.
//!
//!     cargo run --release --example simulate_session [OUT_DIR]

use std::path::PathBuf;

use improv_core::conductor::{load_resources, simulate, SessionConfig};
use improv_core::corpus::load_engine_audio;
use improv_core::fixtures::build_fixture;

fn main() -> anyhow::Result<()> {
    let dir = match std::env::args().nth(1) {
        Some(d) => PathBuf::from(d),
        None => std::env::temp_dir().join("improv-simulate"),
    };
    let fx = build_fixture(&dir, 30.0)?;
    let cfg = SessionConfig::load(&fx.session)?;
    let res = load_resources(&cfg)?;
    let (_, perf) = load_engine_audio(&fx.performer, cfg.sample_rate)?;
    let out = dir.join("out");
    let rep = simulate(cfg, res, &[perf], &out, None)?;
    println!("{} blocks, {} performer segments heard", rep.blocks, rep.segments_heard);
    for (id, events, clipped) in &rep.agents {
        println!("  {id}: {events} plan events, {clipped} clipped samples");
    }
    println!("{} OSC packets, {} Art-Net packets", rep.osc_packets, rep.dmx_packets);
    for f in &rep.files {
        println!("  wrote {}", f.display());
    }
    Ok(())
}
