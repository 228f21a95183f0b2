//! Factor oracle over a short sequence and walks at three continuity
//! settings.

use improv_core::sequence::{fo_build, fo_walk, OracleWalkConfig};

fn main() {
    let seq = [0, 1, 1, 0, 2, 0, 1, 1, 2, 0];
    let fo = fo_build(&seq);
    println!("{} states, {} transitions", fo.num_states(), fo.num_transitions());
    for i in 0..fo.num_states() {
        println!("  state {i}: suffix {:?}", fo.suffix_link(i));
    }
    for p in [1.0, 0.7, 0.3] {
        let cfg = OracleWalkConfig {
            continuity: p,
            rng_seed: 3,
            ..OracleWalkConfig::default()
        };
        let walk = fo_walk(&fo, &cfg, 20).unwrap();
        println!("continuity {p}: {walk:?}");
    }
}
