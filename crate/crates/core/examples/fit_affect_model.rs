//! Refits the bundled demo affect model on the synthetic tone set and
//! prints it as TOML.
//!
//!     cargo run --release --example fit_affect_model > assets/affect_default.toml

use improv_core::listening::{affect, fit_default_model, synthetic_training_set};

fn main() {
    let model = fit_default_model();
    let set = synthetic_training_set(48_000, 8192, 512);
    let mut sq = (0.0, 0.0);
    for e in &set {
        let (v, a) = affect(&e.lowlevel, &model).unwrap();
        sq.0 += (v - e.valence).powi(2);
        sq.1 += (a - e.arousal).powi(2);
    }
    eprintln!(
        "fit on {} synthetic tones: valence rmse {:.3}, arousal rmse {:.3}",
        set.len(),
        (sq.0 / set.len() as f64).sqrt(),
        (sq.1 / set.len() as f64).sqrt()
    );
    println!("# Demo affect model fit on synthetic tones (loud/bright -> arousal,");
    println!("# consonant -> valence). Not fit on real listening data.");
    print!("{}", model.to_toml());
}
