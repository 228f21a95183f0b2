//! Trains a SOM on random clustered data and prints QE before and after,
//! then the node each cluster centre maps to.

use improv_core::som::{train_som, Som, SomTrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let centres: Vec<Vec<f64>> = (0..4).map(|_| (0..8).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
    let rows: Vec<Vec<f64>> = (0..400)
        .map(|i| centres[i % 4].iter().map(|c| c + rng.random_range(-0.3..0.3)).collect())
        .collect();
    let cfg = SomTrainConfig::for_grid(4, 4, 7);
    let q0 = Som::initialize(&rows, (4, 4), &cfg).unwrap().quantization_error(&rows);
    let som = train_som(&rows, (4, 4), &cfg).unwrap();
    println!("QE {q0:.4} -> {:.4} over {} epochs", som.quantization_error(&rows), cfg.epochs);
    for (i, c) in centres.iter().enumerate() {
        let b = som.bmu(c);
        println!("cluster {i} -> node {b} at {:?}", som.grid_pos(b));
    }
}
