//! Variable-order Markov model over a symbol melody: next-symbol
//! distributions for a few contexts and a seeded continuation.

use improv_core::sequence::vmm_build;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let tune = vec![0, 1, 2, 0, 1, 2, 3, 2, 1, 0, 1, 2, 0, 1, 2, 3, 3, 2];
    let m = vmm_build(&[tune], 3).unwrap();
    for ctx in [vec![], vec![2], vec![1, 2], vec![2, 3, 3]] {
        let p = m.predict(&ctx);
        println!("P(. | {ctx:?}) = {:.3?}", p);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut out = vec![0u32, 1];
    for _ in 0..16 {
        let ctx = &out[out.len().saturating_sub(3)..];
        out.push(m.sample(ctx, &mut rng));
    }
    println!("continuation {out:?}");
}
