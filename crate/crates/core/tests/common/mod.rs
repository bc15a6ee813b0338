#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqc_core::{generate_random, EvalParams, TreeInstance};

/// Random tree with integer edge lengths 1..=3, random rates summing to
/// `lambda` and a common handling time `g`.
pub fn random_tree(n: usize, seed: u64, lambda: f64, g: f64) -> TreeInstance {
    let base = generate_random(n, &[1.0, 2.0, 3.0], seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut doc = base.document().clone();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    for (v, r) in doc.vertices.iter_mut().zip(&raw) {
        v.lambda = lambda * r / total;
        v.g = g;
    }
    TreeInstance::from_document(doc).unwrap()
}

pub fn random_params(rng: &mut ChaCha8Rng) -> EvalParams {
    EvalParams::new(
        rng.random_range(0.0..0.5),
        rng.random_range(0.5..1.5),
        rng.random_range(0.0..1.0),
    )
    .unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
