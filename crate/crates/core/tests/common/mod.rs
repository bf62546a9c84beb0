#![allow(dead_code)]

use pca_core::{Arc, Digraph, DistMatrix, PcwInstance};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random digraph instance: n in [2, n_max], integer costs and penalties in
/// [0, 10], each ordered pair present with a per-instance density.
pub fn random_pcw(rng: &mut TestRng, n_max: usize) -> PcwInstance {
    let n = rng.gen_range(2..=n_max);
    let density: f64 = rng.gen_range(0.2..=1.0);
    let mut arcs = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen_bool(density) {
                arcs.push(Arc { tail: u, head: v, cost: rng.gen_range(0..=10) as f64 });
            }
        }
    }
    let pen = (0..n).map(|_| rng.gen_range(0..=10) as f64).collect();
    PcwInstance::new(Digraph::new(n, 0, arcs).unwrap(), pen).unwrap()
}

pub fn random_points(rng: &mut TestRng, n: usize, side: f64) -> Vec<(f64, f64)> {
    (0..n).map(|_| (rng.gen_range(0.0..side), rng.gen_range(0.0..side))).collect()
}

/// Euclidean distances rounded to the nearest integer.
pub fn rounded_euclidean(points: &[(f64, f64)]) -> DistMatrix {
    DistMatrix::from_fn(points.len(), |u, v| {
        let (dx, dy) = (points[u].0 - points[v].0, points[u].1 - points[v].1);
        (dx * dx + dy * dy).sqrt().round()
    })
    .unwrap()
}

/// Shortest-path closure of random integer edge weights in [1, 20].
pub fn random_integer_metric(rng: &mut TestRng, n: usize) -> DistMatrix {
    let mut d = vec![0.0; n * n];
    for u in 0..n {
        for v in u + 1..n {
            let w = rng.gen_range(1..=20) as f64;
            d[u * n + v] = w;
            d[v * n + u] = w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i * n + k] + d[k * n + j];
                if via < d[i * n + j] {
                    d[i * n + j] = via;
                }
            }
        }
    }
    DistMatrix::new(n, d).unwrap()
}

/// Symmetric matrix with random entries, usually violating the triangle inequality.
pub fn random_symmetric(rng: &mut TestRng, n: usize) -> DistMatrix {
    let mut d = vec![0.0; n * n];
    for u in 0..n {
        for v in u + 1..n {
            let w = rng.gen_range(1..=50) as f64;
            d[u * n + v] = w;
            d[v * n + u] = w;
        }
    }
    DistMatrix::new(n, d).unwrap()
}

pub fn integer_rewards(rng: &mut TestRng, n: usize) -> Vec<f64> {
    let mut r: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=10) as f64).collect();
    r[0] = 0.0;
    r
}
