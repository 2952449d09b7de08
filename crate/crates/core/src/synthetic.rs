//! Seeded random datasets with planted tree structure, for benchmarks and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, Targets};

/// Features uniform on `[0, 1)`; labels from a random depth-3 tree with a
/// fraction `noise` of labels redrawn uniformly.
pub fn classification(n: usize, p: usize, classes: usize, noise: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = uniform_rows(&mut rng, n, p);
    let planted = Planted::random(&mut rng, p, 3);
    let leaf_class: Vec<usize> = (0..8).map(|_| rng.gen_range(0..classes)).collect();
    let labels: Vec<String> = rows
        .iter()
        .map(|x| {
            let k = if rng.gen::<f64>() < noise {
                rng.gen_range(0..classes)
            } else {
                leaf_class[planted.leaf(x)]
            };
            format!("c{k}")
        })
        .collect();
    Dataset::from_rows(&rows, Targets::from_raw_labels(&labels)).expect("generated data is valid")
}

/// Features uniform on `[0, 1)`; `m` targets piecewise constant over a random
/// depth-3 tree plus uniform noise of half-width `noise`.
pub fn regression(n: usize, p: usize, m: usize, noise: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = uniform_rows(&mut rng, n, p);
    let planted = Planted::random(&mut rng, p, 3);
    let means: Vec<f64> = (0..8 * m).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let mut values = Vec::with_capacity(n * m);
    for x in &rows {
        let leaf = planted.leaf(x);
        for k in 0..m {
            values.push(means[leaf * m + k] + rng.gen_range(-noise..=noise));
        }
    }
    Dataset::from_rows(&rows, Targets::Regression { m, values }).expect("generated data is valid")
}

fn uniform_rows(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..p).map(|_| rng.gen::<f64>()).collect())
        .collect()
}

/// A perfect tree in heap order: node `k` has children `2k + 1`, `2k + 2`.
struct Planted {
    splits: Vec<(usize, f64)>,
    depth: usize,
}

impl Planted {
    fn random(rng: &mut ChaCha8Rng, p: usize, depth: usize) -> Planted {
        let internal = (1 << depth) - 1;
        Planted {
            splits: (0..internal)
                .map(|_| (rng.gen_range(0..p), rng.gen_range(0.2..0.8)))
                .collect(),
            depth,
        }
    }

    fn leaf(&self, x: &[f64]) -> usize {
        let mut k = 0;
        for _ in 0..self.depth {
            let (f, th) = self.splits[k];
            k = if x[f] <= th { 2 * k + 1 } else { 2 * k + 2 };
        }
        k - self.splits.len()
    }
}
