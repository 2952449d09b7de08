//! Shared helpers for integration tests: random datasets and a naive oracle
//! written without any of the library's loss or ordering code.
#![allow(dead_code)]

use optree::{Dataset, Problem, Targets};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub enum Y {
    Reg(Vec<Vec<f64>>),
    Cls(Vec<u32>),
}

/// Plain row-major data.
#[derive(Debug, Clone)]
pub struct Raw {
    pub x: Vec<Vec<f64>>,
    pub y: Y,
}

impl Raw {
    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn p(&self) -> usize {
        self.x[0].len()
    }

    pub fn dataset(&self) -> Dataset {
        let targets = match &self.y {
            Y::Reg(v) => Targets::Regression {
                m: v[0].len(),
                values: v.iter().flatten().copied().collect(),
            },
            Y::Cls(c) => {
                let raw: Vec<String> = c.iter().map(|k| format!("k{k}")).collect();
                Targets::from_raw_labels(&raw)
            }
        };
        Dataset::from_rows(&self.x, targets).unwrap()
    }

    pub fn problem(&self) -> Problem {
        Problem::new(self.dataset())
    }

    pub fn is_regression(&self) -> bool {
        matches!(self.y, Y::Reg(_))
    }

    /// 1-based rank of `x[i][f]` among the distinct values of feature `f`.
    pub fn rank(&self, f: usize, i: usize) -> usize {
        let v = self.x[i][f];
        let mut distinct: Vec<f64> = self.x.iter().map(|r| r[f]).collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        distinct.iter().position(|&d| d == v).unwrap() + 1
    }

    fn leaf_loss(&self, members: &[usize]) -> f64 {
        if members.is_empty() {
            return 0.0;
        }
        match &self.y {
            Y::Reg(v) => {
                let m = v[0].len();
                let k = members.len() as f64;
                (0..m)
                    .map(|j| {
                        let mean = members.iter().map(|&i| v[i][j]).sum::<f64>() / k;
                        members
                            .iter()
                            .map(|&i| (v[i][j] - mean).powi(2))
                            .sum::<f64>()
                    })
                    .sum()
            }
            Y::Cls(c) => {
                let mut counts = std::collections::HashMap::new();
                for &i in members {
                    *counts.entry(c[i]).or_insert(0usize) += 1;
                }
                (members.len() - counts.values().max().unwrap()) as f64
            }
        }
    }
}

/// A tree over 1-based split ranks: rank `<= t` goes left.
#[derive(Debug, Clone, PartialEq)]
pub enum NaiveTree {
    Leaf,
    Split {
        f: usize,
        t: usize,
        left: Box<NaiveTree>,
        right: Box<NaiveTree>,
    },
}

/// Optimal loss over all trees of exactly `depth` levels by full enumeration.
pub fn naive_optimum(raw: &Raw, depth: usize) -> (f64, NaiveTree) {
    let ranks: Vec<Vec<usize>> = (0..raw.p())
        .map(|f| (0..raw.n()).map(|i| raw.rank(f, i)).collect())
        .collect();
    let all: Vec<usize> = (0..raw.n()).collect();
    naive_rec(raw, &ranks, &all, depth)
}

fn naive_rec(raw: &Raw, ranks: &[Vec<usize>], members: &[usize], depth: usize) -> (f64, NaiveTree) {
    let here = raw.leaf_loss(members);
    if depth == 0 || members.len() <= 1 {
        return (here, NaiveTree::Leaf);
    }
    let mut best = (f64::INFINITY, NaiveTree::Leaf);
    for (f, rf) in ranks.iter().enumerate() {
        let mut cuts: Vec<usize> = members.iter().map(|&i| rf[i]).collect();
        cuts.push(0);
        cuts.sort_unstable();
        cuts.dedup();
        for &t in &cuts {
            let (l, r): (Vec<usize>, Vec<usize>) = members.iter().partition(|&&i| rf[i] <= t);
            let (ll, lt) = naive_rec(raw, ranks, &l, depth - 1);
            let (rl, rt) = naive_rec(raw, ranks, &r, depth - 1);
            if ll + rl < best.0 {
                best = (
                    ll + rl,
                    NaiveTree::Split {
                        f,
                        t,
                        left: Box::new(lt),
                        right: Box::new(rt),
                    },
                );
            }
        }
    }
    best
}

/// Best stump loss on feature `f` over `members`.
pub fn naive_stump(raw: &Raw, members: &[usize], f: usize) -> f64 {
    let ranks = vec![(0..raw.n()).map(|i| raw.rank(f, i)).collect::<Vec<_>>()];
    naive_rec(raw, &ranks, members, 1).0
}

/// The six-sample, three-feature example with labels 1, 2 alternating.
pub fn toy6_raw() -> Raw {
    let cols = [
        [1.0, 2.0, 3.0, 3.0, 4.0, 5.0],
        [0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
        [0.0, 0.0, 3.0, 3.0, 5.0, 5.0],
    ];
    Raw {
        x: (0..6)
            .map(|i| cols.iter().map(|c| c[i]).collect())
            .collect(),
        y: Y::Cls(vec![1, 2, 1, 2, 1, 2]),
    }
}

/// Random dataset with tied and continuous features.
pub fn random_raw(rng: &mut ChaCha8Rng, n: usize, p: usize, regression: bool) -> Raw {
    let kinds: Vec<Option<u32>> = (0..p)
        .map(|_| rng.gen_bool(0.5).then(|| rng.gen_range(2..8)))
        .collect();
    let x = (0..n)
        .map(|_| {
            kinds
                .iter()
                .map(|k| match k {
                    Some(k) => rng.gen_range(0..*k) as f64,
                    None => (rng.gen::<f64>() * 100.0).round() / 100.0,
                })
                .collect()
        })
        .collect();
    let y = if regression {
        let m = rng.gen_range(1..=2);
        Y::Reg(
            (0..n)
                .map(|_| {
                    (0..m)
                        .map(|_| rng.gen_range(-40..40) as f64 / 8.0 + rng.gen::<f64>() * 1e-3)
                        .collect()
                })
                .collect(),
        )
    } else {
        let c = rng.gen_range(2..=3);
        Y::Cls((0..n).map(|_| rng.gen_range(0..c)).collect())
    };
    Raw { x, y }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Equality for classification, `1e-9` relative for regression.
pub fn same_loss(regression: bool, got: f64, want: f64) -> bool {
    if regression {
        (got - want).abs() <= 1e-9 * (1.0 + want.abs())
    } else {
        got == want
    }
}
