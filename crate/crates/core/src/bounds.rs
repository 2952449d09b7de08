//! Exact and bounding values of the restricted depth-2 loss.
//!
//! A depth-2 subspace is named by a [`ParamBox`] `(f0, [a, b], f1, f2)`: root
//! feature `f0` with split index in `a..=b`, left child splitting on `f1` and
//! right child on `f2`. For a sample set `I`,
//!
//! ```text
//! L2(I, φ) = min_{a <= t <= b} L1(I[0, t], f1) + L1(I[t, u], f2)
//! ```
//!
//! and the bounds bracket it: `W0 <= W1 <= W2 <= L2 <= V_s`. Every bound has
//! the separable shape
//!
//! ```text
//! A(f1) + B(f2) + min_k [X_k(f1) + Y_k(f2)]
//! ```
//!
//! which lets the solvers take minima over one child feature in `O(terms)`
//! per feature instead of enumerating all pairs.

use std::cell::{OnceCell, RefCell};
use std::collections::HashMap;

use crate::dataset::{IndexSet, Problem};
use crate::loss::{stump_filtered, StumpResult};
use crate::model::{Sketch, Tree};

/// A depth-2 subspace `(f0, [a, b], f1, f2)`; features are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamBox {
    pub f0: usize,
    pub a: usize,
    pub b: usize,
    pub f1: usize,
    pub f2: usize,
}

/// A bound together with a tree attaining it, when one is known.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundValue {
    pub value: f64,
    pub witness: Option<Tree>,
}

/// `s + 1` split indices `t_j = a + floor(j (b - a) / s)` from `a` to `b`.
///
/// Panics unless `1 <= s <= b - a`.
pub fn equi_spaced(a: usize, b: usize, s: usize) -> Vec<usize> {
    assert!(
        s >= 1 && a + s <= b,
        "need 1 <= s <= b - a, got s = {s} on [{a}, {b}]"
    );
    (0..=s).map(|j| a + j * (b - a) / s).collect()
}

/// Exact `L2(I, φ)`; the witness uses the smallest minimizing root split.
pub fn depth2_exact(problem: &Problem, set: &IndexSet, phi: ParamBox) -> BoundValue {
    let along = Along::new(problem, set.as_slice().to_vec());
    evaluate_with_witness(&along, phi, Eval::Exact)
}

/// `V_s(I, φ)`: the best tree whose root split is one of the `s + 1` quantile
/// indices of `[a, b]`.
///
/// Panics when `s > b - a`; use [`depth2_exact`] on short intervals.
pub fn upper_vs(problem: &Problem, set: &IndexSet, phi: ParamBox, s: usize) -> BoundValue {
    assert!(
        s <= phi.b - phi.a,
        "V_s needs s <= b - a (s = {s}, [{}, {}])",
        phi.a,
        phi.b
    );
    let along = Along::new(problem, set.as_slice().to_vec());
    evaluate_with_witness(&along, phi, Eval::Upper { s })
}

/// `W0`: samples whose root value falls strictly inside the interval are dropped.
pub fn lower_w0(problem: &Problem, set: &IndexSet, phi: ParamBox) -> f64 {
    single(problem, set, phi, Eval::W0)
}

/// `hat L2(I, φ, s')`: for each of the `s'` quantile cells, the samples in that
/// cell are dropped and the two sides are fitted by stumps.
///
/// Panics unless `1 <= s' <= b - a`.
pub fn hat_l2(problem: &Problem, set: &IndexSet, phi: ParamBox, s_prime: usize) -> f64 {
    let r = equi_spaced(phi.a, phi.b, s_prime);
    let along = Along::new(problem, set.as_slice().to_vec());
    let u = problem.u(phi.f0);
    r.windows(2)
        .map(|w| {
            along.stump(phi.f1, phi.f0, 0, w[0]).loss + along.stump(phi.f2, phi.f0, w[1], u).loss
        })
        .fold(f64::INFINITY, f64::min)
}

/// `W1 = W0(I, φ) + hat L2(I[a, b], φ, s')`.
///
/// Panics unless `1 <= s' <= b - a`.
pub fn lower_w1(problem: &Problem, set: &IndexSet, phi: ParamBox, s_prime: usize) -> f64 {
    assert!(
        s_prime >= 1 && phi.a + s_prime <= phi.b,
        "need 1 <= s' <= b - a"
    );
    single(problem, set, phi, Eval::W1 { s_prime })
}

/// `W2 = W0(I, φ) + L2(I[a, b], φ)`.
pub fn lower_w2(problem: &Problem, set: &IndexSet, phi: ParamBox) -> f64 {
    single(problem, set, phi, Eval::W2)
}

fn single(problem: &Problem, set: &IndexSet, phi: ParamBox, eval: Eval) -> f64 {
    let along = Along::new(problem, set.as_slice().to_vec());
    separable(&along, phi.f0, phi.a, phi.b, eval, &[phi.f1], &[phi.f2]).pair(0, 0)
}

fn evaluate_with_witness(along: &Along, phi: ParamBox, eval: Eval) -> BoundValue {
    let sep = separable(along, phi.f0, phi.a, phi.b, eval, &[phi.f1], &[phi.f2]);
    let (value, t) = sep.pair_argmin(0, 0);
    let sketch = along.depth2_sketch(phi.f0, t, phi.f1, phi.f2);
    BoundValue {
        value,
        witness: Some(Tree::from_sketch(along.problem, &sketch)),
    }
}

/// Which bound [`separable`] builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Eval {
    W0,
    W1 {
        s_prime: usize,
    },
    W2,
    Exact,
    /// `V_s`; exact when the interval is shorter than `s`.
    Upper {
        s: usize,
    },
}

/// A sample set with lazily built orderings along each feature and a memo of
/// stump losses on rank windows.
pub(crate) struct Along<'a> {
    problem: &'a Problem,
    members: Vec<u32>,
    ordered: Vec<OnceCell<Vec<u32>>>,
    memo: RefCell<HashMap<(usize, usize, usize, usize), StumpResult>>,
}

impl<'a> Along<'a> {
    pub fn new(problem: &'a Problem, members: Vec<u32>) -> Along<'a> {
        Along {
            problem,
            members,
            ordered: (0..problem.p()).map(|_| OnceCell::new()).collect(),
            memo: RefCell::new(HashMap::new()),
        }
    }

    /// Samples of rank `<= t` (`left`) or `> t` on `f`, over the whole training set.
    pub fn side(problem: &'a Problem, f: usize, t: usize, left: bool) -> Along<'a> {
        let order = problem.index().feature(f);
        let slice = if left {
            order.slice(0, t)
        } else {
            order.slice(t, order.u())
        };
        let along = Along::new(problem, slice.to_vec());
        let _ = along.ordered[f].set(slice.to_vec());
        along
    }

    pub fn problem(&self) -> &'a Problem {
        self.problem
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn ordered(&self, f: usize) -> &[u32] {
        self.ordered[f].get_or_init(|| self.problem.order_along(f, &self.members))
    }

    /// Members with rank on `f` in `(lo, hi]`, sharing already built orderings.
    pub fn restrict(&self, f: usize, lo: usize, hi: usize) -> Along<'a> {
        let order = self.problem.index().feature(f);
        let inside = |i: &u32| {
            let r = order.rank(*i);
            lo < r && r <= hi
        };
        let members: Vec<u32> = self.members.iter().copied().filter(inside).collect();
        let out = Along::new(self.problem, members);
        for (g, cell) in self.ordered.iter().enumerate() {
            if let Some(v) = cell.get() {
                let _ = out.ordered[g].set(v.iter().copied().filter(inside).collect());
            }
        }
        out
    }

    /// Best stump on `g` over the members whose rank on `f` lies in `(lo, hi]`.
    pub fn stump(&self, g: usize, f: usize, lo: usize, hi: usize) -> StumpResult {
        if lo >= hi || self.members.is_empty() {
            return StumpResult { loss: 0.0, t: 0 };
        }
        let key = (g, f, lo, hi);
        if let Some(r) = self.memo.borrow().get(&key) {
            return *r;
        }
        let order = self.problem.index().feature(f);
        let res = if lo == 0 && hi >= order.u() {
            stump_filtered(self.problem, self.ordered(g), g, |_| true)
        } else {
            stump_filtered(self.problem, self.ordered(g), g, |i| {
                let r = order.rank(i);
                lo < r && r <= hi
            })
        };
        self.memo.borrow_mut().insert(key, res);
        res
    }

    /// Split indices of `f` in `[lo, hi]` that give distinct partitions of the
    /// set: `lo` itself and every occupied rank above it.
    pub fn occupied(&self, f: usize, lo: usize, hi: usize) -> Vec<usize> {
        let order = self.problem.index().feature(f);
        let mut out = vec![lo];
        for &i in self.ordered(f) {
            let r = order.rank(i);
            if r > hi {
                break;
            }
            if r > lo && out.last() != Some(&r) {
                out.push(r);
            }
        }
        out
    }

    /// Root split `(f, t)` with the best stumps on `g1` and `g2` below it.
    pub fn depth2_sketch(&self, f: usize, t: usize, g1: usize, g2: usize) -> Sketch {
        let u = self.problem.u(f);
        let l = self.stump(g1, f, 0, t);
        let r = self.stump(g2, f, t, u);
        Sketch::split(f, t, Sketch::stump(g1, l.t), Sketch::stump(g2, r.t))
    }
}

/// One `min_k` term of a separable bound; `t` is the root split it stands for.
#[derive(Debug, Clone)]
pub(crate) struct Term {
    pub t: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// `A(g1) + B(g2) + min_k [X_k(g1) + Y_k(g2)]` over lists of left features
/// `g1s` and right features `g2s`; vectors are indexed by list position.
#[derive(Debug, Clone)]
pub(crate) struct Separable {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub terms: Vec<Term>,
}

impl Separable {
    pub fn pair(&self, i1: usize, i2: usize) -> f64 {
        self.pair_argmin(i1, i2).0
    }

    /// Value for one feature pair and the first term attaining it.
    pub fn pair_argmin(&self, i1: usize, i2: usize) -> (f64, usize) {
        let base = self.a[i1] + self.b[i2];
        let mut best = (f64::INFINITY, 0);
        for term in &self.terms {
            let v = term.x[i1] + term.y[i2];
            if v < best.0 {
                best = (v, term.t);
            }
        }
        if self.terms.is_empty() {
            (base, 0)
        } else {
            (base + best.0, best.1)
        }
    }

    /// For each left feature, the minimum over all right features.
    pub fn row_mins(&self) -> Vec<f64> {
        let mb = min_of(&self.b);
        if self.terms.is_empty() {
            return self.a.iter().map(|a| a + mb).collect();
        }
        let best_y: Vec<f64> = self
            .terms
            .iter()
            .map(|term| {
                self.b
                    .iter()
                    .zip(&term.y)
                    .map(|(b, y)| b + y)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        self.a
            .iter()
            .enumerate()
            .map(|(i1, a)| {
                a + self
                    .terms
                    .iter()
                    .zip(&best_y)
                    .map(|(term, by)| term.x[i1] + by)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    /// For each right feature, the minimum over all left features.
    pub fn col_mins(&self) -> Vec<f64> {
        self.transposed().row_mins()
    }

    fn transposed(&self) -> Separable {
        Separable {
            a: self.b.clone(),
            b: self.a.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    t: t.t,
                    x: t.y.clone(),
                    y: t.x.clone(),
                })
                .collect(),
        }
    }

    /// Minimum over all pairs with its `(i1, i2, t)`; ties keep the first in
    /// term order, then `i1`, then `i2`.
    pub fn argmin(&self) -> (f64, usize, usize, usize) {
        let mut best = (f64::INFINITY, 0, 0, 0);
        let mut consider = |v: f64, i1: usize, i2: usize, t: usize| {
            if v < best.0 {
                best = (v, i1, i2, t);
            }
        };
        if self.terms.is_empty() {
            for (i1, a) in self.a.iter().enumerate() {
                for (i2, b) in self.b.iter().enumerate() {
                    consider(a + b, i1, i2, 0);
                }
            }
        } else {
            let i1_best: Vec<usize> = self
                .terms
                .iter()
                .map(|t| argmin_sum(&self.a, &t.x))
                .collect();
            let i2_best: Vec<usize> = self
                .terms
                .iter()
                .map(|t| argmin_sum(&self.b, &t.y))
                .collect();
            for (k, term) in self.terms.iter().enumerate() {
                let (i1, i2) = (i1_best[k], i2_best[k]);
                consider(
                    self.a[i1] + self.b[i2] + (term.x[i1] + term.y[i2]),
                    i1,
                    i2,
                    term.t,
                );
            }
        }
        best
    }
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn argmin_sum(a: &[f64], x: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..a.len() {
        if a[i] + x[i] < a[best] + x[best] {
            best = i;
        }
    }
    best
}

/// Builds the separable form of `eval` for the family `(f, [c, d], g1, g2)`
/// with `g1` ranging over `g1s` and `g2` over `g2s`, on the samples of `set`.
pub(crate) fn separable(
    set: &Along,
    f: usize,
    c: usize,
    d: usize,
    eval: Eval,
    g1s: &[usize],
    g2s: &[usize],
) -> Separable {
    let u = set.problem.u(f);
    let outer = |set: &Along| Separable {
        a: g1s.iter().map(|&g| set.stump(g, f, 0, c).loss).collect(),
        b: g2s.iter().map(|&g| set.stump(g, f, d, u).loss).collect(),
        terms: Vec::new(),
    };
    // X_t, Y_t for root split t on `on`, with stumps taken inside (lo, hi].
    let split_terms = |on: &Along, ts: &[usize], lo: usize, hi: usize| -> Vec<Term> {
        ts.iter()
            .map(|&t| Term {
                t,
                x: g1s.iter().map(|&g| on.stump(g, f, lo, t).loss).collect(),
                y: g2s.iter().map(|&g| on.stump(g, f, t, hi).loss).collect(),
            })
            .collect()
    };
    let eval = match eval {
        Eval::W1 { .. } if d == c => Eval::W0,
        Eval::W1 { s_prime } => Eval::W1 {
            s_prime: s_prime.clamp(1, d - c),
        },
        Eval::Upper { s } if s > d - c => Eval::Exact,
        e => e,
    };
    match eval {
        Eval::W0 => outer(set),
        Eval::W1 { s_prime } => {
            let mut sep = outer(set);
            let mid = set.restrict(f, c, d);
            let r = equi_spaced(c, d, s_prime);
            sep.terms = r
                .windows(2)
                .map(|w| Term {
                    t: w[0],
                    x: g1s.iter().map(|&g| mid.stump(g, f, c, w[0]).loss).collect(),
                    y: g2s.iter().map(|&g| mid.stump(g, f, w[1], d).loss).collect(),
                })
                .collect();
            sep
        }
        Eval::W2 => {
            let mut sep = outer(set);
            let mid = set.restrict(f, c, d);
            sep.terms = split_terms(&mid, &mid.occupied(f, c, d), c, d);
            sep
        }
        Eval::Exact => Separable {
            a: vec![0.0; g1s.len()],
            b: vec![0.0; g2s.len()],
            terms: split_terms(set, &set.occupied(f, c, d), 0, u),
        },
        Eval::Upper { s } => Separable {
            a: vec![0.0; g1s.len()],
            b: vec![0.0; g2s.len()],
            terms: split_terms(set, &equi_spaced(c, d, s), 0, u),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixtures::{regression, toy6};
    use crate::loss::{leaf_loss, stump_loss};

    // 1-based feature numbers as they appear in the worked example
    fn phi(f0: usize, a: usize, b: usize, f1: usize, f2: usize) -> ParamBox {
        ParamBox {
            f0: f0 - 1,
            a,
            b,
            f1: f1 - 1,
            f2: f2 - 1,
        }
    }

    #[test]
    fn equi_spaced_examples() {
        assert_eq!(equi_spaced(1, 4, 2), vec![1, 2, 4]);
        assert_eq!(equi_spaced(0, 6, 3), vec![0, 2, 4, 6]);
        assert_eq!(equi_spaced(3, 10, 3), vec![3, 5, 7, 10]);
        for (a, b, s) in [(0, 17, 3), (5, 6, 1), (2, 100, 7), (0, 9, 9)] {
            let t = equi_spaced(a, b, s);
            let gap = (b - a).div_ceil(s);
            assert!(t.windows(2).all(|w| w[0] < w[1] && w[1] - w[0] <= gap));
        }
    }

    #[test]
    #[should_panic]
    fn equi_spaced_rejects_large_s() {
        equi_spaced(0, 2, 3);
    }

    #[test]
    fn worked_example_values() {
        let p = toy6();
        let all = IndexSet::full(6);
        assert_eq!(depth2_exact(&p, &all, phi(1, 1, 4, 2, 2)).value, 1.0);
        assert_eq!(upper_vs(&p, &all, phi(1, 1, 4, 2, 2), 2).value, 1.0);
        assert_eq!(lower_w0(&p, &all, phi(1, 2, 4, 2, 2)), 0.0);
        assert_eq!(lower_w0(&p, &all, phi(1, 1, 2, 2, 3)), 2.0);
        assert_eq!(lower_w2(&p, &all, phi(1, 1, 4, 2, 2)), 1.0);
        assert_eq!(lower_w1(&p, &all, phi(1, 1, 4, 2, 2), 1), 0.0);
        let middle = IndexSet::from_unsorted(vec![1, 2, 3, 4]);
        assert_eq!(hat_l2(&p, &middle, phi(1, 1, 4, 2, 2), 1), 0.0);
        let u_prime = [2, 3]
            .iter()
            .flat_map(|&f1| [2, 3].map(|f2| upper_vs(&p, &all, phi(1, 1, 4, f1, f2), 2).value))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(u_prime, 1.0);
    }

    #[test]
    fn degenerate_intervals() {
        let p = toy6();
        let all = IndexSet::full(6);
        for t in 0..=5 {
            let ph = phi(1, t, t, 2, 3);
            let left = p.index().subset_range(&all, 0, 0, t);
            let right = p.index().subset_range(&all, 0, t, 5);
            let direct = stump_loss(&p, &left, 1).loss + stump_loss(&p, &right, 2).loss;
            assert_eq!(depth2_exact(&p, &all, ph).value, direct);
            assert_eq!(lower_w0(&p, &all, ph), direct);
            assert_eq!(lower_w2(&p, &all, ph), direct);
        }
        let none = IndexSet::empty();
        assert_eq!(depth2_exact(&p, &none, phi(1, 0, 5, 1, 1)).value, 0.0);
        assert_eq!(hat_l2(&p, &none, phi(1, 0, 5, 1, 1), 3), 0.0);
        assert_eq!(lower_w1(&p, &none, phi(1, 0, 5, 1, 1), 3), 0.0);
    }

    #[test]
    fn full_coverage_upper_equals_exact() {
        let p = toy6();
        let all = IndexSet::full(6);
        for (a, b) in [(0, 2), (1, 4), (2, 5)] {
            let ph = phi(1, a, b, 2, 3);
            assert_eq!(
                upper_vs(&p, &all, ph, b - a).value,
                depth2_exact(&p, &all, ph).value
            );
        }
    }

    #[test]
    fn w2_on_whole_range_is_exact() {
        let p = toy6();
        let all = IndexSet::full(6);
        for (f1, f2) in [(1, 2), (2, 3), (3, 3)] {
            let ph = phi(2, 0, 6, f1, f2);
            assert_eq!(lower_w2(&p, &all, ph), depth2_exact(&p, &all, ph).value);
        }
    }

    #[test]
    fn witnesses_reproduce_values() {
        let p = regression(
            (0..12)
                .map(|i| vec![(i % 5) as f64, (i * 7 % 11) as f64])
                .collect(),
            (0..12).map(|i| vec![((i * 13) % 7) as f64 * 0.5]).collect(),
        );
        let all = IndexSet::full(12);
        for (f0, f1, f2) in [(0, 0, 1), (1, 0, 0), (1, 1, 0)] {
            let ph = ParamBox {
                f0,
                a: 0,
                b: p.u(f0),
                f1,
                f2,
            };
            for bv in [depth2_exact(&p, &all, ph), upper_vs(&p, &all, ph, 2)] {
                let got = bv.witness.unwrap().evaluate(p.data()).unwrap();
                assert!(
                    (got - bv.value).abs() <= 1e-9 * (1.0 + bv.value),
                    "{got} vs {}",
                    bv.value
                );
            }
        }
    }

    #[test]
    fn separable_minima_match_pairwise() {
        let p = toy6();
        let along = Along::new(&p, (0..6).collect());
        let feats = [0, 1, 2];
        for eval in [
            Eval::W0,
            Eval::W1 { s_prime: 2 },
            Eval::W2,
            Eval::Exact,
            Eval::Upper { s: 2 },
        ] {
            let sep = separable(&along, 0, 1, 4, eval, &feats, &feats);
            let rows = sep.row_mins();
            let cols = sep.col_mins();
            for i in 0..3 {
                let r = (0..3).map(|j| sep.pair(i, j)).fold(f64::INFINITY, f64::min);
                let c = (0..3).map(|j| sep.pair(j, i)).fold(f64::INFINITY, f64::min);
                assert_eq!(rows[i], r, "{eval:?}");
                assert_eq!(cols[i], c, "{eval:?}");
            }
            let all_min = rows.iter().copied().fold(f64::INFINITY, f64::min);
            let (v, i1, i2, _) = sep.argmin();
            assert_eq!(v, all_min);
            assert_eq!(sep.pair(i1, i2), v);
        }
        assert_eq!(leaf_loss(&p, &IndexSet::full(6)), 3.0);
    }

    #[test]
    fn occupied_skips_missing_ranks() {
        let p = toy6();
        // samples 1 and 5 (ranks 1 and 4 on x1)
        let along = Along::new(&p, vec![0, 4]);
        assert_eq!(along.occupied(0, 0, 5), vec![0, 1, 4]);
        assert_eq!(along.occupied(0, 1, 3), vec![1]);
    }
}
