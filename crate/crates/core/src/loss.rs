//! Leaf and stump losses computed from mergeable sufficient statistics.

use crate::dataset::{IndexSet, Problem, Targets};

/// Sufficient statistics of the targets that reach one leaf.
#[derive(Debug, Clone, PartialEq)]
pub enum LeafStats {
    Regression {
        count: usize,
        sum: Vec<f64>,
        sum_sq: f64,
    },
    Classification {
        count: usize,
        counts: Vec<u32>,
    },
}

impl LeafStats {
    pub fn empty(targets: &Targets) -> LeafStats {
        match targets {
            Targets::Regression { m, .. } => LeafStats::Regression {
                count: 0,
                sum: vec![0.0; *m],
                sum_sq: 0.0,
            },
            Targets::Classification { classes, .. } => LeafStats::Classification {
                count: 0,
                counts: vec![0; classes.len()],
            },
        }
    }

    pub fn of(targets: &Targets, members: &[u32]) -> LeafStats {
        let mut s = LeafStats::empty(targets);
        for &i in members {
            s.push(targets, i);
        }
        s
    }

    #[inline]
    pub fn push(&mut self, targets: &Targets, i: u32) {
        match (self, targets) {
            (LeafStats::Regression { count, sum, sum_sq }, Targets::Regression { m, values }) => {
                let row = &values[i as usize * m..(i as usize + 1) * m];
                *count += 1;
                for (acc, &y) in sum.iter_mut().zip(row) {
                    *acc += y;
                    *sum_sq += y * y;
                }
            }
            (
                LeafStats::Classification { count, counts },
                Targets::Classification { labels, .. },
            ) => {
                *count += 1;
                counts[labels[i as usize] as usize] += 1;
            }
            _ => panic!("statistics and targets disagree on the task"),
        }
    }

    /// Componentwise addition; the statistics of a disjoint union.
    pub fn merge(&mut self, other: &LeafStats) {
        match (self, other) {
            (
                LeafStats::Regression { count, sum, sum_sq },
                LeafStats::Regression {
                    count: c2,
                    sum: s2,
                    sum_sq: q2,
                },
            ) => {
                *count += c2;
                *sum_sq += q2;
                for (a, b) in sum.iter_mut().zip(s2) {
                    *a += b;
                }
            }
            (
                LeafStats::Classification { count, counts },
                LeafStats::Classification {
                    count: c2,
                    counts: k2,
                },
            ) => {
                *count += c2;
                for (a, b) in counts.iter_mut().zip(k2) {
                    *a += b;
                }
            }
            _ => panic!("cannot merge statistics of different tasks"),
        }
    }

    pub fn count(&self) -> usize {
        match self {
            LeafStats::Regression { count, .. } | LeafStats::Classification { count, .. } => *count,
        }
    }

    /// Loss of the best constant prediction.
    pub fn loss(&self) -> f64 {
        match self {
            LeafStats::Regression { count, sum, sum_sq } => {
                let loss = regression_loss(*count, *sum_sq, sum.iter().copied());
                debug_assert!(
                    loss >= -1e-12 * sum_sq.abs().max(1.0),
                    "regression loss {loss} below rounding tolerance"
                );
                loss.max(0.0)
            }
            LeafStats::Classification { count, counts } => {
                (*count - counts.iter().copied().max().unwrap_or(0) as usize) as f64
            }
        }
    }

    /// Loss of the statistics `total - self`, without materializing them.
    #[inline]
    fn complement_loss(&self, total: &LeafStats) -> f64 {
        match (self, total) {
            (
                LeafStats::Regression { count, sum, sum_sq },
                LeafStats::Regression {
                    count: tc,
                    sum: ts,
                    sum_sq: tq,
                },
            ) => regression_loss(
                tc - count,
                tq - sum_sq,
                ts.iter().zip(sum).map(|(t, s)| t - s),
            )
            .max(0.0),
            (
                LeafStats::Classification { count, counts },
                LeafStats::Classification {
                    count: tc,
                    counts: tk,
                },
            ) => {
                let best = tk.iter().zip(counts).map(|(t, c)| t - c).max().unwrap_or(0);
                (tc - count - best as usize) as f64
            }
            _ => unreachable!(),
        }
    }

    /// Mean target (regression) or the most frequent class, smallest id on ties.
    pub fn prediction(&self) -> crate::model::Prediction {
        use crate::model::Prediction;
        match self {
            LeafStats::Regression { count, sum, .. } => {
                let c = (*count).max(1) as f64;
                Prediction::Value(sum.iter().map(|s| s / c).collect())
            }
            LeafStats::Classification { counts, .. } => {
                let mut best = 0;
                for (k, &c) in counts.iter().enumerate() {
                    if c > counts[best] {
                        best = k;
                    }
                }
                Prediction::Class(best as u32)
            }
        }
    }
}

// Unclamped; a difference of statistics can cancel below zero.
#[inline]
fn regression_loss(count: usize, sum_sq: f64, sum: impl Iterator<Item = f64>) -> f64 {
    if count == 0 {
        return 0.0;
    }
    let norm: f64 = sum.map(|s| s * s).sum();
    sum_sq - norm / count as f64
}

/// Best depth-1 split on one feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StumpResult {
    pub loss: f64,
    /// Smallest split index attaining `loss`.
    pub t: usize,
}

/// Leaf losses on both sides of one split index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitLosses {
    pub t: usize,
    pub left: f64,
    pub right: f64,
}

pub fn leaf_loss(problem: &Problem, set: &IndexSet) -> f64 {
    LeafStats::of(problem.data().targets(), set.as_slice()).loss()
}

/// Left and right leaf losses for every split index of `f` that changes the
/// partition of `set`: `t = 0` plus every rank that occurs in `set`.
pub fn prefix_leaf_losses(problem: &Problem, set: &IndexSet, f: usize) -> Vec<SplitLosses> {
    if set.is_empty() {
        return Vec::new();
    }
    let targets = problem.data().targets();
    let ordered = problem.order_along(f, set.as_slice());
    let order = problem.index().feature(f);
    let total = LeafStats::of(targets, &ordered);
    let mut left = LeafStats::empty(targets);
    let mut out = vec![SplitLosses {
        t: 0,
        left: 0.0,
        right: total.loss(),
    }];
    let mut k = 0;
    while k < ordered.len() {
        let r = order.rank(ordered[k]);
        while k < ordered.len() && order.rank(ordered[k]) == r {
            left.push(targets, ordered[k]);
            k += 1;
        }
        out.push(SplitLosses {
            t: r,
            left: left.loss(),
            right: left.complement_loss(&total),
        });
    }
    out
}

pub fn stump_loss(problem: &Problem, set: &IndexSet, f: usize) -> StumpResult {
    stump_loss_range(problem, set, f, 0, problem.u(f))
}

/// [`stump_loss`] with the split index restricted to `t_lo..=t_hi`.
pub fn stump_loss_range(
    problem: &Problem,
    set: &IndexSet,
    f: usize,
    t_lo: usize,
    t_hi: usize,
) -> StumpResult {
    assert!(
        t_lo <= t_hi && t_hi <= problem.u(f),
        "invalid split range [{t_lo}, {t_hi}]"
    );
    let ordered = problem.order_along(f, set.as_slice());
    best_split_ordered(problem, &ordered, f, t_lo, t_hi)
}

/// Stump loss of samples already sorted along `f`, over the full split range.
#[inline]
pub(crate) fn stump_ordered(problem: &Problem, ordered: &[u32], f: usize) -> StumpResult {
    best_split_ordered(problem, ordered, f, 0, problem.u(f))
}

/// Stump loss of an arbitrary member list on `f`.
pub(crate) fn stump_members(problem: &Problem, members: &[u32], f: usize) -> StumpResult {
    if members.len() <= 1 {
        return StumpResult { loss: 0.0, t: 0 };
    }
    let ordered = problem.order_along(f, members);
    stump_ordered(problem, &ordered, f)
}

/// Best stump on `g` over the members of `ordered` (sorted along `g`) accepted by `keep`.
pub(crate) fn stump_filtered(
    problem: &Problem,
    ordered: &[u32],
    g: usize,
    keep: impl Fn(u32) -> bool,
) -> StumpResult {
    let targets = problem.data().targets();
    let order = problem.index().feature(g);
    let mut total = LeafStats::empty(targets);
    for &i in ordered {
        if keep(i) {
            total.push(targets, i);
        }
    }
    if total.count() <= 1 {
        return StumpResult { loss: 0.0, t: 0 };
    }
    let mut left = LeafStats::empty(targets);
    let mut best = StumpResult {
        loss: total.loss(),
        t: 0,
    };
    // A split at rank r is scored when the first member of a larger rank shows
    // up; splitting after the last rank repeats t = 0 and is skipped.
    let mut prev: Option<usize> = None;
    for &i in ordered {
        if !keep(i) {
            continue;
        }
        let r = order.rank(i);
        if let Some(pr) = prev.filter(|&pr| pr != r) {
            let cand = left.loss() + left.complement_loss(&total);
            if cand < best.loss {
                best = StumpResult { loss: cand, t: pr };
            }
        }
        left.push(targets, i);
        prev = Some(r);
        if left.count() == total.count() {
            break;
        }
    }
    best
}

/// Single forward sweep; right-side statistics are `total - left`.
pub(crate) fn best_split_ordered(
    problem: &Problem,
    ordered: &[u32],
    f: usize,
    t_lo: usize,
    t_hi: usize,
) -> StumpResult {
    if ordered.is_empty() {
        return StumpResult { loss: 0.0, t: t_lo };
    }
    let targets = problem.data().targets();
    let order = problem.index().feature(f);
    let total = LeafStats::of(targets, ordered);
    let mut left = LeafStats::empty(targets);
    let mut k = 0;
    while k < ordered.len() && order.rank(ordered[k]) <= t_lo {
        left.push(targets, ordered[k]);
        k += 1;
    }
    let mut best = StumpResult {
        loss: left.loss() + left.complement_loss(&total),
        t: t_lo,
    };
    while k < ordered.len() {
        let r = order.rank(ordered[k]);
        if r > t_hi {
            break;
        }
        while k < ordered.len() && order.rank(ordered[k]) == r {
            left.push(targets, ordered[k]);
            k += 1;
        }
        let cand = left.loss() + left.complement_loss(&total);
        if cand < best.loss {
            best = StumpResult { loss: cand, t: r };
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixtures::{regression, toy6};
    use proptest::prelude::*;

    fn set(ix: &[u32]) -> IndexSet {
        IndexSet::from_unsorted(ix.to_vec())
    }

    #[test]
    fn leaf_loss_examples() {
        let p = toy6();
        assert_eq!(leaf_loss(&p, &IndexSet::full(6)), 3.0);
        assert_eq!(leaf_loss(&p, &IndexSet::empty()), 0.0);

        let r = regression(vec![vec![0.0], vec![1.0]], vec![vec![0.0], vec![2.0]]);
        assert_eq!(leaf_loss(&r, &IndexSet::full(2)), 2.0);

        let r2 = regression(
            vec![vec![0.0], vec![1.0]],
            vec![vec![1.0, 1.0], vec![3.0, 3.0]],
        );
        assert_eq!(leaf_loss(&r2, &IndexSet::full(2)), 4.0);
    }

    #[test]
    fn prefix_losses_toy6() {
        let p = toy6();
        let sweep = prefix_leaf_losses(&p, &IndexSet::full(6), 1);
        let at1 = sweep.iter().find(|s| s.t == 1).unwrap();
        assert_eq!((at1.left, at1.right), (0.0, 2.0));
        assert_eq!(sweep.len(), 7);

        let single = prefix_leaf_losses(&p, &set(&[3]), 0);
        assert_eq!(
            single,
            vec![
                SplitLosses {
                    t: 0,
                    left: 0.0,
                    right: 0.0
                },
                SplitLosses {
                    t: 3,
                    left: 0.0,
                    right: 0.0
                }
            ]
        );
        assert!(prefix_leaf_losses(&p, &IndexSet::empty(), 0).is_empty());
    }

    #[test]
    fn stump_examples() {
        let p = toy6();
        let all = IndexSet::full(6);
        assert_eq!(stump_loss(&p, &all, 1).loss, 2.0);
        assert_eq!(stump_loss(&p, &all, 0).loss, 2.0);
        assert_eq!(stump_loss(&p, &all, 0).t, 1);
        assert_eq!(stump_loss(&p, &set(&[0]), 2).loss, 0.0);
        assert_eq!(
            stump_loss_range(&p, &all, 0, 2, 2),
            StumpResult { loss: 3.0, t: 2 }
        );
        for f in 0..3 {
            assert_eq!(
                stump_loss(&p, &all, f),
                stump_loss_range(&p, &all, f, 0, p.u(f))
            );
        }
    }

    #[test]
    #[should_panic]
    fn stump_range_rejects_reversed_bounds() {
        let p = toy6();
        stump_loss_range(&p, &IndexSet::full(6), 0, 3, 1);
    }

    #[test]
    fn classification_losses_are_integers() {
        let p = toy6();
        for s in prefix_leaf_losses(&p, &IndexSet::full(6), 2) {
            assert_eq!(s.left.fract(), 0.0);
            assert_eq!(s.right.fract(), 0.0);
        }
    }

    fn random_regression(xs: &[(f64, f64)]) -> Problem {
        regression(
            xs.iter().map(|&(x, _)| vec![x]).collect(),
            xs.iter().map(|&(_, y)| vec![y]).collect(),
        )
    }

    fn two_pass_loss(ys: &[f64]) -> f64 {
        if ys.is_empty() {
            return 0.0;
        }
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        ys.iter().map(|y| (y - mean) * (y - mean)).sum()
    }

    proptest! {
        #[test]
        fn sweep_matches_per_subset_losses(
            xs in prop::collection::vec((0i32..6, -5.0f64..5.0), 1..25),
            pick in prop::collection::vec(any::<bool>(), 25),
        ) {
            let data: Vec<(f64, f64)> = xs.iter().map(|&(x, y)| (x as f64, y)).collect();
            let p = random_regression(&data);
            let members: Vec<u32> = (0..data.len() as u32).filter(|&i| pick[i as usize]).collect();
            let s = IndexSet::from_unsorted(members);
            for entry in prefix_leaf_losses(&p, &s, 0) {
                let u = p.u(0);
                let l = p.index().subset_range(&s, 0, 0, entry.t);
                let r = p.index().subset_range(&s, 0, entry.t, u);
                let ly: Vec<f64> = l.as_slice().iter().map(|&i| data[i as usize].1).collect();
                let ry: Vec<f64> = r.as_slice().iter().map(|&i| data[i as usize].1).collect();
                prop_assert!((entry.left - two_pass_loss(&ly)).abs() <= 1e-9 * (1.0 + entry.left));
                prop_assert!((entry.right - two_pass_loss(&ry)).abs() <= 1e-9 * (1.0 + entry.right));
                prop_assert!((entry.left - leaf_loss(&p, &l)).abs() <= 1e-9 * (1.0 + entry.left));
            }
        }

        #[test]
        fn leaf_stats_merge_is_union(
            ys in prop::collection::vec(-10.0f64..10.0, 2..20),
            cut in 0usize..20,
        ) {
            let rows: Vec<Vec<f64>> = ys.iter().map(|_| vec![0.0]).collect();
            let p = regression(rows, ys.iter().map(|&y| vec![y, 2.0 * y]).collect());
            let cut = cut.min(ys.len());
            let all: Vec<u32> = (0..ys.len() as u32).collect();
            let t = p.data().targets();
            let mut a = LeafStats::of(t, &all[..cut]);
            a.merge(&LeafStats::of(t, &all[cut..]));
            let whole = LeafStats::of(t, &all);
            prop_assert_eq!(a.count(), whole.count());
            prop_assert!((a.loss() - whole.loss()).abs() <= 1e-9 * (1.0 + whole.loss()));
        }
    }
}
