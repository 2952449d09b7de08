//! Branch and bound over depth-2 trees.
//!
//! The search space is covered by boxes `(f0, [a, b], F1, F2)`. Each round
//! every alive box is either solved outright (short interval) or cut into `s`
//! quantile pieces; a piece keeps only the child features whose lower bound
//! can still reach the incumbent.

use crate::bounds::{equi_spaced, separable, Along, Eval};
use crate::dataset::Problem;
use crate::error::Result;
use crate::heuristics::greedy_tree;
use crate::model::Tree;
use crate::solve::{
    finish, run_level, Deadline, Incumbent, Keep, SolveOptions, SolveResult, Status,
};

/// All depth-2 trees with root feature `f0`, root split index in `[a, b]`,
/// left child feature in `f1s` and right child feature in `f2s`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    pub f0: usize,
    pub a: usize,
    pub b: usize,
    pub f1s: Vec<usize>,
    pub f2s: Vec<usize>,
    /// Lower bound on the loss of every tree in the box.
    pub lower_bound: f64,
}

impl SearchBox {
    pub fn contains(&self, f0: usize, t: usize, f1: usize, f2: usize) -> bool {
        self.f0 == f0
            && self.a <= t
            && t <= self.b
            && self.f1s.contains(&f1)
            && self.f2s.contains(&f2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AliveSet {
    pub boxes: Vec<SearchBox>,
    pub iteration: usize,
}

/// One box per root feature, covering every depth-2 tree.
pub fn init_alive(problem: &Problem) -> AliveSet {
    let all: Vec<usize> = (0..problem.p()).collect();
    AliveSet {
        boxes: (0..problem.p())
            .map(|f0| SearchBox {
                f0,
                a: 0,
                b: problem.u(f0),
                f1s: all.clone(),
                f2s: all.clone(),
                lower_bound: 0.0,
            })
            .collect(),
        iteration: 0,
    }
}

#[derive(Debug, Clone)]
pub struct BoxOutcome {
    pub children: Vec<SearchBox>,
    /// Better tree found while bounding from above, with its loss.
    pub improved: Option<(f64, Tree)>,
    /// Quantile pieces discarded entirely.
    pub pruned: usize,
}

/// Upper-bound update and quantile pruning of one box against incumbent `u`.
///
/// Panics when `b - a <= s`; such boxes are solved with [`solve_box_exactly`].
pub fn process_box(problem: &Problem, bx: &SearchBox, u: f64, opts: &SolveOptions) -> BoxOutcome {
    assert!(bx.b - bx.a > opts.s, "short boxes are solved exhaustively");
    let keep = Keep::new(problem.data().task(), opts);
    let full = Along::new(problem, (0..problem.n() as u32).collect());
    let ts = equi_spaced(bx.a, bx.b, opts.s);

    let upper = separable(
        &full,
        bx.f0,
        bx.a,
        bx.b,
        Eval::Upper { s: opts.s },
        &bx.f1s,
        &bx.f2s,
    );
    let (u_prime, i1, i2, t) = upper.argmin();
    let improved = (u_prime < u).then(|| {
        let sketch = full.depth2_sketch(bx.f0, t, bx.f1s[i1], bx.f2s[i2]);
        (u_prime, Tree::from_sketch(problem, &sketch))
    });
    let u_star = u.min(u_prime);

    let mut children = Vec::with_capacity(opts.s);
    let mut pruned = 0;
    for w in ts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let eval = opts.eval(problem.n(), hi - lo);
        let sep = separable(&full, bx.f0, lo, hi, eval, &bx.f1s, &bx.f2s);
        let rows = sep.row_mins();
        let cols = sep.col_mins();
        let f1s: Vec<usize> = kept(&bx.f1s, &rows, |v| keep.keep(v, u_star));
        let f2s: Vec<usize> = kept(&bx.f2s, &cols, |v| keep.keep(v, u_star));
        if f1s.is_empty() || f2s.is_empty() {
            pruned += 1;
            continue;
        }
        let lower_bound = bx
            .f1s
            .iter()
            .zip(&rows)
            .filter(|(f, _)| f1s.contains(f))
            .map(|(_, &v)| v)
            .fold(f64::INFINITY, f64::min)
            .max(bx.lower_bound);
        children.push(SearchBox {
            f0: bx.f0,
            a: lo,
            b: hi,
            f1s,
            f2s,
            lower_bound,
        });
    }
    BoxOutcome {
        children,
        improved,
        pruned,
    }
}

fn kept(features: &[usize], values: &[f64], keep: impl Fn(f64) -> bool) -> Vec<usize> {
    features
        .iter()
        .zip(values)
        .filter(|(_, &v)| keep(v))
        .map(|(&f, _)| f)
        .collect()
}

/// Best tree in the box by enumerating every root split index.
pub fn solve_box_exactly(problem: &Problem, bx: &SearchBox) -> (f64, Tree) {
    let full = Along::new(problem, (0..problem.n() as u32).collect());
    let sep = separable(&full, bx.f0, bx.a, bx.b, Eval::Exact, &bx.f1s, &bx.f2s);
    let (v, i1, i2, t) = sep.argmin();
    let sketch = full.depth2_sketch(bx.f0, t, bx.f1s[i1], bx.f2s[i2]);
    (v, Tree::from_sketch(problem, &sketch))
}

/// Optimal depth-2 tree.
pub fn solve_depth2(problem: &Problem, opts: &SolveOptions) -> Result<SolveResult> {
    solve_depth2_observed(problem, opts, |_, _| {})
}

/// [`solve_depth2`], calling `observer` with the alive set and incumbent
/// after each round.
pub fn solve_depth2_observed(
    problem: &Problem,
    opts: &SolveOptions,
    mut observer: impl FnMut(&AliveSet, f64),
) -> Result<SolveResult> {
    opts.validate()?;
    let deadline = Deadline::new(opts.time_limit);
    let greedy = greedy_tree(problem, 2);
    let start = greedy.evaluate(problem.data())?;
    let incumbent = Incumbent::new(start, greedy);

    let mut alive = init_alive(problem);
    let (mut explored, mut pruned) = (0, 0);
    let mut timed_out = false;
    while !alive.boxes.is_empty() {
        alive.iteration += 1;
        let level = std::mem::take(&mut alive.boxes);
        let out = run_level(level, opts.workers, |bx: &SearchBox| {
            if deadline.expired() {
                return None;
            }
            if bx.b - bx.a <= opts.s {
                let (v, tree) = solve_box_exactly(problem, bx);
                incumbent.offer(v, || tree);
                return Some((Vec::new(), 0));
            }
            let out = process_box(problem, bx, incumbent.value(), opts);
            if let Some((v, tree)) = out.improved {
                incumbent.offer(v, || tree);
            }
            Some((out.children, out.pruned))
        });
        explored += out.explored;
        pruned += out.pruned;
        alive.boxes = out.next;
        timed_out = !out.unprocessed.is_empty();
        alive.boxes.extend(out.unprocessed);
        observer(&alive, incumbent.value());
        if timed_out {
            break;
        }
    }

    let bound = alive
        .boxes
        .iter()
        .map(|b| b.lower_bound)
        .fold(f64::INFINITY, f64::min);
    let status = if timed_out {
        Status::TimeLimit
    } else {
        Status::Optimal
    };
    let iterations = alive.iteration;
    Ok(finish(
        problem,
        incumbent.into_tree(),
        bound,
        status,
        (iterations, explored, pruned),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixtures::toy6;
    use crate::solve::BoundKind;

    fn worked_box() -> SearchBox {
        SearchBox {
            f0: 0,
            a: 1,
            b: 4,
            f1s: vec![1, 2],
            f2s: vec![1, 2],
            lower_bound: 0.0,
        }
    }

    fn opts(bound: BoundKind, s: usize) -> SolveOptions {
        SolveOptions {
            s,
            bound,
            ..Default::default()
        }
    }

    #[test]
    fn init_covers_each_root_feature() {
        let p = toy6();
        let al = init_alive(&p);
        let spans: Vec<(usize, usize, usize)> = al.boxes.iter().map(|b| (b.f0, b.a, b.b)).collect();
        assert_eq!(spans, vec![(0, 0, 5), (1, 0, 6), (2, 0, 3)]);
        assert!(al
            .boxes
            .iter()
            .all(|b| b.f1s == vec![0, 1, 2] && b.f2s == vec![0, 1, 2]));
    }

    #[test]
    fn worked_iteration() {
        let p = toy6();
        let out = process_box(&p, &worked_box(), 2.0, &opts(BoundKind::W0, 2));
        let (u, tree) = out.improved.expect("incumbent improves");
        assert_eq!(u, 1.0);
        assert_eq!(tree.evaluate(p.data()).unwrap(), 1.0);
        let got: Vec<_> = out
            .children
            .iter()
            .map(|b| (b.a, b.b, b.f1s.clone(), b.f2s.clone()))
            .collect();
        assert_eq!(
            got,
            vec![(1, 2, vec![1, 2], vec![1]), (2, 4, vec![1, 2], vec![1, 2])]
        );
    }

    #[test]
    fn full_prune_when_incumbent_is_tiny() {
        let p = toy6();
        let out = process_box(&p, &worked_box(), -1.0, &opts(BoundKind::W0, 2));
        assert!(out.children.is_empty());
        assert_eq!(out.pruned, 2);
    }

    #[test]
    fn exact_bound_prunes_at_least_as_much() {
        let p = toy6();
        let bx = SearchBox {
            f0: 1,
            a: 0,
            b: 6,
            f1s: vec![0, 1, 2],
            f2s: vec![0, 1, 2],
            lower_bound: 0.0,
        };
        let weak = process_box(&p, &bx, 1.0, &opts(BoundKind::W0, 2));
        let strong = process_box(&p, &bx, 1.0, &opts(BoundKind::L2, 2));
        for c in &strong.children {
            let w = weak
                .children
                .iter()
                .find(|w| w.a == c.a)
                .expect("weak keeps the piece");
            assert!(c.f1s.iter().all(|f| w.f1s.contains(f)));
            assert!(c.f2s.iter().all(|f| w.f2s.contains(f)));
        }
    }

    #[test]
    fn toy6_optimum_for_every_bound() {
        let p = toy6();
        for bound in BoundKind::ALL {
            for s in [2, 3] {
                let r = solve_depth2(&p, &opts(bound, s)).unwrap();
                assert_eq!(r.objective, 1.0, "{bound} s={s}");
                assert_eq!(r.status, Status::Optimal);
                assert_eq!(r.lower_bound, 1.0);
            }
        }
    }

    #[test]
    fn zero_time_limit_reports_bound() {
        let p = toy6();
        let o = SolveOptions {
            time_limit: Some(std::time::Duration::ZERO),
            ..Default::default()
        };
        let r = solve_depth2(&p, &o).unwrap();
        assert_eq!(r.status, Status::TimeLimit);
        assert!(r.lower_bound <= r.objective);
        assert_eq!(r.objective, 2.0);
    }

    #[test]
    fn children_shrink_by_factor_s() {
        let p = toy6();
        let o = opts(BoundKind::W0, 2);
        let mut prev = init_alive(&p).boxes;
        solve_depth2_observed(&p, &o, |al, _| {
            for c in &al.boxes {
                let par = prev
                    .iter()
                    .find(|b| b.f0 == c.f0 && b.a <= c.a && c.b <= b.b)
                    .expect("every child has a parent");
                assert!(c.b - c.a <= (par.b - par.a).div_ceil(2));
            }
            prev = al.boxes.clone();
        })
        .unwrap();
    }

    #[test]
    fn parallel_workers_agree() {
        let p = toy6();
        let o = SolveOptions {
            workers: 3,
            ..Default::default()
        };
        assert_eq!(solve_depth2(&p, &o).unwrap().objective, 1.0);
    }
}
