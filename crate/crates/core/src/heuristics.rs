//! Greedy warm starts and the exhaustive reference solver.

use crate::dataset::Problem;
use crate::error::{Error, Result};
use crate::loss::{stump_members, LeafStats};
use crate::model::{Sketch, Tree};

/// Default cap on `(n p)^depth` for [`brute_force`].
pub const DEFAULT_BUDGET: f64 = 1e9;

/// Top-down tree of full depth: every node takes its best stump (ties go to
/// the smallest feature, then the smallest split index).
pub fn greedy_tree(problem: &Problem, depth: usize) -> Tree {
    let all: Vec<u32> = (0..problem.n() as u32).collect();
    Tree::from_sketch(problem, &greedy_sketch(problem, &all, depth))
}

fn greedy_sketch(problem: &Problem, members: &[u32], depth: usize) -> Sketch {
    if depth == 0 {
        return Sketch::Leaf;
    }
    let mut best = (f64::INFINITY, 0, 0);
    for f in 0..problem.p() {
        let s = stump_members(problem, members, f);
        if s.loss < best.0 {
            best = (s.loss, f, s.t);
        }
    }
    let (_, f, t) = best;
    let (l, r): (Vec<u32>, Vec<u32>) = members.iter().partition(|&&i| problem.rank(f, i) <= t);
    Sketch::split(
        f,
        t,
        greedy_sketch(problem, &l, depth - 1),
        greedy_sketch(problem, &r, depth - 1),
    )
}

/// Exact optimum over all trees of the given depth by full enumeration.
///
/// Refuses when `(n p)^depth` exceeds `budget`. Among optimal trees the one
/// first in lexicographic (feature, split index) order, root first, is returned.
pub fn brute_force(problem: &Problem, depth: usize, budget: f64) -> Result<(f64, Tree)> {
    let steps = ((problem.n() * problem.p()) as f64).powi(depth as i32);
    if steps > budget {
        return Err(Error::BudgetExceeded { steps, budget });
    }
    let all: Vec<u32> = (0..problem.n() as u32).collect();
    let (loss, sketch) = best_subtree(problem, &all, depth);
    Ok((loss, Tree::from_sketch(problem, &sketch)))
}

fn best_subtree(problem: &Problem, members: &[u32], depth: usize) -> (f64, Sketch) {
    let targets = problem.data().targets();
    if depth == 0 || members.len() <= 1 {
        let loss = if members.is_empty() {
            0.0
        } else {
            LeafStats::of(targets, members).loss()
        };
        return (loss, Sketch::Leaf);
    }
    if depth == 1 {
        let mut best = (f64::INFINITY, Sketch::Leaf);
        for f in 0..problem.p() {
            let s = stump_members(problem, members, f);
            if s.loss < best.0 {
                best = (s.loss, Sketch::stump(f, s.t));
            }
        }
        return best;
    }
    let mut best = (f64::INFINITY, Sketch::Leaf);
    for f in 0..problem.p() {
        let ordered = problem.order_along(f, members);
        // t = 0, then every occupied rank: each distinct partition once
        let mut cut = 0;
        let mut t = 0;
        loop {
            let (l, r) = ordered.split_at(cut);
            let (ll, ls) = best_subtree(problem, l, depth - 1);
            if ll < best.0 {
                let (rl, rs) = best_subtree(problem, r, depth - 1);
                if ll + rl < best.0 {
                    best = (ll + rl, Sketch::split(f, t, ls, rs));
                }
            }
            if cut == ordered.len() {
                break;
            }
            t = problem.rank(f, ordered[cut]);
            while cut < ordered.len() && problem.rank(f, ordered[cut]) == t {
                cut += 1;
            }
        }
    }
    best
}
