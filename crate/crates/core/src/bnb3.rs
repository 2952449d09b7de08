//! Branch and bound over depth-3 trees.
//!
//! A depth-3 tree is a root split on `f0` with a depth-2 subtree on each
//! side. Alive tuples `(f0, [a0, b0], Φ1, Φ2)` hold the root interval and, per
//! side, the depth-2 subspaces the subtree may still come from. Subspaces are
//! grouped by their own root feature and interval; each group stores the
//! surviving `(f1, f2)` child-feature pairs.
//!
//! Each round a tuple's root interval is cut into `s` pieces and every
//! subspace interval into `s` pieces as well. A refined subspace survives on
//! piece `j` when its lower bound on the near side both stays below the best
//! upper bound for that side at `t_j`, and, added to the best lower bound of
//! the other side, does not exceed the incumbent.

use crate::bounds::{equi_spaced, separable, Along, Eval, Separable};
use crate::dataset::Problem;
use crate::error::Result;
use crate::heuristics::greedy_tree;
use crate::model::{Sketch, Tree};
use crate::solve::{
    finish, run_level, Deadline, Incumbent, Keep, SolveOptions, SolveResult, Status,
};

/// Child-feature pairs of a group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PairSet {
    /// Every `(f1, f2)` in `[p] x [p]`.
    Full,
    /// Sorted, distinct pairs.
    Listed(Vec<(usize, usize)>),
}

impl PairSet {
    pub fn len(&self, p: usize) -> usize {
        match self {
            PairSet::Full => p * p,
            PairSet::Listed(v) => v.len(),
        }
    }

    pub fn contains(&self, f1: usize, f2: usize) -> bool {
        match self {
            PairSet::Full => true,
            PairSet::Listed(v) => v.binary_search(&(f1, f2)).is_ok(),
        }
    }

    pub fn to_vec(&self, p: usize) -> Vec<(usize, usize)> {
        match self {
            PairSet::Full => (0..p).flat_map(|a| (0..p).map(move |b| (a, b))).collect(),
            PairSet::Listed(v) => v.clone(),
        }
    }
}

/// Depth-2 subspaces `(feature, [c, d], f1, f2)` sharing feature and interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiGroup {
    pub feature: usize,
    pub c: usize,
    pub d: usize,
    pub pairs: PairSet,
}

impl PhiGroup {
    pub fn contains(&self, feature: usize, t: usize, f1: usize, f2: usize) -> bool {
        self.feature == feature && self.c <= t && t <= self.d && self.pairs.contains(f1, f2)
    }
}

/// A depth-3 subtree parameterization used to locate trees inside tuples:
/// root split `(feature, t)` and child features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubtreeParams {
    pub feature: usize,
    pub t: usize,
    pub f1: usize,
    pub f2: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct D3Tuple {
    pub f0: usize,
    pub a0: usize,
    pub b0: usize,
    pub phi1: Vec<PhiGroup>,
    pub phi2: Vec<PhiGroup>,
    /// Lower bound on the loss of every tree in the tuple.
    pub lower_bound: f64,
}

impl D3Tuple {
    pub fn contains(
        &self,
        f0: usize,
        t0: usize,
        left: SubtreeParams,
        right: SubtreeParams,
    ) -> bool {
        let has = |groups: &[PhiGroup], s: SubtreeParams| {
            groups
                .iter()
                .any(|g| g.contains(s.feature, s.t, s.f1, s.f2))
        };
        self.f0 == f0
            && self.a0 <= t0
            && t0 <= self.b0
            && has(&self.phi1, left)
            && has(&self.phi2, right)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AliveSet3 {
    pub tuples: Vec<D3Tuple>,
    pub iteration: usize,
}

fn full_groups(problem: &Problem) -> Vec<PhiGroup> {
    (0..problem.p())
        .map(|f| PhiGroup {
            feature: f,
            c: 0,
            d: problem.u(f),
            pairs: PairSet::Full,
        })
        .collect()
}

/// One tuple per root feature with every subspace on both sides.
pub fn init_alive3(problem: &Problem) -> AliveSet3 {
    let groups = full_groups(problem);
    AliveSet3 {
        tuples: (0..problem.p())
            .map(|f0| D3Tuple {
                f0,
                a0: 0,
                b0: problem.u(f0),
                phi1: groups.clone(),
                phi2: groups.clone(),
                lower_bound: 0.0,
            })
            .collect(),
        iteration: 0,
    }
}

/// A group's bound values on one sample set, with pair lookup.
struct GroupBound {
    sep: Separable,
    pos1: Vec<usize>,
    pos2: Vec<usize>,
    pairs: Vec<(usize, usize)>,
}

impl GroupBound {
    fn new(set: &Along, g: &PhiGroup, c: usize, d: usize, eval: Eval) -> GroupBound {
        let p = set.problem().p();
        let pairs = g.pairs.to_vec(p);
        let mut used1 = vec![false; p];
        let mut used2 = vec![false; p];
        for &(a, b) in &pairs {
            used1[a] = true;
            used2[b] = true;
        }
        let g1s: Vec<usize> = (0..p).filter(|&f| used1[f]).collect();
        let g2s: Vec<usize> = (0..p).filter(|&f| used2[f]).collect();
        let mut pos1 = vec![usize::MAX; p];
        let mut pos2 = vec![usize::MAX; p];
        for (i, &f) in g1s.iter().enumerate() {
            pos1[f] = i;
        }
        for (i, &f) in g2s.iter().enumerate() {
            pos2[f] = i;
        }
        GroupBound {
            sep: separable(set, g.feature, c, d, eval, &g1s, &g2s),
            pos1,
            pos2,
            pairs,
        }
    }

    fn value(&self, pair: (usize, usize)) -> (f64, usize) {
        self.sep.pair_argmin(self.pos1[pair.0], self.pos2[pair.1])
    }

    /// Best pair: `(value, pair, root split)`.
    fn best(&self) -> (f64, (usize, usize), usize) {
        let mut best = (f64::INFINITY, (0, 0), 0);
        for &pair in &self.pairs {
            let (v, t) = self.value(pair);
            if v < best.0 {
                best = (v, pair, t);
            }
        }
        best
    }
}

/// Best over all groups: `(value, group index, pair, root split)`.
fn best_over(
    set: &Along,
    groups: &[PhiGroup],
    eval_for: impl Fn(&PhiGroup) -> Eval,
) -> (f64, usize, (usize, usize), usize) {
    let mut best = (f64::INFINITY, 0, (0, 0), 0);
    for (k, g) in groups.iter().enumerate() {
        let (v, pair, t) = GroupBound::new(set, g, g.c, g.d, eval_for(g)).best();
        if v < best.0 {
            best = (v, k, pair, t);
        }
    }
    best
}

fn side_sketch(set: &Along, g: &PhiGroup, pair: (usize, usize), t: usize) -> Sketch {
    set.depth2_sketch(g.feature, t, pair.0, pair.1)
}

/// Quantile root positions with the sample sets on either side of each.
struct Sides<'a> {
    ts: Vec<usize>,
    left: Vec<Along<'a>>,
    right: Vec<Along<'a>>,
}

impl<'a> Sides<'a> {
    fn new(problem: &'a Problem, f0: usize, ts: Vec<usize>) -> Sides<'a> {
        Sides {
            left: ts
                .iter()
                .map(|&t| Along::side(problem, f0, t, true))
                .collect(),
            right: ts
                .iter()
                .map(|&t| Along::side(problem, f0, t, false))
                .collect(),
            ts,
        }
    }
}

/// Step 1 values: best upper bound per side at every quantile root position.
struct Uppers {
    left: Vec<(f64, usize, (usize, usize), usize)>,
    right: Vec<(f64, usize, (usize, usize), usize)>,
}

fn uppers(tuple: &D3Tuple, sides: &Sides, s: usize) -> Uppers {
    let v = |_: &PhiGroup| Eval::Upper { s };
    Uppers {
        left: sides
            .left
            .iter()
            .map(|set| best_over(set, &tuple.phi1, v))
            .collect(),
        right: sides
            .right
            .iter()
            .map(|set| best_over(set, &tuple.phi2, v))
            .collect(),
    }
}

fn best_upper(problem: &Problem, tuple: &D3Tuple, sides: &Sides, up: &Uppers) -> (f64, Tree) {
    let mut best = (f64::INFINITY, 0);
    for j in 0..sides.ts.len() {
        let v = up.left[j].0 + up.right[j].0;
        if v < best.0 {
            best = (v, j);
        }
    }
    let j = best.1;
    let (_, gl, pl, tl) = up.left[j];
    let (_, gr, pr, tr) = up.right[j];
    let sketch = Sketch::split(
        tuple.f0,
        sides.ts[j],
        side_sketch(&sides.left[j], &tuple.phi1[gl], pl, tl),
        side_sketch(&sides.right[j], &tuple.phi2[gr], pr, tr),
    );
    (best.0, Tree::from_sketch(problem, &sketch))
}

/// Upper bound from the `s + 1` quantile root positions, with a tree attaining it.
///
/// Panics unless `b0 - a0 > s`.
pub fn step1_upper_d3(problem: &Problem, tuple: &D3Tuple, s: usize) -> (f64, Tree) {
    assert!(
        tuple.b0 - tuple.a0 > s,
        "short root intervals are solved exhaustively"
    );
    let sides = Sides::new(problem, tuple.f0, equi_spaced(tuple.a0, tuple.b0, s));
    let up = uppers(tuple, &sides, s);
    best_upper(problem, tuple, &sides, &up)
}

/// Splits `tuple` into at most `s` tuples, dropping every refined subspace
/// that cannot hold an optimal tree given incumbent `u`.
///
/// Panics unless `b0 - a0 > s`.
pub fn step2_prune_d3(
    problem: &Problem,
    tuple: &D3Tuple,
    u: f64,
    opts: &SolveOptions,
) -> Vec<D3Tuple> {
    assert!(
        tuple.b0 - tuple.a0 > opts.s,
        "short root intervals are solved exhaustively"
    );
    let sides = Sides::new(problem, tuple.f0, equi_spaced(tuple.a0, tuple.b0, opts.s));
    let up = uppers(tuple, &sides, opts.s);
    prune(problem, tuple, &sides, &up, u, opts).0
}

fn prune(
    problem: &Problem,
    tuple: &D3Tuple,
    sides: &Sides,
    up: &Uppers,
    u: f64,
    opts: &SolveOptions,
) -> (Vec<D3Tuple>, usize) {
    let keep = Keep::new(problem.data().task(), opts);
    let mut children = Vec::new();
    let mut pruned = 0;
    for j in 1..sides.ts.len() {
        let (sl, sr) = (&sides.left[j - 1], &sides.right[j]);
        let w_of = |set: &Along, g: &PhiGroup, c: usize, d: usize| {
            GroupBound::new(set, g, c, d, opts.eval(set.len(), d - c))
        };
        let min_w = |set: &Along, groups: &[PhiGroup]| {
            groups
                .iter()
                .map(|g| w_of(set, g, g.c, g.d).best().0)
                .fold(f64::INFINITY, f64::min)
        };
        let w1 = min_w(sl, &tuple.phi1);
        let w2 = min_w(sr, &tuple.phi2);
        let (v1, v2) = (up.left[j].0, up.right[j - 1].0);

        let refine = |set: &Along, groups: &[PhiGroup], cap: f64, other: f64| {
            let mut out = Vec::new();
            let mut lowest = f64::INFINITY;
            for g in groups {
                let cuts = if g.d - g.c > opts.s {
                    equi_spaced(g.c, g.d, opts.s)
                } else {
                    vec![g.c, g.d]
                };
                for w in cuts.windows(2) {
                    let gb = w_of(set, g, w[0], w[1]);
                    let mut pairs = Vec::new();
                    for &pair in &gb.pairs {
                        let v = gb.value(pair).0;
                        if keep.keep(v, cap) && keep.keep(v + other, u) {
                            pairs.push(pair);
                            lowest = lowest.min(v);
                        }
                    }
                    if pairs.is_empty() {
                        continue;
                    }
                    let pairs = if g.pairs == PairSet::Full && pairs.len() == gb.pairs.len() {
                        PairSet::Full
                    } else {
                        PairSet::Listed(pairs)
                    };
                    out.push(PhiGroup {
                        feature: g.feature,
                        c: w[0],
                        d: w[1],
                        pairs,
                    });
                }
            }
            (out, lowest)
        };
        let (phi1, lb1) = refine(sl, &tuple.phi1, v1, w2);
        if phi1.is_empty() {
            pruned += 1;
            continue;
        }
        let (phi2, lb2) = refine(sr, &tuple.phi2, v2, w1);
        if phi2.is_empty() {
            pruned += 1;
            continue;
        }
        children.push(D3Tuple {
            f0: tuple.f0,
            a0: sides.ts[j - 1],
            b0: sides.ts[j],
            phi1,
            phi2,
            lower_bound: (lb1 + lb2).max(tuple.lower_bound),
        });
    }
    (children, pruned)
}

/// Best tree in the tuple: every root split index, and on each side the
/// exact depth-2 optimum over the tuple's subspaces.
pub fn solve_tuple_exactly(problem: &Problem, tuple: &D3Tuple) -> (f64, Tree) {
    let mut best: Option<(f64, Sketch)> = None;
    let exact = |_: &PhiGroup| Eval::Exact;
    for t in tuple.a0..=tuple.b0 {
        let left = Along::side(problem, tuple.f0, t, true);
        let (lv, gl, pl, tl) = best_over(&left, &tuple.phi1, exact);
        if best.as_ref().is_some_and(|b| lv >= b.0) {
            continue;
        }
        let right = Along::side(problem, tuple.f0, t, false);
        let (rv, gr, pr, tr) = best_over(&right, &tuple.phi2, exact);
        if best.as_ref().is_none_or(|b| lv + rv < b.0) {
            let sketch = Sketch::split(
                tuple.f0,
                t,
                side_sketch(&left, &tuple.phi1[gl], pl, tl),
                side_sketch(&right, &tuple.phi2[gr], pr, tr),
            );
            best = Some((lv + rv, sketch));
        }
    }
    let (v, sketch) = best.expect("root interval is never empty");
    (v, Tree::from_sketch(problem, &sketch))
}

/// Optimal depth-3 tree.
pub fn solve_depth3(problem: &Problem, opts: &SolveOptions) -> Result<SolveResult> {
    solve_depth3_observed(problem, opts, |_, _| {})
}

/// [`solve_depth3`], calling `observer` with the alive set and incumbent
/// after each round.
pub fn solve_depth3_observed(
    problem: &Problem,
    opts: &SolveOptions,
    mut observer: impl FnMut(&AliveSet3, f64),
) -> Result<SolveResult> {
    opts.validate()?;
    let deadline = Deadline::new(opts.time_limit);
    let greedy = greedy_tree(problem, 3);
    let start = greedy.evaluate(problem.data())?;
    let incumbent = Incumbent::new(start, greedy);

    let mut alive = init_alive3(problem);
    let (mut explored, mut pruned) = (0, 0);
    let mut timed_out = false;
    while !alive.tuples.is_empty() {
        alive.iteration += 1;
        let level = std::mem::take(&mut alive.tuples);
        let out = run_level(level, opts.workers, |tuple: &D3Tuple| {
            if deadline.expired() {
                return None;
            }
            if tuple.b0 - tuple.a0 <= opts.s {
                let (v, tree) = solve_tuple_exactly(problem, tuple);
                incumbent.offer(v, || tree);
                return Some((Vec::new(), 0));
            }
            let sides = Sides::new(problem, tuple.f0, equi_spaced(tuple.a0, tuple.b0, opts.s));
            let up = uppers(tuple, &sides, opts.s);
            let (v, tree) = best_upper(problem, tuple, &sides, &up);
            incumbent.offer(v, || tree);
            Some(prune(problem, tuple, &sides, &up, incumbent.value(), opts))
        });
        explored += out.explored;
        pruned += out.pruned;
        alive.tuples = out.next;
        timed_out = !out.unprocessed.is_empty();
        alive.tuples.extend(out.unprocessed);
        if !timed_out {
            if let Some(cap) = opts.max_alive {
                shed(problem, &mut alive.tuples, cap, &incumbent);
            }
        }
        observer(&alive, incumbent.value());
        if timed_out {
            break;
        }
    }

    let bound = alive
        .tuples
        .iter()
        .map(|t| t.lower_bound)
        .fold(f64::INFINITY, f64::min);
    let status = if timed_out {
        Status::TimeLimit
    } else {
        Status::Optimal
    };
    Ok(finish(
        problem,
        incumbent.into_tree(),
        bound,
        status,
        (alive.iteration, explored, pruned),
    ))
}

/// Keeps at most `cap` alive tuples by solving the ones with the highest
/// lower bounds right away.
fn shed(problem: &Problem, tuples: &mut Vec<D3Tuple>, cap: usize, incumbent: &Incumbent) {
    if tuples.len() <= cap {
        return;
    }
    tuples.sort_by(|x, y| x.lower_bound.total_cmp(&y.lower_bound));
    for tuple in tuples.drain(cap..) {
        if tuple.lower_bound <= incumbent.value() {
            let (v, tree) = solve_tuple_exactly(problem, &tuple);
            incumbent.offer(v, || tree);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixtures::{regression, toy6};
    use crate::dataset::{Dataset, Targets};
    use crate::heuristics::{brute_force, DEFAULT_BUDGET};
    use crate::solve::BoundKind;

    #[test]
    fn init_shapes() {
        let p = toy6();
        let al = init_alive3(&p);
        assert_eq!(al.tuples.len(), 3);
        for t in &al.tuples {
            assert_eq!(t.phi1.len(), 3);
            assert!(t
                .phi1
                .iter()
                .all(|g| g.pairs.len(3) == 9 && g.c == 0 && g.d == p.u(g.feature)));
            assert_eq!(t.phi1, t.phi2);
        }
        let one = regression(vec![vec![1.0], vec![2.0]], vec![vec![0.0], vec![1.0]]);
        let al1 = init_alive3(&one);
        assert_eq!(al1.tuples.len(), 1);
        assert_eq!(al1.tuples[0].phi1[0].pairs.len(1), 1);
    }

    #[test]
    fn step1_bounds_depth2_optimum() {
        let p = toy6();
        let tuple = init_alive3(&p).tuples.remove(0);
        let (u, tree) = step1_upper_d3(&p, &tuple, 2);
        assert!(u <= 1.0);
        assert_eq!(tree.evaluate(p.data()).unwrap(), u);
    }

    #[test]
    fn step2_refines_without_inventing_members() {
        let p = toy6();
        let tuple = init_alive3(&p).tuples.remove(1);
        let opts = SolveOptions {
            s: 2,
            ..Default::default()
        };
        let children = step2_prune_d3(&p, &tuple, 3.0, &opts);
        assert!(!children.is_empty());
        for c in &children {
            assert!(tuple.a0 <= c.a0 && c.b0 <= tuple.b0);
            for g in c.phi1.iter().chain(&c.phi2) {
                let parent = tuple.phi1.iter().find(|h| h.feature == g.feature).unwrap();
                assert!(parent.c <= g.c && g.d <= parent.d);
                for (a, b) in g.pairs.to_vec(3) {
                    assert!(parent.pairs.contains(a, b));
                }
            }
        }
        assert!(step2_prune_d3(&p, &tuple, -1.0, &opts).is_empty());
    }

    #[test]
    fn toy6_depth3_is_separable() {
        let p = toy6();
        for bound in BoundKind::ALL {
            let r = solve_depth3(&p, &SolveOptions::default().with_bound(bound)).unwrap();
            assert_eq!(r.objective, 0.0, "{bound}");
            assert_eq!(r.status, Status::Optimal);
        }
    }

    #[test]
    fn binary_feature_gains_nothing_from_depth3() {
        let rows = vec![vec![0.0], vec![1.0], vec![0.0], vec![1.0]];
        let ds =
            Dataset::from_rows(&rows, Targets::from_raw_labels(&["a", "b", "b", "b"])).unwrap();
        let p = Problem::new(ds);
        let d2 = brute_force(&p, 2, DEFAULT_BUDGET).unwrap().0;
        let r = solve_depth3(&p, &SolveOptions::default()).unwrap();
        assert_eq!(r.objective, d2);
        assert_eq!(r.objective, 1.0);
    }

    #[test]
    fn memory_cap_keeps_exactness() {
        let p = toy6();
        let opts = SolveOptions {
            s: 2,
            max_alive: Some(1),
            ..Default::default()
        };
        assert_eq!(solve_depth3(&p, &opts).unwrap().objective, 0.0);
    }
}
