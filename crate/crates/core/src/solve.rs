//! Options, results and incumbent handling shared by the depth-2 and depth-3 solvers.

use std::str::FromStr;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::bounds::Eval;
use crate::dataset::{Problem, Task};
use crate::error::{Error, Result};
use crate::model::Tree;

/// Lower bound used to prune boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundKind {
    W0,
    W1,
    W2,
    /// The exact restricted loss.
    L2,
}

impl BoundKind {
    pub const ALL: [BoundKind; 4] = [BoundKind::W0, BoundKind::W1, BoundKind::W2, BoundKind::L2];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::W0 => "w0",
            BoundKind::W1 => "w1",
            BoundKind::W2 => "w2",
            BoundKind::L2 => "l2",
        }
    }
}

impl FromStr for BoundKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "w0" => Ok(BoundKind::W0),
            "w1" => Ok(BoundKind::W1),
            "w2" => Ok(BoundKind::W2),
            "l2" => Ok(BoundKind::L2),
            other => Err(format!(
                "unknown bound `{other}` (expected w0, w1, w2 or l2)"
            )),
        }
    }
}

impl std::fmt::Display for BoundKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How many quantile cells the `W1` bound uses on an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SPrime {
    /// `floor(factor * |I| * s / (b - a))`.
    Dynamic(f64),
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Branching factor: each interval is cut into `s` quantile pieces.
    pub s: usize,
    pub bound: BoundKind,
    pub s_prime: SPrime,
    /// Relative slack for regression pruning; classification compares exactly.
    pub prune_tolerance: f64,
    pub time_limit: Option<Duration>,
    pub workers: usize,
    /// Depth 3 only: cap on alive tuples before the excess is solved outright.
    pub max_alive: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            s: 3,
            bound: BoundKind::W1,
            s_prime: SPrime::Dynamic(0.6),
            prune_tolerance: 1e-10,
            time_limit: None,
            workers: 1,
            max_alive: None,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if self.s < 2 {
            return Err(Error::InvalidOptions(format!(
                "s must be at least 2, got {}",
                self.s
            )));
        }
        if self.workers == 0 {
            return Err(Error::InvalidOptions("workers must be at least 1".into()));
        }
        if !(self.prune_tolerance >= 0.0 && self.prune_tolerance.is_finite()) {
            return Err(Error::InvalidOptions(
                "prune tolerance must be finite and >= 0".into(),
            ));
        }
        match self.s_prime {
            SPrime::Dynamic(c) if !(c > 0.0 && c.is_finite()) => {
                Err(Error::InvalidOptions("s' factor must be positive".into()))
            }
            SPrime::Fixed(0) => Err(Error::InvalidOptions("s' must be at least 1".into())),
            _ => Ok(()),
        }
    }

    pub fn with_bound(mut self, bound: BoundKind) -> Self {
        self.bound = bound;
        self
    }

    /// `s'` for an interval of length `len` over `n` samples, clamped to `[1, len]`.
    pub fn s_prime_for(&self, n: usize, len: usize) -> usize {
        let raw = match self.s_prime {
            SPrime::Fixed(k) => k,
            SPrime::Dynamic(_) if len == 0 => return 1,
            SPrime::Dynamic(c) => (c * n as f64 * self.s as f64 / len as f64).floor() as usize,
        };
        raw.clamp(1, len.max(1))
    }

    /// The bound evaluation for an interval of length `len` over `n` samples.
    pub(crate) fn eval(&self, n: usize, len: usize) -> Eval {
        match self.bound {
            BoundKind::W0 => Eval::W0,
            BoundKind::W1 => Eval::W1 {
                s_prime: self.s_prime_for(n, len),
            },
            BoundKind::W2 => Eval::W2,
            BoundKind::L2 => Eval::Exact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    TimeLimit,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::TimeLimit => "timeLimit",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub tree: Tree,
    /// Training loss of `tree`.
    pub objective: f64,
    /// Proven lower bound on the optimum; equals `objective` up to the
    /// pruning tolerance when `status` is optimal.
    pub lower_bound: f64,
    pub status: Status,
    pub iterations: usize,
    pub boxes_explored: usize,
    pub boxes_pruned: usize,
}

/// Pruning test: keep when `value <= bound`, with relative slack for regression.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Keep {
    tol: f64,
}

impl Keep {
    pub fn new(task: Task, opts: &SolveOptions) -> Keep {
        Keep {
            tol: match task {
                Task::Classification => 0.0,
                Task::Regression => opts.prune_tolerance,
            },
        }
    }

    #[inline]
    pub fn keep(self, value: f64, bound: f64) -> bool {
        value <= bound + self.tol * (bound.abs() + 1.0)
    }
}

/// Best tree found so far. `value` is the bound-side loss used for pruning.
pub(crate) struct Incumbent {
    inner: Mutex<(f64, Tree)>,
}

impl Incumbent {
    pub fn new(value: f64, tree: Tree) -> Incumbent {
        Incumbent {
            inner: Mutex::new((value, tree)),
        }
    }

    pub fn value(&self) -> f64 {
        self.inner.lock().expect("incumbent lock").0
    }

    /// Replaces the incumbent when `value` is strictly better.
    pub fn offer(&self, value: f64, tree: impl FnOnce() -> Tree) -> bool {
        let mut g = self.inner.lock().expect("incumbent lock");
        if value < g.0 {
            *g = (value, tree());
            true
        } else {
            false
        }
    }

    pub fn into_tree(self) -> Tree {
        self.inner.into_inner().expect("incumbent lock").1
    }
}

/// Wall-clock budget checked between boxes.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Deadline {
    end: Option<Instant>,
}

impl Deadline {
    pub fn new(limit: Option<Duration>) -> Deadline {
        Deadline {
            end: limit.map(|d| Instant::now() + d),
        }
    }

    pub fn expired(&self) -> bool {
        self.end.is_some_and(|e| Instant::now() >= e)
    }
}

/// Final result assembly: the objective is always re-evaluated on the data.
pub(crate) fn finish(
    problem: &Problem,
    tree: Tree,
    lower_bound: f64,
    status: Status,
    counters: (usize, usize, usize),
) -> SolveResult {
    let objective = tree
        .evaluate(problem.data())
        .expect("solver trees match their data");
    let lower_bound = match status {
        Status::Optimal => objective,
        Status::TimeLimit => lower_bound.min(objective),
    };
    SolveResult {
        tree,
        objective,
        lower_bound,
        status,
        iterations: counters.0,
        boxes_explored: counters.1,
        boxes_pruned: counters.2,
    }
}

/// Runs `f` on a pool of `workers` threads, or inline for a single worker.
pub(crate) fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    if workers <= 1 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Boxes carried into the next round after processing one level.
pub(crate) struct LevelOutcome<T> {
    pub next: Vec<T>,
    pub explored: usize,
    pub pruned: usize,
    /// Boxes left unprocessed because the deadline passed.
    pub unprocessed: Vec<T>,
}

/// Processes every item of a level, in order for one worker and in parallel
/// otherwise. `step` returns `None` once the deadline has passed; the item is
/// then reported back as unprocessed.
pub(crate) fn run_level<T, F>(level: Vec<T>, workers: usize, step: F) -> LevelOutcome<T>
where
    T: Send + Sync,
    F: Fn(&T) -> Option<(Vec<T>, usize)> + Send + Sync,
{
    use rayon::prelude::*;

    let results: Vec<Option<(Vec<T>, usize)>> = if workers > 1 {
        with_workers(workers, || level.par_iter().map(&step).collect())
    } else {
        let mut out = Vec::with_capacity(level.len());
        for item in &level {
            let r = step(item);
            let stop = r.is_none();
            out.push(r);
            if stop {
                break;
            }
        }
        out
    };
    let mut outcome = LevelOutcome {
        next: Vec::new(),
        explored: 0,
        pruned: 0,
        unprocessed: Vec::new(),
    };
    let mut results = results.into_iter();
    for item in level {
        match results.next().flatten() {
            Some((children, pruned)) => {
                outcome.explored += 1;
                outcome.pruned += pruned;
                outcome.next.extend(children);
            }
            None => outcome.unprocessed.push(item),
        }
    }
    outcome
}

/// Smallest `k` with `s^k >= n`, i.e. `ceil(log_s n)`.
pub fn ceil_log(n: usize, s: usize) -> usize {
    let (mut k, mut reach) = (0, 1usize);
    while reach < n {
        reach = reach.saturating_mul(s);
        k += 1;
    }
    k
}

#[cfg(test)]
mod tests {
    #[test]
    fn ceil_log_values() {
        assert_eq!(ceil_log(1, 3), 0);
        assert_eq!(ceil_log(3, 3), 1);
        assert_eq!(ceil_log(4, 3), 2);
        assert_eq!(ceil_log(9, 3), 2);
        assert_eq!(ceil_log(10_000, 3), 9);
    }

    use super::*;

    #[test]
    fn s_prime_rule() {
        let o = SolveOptions::default();
        // floor(0.6 * 100 * 3 / 30) = 6
        assert_eq!(o.s_prime_for(100, 30), 6);
        assert_eq!(o.s_prime_for(100, 4), 4);
        assert_eq!(o.s_prime_for(10, 1000), 1);
        let fixed = SolveOptions {
            s_prime: SPrime::Fixed(5),
            ..o
        };
        assert_eq!(fixed.s_prime_for(10, 3), 3);
    }

    #[test]
    fn options_validation() {
        assert!(SolveOptions::default().validate().is_ok());
        let bad = SolveOptions {
            s: 1,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidOptions(_))));
    }

    #[test]
    fn keep_rule() {
        let o = SolveOptions::default();
        let c = Keep::new(Task::Classification, &o);
        assert!(c.keep(3.0, 3.0));
        assert!(!c.keep(3.0 + 1e-12, 3.0));
        let r = Keep::new(Task::Regression, &o);
        assert!(r.keep(1.0 + 1e-11, 1.0));
        assert!(!r.keep(1.0 + 1e-9, 1.0));
    }

    #[test]
    fn bound_names() {
        for b in BoundKind::ALL {
            assert_eq!(b.as_str().parse::<BoundKind>().unwrap(), b);
        }
        assert!("w3".parse::<BoundKind>().is_err());
    }
}
