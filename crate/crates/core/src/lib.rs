//! Exact optimal decision trees of depth 2 and 3.
//!
//! The solvers search over axis-aligned trees whose thresholds sit at the
//! midpoints between consecutive distinct feature values. A branch-and-bound
//! search cuts each candidate interval of root thresholds into quantile
//! pieces and discards the pieces whose lower bound exceeds the best tree
//! found so far.
//!
//! ```
//! use optree::{Dataset, Problem, SolveOptions, Targets};
//!
//! let rows = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
//! let labels = Targets::from_raw_labels(&["a", "a", "b", "a"]);
//! let problem = Problem::new(Dataset::from_rows(&rows, labels).unwrap());
//! let result = optree::solve_depth2(&problem, &SolveOptions::default()).unwrap();
//! assert_eq!(result.objective, 0.0);
//! ```

pub mod bnb2;
pub mod bnb3;
pub mod bounds;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod heuristics;
pub mod loss;
pub mod model;
pub mod solve;
pub mod synthetic;

pub use bnb2::solve_depth2;
pub use bnb3::solve_depth3;
pub use dataset::{Dataset, IndexSet, Problem, Targets, Task};
pub use error::{Error, Result};
pub use model::Tree;
pub use solve::{BoundKind, SolveOptions, SolveResult, Status};

/// Optimal tree of depth 2 or 3.
pub fn solve(problem: &Problem, depth: usize, opts: &SolveOptions) -> Result<SolveResult> {
    match depth {
        2 => solve_depth2(problem, opts),
        3 => solve_depth3(problem, opts),
        d => Err(Error::InvalidOptions(format!(
            "depth must be 2 or 3, got {d}"
        ))),
    }
}
