//! Tabular training data and the per-feature orderings the solvers work on.

mod binarize;
mod csv;
mod index;

pub use self::binarize::binarize_equivalent;
pub use self::csv::{load_csv, load_csv_with_labels, TargetSpec};
pub use self::index::{FeatureIndex, FeatureOrder, IndexSet};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Regression,
    Classification,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            other => Err(format!(
                "unknown task `{other}` (expected regression or classification)"
            )),
        }
    }
}

/// Response values, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// Row-major `n x m` matrix of real targets.
    Regression { m: usize, values: Vec<f64> },
    /// Class ids `0..classes.len()`; `classes[k]` is the raw label of class `k`.
    Classification {
        labels: Vec<u32>,
        classes: Vec<String>,
    },
}

impl Targets {
    pub fn task(&self) -> Task {
        match self {
            Targets::Regression { .. } => Task::Regression,
            Targets::Classification { .. } => Task::Classification,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Targets::Regression { m, values } => values.len() / m,
            Targets::Classification { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Relabels raw class labels to contiguous ids in first-appearance order.
    pub fn from_raw_labels<S: AsRef<str>>(raw: &[S]) -> Targets {
        Self::from_raw_labels_with_table(raw, Vec::new())
    }

    /// Like [`Targets::from_raw_labels`], but labels already in `table` keep
    /// their position; unseen labels are appended.
    pub fn from_raw_labels_with_table<S: AsRef<str>>(raw: &[S], mut table: Vec<String>) -> Targets {
        let mut lookup: std::collections::HashMap<String, u32> = table
            .iter()
            .enumerate()
            .map(|(k, s)| (s.clone(), k as u32))
            .collect();
        let labels = raw
            .iter()
            .map(|s| {
                let s = s.as_ref();
                *lookup.entry(s.to_string()).or_insert_with(|| {
                    table.push(s.to_string());
                    (table.len() - 1) as u32
                })
            })
            .collect();
        Targets::Classification {
            labels,
            classes: table,
        }
    }
}

/// An immutable feature matrix with its targets.
///
/// Features are stored column-major so that per-feature scans are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    columns: Vec<f64>,
    feature_names: Vec<String>,
    targets: Targets,
}

impl Dataset {
    /// Builds a dataset from row-major feature rows.
    pub fn from_rows(rows: &[Vec<f64>], targets: Targets) -> Result<Dataset> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyDataset("no samples"));
        }
        let p = rows[0].len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::InvalidDataset(format!(
                "row {} has {} features, expected {p}",
                i + 1,
                r.len()
            )));
        }
        let mut columns = vec![0.0; n * p];
        for (i, row) in rows.iter().enumerate() {
            for (f, &x) in row.iter().enumerate() {
                columns[f * n + i] = x;
            }
        }
        let names = (1..=p).map(|f| format!("x{f}")).collect();
        Dataset::from_columns(n, columns, names, targets)
    }

    /// Builds a dataset from a column-major buffer of `n * names.len()` values.
    pub fn from_columns(
        n: usize,
        columns: Vec<f64>,
        feature_names: Vec<String>,
        targets: Targets,
    ) -> Result<Dataset> {
        let p = feature_names.len();
        if n == 0 {
            return Err(Error::EmptyDataset("no samples"));
        }
        if p == 0 {
            return Err(Error::EmptyDataset("no feature columns"));
        }
        if columns.len() != n * p {
            return Err(Error::InvalidDataset(format!(
                "feature buffer has {} values, expected {}",
                columns.len(),
                n * p
            )));
        }
        if let Some(k) = columns.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite value in feature `{}` at row {}",
                feature_names[k / n],
                k % n + 1
            )));
        }
        if targets.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{} targets for {n} samples",
                targets.len()
            )));
        }
        match &targets {
            Targets::Regression { m, values } => {
                if *m == 0 {
                    return Err(Error::InvalidDataset("regression needs m >= 1".into()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidDataset("non-finite regression target".into()));
                }
            }
            Targets::Classification { labels, classes } => {
                if labels.iter().any(|&c| c as usize >= classes.len()) {
                    return Err(Error::InvalidDataset("class id outside label table".into()));
                }
            }
        }
        Ok(Dataset {
            n,
            p,
            columns,
            feature_names,
            targets,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn task(&self) -> Task {
        self.targets.task()
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn column(&self, f: usize) -> &[f64] {
        &self.columns[f * self.n..(f + 1) * self.n]
    }

    #[inline]
    pub fn value(&self, i: usize, f: usize) -> f64 {
        self.columns[f * self.n + i]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.p).map(|f| self.value(i, f)).collect()
    }

    /// Number of classes, or `None` for regression.
    pub fn n_classes(&self) -> Option<usize> {
        match &self.targets {
            Targets::Classification { classes, .. } => Some(classes.len()),
            Targets::Regression { .. } => None,
        }
    }

    /// Target dimension for regression, or `None` for classification.
    pub fn target_dim(&self) -> Option<usize> {
        match &self.targets {
            Targets::Regression { m, .. } => Some(*m),
            Targets::Classification { .. } => None,
        }
    }
}

/// A dataset bundled with its feature index; the input of every solver.
#[derive(Debug, Clone)]
pub struct Problem {
    data: Dataset,
    index: FeatureIndex,
}

impl Problem {
    pub fn new(data: Dataset) -> Problem {
        let index = FeatureIndex::build(&data);
        Problem { data, index }
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn index(&self) -> &FeatureIndex {
        &self.index
    }

    pub fn n(&self) -> usize {
        self.data.n
    }

    pub fn p(&self) -> usize {
        self.data.p
    }

    pub fn u(&self, f: usize) -> usize {
        self.index.feature(f).u()
    }

    #[inline]
    pub fn rank(&self, f: usize, i: u32) -> usize {
        self.index.feature(f).rank(i)
    }

    /// Returns `members` (any order) sorted along feature `f`.
    pub(crate) fn order_along(&self, f: usize, members: &[u32]) -> Vec<u32> {
        let order = self.index.feature(f);
        let n = self.data.n;
        let m = members.len();
        // Sorting wins for small subsets, a filtered pass over the global order otherwise.
        if m < 64 || m.saturating_mul(usize::BITS as usize - m.leading_zeros() as usize) < n {
            let mut out = members.to_vec();
            out.sort_unstable_by_key(|&i| order.position(i));
            out
        } else {
            let mut mask = vec![false; n];
            for &i in members {
                mask[i as usize] = true;
            }
            order
                .sorted_perm()
                .iter()
                .copied()
                .filter(|&i| mask[i as usize])
                .collect()
        }
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// The six-sample, three-feature classification example (labels 1,2,1,2,1,2).
    pub fn toy6() -> Problem {
        let rows = vec![
            vec![1.0, 0.0, 0.0],
            vec![2.0, 1.0, 0.0],
            vec![3.0, 2.0, 3.0],
            vec![3.0, 3.0, 3.0],
            vec![4.0, 4.0, 5.0],
            vec![5.0, 5.0, 5.0],
        ];
        let targets = Targets::from_raw_labels(&["1", "2", "1", "2", "1", "2"]);
        Problem::new(Dataset::from_rows(&rows, targets).unwrap())
    }

    pub fn regression(rows: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> Problem {
        let m = y[0].len();
        let targets = Targets::Regression {
            m,
            values: y.into_iter().flatten().collect(),
        };
        Problem::new(Dataset::from_rows(&rows, targets).unwrap())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relabel_keeps_first_appearance_order() {
        let t = Targets::from_raw_labels(&["b", "a", "b", "c"]);
        match t {
            Targets::Classification { labels, classes } => {
                assert_eq!(labels, vec![0, 1, 0, 2]);
                assert_eq!(classes, vec!["b", "a", "c"]);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn rejects_non_finite_features() {
        let t = Targets::from_raw_labels(&["a"]);
        let err = Dataset::from_rows(&[vec![f64::NAN]], t).unwrap_err();
        assert!(matches!(err, Error::InvalidDataset(_)));
    }

    #[test]
    fn order_along_matches_both_strategies() {
        let rows: Vec<Vec<f64>> = (0..300).map(|i| vec![((i * 37) % 101) as f64]).collect();
        let labels: Vec<String> = (0..300).map(|i| (i % 2).to_string()).collect();
        let problem =
            Problem::new(Dataset::from_rows(&rows, Targets::from_raw_labels(&labels)).unwrap());
        let small: Vec<u32> = (0..300).step_by(50).collect();
        let large: Vec<u32> = (0..300).filter(|i| i % 3 != 0).collect();
        for members in [small, large] {
            let got = problem.order_along(0, &members);
            let mut want = members.clone();
            want.sort_by(|&a, &b| {
                problem
                    .data()
                    .value(a as usize, 0)
                    .partial_cmp(&problem.data().value(b as usize, 0))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            assert_eq!(got, want);
        }
    }
}
