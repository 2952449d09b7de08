use std::path::Path;

use super::{Dataset, Targets, Task};
use crate::error::{Error, Result};

/// Which columns hold the response, and how to read them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetSpec {
    pub task: Task,
    /// One column for classification; one or more for regression.
    pub columns: Vec<String>,
}

impl TargetSpec {
    pub fn classification(column: impl Into<String>) -> TargetSpec {
        TargetSpec {
            task: Task::Classification,
            columns: vec![column.into()],
        }
    }

    pub fn regression<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> TargetSpec {
        TargetSpec {
            task: Task::Regression,
            columns: columns.into_iter().map(Into::into).collect(),
        }
    }
}

/// Reads a headed CSV file. Feature columns keep their file order; class
/// labels are numbered in order of first appearance.
pub fn load_csv(path: impl AsRef<Path>, spec: &TargetSpec) -> Result<Dataset> {
    load(path.as_ref(), spec, Vec::new())
}

/// Reads a CSV for a model that already has a label table, so class ids line
/// up with the model's. Labels missing from `table` are appended after it.
pub fn load_csv_with_labels(
    path: impl AsRef<Path>,
    spec: &TargetSpec,
    table: Vec<String>,
) -> Result<Dataset> {
    load(path.as_ref(), spec, table)
}

fn load(path: &Path, spec: &TargetSpec, table: Vec<String>) -> Result<Dataset> {
    if spec.columns.is_empty() {
        return Err(Error::InvalidOptions("no target column given".into()));
    }
    if spec.task == Task::Classification && spec.columns.len() != 1 {
        return Err(Error::InvalidOptions(
            "classification takes exactly one target column".into(),
        ));
    }
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let mut target_cols = Vec::with_capacity(spec.columns.len());
    for name in &spec.columns {
        let k = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::UnknownColumn(name.clone()))?;
        target_cols.push(k);
    }
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|k| !target_cols.contains(k))
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::EmptyDataset("no feature columns"));
    }

    let mut feature_rows: Vec<Vec<f64>> = vec![Vec::new(); feature_cols.len()];
    let mut raw_labels = Vec::new();
    let mut reg_values = Vec::new();
    let mut n = 0;
    for record in reader.records() {
        let record = record?;
        n += 1;
        let cell = |k: usize| record.get(k).unwrap_or("").trim();
        for (slot, &k) in feature_cols.iter().enumerate() {
            feature_rows[slot].push(parse_real(cell(k), n, &header[k])?);
        }
        match spec.task {
            Task::Classification => {
                let raw = cell(target_cols[0]);
                if raw.is_empty() {
                    return Err(Error::BadCell {
                        row: n,
                        column: header[target_cols[0]].clone(),
                        value: String::new(),
                    });
                }
                raw_labels.push(raw.to_string());
            }
            Task::Regression => {
                for &k in &target_cols {
                    reg_values.push(parse_real(cell(k), n, &header[k])?);
                }
            }
        }
    }
    if n == 0 {
        return Err(Error::EmptyDataset("no data rows"));
    }

    let targets = match spec.task {
        Task::Classification => Targets::from_raw_labels_with_table(&raw_labels, table),
        Task::Regression => Targets::Regression {
            m: target_cols.len(),
            values: reg_values,
        },
    };
    let names = feature_cols.iter().map(|&k| header[k].clone()).collect();
    Dataset::from_columns(n, feature_rows.concat(), names, targets)
}

fn parse_real(cell: &str, row: usize, column: &str) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(Error::BadCell {
            row,
            column: column.to_string(),
            value: cell.to_string(),
        }),
    }
}
