//! Fitted trees: prediction, evaluation and the JSON model format.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Problem, Targets, Task};
use crate::error::{Error, Result};
use crate::loss::LeafStats;

pub const SCHEMA_VERSION: u32 = 1;

/// What a leaf predicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prediction {
    /// Regression target vector.
    Value(Vec<f64>),
    /// Class id; an index into the tree's label table.
    Class(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        #[serde(flatten)]
        prediction: Prediction,
    },
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn route(&self, x: &[f64]) -> &Prediction {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { prediction } => return prediction,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    /// Replaces splits that send everything one way by the side that is reached.
    fn canonical(self) -> Node {
        match self {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if threshold == f64::NEG_INFINITY {
                    right.canonical()
                } else if threshold == f64::INFINITY {
                    left.canonical()
                } else {
                    Node::Split {
                        feature,
                        threshold,
                        left: Box::new(left.canonical()),
                        right: Box::new(right.canonical()),
                    }
                }
            }
            leaf => leaf,
        }
    }
}

/// Target metadata a tree was trained with.
#[derive(Debug, Clone, PartialEq)]
pub enum Outputs {
    Regression { m: usize },
    Classification { labels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    p: usize,
    feature_names: Vec<String>,
    outputs: Outputs,
    root: Node,
}

/// A tree shape in rank space: split `t` on `feature` sends training samples
/// of rank `<= t` left. Leaves are fitted when the sketch is materialized.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Sketch {
    Leaf,
    Split {
        feature: usize,
        t: usize,
        left: Box<Sketch>,
        right: Box<Sketch>,
    },
}

impl Sketch {
    pub fn split(feature: usize, t: usize, left: Sketch, right: Sketch) -> Sketch {
        Sketch::Split {
            feature,
            t,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn stump(feature: usize, t: usize) -> Sketch {
        Sketch::split(feature, t, Sketch::Leaf, Sketch::Leaf)
    }
}

impl Tree {
    pub fn new(p: usize, feature_names: Vec<String>, outputs: Outputs, root: Node) -> Result<Tree> {
        let tree = Tree {
            p,
            feature_names,
            outputs,
            root: root.canonical(),
        };
        tree.validate()?;
        Ok(tree)
    }

    /// Fits leaf predictions of `sketch` on the training data. Splits at the
    /// ends of a feature's range are folded away; an empty leaf borrows the
    /// prediction of its nearest non-empty ancestor.
    pub(crate) fn from_sketch(problem: &Problem, sketch: &Sketch) -> Tree {
        let data = problem.data();
        let all: Vec<u32> = (0..data.n() as u32).collect();
        let fallback = LeafStats::of(data.targets(), &all).prediction();
        let root = materialize(problem, sketch, &all, &fallback).canonical();
        Tree {
            p: data.p(),
            feature_names: data.feature_names().to_vec(),
            outputs: outputs_of(data.targets()),
            root,
        }
    }

    pub fn task(&self) -> Task {
        match self.outputs {
            Outputs::Regression { .. } => Task::Regression,
            Outputs::Classification { .. } => Task::Classification,
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn outputs(&self) -> &Outputs {
        &self.outputs
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Raw label of a class id, for classification trees.
    pub fn label(&self, class: u32) -> Option<&str> {
        match &self.outputs {
            Outputs::Classification { labels } => labels.get(class as usize).map(String::as_str),
            Outputs::Regression { .. } => None,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<&Prediction> {
        if x.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: x.len(),
            });
        }
        Ok(self.root.route(x))
    }

    /// Total loss on `ds`: squared error, or the number of misclassified samples.
    /// Class labels are matched by their raw label text.
    pub fn evaluate(&self, ds: &Dataset) -> Result<f64> {
        if ds.task() != self.task() {
            return Err(Error::TaskMismatch {
                model: self.task().as_str(),
                data: ds.task().as_str(),
            });
        }
        if ds.p() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: ds.p(),
            });
        }
        let mut row = vec![0.0; self.p];
        let mut total = 0.0;
        match (ds.targets(), &self.outputs) {
            (Targets::Regression { m, values }, Outputs::Regression { m: tm }) => {
                if m != tm {
                    return Err(Error::DimensionMismatch {
                        expected: *tm,
                        found: *m,
                    });
                }
                for i in 0..ds.n() {
                    fill_row(ds, i, &mut row);
                    if let Prediction::Value(v) = self.root.route(&row) {
                        total += values[i * m..(i + 1) * m]
                            .iter()
                            .zip(v)
                            .map(|(y, c)| (y - c) * (y - c))
                            .sum::<f64>();
                    }
                }
            }
            (
                Targets::Classification { labels, classes },
                Outputs::Classification { labels: table },
            ) => {
                // data class id -> tree class id
                let map: Vec<Option<u32>> = classes
                    .iter()
                    .map(|c| table.iter().position(|l| l == c).map(|k| k as u32))
                    .collect();
                for i in 0..ds.n() {
                    fill_row(ds, i, &mut row);
                    if let Prediction::Class(k) = self.root.route(&row) {
                        if map[labels[i] as usize] != Some(*k) {
                            total += 1.0;
                        }
                    }
                }
            }
            _ => unreachable!("task checked above"),
        }
        Ok(total)
    }

    pub fn to_json(&self) -> String {
        let (m, label_table) = match &self.outputs {
            Outputs::Regression { m } => (Some(*m), None),
            Outputs::Classification { labels } => (None, Some(labels.clone())),
        };
        let doc = ModelDoc {
            schema_version: SCHEMA_VERSION,
            task: self.task().as_str().to_string(),
            p: self.p,
            m,
            label_table,
            feature_names: self.feature_names.clone(),
            root: self.root.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("trees always serialize")
    }

    pub fn from_json(text: &str) -> Result<Tree> {
        let header: Header =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if header.schema_version != SCHEMA_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported schemaVersion {} (this build reads {SCHEMA_VERSION})",
                header.schema_version
            )));
        }
        let doc: ModelDoc =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        let task: Task = doc.task.parse().map_err(Error::ModelFormat)?;
        let outputs = match (task, doc.m, doc.label_table) {
            (Task::Regression, Some(m), None) => Outputs::Regression { m },
            (Task::Classification, None, Some(labels)) => Outputs::Classification { labels },
            _ => {
                return Err(Error::ModelFormat(
                    "regression models need `m`, classification models need `labelTable`".into(),
                ))
            }
        };
        if doc.feature_names.len() != doc.p {
            return Err(Error::ModelFormat(format!(
                "{} feature names for p = {}",
                doc.feature_names.len(),
                doc.p
            )));
        }
        let tree = Tree {
            p: doc.p,
            feature_names: doc.feature_names,
            outputs,
            root: doc.root,
        };
        tree.validate()?;
        Ok(tree)
    }

    fn validate(&self) -> Result<()> {
        fn walk(node: &Node, tree: &Tree) -> Result<()> {
            match node {
                Node::Leaf { prediction } => match (prediction, &tree.outputs) {
                    (Prediction::Value(v), Outputs::Regression { m }) if v.len() == *m => {
                        if v.iter().all(|x| x.is_finite()) {
                            Ok(())
                        } else {
                            Err(Error::ModelFormat("non-finite leaf value".into()))
                        }
                    }
                    (Prediction::Class(k), Outputs::Classification { labels })
                        if (*k as usize) < labels.len() =>
                    {
                        Ok(())
                    }
                    _ => Err(Error::ModelFormat(format!(
                        "leaf {prediction:?} does not fit the model outputs"
                    ))),
                },
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature >= tree.p {
                        return Err(Error::ModelFormat(format!(
                            "split on feature {feature} but p = {}",
                            tree.p
                        )));
                    }
                    if !threshold.is_finite() {
                        return Err(Error::ModelFormat("non-finite threshold".into()));
                    }
                    walk(left, tree)?;
                    walk(right, tree)
                }
            }
        }
        if self.root.depth() > 3 {
            return Err(Error::ModelFormat(format!(
                "tree depth {} exceeds 3",
                self.root.depth()
            )));
        }
        walk(&self.root, self)
    }
}

fn fill_row(ds: &Dataset, i: usize, row: &mut [f64]) {
    for (f, x) in row.iter_mut().enumerate() {
        *x = ds.value(i, f);
    }
}

fn outputs_of(targets: &Targets) -> Outputs {
    match targets {
        Targets::Regression { m, .. } => Outputs::Regression { m: *m },
        Targets::Classification { classes, .. } => Outputs::Classification {
            labels: classes.clone(),
        },
    }
}

fn materialize(
    problem: &Problem,
    sketch: &Sketch,
    members: &[u32],
    inherited: &Prediction,
) -> Node {
    let targets = problem.data().targets();
    let here = if members.is_empty() {
        inherited.clone()
    } else {
        LeafStats::of(targets, members).prediction()
    };
    match sketch {
        Sketch::Leaf => Node::Leaf { prediction: here },
        Sketch::Split {
            feature,
            t,
            left,
            right,
        } => {
            let (l, r): (Vec<u32>, Vec<u32>) = members
                .iter()
                .partition(|&&i| problem.rank(*feature, i) <= *t);
            Node::Split {
                feature: *feature,
                threshold: problem.index().feature(*feature).midpoint(*t),
                left: Box::new(materialize(problem, left, &l, &here)),
                right: Box::new(materialize(problem, right, &r, &here)),
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct Header {
    schema_version: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ModelDoc {
    schema_version: u32,
    task: String,
    p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label_table: Option<Vec<String>>,
    feature_names: Vec<String>,
    root: Node,
}
