//! Command-line front end: `train`, `oracle`, `eval` and `bench`.
//!
//! Exit codes: 0 optimal, 1 internal or data error, 2 time limit reached,
//! 3 usage error, 4 oracle budget refused.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{load_csv, load_csv_with_labels, Dataset, Problem, TargetSpec, Task};
use crate::error::Error;
use crate::heuristics::{brute_force, DEFAULT_BUDGET};
use crate::model::{Node, Outputs, Prediction, Tree};
use crate::solve::{BoundKind, SPrime, SolveOptions, SolveResult, Status};

pub const EXIT_OPTIMAL: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_TIME_LIMIT: i32 = 2;
pub const EXIT_USAGE: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "optree",
    version,
    about = "Optimal depth-2 and depth-3 decision trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit an optimal tree by branch and bound.
    Train(TrainArgs),
    /// Fit an optimal tree by exhaustive enumeration (small data only).
    Oracle(OracleArgs),
    /// Loss and accuracy of a saved model on a dataset.
    Eval(EvalArgs),
    /// Time every lower bound on one dataset and check they agree.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Machine,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Headed CSV file.
    #[arg(long, value_name = "PATH")]
    csv: PathBuf,
    /// classification or regression.
    #[arg(long)]
    task: Task,
    /// Target column(s); several comma-separated columns for multi-output regression.
    #[arg(
        long,
        value_name = "COL[,COL...]",
        value_delimiter = ',',
        required = true
    )]
    target: Vec<String>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
    depth: u8,
    /// Quantile pieces per refinement.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(2..))]
    s: u64,
    #[arg(long, default_value_t = BoundKind::W1)]
    bound: BoundKind,
    /// Wall-clock limit; the best tree so far is returned when it passes.
    #[arg(long, value_name = "SECONDS", value_parser = parse_seconds)]
    time_limit: Option<Duration>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    workers: u64,
    /// Depth 3: most alive tuples kept before the weakest are solved outright.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    max_alive: Option<u64>,
    /// Where to write the model file.
    #[arg(long, value_name = "MODEL_PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    report: ReportFormat,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    depth: u8,
    /// Largest allowed (n p)^depth.
    #[arg(long, value_name = "STEPS", env = "OPTREE_ORACLE_BUDGET", default_value_t = DEFAULT_BUDGET)]
    budget: f64,
    #[arg(long, value_name = "MODEL_PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    report: ReportFormat,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    #[arg(long, value_name = "PATH")]
    csv: PathBuf,
    #[arg(
        long,
        value_name = "COL[,COL...]",
        value_delimiter = ',',
        required = true
    )]
    target: Vec<String>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    report: ReportFormat,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(
        long,
        value_name = "PATH",
        conflicts_with = "synthetic",
        required_unless_present = "synthetic"
    )]
    csv: Option<PathBuf>,
    /// Generated dataset with N samples and P features.
    #[arg(long, value_name = "N,P", value_parser = parse_shape)]
    synthetic: Option<(usize, usize)>,
    #[arg(long, default_value = "classification")]
    task: Task,
    #[arg(
        long,
        value_name = "COL[,COL...]",
        value_delimiter = ',',
        requires = "csv"
    )]
    target: Vec<String>,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=3))]
    depth: u8,
    #[arg(long, value_delimiter = ',', default_value = "w0,w1,w2,l2")]
    bounds: Vec<BoundKind>,
    /// Seed for generated data.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(2..))]
    s: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    workers: u64,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    report: ReportFormat,
}

fn parse_seconds(s: &str) -> Result<Duration, String> {
    let v: f64 = s
        .parse()
        .map_err(|_| format!("`{s}` is not a number of seconds"))?;
    if !(v.is_finite() && v >= 0.0) {
        return Err(format!(
            "`{s}` must be a finite, non-negative number of seconds"
        ));
    }
    Ok(Duration::from_secs_f64(v))
}

fn parse_shape(s: &str) -> Result<(usize, usize), String> {
    let bad = || format!("`{s}` is not of the form N,P with N, P >= 1");
    let (n, p) = s.split_once(',').ok_or_else(bad)?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    let p: usize = p.trim().parse().map_err(|_| bad())?;
    if n == 0 || p == 0 {
        return Err(bad());
    }
    Ok((n, p))
}

enum Failure {
    Usage(String),
    Lib(Error),
    Mismatch(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) | Failure::Lib(Error::InvalidOptions(_)) => EXIT_USAGE,
            Failure::Lib(Error::BudgetExceeded { .. }) => EXIT_BUDGET,
            Failure::Lib(_) | Failure::Mismatch(_) => EXIT_INTERNAL,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) | Failure::Mismatch(m) => m.clone(),
            Failure::Lib(e) => e.to_string(),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OPTIMAL,
                _ => EXIT_USAGE,
            };
        }
    };
    let outcome = match cli.command {
        Command::Train(a) => train(a),
        Command::Oracle(a) => oracle(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn load(data: &DataArgs) -> Result<Dataset, Failure> {
    let spec = TargetSpec {
        task: data.task,
        columns: data.target.clone(),
    };
    load_csv(&data.csv, &spec).map_err(target_usage)
}

/// Target problems are reported against the flag that caused them.
fn target_usage(e: Error) -> Failure {
    match e {
        Error::UnknownColumn(_) | Error::InvalidOptions(_) => {
            Failure::Usage(format!("--target: {e}"))
        }
        e => Failure::Lib(e),
    }
}

fn write_model(path: &Path, tree: &Tree) -> Result<(), Failure> {
    std::fs::write(path, tree.to_json() + "\n").map_err(|source| {
        Failure::Lib(Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

fn status_code(status: Status) -> i32 {
    match status {
        Status::Optimal => EXIT_OPTIMAL,
        Status::TimeLimit => EXIT_TIME_LIMIT,
    }
}

fn train(a: TrainArgs) -> Result<i32, Failure> {
    let ds = load(&a.data)?;
    let problem = Problem::new(ds);
    let opts = SolveOptions {
        s: a.s as usize,
        bound: a.bound,
        time_limit: a.time_limit,
        workers: a.workers as usize,
        max_alive: a.max_alive.map(|m| m as usize),
        ..Default::default()
    };
    let start = Instant::now();
    let res = crate::solve(&problem, a.depth as usize, &opts)?;
    let wall = start.elapsed();
    if let Some(out) = &a.out {
        write_model(out, &res.tree)?;
    }

    let mut r = Report::new("train");
    r.dataset(&a.data.csv, &problem);
    r.push("depth", a.depth);
    r.options(&opts);
    r.result(&res);
    r.push("wall_time_s", secs(wall));
    r.push(
        "model",
        a.out
            .as_deref()
            .map_or("none".into(), |p| p.display().to_string()),
    );
    r.print(a.report, Some(&res.tree));
    Ok(status_code(res.status))
}

fn oracle(a: OracleArgs) -> Result<i32, Failure> {
    let ds = load(&a.data)?;
    let problem = Problem::new(ds);
    let start = Instant::now();
    let (objective, tree) = brute_force(&problem, a.depth as usize, a.budget)?;
    let wall = start.elapsed();
    if let Some(out) = &a.out {
        write_model(out, &tree)?;
    }

    let mut r = Report::new("oracle");
    r.dataset(&a.data.csv, &problem);
    r.push("depth", a.depth);
    r.push("budget", a.budget);
    r.push("status", Status::Optimal.as_str());
    r.push("objective", objective);
    r.push("wall_time_s", secs(wall));
    r.push(
        "model",
        a.out
            .as_deref()
            .map_or("none".into(), |p| p.display().to_string()),
    );
    r.print(a.report, Some(&tree));
    Ok(EXIT_OPTIMAL)
}

fn eval(a: EvalArgs) -> Result<i32, Failure> {
    let text = std::fs::read_to_string(&a.model).map_err(|source| Error::Io {
        path: a.model.clone(),
        source,
    })?;
    let tree = Tree::from_json(&text)?;
    let spec = TargetSpec {
        task: tree.task(),
        columns: a.target.clone(),
    };
    let ds = match tree.outputs() {
        Outputs::Classification { labels } => load_csv_with_labels(&a.csv, &spec, labels.clone()),
        Outputs::Regression { .. } => load_csv(&a.csv, &spec),
    }
    .map_err(target_usage)?;
    let loss = tree.evaluate(&ds)?;

    let mut r = Report::new("eval");
    r.push("model", a.model.display());
    r.push("dataset", a.csv.display());
    r.push("task", tree.task().as_str());
    r.push("n", ds.n());
    r.push("p", ds.p());
    r.push("loss", loss);
    if tree.task() == Task::Classification {
        let correct = ds.n() - loss as usize;
        r.push("correct", correct);
        r.push(
            "accuracy",
            if ds.n() == 0 {
                1.0
            } else {
                correct as f64 / ds.n() as f64
            },
        );
    }
    r.print(a.report, None);
    Ok(EXIT_OPTIMAL)
}

fn bench(a: BenchArgs) -> Result<i32, Failure> {
    if a.bounds.is_empty() {
        return Err(Failure::Usage(
            "--bounds: at least one bound is required".into(),
        ));
    }
    let (ds, source) = match (&a.csv, a.synthetic) {
        (Some(csv), _) => {
            if a.target.is_empty() {
                return Err(Failure::Usage("--target is required with --csv".into()));
            }
            let data = DataArgs {
                csv: csv.clone(),
                task: a.task,
                target: a.target.clone(),
            };
            (load(&data)?, csv.display().to_string())
        }
        (None, Some((n, p))) => {
            let ds = match a.task {
                Task::Classification => crate::synthetic::classification(n, p, 3, 0.1, a.seed),
                Task::Regression => crate::synthetic::regression(n, p, 1, 0.5, a.seed),
            };
            (ds, format!("synthetic:{n},{p}"))
        }
        (None, None) => return Err(Failure::Usage("--csv or --synthetic is required".into())),
    };
    let problem = Problem::new(ds);

    let mut r = Report::new("bench");
    r.push("dataset", &source);
    r.push("task", problem.data().task().as_str());
    r.push("n", problem.n());
    r.push("p", problem.p());
    r.push("depth", a.depth);
    r.push("s", a.s);
    r.push("seed", a.seed);
    let mut objectives = Vec::new();
    for &bound in &a.bounds {
        let opts = SolveOptions {
            s: a.s as usize,
            bound,
            workers: a.workers as usize,
            ..Default::default()
        };
        let start = Instant::now();
        let res = crate::solve(&problem, a.depth as usize, &opts)?;
        let wall = start.elapsed();
        r.push(format!("{bound}.objective"), res.objective);
        r.push(format!("{bound}.iterations"), res.iterations);
        r.push(format!("{bound}.boxes_explored"), res.boxes_explored);
        r.push(format!("{bound}.wall_time_s"), secs(wall));
        objectives.push((bound, res.objective));
    }
    let reference = objectives[0].1;
    let regression = problem.data().task() == Task::Regression;
    let agree = objectives.iter().all(|&(_, v)| {
        if regression {
            (v - reference).abs() <= 1e-9 * (1.0 + reference.abs())
        } else {
            v == reference
        }
    });
    r.push("agree", agree);
    r.print(a.report, None);
    if agree {
        Ok(EXIT_OPTIMAL)
    } else {
        let all: Vec<String> = objectives.iter().map(|(b, v)| format!("{b}={v}")).collect();
        Err(Failure::Mismatch(format!(
            "objectives differ across bounds: {}",
            all.join(", ")
        )))
    }
}

fn secs(d: Duration) -> String {
    format!("{:.6}", d.as_secs_f64())
}

/// Ordered key/value report; `machine` prints `key=value` lines.
struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    fn new(command: &str) -> Report {
        let mut r = Report {
            entries: Vec::new(),
        };
        r.push("command", command);
        r
    }

    fn push(&mut self, key: impl Into<String>, value: impl std::fmt::Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    fn dataset(&mut self, path: &Path, problem: &Problem) {
        self.push("dataset", path.display());
        self.push("task", problem.data().task().as_str());
        self.push("n", problem.n());
        self.push("p", problem.p());
    }

    fn options(&mut self, o: &SolveOptions) {
        self.push("s", o.s);
        self.push("bound", o.bound);
        self.push(
            "s_prime",
            match o.s_prime {
                SPrime::Dynamic(c) => format!("dynamic:{c}"),
                SPrime::Fixed(k) => k.to_string(),
            },
        );
        self.push("workers", o.workers);
        self.push("time_limit_s", o.time_limit.map_or("none".into(), secs));
        self.push(
            "max_alive",
            o.max_alive.map_or("none".into(), |m| m.to_string()),
        );
    }

    fn result(&mut self, res: &SolveResult) {
        self.push("status", res.status.as_str());
        self.push("objective", res.objective);
        self.push("lower_bound", res.lower_bound);
        self.push("iterations", res.iterations);
        self.push("boxes_explored", res.boxes_explored);
        self.push("boxes_pruned", res.boxes_pruned);
    }

    fn print(&self, format: ReportFormat, tree: Option<&Tree>) {
        let mut out = String::new();
        match format {
            ReportFormat::Machine => {
                for (k, v) in &self.entries {
                    let _ = writeln!(out, "{k}={v}");
                }
            }
            ReportFormat::Text => {
                let width = self.entries.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                for (k, v) in &self.entries {
                    let _ = writeln!(out, "{k:<width$}  {v}");
                }
                if let Some(t) = tree {
                    out.push('\n');
                    render(t, t.root(), 0, &mut out);
                }
            }
        }
        print!("{out}");
    }
}

/// Indented `if x <= v / else` listing of a tree.
fn render(tree: &Tree, node: &Node, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match node {
        Node::Leaf { prediction } => {
            let _ = match prediction {
                Prediction::Class(k) => {
                    writeln!(out, "{pad}predict {}", tree.label(*k).unwrap_or("?"))
                }
                Prediction::Value(v) => {
                    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                    writeln!(out, "{pad}predict [{}]", parts.join(", "))
                }
            };
        }
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let name = &tree.feature_names()[*feature];
            let _ = writeln!(out, "{pad}if {name} <= {threshold}");
            render(tree, left, indent + 1, out);
            let _ = writeln!(out, "{pad}else");
            render(tree, right, indent + 1, out);
        }
    }
}
