//! Command-line front end.
//!
//! Every command prints one table, as CSV (10 significant digits) or as JSON
//! `{"command", "columns", "rows"}`. Wall-clock timings only ever appear in
//! columns whose names start with `time_` or in `acceleration`; all other
//! cells are deterministic for a fixed input and seed.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::nested::{
    bench, bound_report, default_lambda_grid, flat_nested_lp, lambda_sweep, martingale_check,
    nested_exact, nested_sinkhorn, verify_entropic_equivalence,
};
use crate::report::Report;
use crate::sinkhorn::{sinkhorn_auto, SinkhornOptions};
use crate::transport::solve_transport_lp;
use crate::tree::{cost_matrix, generate_random_tree, ScenarioTree};

/// Leaf-pair limit for the flat linear program inside `verify`.
const VERIFY_FLAT_LP_PAIRS: usize = 2500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Flat Wasserstein distance between the leaf distributions
    Wasserstein,
    /// Entropic transport between the leaf distributions
    Sinkhorn,
    /// Exact nested distance
    Nested,
    /// Nested Sinkhorn divergence
    NestedSinkhorn,
    /// Nested Sinkhorn values over a list of lambdas
    Sweep,
    /// Bounds, entropic equivalence and martingale checks
    Verify,
    /// Write a random tree
    Gen,
    /// Exact vs entropic nested distance on random trees of growing height
    Bench,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Wasserstein => "wasserstein",
            Command::Sinkhorn => "sinkhorn",
            Command::Nested => "nested",
            Command::NestedSinkhorn => "nested-sinkhorn",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
            Command::Gen => "gen",
            Command::Bench => "bench",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "nested-sinkhorn",
    version,
    about = "Transport and nested distances between scenario trees"
)]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,
    #[arg(long)]
    pub tree_a: Option<PathBuf>,
    #[arg(long)]
    pub tree_b: Option<PathBuf>,
    /// Order of the distance
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    #[arg(long, default_value_t = 20.0)]
    pub lambda: f64,
    /// Comma-separated list for `sweep`; defaults to 0.5,1,2,...,30
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub output: OutputFormat,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Children per node at each stage, starting with 1 for the root
    #[arg(long, value_delimiter = ',')]
    pub branching: Option<Vec<usize>>,
    /// Second branching vector for `bench`
    #[arg(long, value_delimiter = ',')]
    pub branching_b: Option<Vec<usize>>,
    /// Write to this file instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "NESTED_SINKHORN_THREADS")]
    pub threads: Option<usize>,
}

/// Tabular output of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub command: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    fn new(command: Command, columns: &[&str]) -> Self {
        Self {
            command: command.name().to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(csv_cell).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let doc = json!({
            "command": self.command,
            "columns": self.columns,
            "rows": self.rows,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("table serialization cannot fail");
        s.push('\n');
        s
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => format_sig(n.as_f64().unwrap()),
        Value::Number(n) => n.to_string(),
        Value::String(s) if s.contains([',', '"', '\n']) => {
            format!("\"{}\"", s.replace('"', "\"\""))
        }
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Formats with 10 significant digits, fixed notation for moderate
/// exponents and scientific otherwise.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.9e}", x);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-5..10).contains(&exp) {
        let fixed = format!("{:.*}", (9 - exp) as usize, x);
        if fixed.contains('.') {
            fixed
                .trim_end_matches('0')
                .trim_end_matches('.')
                .to_string()
        } else {
            fixed
        }
    } else {
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{exp}")
    }
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

/// Result of a run: the table and whether every check passed.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub table: Table,
    pub success: bool,
}

impl RunConfig {
    fn options(&self) -> Result<SinkhornOptions> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max-iter must be positive".into()));
        }
        Ok(SinkhornOptions {
            tol: self.tol,
            max_iter: self.max_iter,
        })
    }

    fn trees(&self) -> Result<(ScenarioTree, ScenarioTree)> {
        let load = |p: &Option<PathBuf>, flag: &str| match p {
            Some(path) => ScenarioTree::from_path(path),
            None => Err(Error::InvalidArgument(format!(
                "{} requires --{flag}",
                self.command.name()
            ))),
        };
        Ok((load(&self.tree_a, "tree-a")?, load(&self.tree_b, "tree-b")?))
    }
}

fn report_rows(table: &mut Table, section: &str, report: &Report) {
    for c in &report.checks {
        table.push(vec![
            json!(section),
            json!(c.name),
            num(c.lhs),
            num(c.rhs),
            num(c.slack()),
            json!(c.passed),
        ]);
    }
}

/// Executes one command and returns its table. Errors are input or
/// computation failures; failed checks and unconverged runs come back with
/// `success = false`.
pub fn run(config: &RunConfig) -> Result<Outcome> {
    let cmd = config.command;
    let opts = config.options()?;
    let r = config.r;
    let lambda = config.lambda;
    match cmd {
        Command::Wasserstein => {
            let (a, b) = config.trees()?;
            let cost = cost_matrix(&a, &b, r)?;
            let start = Instant::now();
            let lp = solve_transport_lp(&a.leaf_probs(), &b.leaf_probs(), &cost)?;
            let time = start.elapsed().as_secs_f64();
            let mut table = Table::new(cmd, &["r", "wasserstein", "pivots", "time_exact"]);
            table.push(vec![
                num(r),
                num(lp.value.max(0.0).powf(1.0 / r)),
                json!(lp.pivots),
                num(time),
            ]);
            Ok(Outcome {
                table,
                success: true,
            })
        }
        Command::Sinkhorn => {
            let (a, b) = config.trees()?;
            let cost = cost_matrix(&a, &b, r)?;
            let start = Instant::now();
            let s = sinkhorn_auto(&a.leaf_probs(), &b.leaf_probs(), &cost, lambda, opts)?;
            let time = start.elapsed().as_secs_f64();
            let mut table = Table::new(
                cmd,
                &[
                    "lambda",
                    "d_s",
                    "de_s",
                    "entropy",
                    "iterations",
                    "marginal_error",
                    "converged",
                    "time_sinkhorn",
                ],
            );
            table.push(vec![
                num(lambda),
                num(s.d_s),
                num(s.de_s),
                num(s.entropy),
                json!(s.iterations),
                num(s.marginal_error),
                json!(s.converged),
                num(time),
            ]);
            Ok(Outcome {
                table,
                success: s.converged,
            })
        }
        Command::Nested => {
            let (a, b) = config.trees()?;
            let start = Instant::now();
            let res = nested_exact(&a, &b, r)?;
            let time = start.elapsed().as_secs_f64();
            let mut table = Table::new(cmd, &["r", "stages", "nd_w", "time_exact"]);
            table.push(vec![num(r), json!(res.stages()), num(res.value), num(time)]);
            Ok(Outcome {
                table,
                success: true,
            })
        }
        Command::NestedSinkhorn => {
            let (a, b) = config.trees()?;
            let start = Instant::now();
            let res = nested_sinkhorn(&a, &b, r, lambda, opts)?;
            let time = start.elapsed().as_secs_f64();
            let subproblems: Vec<String> = res
                .subproblems_per_stage()
                .iter()
                .map(usize::to_string)
                .collect();
            let mut table = Table::new(
                cmd,
                &[
                    "lambda",
                    "r",
                    "nd_s",
                    "nde_s",
                    "entropy",
                    "iterations",
                    "subproblems",
                    "converged",
                    "time_sinkhorn",
                ],
            );
            table.push(vec![
                num(lambda),
                num(r),
                num(res.value),
                num(res.value_with_entropy),
                num(res.total_entropy),
                json!(res.total_iterations()),
                json!(subproblems.join(";")),
                json!(res.converged),
                num(time),
            ]);
            Ok(Outcome {
                table,
                success: res.converged,
            })
        }
        Command::Sweep => {
            let (a, b) = config.trees()?;
            let lambdas = config.lambdas.clone().unwrap_or_else(default_lambda_grid);
            let rows = lambda_sweep(&a, &b, r, &lambdas, opts)?;
            let mut table = Table::new(
                cmd,
                &[
                    "lambda",
                    "nd_s",
                    "nde_s",
                    "nd_w",
                    "iterations",
                    "converged",
                    "time_exact",
                    "time_sinkhorn",
                ],
            );
            for row in &rows {
                table.push(vec![
                    num(row.lambda),
                    num(row.nd_s),
                    num(row.nde_s),
                    num(row.nd_w),
                    json!(row.iterations),
                    json!(row.converged),
                    num(row.time_exact),
                    num(row.time_sinkhorn),
                ]);
            }
            let success = rows.iter().all(|r| r.converged);
            Ok(Outcome { table, success })
        }
        Command::Verify => {
            let (a, b) = config.trees()?;
            let mut table = Table::new(cmd, &["section", "check", "lhs", "rhs", "slack", "passed"]);
            let exact = nested_exact(&a, &b, r)?;
            let sink = nested_sinkhorn(&a, &b, r, lambda, opts)?;
            if !sink.converged {
                table.push(vec![
                    json!("convergence"),
                    json!("nested sinkhorn converged"),
                    Value::Null,
                    Value::Null,
                    Value::Null,
                    json!(false),
                ]);
                return Ok(Outcome {
                    table,
                    success: false,
                });
            }
            let mut all = Report::default();
            if a.leaves().len() * b.leaves().len() <= VERIFY_FLAT_LP_PAIRS {
                let flat = flat_nested_lp(&a, &b, r)?;
                let rep = Report {
                    checks: vec![crate::report::Check::small(
                        "recursion equals flat linear program",
                        exact.entropic_power - flat.value_power,
                        1e-8,
                    )],
                };
                report_rows(&mut table, "tower", &rep);
                all.extend(rep);
            }
            for (section, rep) in [
                ("bounds", bound_report(&exact, &sink)?),
                ("equivalence", verify_entropic_equivalence(&sink)?),
                ("martingale", martingale_check(&sink)?.report),
            ] {
                report_rows(&mut table, section, &rep);
                all.extend(rep);
            }
            Ok(Outcome {
                table,
                success: all.all_passed(),
            })
        }
        Command::Gen => {
            let branching = config
                .branching
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("gen requires --branching".into()))?;
            let tree = generate_random_tree(branching, config.seed)?;
            let mut table = Table::new(cmd, &["seed", "stages", "nodes", "leaves"]);
            table.push(vec![
                json!(config.seed),
                json!(tree.height()),
                json!(tree.len()),
                json!(tree.leaves().len()),
            ]);
            let text = tree.to_json() + "\n";
            match &config.out {
                Some(path) => fs::write(path, text)?,
                None => io::stdout().write_all(text.as_bytes())?,
            }
            Ok(Outcome {
                table,
                success: true,
            })
        }
        Command::Bench => {
            let ba = config
                .branching
                .clone()
                .unwrap_or_else(|| vec![1, 2, 3, 2, 3, 4]);
            let bb = config
                .branching_b
                .clone()
                .unwrap_or_else(|| vec![1, 2, 2, 1, 3, 2]);
            let rows = bench(&ba, &bb, config.seed, lambda, r, opts)?;
            let mut table = Table::new(
                cmd,
                &[
                    "stages",
                    "leaves_a",
                    "leaves_b",
                    "nd_w",
                    "nd_s",
                    "nde_s",
                    "difference",
                    "converged",
                    "time_exact",
                    "time_sinkhorn",
                    "acceleration",
                ],
            );
            for row in &rows {
                table.push(vec![
                    json!(row.stages),
                    json!(row.leaves_a),
                    json!(row.leaves_b),
                    num(row.nd_w),
                    num(row.nd_s),
                    num(row.nde_s),
                    num(row.difference),
                    json!(row.converged),
                    num(row.time_exact),
                    num(row.time_sinkhorn),
                    num(row.acceleration),
                ]);
            }
            let success = rows.iter().all(|r| r.converged);
            Ok(Outcome { table, success })
        }
    }
}

/// Exit status for an error: 2 for bad input, 1 for a failed computation.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Unconverged(_)
        | Error::LpFailure(_)
        | Error::Infeasible
        | Error::KernelUnderflow(_)
        | Error::TooLarge { .. } => 1,
        _ => 2,
    }
}

/// Parses arguments, runs, prints. Returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(n) = config.threads {
        // A pool that is already initialized keeps its size.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let outcome = match run(&config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let text = match config.output {
        OutputFormat::Csv => outcome.table.to_csv(),
        OutputFormat::Json => outcome.table.to_json(),
    };
    // `gen` writes the tree to the destination and its summary to stderr.
    let written = match (config.command, &config.out) {
        (Command::Gen, _) => io::stderr().write_all(text.as_bytes()),
        (_, Some(path)) => fs::write(path, &text),
        (_, None) => io::stdout().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return 2;
    }
    if outcome.success {
        0
    } else {
        eprintln!("error: one or more checks failed or did not converge");
        1
    }
}
