//! Command-line front-end.
//!
//! ```text
//! mipart solve  --input joint.json --k 2 --loss entropy --constraint entropy --beta 6
//! mipart sweep  --input joint.csv  --k 2 --betas 0:10:0.5 --csv table.csv
//! mipart oracle --input joint.json --k 2 --beta 1 --method brute-force
//! mipart channel --prior 0.2,0.8 --means -1,1 --sigma 1 --range -10,10 --bins 200 \
//!     solve --k 2 --beta 6 --restarts 20 --seed 1
//! ```
//!
//! Reports are JSON (`schema: 1`); sweeps additionally produce a CSV trade-off table.
//! Exit status: 0 on success, 2 for configuration errors, 3 for errors raised while
//! loading or solving the instance.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::constraints::ConstraintSpec;
use crate::distributions::{awgn_binary_channel, joint_to_json, load_joint, ChannelSpec, JointDistribution};
use crate::error::Error;
use crate::impurity::ImpurityLoss;
use crate::oracle::{brute_force, contiguous_dp, OracleResult};
use crate::solver::{
    beta_sweep, best_within_budget, multi_restart_solve, score, sweep_csv, sweep_rows,
    ObjectiveSpec, PartitionAssignment, RestartOptions, SolveReport, DEFAULT_MAX_ITER,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUN: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mipart", version, about = "Minimum-impurity partitions under output constraints")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Multi-restart solve at a single beta.
    Solve(SolveArgs),
    /// Multi-restart solve over a beta grid.
    Sweep(SweepArgs),
    /// Exact global optimum (brute force, or contiguous DP for two inputs).
    Oracle(OracleArgs),
    /// Build the discretized binary-input Gaussian channel, then optionally run a command on it.
    Channel(ChannelArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Joint distribution file: JSON {"matrix": [[...]]} or header-less CSV, rows = X values.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Number of clusters K.
    #[arg(long)]
    pub k: usize,
    /// Impurity loss: entropy | gini.
    #[arg(long, default_value = "entropy")]
    pub loss: String,
    /// Output constraint: entropy | linear.
    #[arg(long, default_value = "entropy")]
    pub constraint: String,
    /// Per-cluster costs for the linear constraint, e.g. 1,2,3.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub costs: Option<Vec<f64>>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: f64,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Comma list (0,1,2.5) or inclusive range start:stop:step.
    #[arg(long)]
    pub betas: String,
    /// Report the lowest-impurity row whose constraint value is at most this bound.
    #[arg(long)]
    pub budget: Option<f64>,
    /// Trade-off table path; defaults to the report path with a .csv extension.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleMethod {
    BruteForce,
    Contiguous,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: f64,
    #[arg(long, value_enum, default_value_t = OracleMethod::BruteForce)]
    pub method: OracleMethod,
}

#[derive(Debug, Args)]
pub struct ChannelArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.8])]
    pub prior: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-1.0, 1.0])]
    pub means: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-10.0, 10.0])]
    pub range: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    pub bins: usize,
    /// Where to write the joint distribution when no command follows.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub then: Option<ChannelCommand>,
}

#[derive(Debug, Subcommand)]
pub enum ChannelCommand {
    Solve(SolveArgs),
    Sweep(SweepArgs),
    Oracle(OracleArgs),
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid `{field}`: {message}")]
    Config { field: String, message: String },
    #[error(transparent)]
    Run(#[from] Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn config(field: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Run(Error::InvalidParameter { .. }) => EXIT_CONFIG,
            CliError::Run(_) | CliError::Io { .. } => EXIT_RUN,
        }
    }
}

/// Parses `a,b,c` or `start:stop:step`; the stop value is included when it lands on
/// the grid within 1e-12.
pub fn parse_beta_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |msg: String| CliError::config("betas", msg);
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| bad(format!("`{s}`: {e}")))
    };
    let betas = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(bad(format!("range `{text}` must be start:stop:step")));
        };
        let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(bad(format!("range `{text}` needs step > 0 and stop >= start")));
        }
        let span = (stop - start) / step;
        let nearest = span.round();
        let (count, lands) = if (span - nearest).abs() <= 1e-12 {
            (nearest as usize, true)
        } else {
            (span.floor() as usize, false)
        };
        if count > 1_000_000 {
            return Err(bad(format!("range `{text}` has too many points")));
        }
        (0..=count)
            .map(|i| {
                if lands && i == count {
                    stop
                } else {
                    snap(start + i as f64 * step)
                }
            })
            .collect()
    } else {
        text.split(',').map(number).collect::<Result<Vec<_>, _>>()?
    };
    if betas.is_empty() {
        return Err(bad("empty grid".into()));
    }
    if let Some(b) = betas.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        return Err(bad(format!("beta {b} must be finite and non-negative")));
    }
    Ok(betas)
}

/// Removes accumulated grid noise (`0.1 * 23 = 2.3000000000000003`).
fn snap(x: f64) -> f64 {
    if x.abs() < 1e6 {
        (x * 1e12).round() / 1e12
    } else {
        x
    }
}

enum Source {
    File(PathBuf),
    Channel(ChannelSpec),
}

impl Source {
    fn describe(&self) -> serde_json::Value {
        match self {
            Source::File(path) => serde_json::json!({ "file": path.display().to_string() }),
            Source::Channel(spec) => serde_json::json!({ "channel": spec }),
        }
    }
}

fn resolve_source(problem: &ProblemArgs, channel: Option<ChannelSpec>) -> Result<Source, CliError> {
    match (&problem.input, channel) {
        (Some(path), None) => Ok(Source::File(path.clone())),
        (None, Some(spec)) => Ok(Source::Channel(spec)),
        (Some(_), Some(_)) => Err(CliError::config(
            "input",
            "give either --input or a channel spec, not both",
        )),
        (None, None) => Err(CliError::config("input", "missing --input")),
    }
}

fn load(source: &Source) -> Result<JointDistribution, CliError> {
    match source {
        Source::File(path) => {
            let parsed = load_joint(path).map_err(|e| CliError::config("input", format!("{}: {e}", path.display())))?;
            Ok(parsed?)
        }
        Source::Channel(spec) => Ok(awgn_binary_channel(spec)?),
    }
}

fn objective_spec(problem: &ProblemArgs, beta: f64) -> Result<ObjectiveSpec, CliError> {
    let loss: ImpurityLoss = problem
        .loss
        .parse()
        .map_err(|e: Error| CliError::config("loss", e.to_string()))?;
    let constraint = ConstraintSpec::from_token(&problem.constraint, problem.costs.clone())
        .map_err(|e| match e {
            Error::InvalidParameter { name, reason } => CliError::config(name, reason),
            other => other.into(),
        })?;
    constraint
        .validate_for(problem.k)
        .map_err(|e| CliError::config("costs", e.to_string()))?;
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(CliError::config("beta", format!("{beta} must be finite and non-negative")));
    }
    if problem.k == 0 {
        return Err(CliError::config("k", "need at least one cluster"));
    }
    Ok(ObjectiveSpec::new(loss, constraint, beta)?)
}

fn restart_options(run: &RunArgs) -> Result<RestartOptions, CliError> {
    if run.restarts == 0 {
        return Err(CliError::config("restarts", "need at least one restart"));
    }
    Ok(RestartOptions {
        restarts: run.restarts,
        max_iter: run.max_iter,
        seed: run.seed,
    })
}

#[derive(Serialize)]
struct Instance {
    n_inputs: usize,
    n_observations: usize,
    k: usize,
    source: serde_json::Value,
}

#[derive(Serialize)]
struct ObjectiveEcho<'a> {
    loss: &'static str,
    constraint: &'static str,
    costs: Option<&'a [f64]>,
    beta: f64,
}

fn echo(obj: &ObjectiveSpec) -> ObjectiveEcho<'_> {
    ObjectiveEcho {
        loss: obj.loss.token(),
        constraint: obj.constraint.token(),
        costs: match &obj.constraint {
            ConstraintSpec::Linear(costs) => Some(costs),
            ConstraintSpec::Entropy => None,
        },
        beta: obj.beta,
    }
}

/// Solver result as written in reports (labels 1-based).
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ResultRecord {
    pub labels: Vec<usize>,
    pub objective: f64,
    pub impurity: f64,
    pub constraint: f64,
    pub mutual_info_bits: f64,
    pub output_entropy_bits: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restarts_used: usize,
    pub best_restart_index: usize,
}

impl From<&SolveReport> for ResultRecord {
    fn from(r: &SolveReport) -> Self {
        ResultRecord {
            labels: r.assignment.one_based(),
            objective: r.objective,
            impurity: r.impurity,
            constraint: r.constraint,
            mutual_info_bits: r.mutual_info_bits,
            output_entropy_bits: r.output_entropy_bits,
            iterations: r.iterations,
            converged: r.converged,
            restarts_used: r.restarts_used,
            best_restart_index: r.best_restart_index,
        }
    }
}

#[derive(Serialize)]
struct OracleRecord {
    method: &'static str,
    labels: Vec<usize>,
    objective: f64,
    impurity: f64,
    constraint: f64,
    mutual_info_bits: f64,
    output_entropy_bits: f64,
    evaluated: u64,
}

fn oracle_record(jd: &JointDistribution, obj: &ObjectiveSpec, method: OracleMethod, r: &OracleResult) -> OracleRecord {
    let stats = crate::solver::compute_stats(jd, &r.assignment, obj);
    let parts = stats.objective(obj);
    OracleRecord {
        method: match method {
            OracleMethod::BruteForce => "brute-force",
            OracleMethod::Contiguous => "contiguous",
        },
        labels: r.assignment.one_based(),
        objective: r.objective,
        impurity: parts.impurity,
        constraint: parts.constraint,
        mutual_info_bits: stats.mutual_information_bits(),
        output_entropy_bits: stats.output_entropy_bits(),
        evaluated: r.evaluated,
    }
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn write_report(path: Option<&Path>, report: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    write_text(path, &text)
}

fn run_solve(args: &SolveArgs, channel: Option<ChannelSpec>) -> Result<(), CliError> {
    let started = Instant::now();
    let source = resolve_source(&args.problem, channel)?;
    let obj = objective_spec(&args.problem, args.beta)?;
    let opts = restart_options(&args.run)?;
    let jd = load(&source)?;
    let report = multi_restart_solve(&jd, args.problem.k, &obj, opts)?;
    let json = serde_json::json!({
        "schema": SCHEMA_VERSION,
        "command": "solve",
        "instance": instance(&jd, args.problem.k, &source),
        "objective_spec": echo(&obj),
        "seed": opts.seed,
        "restarts": opts.restarts,
        "max_iter": opts.max_iter,
        "result": ResultRecord::from(&report),
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    write_report(args.problem.output.as_deref(), &json)
}

fn instance(jd: &JointDistribution, k: usize, source: &Source) -> Instance {
    Instance {
        n_inputs: jd.n_inputs(),
        n_observations: jd.n_observations(),
        k,
        source: source.describe(),
    }
}

fn run_sweep(args: &SweepArgs, channel: Option<ChannelSpec>) -> Result<(), CliError> {
    let started = Instant::now();
    let source = resolve_source(&args.problem, channel)?;
    let betas = parse_beta_grid(&args.betas)?;
    let obj = objective_spec(&args.problem, betas[0])?;
    let opts = restart_options(&args.run)?;
    if let Some(b) = args.budget {
        if !b.is_finite() {
            return Err(CliError::config("budget", "must be finite"));
        }
    }
    let jd = load(&source)?;
    let reports = beta_sweep(&jd, args.problem.k, obj.loss, &obj.constraint, &betas, opts)?;
    let rows = sweep_rows(&betas, &reports);
    let selected = args.budget.and_then(|budget| {
        best_within_budget(reports.iter().map(|r| (r.impurity, r.constraint)), budget)
    });
    let results: Vec<serde_json::Value> = betas
        .iter()
        .zip(&reports)
        .map(|(beta, r)| serde_json::json!({ "beta": beta, "result": ResultRecord::from(r) }))
        .collect();
    let json = serde_json::json!({
        "schema": SCHEMA_VERSION,
        "command": "sweep",
        "instance": instance(&jd, args.problem.k, &source),
        "objective_spec": echo(&obj),
        "betas": betas,
        "seed": opts.seed,
        "restarts": opts.restarts,
        "max_iter": opts.max_iter,
        "results": results,
        "budget": args.budget,
        "selected": selected.map(|i| serde_json::json!({ "index": i, "beta": betas[i] })),
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    let csv_path = args
        .csv
        .clone()
        .or_else(|| args.problem.output.as_ref().map(|p| p.with_extension("csv")));
    if let Some(path) = &csv_path {
        write_text(Some(path), &sweep_csv(&rows))?;
    }
    write_report(args.problem.output.as_deref(), &json)
}

fn run_oracle(args: &OracleArgs, channel: Option<ChannelSpec>) -> Result<(), CliError> {
    let started = Instant::now();
    let source = resolve_source(&args.problem, channel)?;
    let obj = objective_spec(&args.problem, args.beta)?;
    let jd = load(&source)?;
    let k = args.problem.k;
    let result = match args.method {
        OracleMethod::BruteForce => brute_force(&jd, k, &obj)?,
        OracleMethod::Contiguous => contiguous_dp(&jd, k, &obj)?,
    };
    let json = serde_json::json!({
        "schema": SCHEMA_VERSION,
        "command": "oracle",
        "instance": instance(&jd, k, &source),
        "objective_spec": echo(&obj),
        "result": oracle_record(&jd, &obj, args.method, &result),
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    write_report(args.problem.output.as_deref(), &json)
}

fn channel_spec(args: &ChannelArgs) -> Result<ChannelSpec, CliError> {
    let pair = |field: &str, v: &[f64]| -> Result<[f64; 2], CliError> {
        <[f64; 2]>::try_from(v).map_err(|_| CliError::config(field, "expected two comma-separated values"))
    };
    let range = pair("range", &args.range)?;
    let spec = ChannelSpec {
        prior: pair("prior", &args.prior)?,
        means: pair("means", &args.means)?,
        sigma: args.sigma,
        range: (range[0], range[1]),
        bins: args.bins,
    };
    spec.validate().map_err(|e| match e {
        Error::InvalidParameter { name, reason } => CliError::config(name, reason),
        other => other.into(),
    })?;
    Ok(spec)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(args) => run_solve(&args, None),
        Command::Sweep(args) => run_sweep(&args, None),
        Command::Oracle(args) => run_oracle(&args, None),
        Command::Channel(args) => {
            let spec = channel_spec(&args)?;
            match &args.then {
                Some(ChannelCommand::Solve(a)) => run_solve(a, Some(spec)),
                Some(ChannelCommand::Sweep(a)) => run_sweep(a, Some(spec)),
                Some(ChannelCommand::Oracle(a)) => run_oracle(a, Some(spec)),
                None => {
                    let jd = awgn_binary_channel(&spec)?;
                    write_text(args.output.as_deref(), &joint_to_json(&jd))
                }
            }
        }
    }
}

/// Re-scores 1-based report labels; used to check that reports are self-consistent.
pub fn rescore(
    jd: &JointDistribution,
    labels: &[usize],
    k: usize,
    obj: &ObjectiveSpec,
) -> Result<f64, Error> {
    let a = PartitionAssignment::from_one_based(labels, k)?;
    Ok(score(jd, &a, obj).value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_grid_syntax() {
        assert_eq!(parse_beta_grid("0,1,2.5").unwrap(), vec![0.0, 1.0, 2.5]);
        assert_eq!(parse_beta_grid("0:1:0.25").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        // 0.1 steps do not land exactly in binary but are within 1e-12
        let g = parse_beta_grid("0:1:0.1").unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert_eq!(parse_beta_grid("0:1:0.3").unwrap().len(), 4);
        assert_eq!(parse_beta_grid("0:10:0.1").unwrap()[23], 2.3);
        assert!(parse_beta_grid("1:0:0.1").is_err());
        assert!(parse_beta_grid("0:1:0").is_err());
        assert!(parse_beta_grid("0:1").is_err());
        assert!(parse_beta_grid("1,-2").is_err());
        assert!(parse_beta_grid("a").is_err());
    }

    #[test]
    fn config_errors_name_the_field() {
        let cli = Cli::try_parse_from([
            "mipart", "solve", "--input", "x.json", "--k", "2", "--constraint", "linear", "--beta", "1",
        ])
        .unwrap();
        let err = run(cli).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_CONFIG);
        assert!(err.to_string().contains("costs"), "{err}");

        let cli = Cli::try_parse_from(["mipart", "solve", "--k", "2", "--beta", "1"]).unwrap();
        let err = run(cli).unwrap_err();
        assert!(err.to_string().contains("input"));
        assert_eq!(err.exit_code(), EXIT_CONFIG);
    }

    #[test]
    fn channel_flags_accept_negative_values() {
        let cli = Cli::try_parse_from([
            "mipart", "channel", "--prior", "0.2,0.8", "--means", "-1,1", "--sigma", "1", "--range",
            "-10,10", "--bins", "200", "solve", "--k", "2", "--beta", "6",
        ])
        .unwrap();
        let Command::Channel(args) = cli.command else {
            panic!("expected channel");
        };
        assert_eq!(args.means, vec![-1.0, 1.0]);
        assert_eq!(args.range, vec![-10.0, 10.0]);
        assert!(matches!(args.then, Some(ChannelCommand::Solve(_))));
    }
}
