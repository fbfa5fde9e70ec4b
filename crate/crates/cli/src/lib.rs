//! Command-line front end: recovery from files, property checks, oracles,
//! experiments and plots.

pub mod plot;

use std::fmt::Debug;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use irls_core::experiments::{run_phase_transition, run_trace, ExperimentConfig, RNG_ID};
use irls_core::io::{format_vector, parse_matrix, parse_vector, phase_csv, trace_csv, FormatError};
use irls_core::irls::{irls_run, IrlsConfig, DEFAULT_MAX_ITERS, DEFAULT_WARMSTART};
use irls_core::linalg::{RealVector, SensingMatrix};
use irls_core::verify::{
    l1_oracle, nsp_gamma, rip_constant, sparse_oracle, NspMethod, EXACT_MAX_N, EXACT_MAX_NULL_DIM, MIN_NSP_SAMPLES,
};

use plot::PlotKind;

/// Sparse recovery by iteratively re-weighted least squares.
#[derive(Debug, Parser)]
#[command(name = "irls", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Recover a sparse vector from a matrix and right-hand side
    Recover(RecoverArgs),
    /// Compute a RIP or null space property constant of a matrix
    Check(CheckArgs),
    /// Run the k-sparse or l1 reference solvers
    Oracle(OracleArgs),
    /// Run one convergence trace from an experiment config
    Trace(TraceArgs),
    /// Run a phase-transition table from an experiment config
    Phase(PhaseArgs),
    /// Render a trace, ratio or phase CSV as SVG
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    /// Matrix file ("m N" header, then m rows)
    #[arg(long, value_name = "PATH")]
    pub matrix: PathBuf,
    /// Right-hand side vector file ("m" header, then one row)
    #[arg(long, value_name = "PATH")]
    pub rhs: PathBuf,
    /// Sparsity order of the epsilon update [default: floor(m / (2 ln(N/m))), clamped to [1, m-1]]
    #[arg(long = "K", value_name = "K")]
    pub big_k: Option<usize>,
    /// Exponent tau in (0, 1]
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Leading l1 iterations before switching to tau [default: 10 when tau < 1, else 0]
    #[arg(long, value_name = "N")]
    pub warmstart: Option<usize>,
    /// Iteration budget
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Stop once epsilon falls to this value
    #[arg(long, default_value = "1e-10")]
    pub eps_floor: f64,
    /// Stop once the relative l1 step falls to this value
    #[arg(long, default_value = "1e-9")]
    pub step_tol: f64,
    /// Known solution; fills the ref_error_l1 trace column
    #[arg(long, value_name = "PATH")]
    pub reference: Option<PathBuf>,
    /// Output JSON path [default: standard output]
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NspChoice {
    /// Exact enumeration when tau = 1 and the matrix is small enough, sampling otherwise
    Auto,
    /// Exact enumeration of kernel directions (tau = 1, N - m <= 4, N <= 16)
    Exact,
    /// Lower bound from random kernel samples
    MonteCarlo,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("property").required(true).args(["rip", "nsp"])))]
pub struct CheckArgs {
    /// Matrix file ("m N" header, then m rows)
    #[arg(long, value_name = "PATH")]
    pub matrix: PathBuf,
    /// RIP constant of order L
    #[arg(long, value_name = "L")]
    pub rip: Option<usize>,
    /// Null space property constant of order L
    #[arg(long, value_name = "L")]
    pub nsp: Option<usize>,
    /// Exponent for the tau-null space property
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// NSP evaluation method
    #[arg(long, value_enum, default_value_t = NspChoice::Auto)]
    pub method: NspChoice,
    /// Monte Carlo samples (at least 100000 are drawn)
    #[arg(long, default_value_t = MIN_NSP_SAMPLES)]
    pub samples: usize,
    /// Monte Carlo seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the report JSON here
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("oracle").required(true).args(["k", "l1"])))]
pub struct OracleArgs {
    /// Matrix file ("m N" header, then m rows)
    #[arg(long, value_name = "PATH")]
    pub matrix: PathBuf,
    /// Right-hand side vector file ("m" header, then one row)
    #[arg(long, value_name = "PATH")]
    pub rhs: PathBuf,
    /// Best k-sparse least-squares fit by support enumeration
    #[arg(long, value_name = "k")]
    pub k: Option<usize>,
    /// Minimum l1-norm solution by linear programming
    #[arg(long)]
    pub l1: bool,
    /// Output vector path [default: standard output]
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// Experiment config JSON
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Exponent tau in (0, 1]
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Leading l1 iterations when tau < 1 [default: warmstart_iters from the config]
    #[arg(long, value_name = "N")]
    pub warmstart: Option<usize>,
    /// Output trace CSV; run metadata goes to <PATH>.json
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    /// Experiment config JSON
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output table CSV; run metadata goes to <PATH>.json
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotChoice {
    /// log10 reference error against iteration
    Trace,
    /// Successive reference error ratios against iteration
    Ratios,
    /// Success rate against k, one line per method
    Phase,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Input CSV (trace or phase table)
    #[arg(long, value_name = "PATH")]
    pub csv: PathBuf,
    /// Chart to draw
    #[arg(long, value_enum)]
    pub kind: PlotChoice,
    /// Output SVG path
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

/// Failure of a subcommand, split by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad input files or flag values; exit status 2.
    Usage(String),
    /// Solver, oracle or experiment failure; exit status 1.
    Numerical { name: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical { .. } => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "error: {msg}"),
            CliError::Numerical { name, message } => write!(f, "error: {name}: {message}"),
        }
    }
}

/// Innermost enum variant name of an error's Debug form, e.g.
/// `Linalg(IllConditioned { .. })` gives `IllConditioned`.
pub fn variant_name(err: &impl Debug) -> String {
    let text = format!("{err:?}");
    let mut rest = text.as_str();
    loop {
        let end = rest.find(|c: char| !(c.is_alphanumeric() || c == '_')).unwrap_or(rest.len());
        let (name, tail) = rest.split_at(end);
        match tail.strip_prefix('(') {
            Some(inner) if inner.starts_with(|c: char| c.is_ascii_uppercase()) => rest = inner,
            _ => return name.to_string(),
        }
    }
}

fn numerical<E: Debug + std::fmt::Display>(err: E) -> CliError {
    CliError::Numerical { name: variant_name(&err), message: err.to_string() }
}

fn read(flag: &str, path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("--{flag} {}: {e}", path.display())))
}

fn write(flag: &str, path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Usage(format!("--{flag} {}: {e}", path.display())))
}

fn format_error(flag: &str, path: &Path, err: FormatError) -> CliError {
    match err {
        FormatError::Linalg(e) => numerical(e),
        other => CliError::Usage(format!("--{flag} {}: {other}", path.display())),
    }
}

fn load_matrix(path: &Path) -> Result<SensingMatrix, CliError> {
    parse_matrix(&read("matrix", path)?).map_err(|e| format_error("matrix", path, e))
}

fn load_vector(flag: &str, path: &Path) -> Result<RealVector, CliError> {
    parse_vector(&read(flag, path)?).map_err(|e| format_error(flag, path, e))
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let cfg: ExperimentConfig = serde_json::from_str(&read("config", path)?)
        .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
    cfg.validate().map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
    Ok(cfg)
}

fn emit(flag: &str, out: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write(flag, path, contents),
        None => {
            print!("{contents}");
            let _ = std::io::stdout().flush();
            Ok(())
        }
    }
}

fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Recover(a) => recover(a),
        Command::Check(a) => check(a),
        Command::Oracle(a) => oracle(a),
        Command::Trace(a) => trace(a),
        Command::Phase(a) => phase(a),
        Command::Plot(a) => plot_cmd(a),
    }
}

fn recover(a: RecoverArgs) -> Result<(), CliError> {
    let phi = load_matrix(&a.matrix)?;
    let y = load_vector("rhs", &a.rhs)?;
    let reference = a.reference.as_deref().map(|p| load_vector("reference", p)).transpose()?;
    let big_k = match a.big_k {
        Some(k) => k,
        None => {
            let k = IrlsConfig::heuristic_k(phi.rows(), phi.cols());
            eprintln!("K not given; using heuristic K = {k} (floor(m / (2 ln(N/m))))");
            k
        }
    };
    let cfg = IrlsConfig {
        warmstart_iters: a.warmstart.unwrap_or(if a.tau < 1.0 { DEFAULT_WARMSTART } else { 0 }),
        max_iters: a.max_iters,
        eps_floor: a.eps_floor,
        step_tol: a.step_tol,
        ..IrlsConfig::with_tau(big_k, a.tau)
    };
    let result = irls_run(&phi, &y, &cfg, reference.as_ref()).map_err(numerical)?;
    emit("out", a.out.as_deref(), &to_json(&result))?;
    eprintln!("termination: {} after {} iterations", result.termination, result.iterations());
    Ok(())
}

fn check(a: CheckArgs) -> Result<(), CliError> {
    let phi = load_matrix(&a.matrix)?;
    let report = match (a.rip, a.nsp) {
        (Some(l), _) => rip_constant(&phi, l).map_err(numerical)?,
        (None, Some(l)) => {
            let small = phi.cols() <= EXACT_MAX_N && phi.cols() - phi.rows() <= EXACT_MAX_NULL_DIM;
            let sampled = NspMethod::MonteCarlo { samples: a.samples, seed: a.seed };
            let method = match a.method {
                NspChoice::Exact => NspMethod::Exact,
                NspChoice::MonteCarlo => sampled,
                NspChoice::Auto if a.tau == 1.0 && small => NspMethod::Exact,
                NspChoice::Auto => sampled,
            };
            nsp_gamma(&phi, l, a.tau, method).map_err(numerical)?
        }
        (None, None) => unreachable!("clap requires --rip or --nsp"),
    };
    let json = to_json(&report);
    println!("{}", report.summary());
    print!("{json}");
    if let Some(path) = &a.out {
        write("out", path, &json)?;
    }
    Ok(())
}

fn oracle(a: OracleArgs) -> Result<(), CliError> {
    let phi = load_matrix(&a.matrix)?;
    let y = load_vector("rhs", &a.rhs)?;
    let x = match a.k {
        Some(k) => {
            let fit = sparse_oracle(&phi, &y, k).map_err(numerical)?;
            eprintln!("sparse oracle: support {:?}, residual {:e}", fit.support, fit.residual);
            fit.x
        }
        None => {
            let sol = l1_oracle(&phi, &y).map_err(numerical)?;
            let note = if sol.possibly_nonunique { " (possibly non-unique)" } else { "" };
            eprintln!("l1 oracle: norm {:e}{note}", sol.norm);
            sol.x
        }
    };
    emit("out", a.out.as_deref(), &format_vector(&x))
}

#[derive(Serialize)]
struct TraceMeta<'a> {
    rng: &'a str,
    experiment: &'a ExperimentConfig,
    tau: f64,
    solver: &'a IrlsConfig,
    termination: String,
    #[serde(rename = "A_bound")]
    a_bound: f64,
    rates: &'a [irls_core::irls::RateRow],
}

fn trace(a: TraceArgs) -> Result<(), CliError> {
    let cfg = load_config(&a.config)?;
    if !(a.tau > 0.0 && a.tau <= 1.0) {
        return Err(CliError::Usage(format!("--tau {}: must lie in (0, 1]", a.tau)));
    }
    let warmstart = a.warmstart.unwrap_or(cfg.warmstart_iters);
    let run = run_trace(&cfg, a.tau, warmstart).map_err(numerical)?;
    write("out", &a.out, &trace_csv(&run.result.trace))?;
    let meta = TraceMeta {
        rng: RNG_ID,
        experiment: &cfg,
        tau: a.tau,
        solver: &run.result.config,
        termination: run.result.termination.to_string(),
        a_bound: run.result.a_bound,
        rates: &run.rates,
    };
    write("out", &sidecar(&a.out), &to_json(&meta))?;
    eprintln!("termination: {} after {} iterations", run.result.termination, run.result.iterations());
    Ok(())
}

#[derive(Serialize)]
struct PhaseMeta<'a> {
    rng: &'a str,
    experiment: &'a ExperimentConfig,
}

fn phase(a: PhaseArgs) -> Result<(), CliError> {
    let cfg = load_config(&a.config)?;
    let table = run_phase_transition(&cfg).map_err(numerical)?;
    write("out", &a.out, &phase_csv(&table))?;
    write("out", &sidecar(&a.out), &to_json(&PhaseMeta { rng: &table.rng, experiment: &cfg }))?;
    for r in &table.rows {
        eprintln!("k = {:>3}  {:<16} success {:.3}", r.k, r.method, r.success_rate);
    }
    Ok(())
}

fn plot_cmd(a: PlotArgs) -> Result<(), CliError> {
    let kind = match a.kind {
        PlotChoice::Trace => PlotKind::Trace,
        PlotChoice::Ratios => PlotKind::Ratios,
        PlotChoice::Phase => PlotKind::Phase,
    };
    let text = read("csv", &a.csv)?;
    let chart = plot::chart(kind, &text).map_err(|e| match e {
        FormatError::SchemaMismatch(_) => numerical(e),
        other => CliError::Usage(format!("--csv {}: {other}", a.csv.display())),
    })?;
    write("out", &a.out, &plot::render(&chart))
}

#[cfg(test)]
mod tests {
    use super::*;
    use irls_core::irls::IrlsError;
    use irls_core::linalg::LinalgError;

    #[test]
    fn variant_names() {
        let e = IrlsError::Linalg(LinalgError::IllConditioned { estimate: 1e15 });
        assert_eq!(variant_name(&e), "IllConditioned");
        assert_eq!(variant_name(&IrlsError::InvalidConfig("x".into())), "InvalidConfig");
        assert_eq!(variant_name(&FormatError::SchemaMismatch("k".into())), "SchemaMismatch");
    }

    #[test]
    fn flag_defaults_match_solver_defaults() {
        use irls_core::irls::{DEFAULT_EPS_FLOOR, DEFAULT_STEP_TOL};
        let cli = Cli::parse_from(["irls", "recover", "--matrix", "a", "--rhs", "b"]);
        let Command::Recover(a) = cli.command else { panic!() };
        assert_eq!(a.eps_floor, DEFAULT_EPS_FLOOR);
        assert_eq!(a.step_tol, DEFAULT_STEP_TOL);
        assert_eq!(a.max_iters, DEFAULT_MAX_ITERS);
    }

    #[test]
    fn sidecar_appends_json() {
        assert_eq!(sidecar(Path::new("out/t.csv")), PathBuf::from("out/t.csv.json"));
    }
}
