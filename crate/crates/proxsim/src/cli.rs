//! Command-line front end.
//!
//! Subcommands: `simulate` (one trajectory), `meanfield` (threshold curve
//! or fixed-point solver), `threshold` (empirical q* by bisection),
//! `sweep` (equilibrium surface over a parameter grid) and `acor`
//! (autocorrelation analysis of a saved trajectory).
//!
//! Data goes to `--out` or standard output and is pure CSV behind a `#`
//! comment header; progress and diagnostics go to standard error only.
//! Every output file records the canonical command line that reproduces
//! its bytes on standard output. `--jobs` (parallelism cap) and `--out`
//! (delivery target) never change the bytes produced, so they are left
//! out of the recorded command.
//!
//! Exit codes: 0 success, 2 usage error (from argument parsing), 3
//! runtime failure, 4 IO failure.

use std::fmt;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use proxsim_core::meanfield::{solve_fmf, threshold_q0, MeanFieldParams};
use proxsim_core::rng::RngStream;
use proxsim_core::stats::{
    estimate_equilibrium_with, integrated_autocorrelation_time_with, TimeSeries, DEFAULT_SOKAL_C,
};
use proxsim_core::world::{agents_for_density, SimParams, MAX_LATTICE_SIDE};

use crate::experiments::{
    default_threshold_steps, find_q_star, run_trajectory, sweep, SweepConfig, ThresholdSearch,
};
use crate::output::{
    parse_trajectory_file, write_analysis_row, write_header, write_solver_rows, write_sweep_header,
    write_sweep_row, write_threshold_curve, write_threshold_header, write_threshold_row,
    HeaderMeta, RunKey,
};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Runtime(String),
    Io { path: String, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Runtime(msg) => write!(f, "{msg}"),
            CliError::Io { path, source } => write!(f, "{path}: {source}"),
        }
    }
}

impl std::error::Error for CliError {}

fn runtime(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Parser, Debug)]
#[command(
    name = "proxsim",
    version,
    about = "Monte Carlo simulator of proximity-spread infection among random-walking \
             agents on a torus lattice, with mean-field theory and threshold tools"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one trajectory and emit the per-tick infected fraction as CSV
    Simulate(SimulateArgs),
    /// Mean-field theory: threshold curve q0(p, d), or the fixed-point
    /// solver when --q is given
    Meanfield(MeanfieldArgs),
    /// Estimate the empirical epidemic threshold q*(p, d) by bisection
    /// over the healing probability
    Threshold(ThresholdArgs),
    /// Estimate the equilibrium infected fraction over a (p, q, d) grid
    Sweep(SweepArgs),
    /// Autocorrelation and equilibrium analysis of a saved trajectory
    Acor(AcorArgs),
}

/// Comma list of values, each either a number or a `lo:hi:step` range
/// (range points are snapped to a 1e-9 grid so lists print cleanly).
#[derive(Clone, Debug)]
pub struct GridValues(pub Vec<f64>);

impl GridValues {
    fn canonical(&self) -> String {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        parts.join(",")
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("`{s}` is not a number"))
}

fn snap(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

fn parse_grid_values(s: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            return Err("empty grid element".to_string());
        }
        match part.split_once(':') {
            None => out.push(parse_f64(part)?),
            Some((lo_s, rest)) => {
                let (hi_s, step_s) = rest
                    .split_once(':')
                    .ok_or_else(|| format!("`{part}`: ranges take the form lo:hi:step"))?;
                let lo = parse_f64(lo_s)?;
                let hi = parse_f64(hi_s)?;
                let step = parse_f64(step_s)?;
                if !step.is_finite() || step <= 0.0 {
                    return Err(format!("`{part}`: step must be positive"));
                }
                if hi < lo {
                    return Err(format!("`{part}`: upper bound below lower bound"));
                }
                let span = (hi - lo) / step;
                let k_max = if (span - span.round()).abs() < 1e-9 * (span.abs() + 1.0) {
                    span.round() as u64
                } else {
                    span.floor() as u64
                };
                for k in 0..=k_max {
                    out.push(snap(lo + k as f64 * step));
                }
            }
        }
    }
    Ok(out)
}

fn parse_probability(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if !v.is_finite() || !(0.0..=1.0).contains(&v) {
        return Err(format!("{v} is not in [0, 1]"));
    }
    Ok(v)
}

fn parse_probability_grid(s: &str) -> Result<GridValues, String> {
    let values = parse_grid_values(s)?;
    for &v in &values {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(format!("{v} is not in [0, 1]"));
        }
    }
    Ok(GridValues(values))
}

fn parse_density(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("{v} is not a valid density (must be finite and >= 0)"));
    }
    Ok(v)
}

fn parse_density_grid(s: &str) -> Result<GridValues, String> {
    let values = parse_grid_values(s)?;
    for &v in &values {
        if !v.is_finite() || v < 0.0 {
            return Err(format!("{v} is not a valid density (must be finite and >= 0)"));
        }
    }
    Ok(GridValues(values))
}

fn parse_lattice_side(s: &str) -> Result<u32, String> {
    let v: u32 = s.trim().parse().map_err(|_| format!("`{s}` is not a positive integer"))?;
    if v == 0 || v > MAX_LATTICE_SIDE {
        return Err(format!("lattice side must be in [1, {MAX_LATTICE_SIDE}]"));
    }
    Ok(v)
}

fn parse_positive_u64(s: &str) -> Result<u64, String> {
    let v: u64 = s.trim().parse().map_err(|_| format!("`{s}` is not a positive integer"))?;
    if v == 0 {
        return Err("value must be at least 1".to_string());
    }
    Ok(v)
}

fn parse_replicates(s: &str) -> Result<u32, String> {
    let v: u32 = s.trim().parse().map_err(|_| format!("`{s}` is not a positive integer"))?;
    if v == 0 {
        return Err("replicates must be at least 1".to_string());
    }
    Ok(v)
}

fn parse_resolution(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if !v.is_finite() || v <= 0.0 || v > 1.0 {
        return Err(format!("{v} is not a valid resolution (must be in (0, 1])"));
    }
    Ok(v)
}

fn parse_tolerance(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if !v.is_finite() || v <= 0.0 {
        return Err(format!("{v} is not a valid tolerance (must be positive)"));
    }
    Ok(v)
}

fn parse_jobs(s: &str) -> Result<usize, String> {
    let v: usize = s.trim().parse().map_err(|_| format!("`{s}` is not a positive integer"))?;
    if v == 0 {
        return Err("jobs must be at least 1".to_string());
    }
    Ok(v)
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Lattice side L
    #[arg(long, default_value_t = 128, value_parser = parse_lattice_side)]
    pub size: u32,
    /// Agent density d = N / L² (superseded by --agents)
    #[arg(long, default_value_t = 1.0, value_parser = parse_density)]
    pub density: f64,
    /// Explicit agent count N, overriding --density
    #[arg(long)]
    pub agents: Option<u32>,
    /// Per-pair infection probability p
    #[arg(long, default_value_t = 0.5, value_parser = parse_probability)]
    pub p: f64,
    /// Per-tick healing probability q
    #[arg(long, default_value_t = 0.05, value_parser = parse_probability)]
    pub q: f64,
    /// Initial infected fraction f0
    #[arg(long, default_value_t = 0.2, value_parser = parse_probability)]
    pub f0: f64,
    /// Number of ticks T
    #[arg(long, default_value_t = 100_000, value_parser = parse_positive_u64)]
    pub steps: u64,
    /// Master seed
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Record every k-th tick only
    #[arg(long, default_value_t = 1, value_parser = parse_positive_u64)]
    pub thin: u64,
    /// Output file (standard output when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MeanfieldArgs {
    /// Infection probability grid (value, comma list, or lo:hi:step)
    #[arg(long, default_value = "0.5", value_parser = parse_probability_grid)]
    pub p: GridValues,
    /// Healing probability grid; switches from threshold tabulation to
    /// the fixed-point solver
    #[arg(long, value_parser = parse_probability_grid)]
    pub q: Option<GridValues>,
    /// Density grid
    #[arg(long, default_value = "1", value_parser = parse_density_grid)]
    pub density: GridValues,
    /// Fixed-point residual tolerance
    #[arg(long, default_value_t = 1e-10, value_parser = parse_tolerance)]
    pub tol: f64,
    /// Output file (standard output when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ThresholdArgs {
    /// Infection probability grid
    #[arg(long, default_value = "0.5", value_parser = parse_probability_grid)]
    pub p: GridValues,
    /// Density grid
    #[arg(long, default_value = "1", value_parser = parse_density_grid)]
    pub density: GridValues,
    /// Lattice side L
    #[arg(long, default_value_t = 128, value_parser = parse_lattice_side)]
    pub size: u32,
    /// Replicates per bisection probe
    #[arg(long, default_value_t = 16, value_parser = parse_replicates)]
    pub replicates: u32,
    /// Probe horizon in ticks (default: 50 * size^2)
    #[arg(long, value_parser = parse_positive_u64)]
    pub steps: Option<u64>,
    /// Bracket width at which bisection stops
    #[arg(long, default_value_t = 0.00390625, value_parser = parse_resolution)]
    pub resolution: f64,
    /// Initial infected fraction f0
    #[arg(long, default_value_t = 0.2, value_parser = parse_probability)]
    pub f0: f64,
    /// Master seed
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads (outputs are identical for any value)
    #[arg(long, value_parser = parse_jobs)]
    pub jobs: Option<usize>,
    /// Output file (standard output when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Infection probability grid
    #[arg(long, default_value = "0.5", value_parser = parse_probability_grid)]
    pub p: GridValues,
    /// Healing probability grid
    #[arg(long, default_value = "0.05", value_parser = parse_probability_grid)]
    pub q: GridValues,
    /// Density grid
    #[arg(long, default_value = "1", value_parser = parse_density_grid)]
    pub density: GridValues,
    /// Lattice side L
    #[arg(long, default_value_t = 128, value_parser = parse_lattice_side)]
    pub size: u32,
    /// Ticks per replicate
    #[arg(long, default_value_t = 50_000, value_parser = parse_positive_u64)]
    pub steps: u64,
    /// Replicates per grid cell
    #[arg(long, default_value_t = 16, value_parser = parse_replicates)]
    pub replicates: u32,
    /// Initial infected fraction f0
    #[arg(long, default_value_t = 0.2, value_parser = parse_probability)]
    pub f0: f64,
    /// Master seed
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads (outputs are identical for any value)
    #[arg(long, value_parser = parse_jobs)]
    pub jobs: Option<usize>,
    /// Output file (standard output when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AcorArgs {
    /// Trajectory CSV to analyze
    pub input: PathBuf,
    /// Sokal windowing constant c (window = smallest W >= c * tau)
    #[arg(long = "sokal-c", default_value_t = DEFAULT_SOKAL_C, value_parser = parse_tolerance)]
    pub sokal_c: f64,
    /// Output file (standard output when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Meanfield(args) => run_meanfield(args),
        Command::Threshold(args) => run_threshold(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Acor(args) => run_acor(args),
    }
}

/// Runs `f` inside a dedicated pool of `jobs` threads, or on the global
/// pool when no cap was requested.
fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Runtime(format!("failed to build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn deliver(out: &Option<PathBuf>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| CliError::Io { path: path.display().to_string(), source: e }),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|()| stdout.flush())
                .map_err(|e| CliError::Io { path: "<stdout>".to_string(), source: e })
        }
    }
}

fn run_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let agents = args.agents.unwrap_or_else(|| agents_for_density(args.size, args.density));
    let params = SimParams {
        lattice_side: args.size,
        agent_count: agents,
        infect_prob: args.p,
        heal_prob: args.q,
        initial_infected_fraction: args.f0,
        max_steps: args.steps,
        seed: args.seed,
    };
    params.validate().map_err(runtime)?;
    let series = run_trajectory(&params, RngStream::derive(args.seed, 0)).map_err(runtime)?;

    let command = format!(
        "proxsim simulate --size {} --agents {} --p {} --q {} --f0 {} --steps {} --seed {} --thin {}",
        args.size, agents, args.p, args.q, args.f0, args.steps, args.seed, args.thin
    );
    let meta = HeaderMeta::new(command, args.seed)
        .param("size", args.size)
        .param("agents", agents)
        .param("density", params.density())
        .param("p", args.p)
        .param("q", args.q)
        .param("f0", args.f0)
        .param("steps", args.steps)
        .param("seed", args.seed)
        .param("thin", args.thin);
    let mut buf = Vec::new();
    write_header(&mut buf, &meta).expect("in-memory write");
    crate::output::write_trajectory(&mut buf, &series, args.thin).expect("in-memory write");
    deliver(&args.out, &buf)
}

fn run_meanfield(args: MeanfieldArgs) -> Result<(), CliError> {
    let mut buf = Vec::new();
    match &args.q {
        None => {
            let command = format!(
                "proxsim meanfield --p {} --density {} --tol {}",
                args.p.canonical(),
                args.density.canonical(),
                args.tol
            );
            let meta = HeaderMeta::new(command, 0)
                .param("p", args.p.canonical())
                .param("density", args.density.canonical())
                .param("tol", args.tol);
            write_header(&mut buf, &meta).expect("in-memory write");
            let mut rows = Vec::new();
            for &d in &args.density.0 {
                for &p in &args.p.0 {
                    rows.push((p, d, threshold_q0(p, d)));
                }
            }
            write_threshold_curve(&mut buf, rows.into_iter()).expect("in-memory write");
        }
        Some(q_grid) => {
            let command = format!(
                "proxsim meanfield --p {} --q {} --density {} --tol {}",
                args.p.canonical(),
                q_grid.canonical(),
                args.density.canonical(),
                args.tol
            );
            let meta = HeaderMeta::new(command, 0)
                .param("p", args.p.canonical())
                .param("q", q_grid.canonical())
                .param("density", args.density.canonical())
                .param("tol", args.tol);
            write_header(&mut buf, &meta).expect("in-memory write");
            let mut rows = Vec::new();
            for &p in &args.p.0 {
                for &q in &q_grid.0 {
                    for &d in &args.density.0 {
                        let params =
                            MeanFieldParams { infect_prob: p, heal_prob: q, density: d };
                        let result = solve_fmf(&params, args.tol).map_err(runtime)?;
                        rows.push((p, q, d, result));
                    }
                }
            }
            write_solver_rows(&mut buf, rows.into_iter()).expect("in-memory write");
        }
    }
    deliver(&args.out, &buf)
}

fn run_threshold(args: ThresholdArgs) -> Result<(), CliError> {
    let steps = args.steps.unwrap_or_else(|| default_threshold_steps(args.size));
    let command = format!(
        "proxsim threshold --p {} --density {} --size {} --replicates {} --steps {} --resolution {} --f0 {} --seed {}",
        args.p.canonical(),
        args.density.canonical(),
        args.size,
        args.replicates,
        steps,
        args.resolution,
        args.f0,
        args.seed
    );
    let meta = HeaderMeta::new(command, args.seed)
        .param("p", args.p.canonical())
        .param("density", args.density.canonical())
        .param("size", args.size)
        .param("replicates", args.replicates)
        .param("steps", steps)
        .param("resolution", args.resolution)
        .param("f0", args.f0)
        .param("seed", args.seed);

    let estimates = with_jobs(args.jobs, || -> Result<Vec<_>, CliError> {
        let mut estimates = Vec::new();
        for &p in &args.p.0 {
            for &d in &args.density.0 {
                let search = ThresholdSearch {
                    infect_prob: p,
                    density: d,
                    lattice_side: args.size,
                    replicates: args.replicates,
                    max_steps: steps,
                    resolution: args.resolution,
                    initial_infected_fraction: args.f0,
                    master_seed: args.seed,
                };
                let estimate = find_q_star(&search).map_err(runtime)?;
                eprintln!(
                    "threshold: p={p} d={d} -> q*={} [{} probes]",
                    estimate.q_star,
                    estimate.survival_counts.len()
                );
                estimates.push(estimate);
            }
        }
        Ok(estimates)
    })??;

    let mut buf = Vec::new();
    write_header(&mut buf, &meta).expect("in-memory write");
    write_threshold_header(&mut buf).expect("in-memory write");
    for estimate in &estimates {
        write_threshold_row(&mut buf, estimate).expect("in-memory write");
    }
    deliver(&args.out, &buf)
}

fn run_sweep(args: SweepArgs) -> Result<(), CliError> {
    let command = format!(
        "proxsim sweep --p {} --q {} --density {} --size {} --steps {} --replicates {} --f0 {} --seed {}",
        args.p.canonical(),
        args.q.canonical(),
        args.density.canonical(),
        args.size,
        args.steps,
        args.replicates,
        args.f0,
        args.seed
    );
    let meta = HeaderMeta::new(command, args.seed)
        .param("p", args.p.canonical())
        .param("q", args.q.canonical())
        .param("density", args.density.canonical())
        .param("size", args.size)
        .param("steps", args.steps)
        .param("replicates", args.replicates)
        .param("f0", args.f0)
        .param("seed", args.seed);

    let config = SweepConfig {
        p_grid: args.p.0.clone(),
        q_grid: args.q.0.clone(),
        d_grid: args.density.0.clone(),
        lattice_side: args.size,
        max_steps: args.steps,
        replicates: args.replicates,
        initial_infected_fraction: args.f0,
        master_seed: args.seed,
    };
    let total = config.p_grid.len() * config.q_grid.len() * config.d_grid.len();

    let mut buf = Vec::new();
    write_header(&mut buf, &meta).expect("in-memory write");
    write_sweep_header(&mut buf).expect("in-memory write");
    with_jobs(args.jobs, || -> Result<(), CliError> {
        let mut done = 0usize;
        sweep(&config, |row| {
            done += 1;
            eprintln!("sweep: {done}/{total} cells (p={} q={} d={})", row.p, row.q, row.d);
            write_sweep_row(&mut buf, args.size, args.seed, args.replicates, row)
                .expect("in-memory write");
        })
        .map_err(runtime)
    })??;
    deliver(&args.out, &buf)
}

fn run_acor(args: AcorArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| CliError::Io { path: args.input.display().to_string(), source: e })?;
    let parsed = parse_trajectory_file(&text)
        .map_err(|m| CliError::Runtime(format!("{}: {m}", args.input.display())))?;
    let series = TimeSeries::new(parsed.values.clone()).map_err(runtime)?;
    // the strict estimator first: degenerate (constant) input must fail
    // loudly rather than produce a row
    integrated_autocorrelation_time_with(&series, args.sokal_c).map_err(runtime)?;
    let estimate = estimate_equilibrium_with(&series, args.sokal_c).map_err(runtime)?;

    let size = parsed.header_u64("size").unwrap_or(0);
    let density = parsed.header_f64("density").or_else(|| {
        let agents = parsed.header_f64("agents")?;
        if size > 0 { Some(agents / (size * size) as f64) } else { None }
    });
    let key = RunKey {
        p: parsed.header_f64("p").unwrap_or(0.0),
        q: parsed.header_f64("q").unwrap_or(0.0),
        d: density.unwrap_or(0.0),
        lattice_side: size,
        seed: parsed.header_u64("seed").unwrap_or(0),
    };

    let command = format!(
        "proxsim acor {} --sokal-c {}",
        args.input.display(),
        args.sokal_c
    );
    let meta = HeaderMeta::new(command, key.seed)
        .param("input", args.input.display())
        .param("sokal_c", args.sokal_c);
    let mut buf = Vec::new();
    write_header(&mut buf, &meta).expect("in-memory write");
    write_analysis_row(&mut buf, &key, &estimate).expect("in-memory write");
    deliver(&args.out, &buf)
}
