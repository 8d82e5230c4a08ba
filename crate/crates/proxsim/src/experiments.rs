//! Replicated experiments on top of the simulator core: trajectory
//! production, equilibrium-surface estimation, and the empirical epidemic
//! threshold via bisection over the healing probability.
//!
//! Replicate `i` of a run with master seed `s` always draws from
//! `RngStream::derive(s, i)`, so results are independent of scheduling
//! and thread count; parallel maps collect in replicate order before any
//! aggregation.

use std::fmt;

use rayon::prelude::*;

use proxsim_core::rng::RngStream;
use proxsim_core::stats::{estimate_equilibrium, EquilibriumEstimate, StatsError, TimeSeries};
use proxsim_core::world::{agents_for_density, ParamError, SimParams, World};

#[derive(Clone, Debug, PartialEq)]
pub enum ExperimentError {
    Params(ParamError),
    Stats(StatsError),
    Config(String),
}

impl fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExperimentError::Params(e) => write!(f, "invalid parameters: {e}"),
            ExperimentError::Stats(e) => write!(f, "analysis failed: {e}"),
            ExperimentError::Config(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl std::error::Error for ExperimentError {}

impl From<ParamError> for ExperimentError {
    fn from(e: ParamError) -> Self {
        ExperimentError::Params(e)
    }
}

impl From<StatsError> for ExperimentError {
    fn from(e: StatsError) -> Self {
        ExperimentError::Stats(e)
    }
}

/// A batch of independent replicates of one parameter point. Replicate
/// `i` uses `RngStream::derive(master_seed, i)`.
#[derive(Clone, Copy, Debug)]
pub struct ReplicateSpec {
    pub base: SimParams,
    pub replicates: u32,
    pub master_seed: u64,
}

/// Aggregated equilibrium estimate over the surviving replicates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FInfEstimate {
    pub f_inf: f64,
    pub std_error: f64,
    pub surviving: u32,
}

/// Runs one full trajectory: uniform initialization, `max_steps` ticks,
/// the infected fraction recorded after every tick. Once the run is
/// absorbed the remaining entries are zeros without simulating further.
pub fn run_trajectory(params: &SimParams, stream: RngStream) -> Result<TimeSeries, ExperimentError> {
    let mut world = World::with_stream(*params, stream)?;
    let horizon = params.max_steps as usize;
    let mut values = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        if world.is_absorbed() {
            values.resize(horizon, 0.0);
            break;
        }
        world.tick();
        values.push(world.infected_fraction());
    }
    Ok(TimeSeries::new(values)?)
}

fn replicate_analyses(
    spec: &ReplicateSpec,
    stream_offset: u64,
) -> Result<Vec<EquilibriumEstimate>, ExperimentError> {
    if spec.replicates == 0 {
        return Err(ExperimentError::Config("replicates must be at least 1".into()));
    }
    let results: Vec<Result<EquilibriumEstimate, ExperimentError>> = (0..spec.replicates)
        .into_par_iter()
        .map(|i| {
            let stream = RngStream::derive(spec.master_seed, stream_offset + i as u64);
            let series = run_trajectory(&spec.base, stream)?;
            Ok(estimate_equilibrium(&series)?)
        })
        .collect();
    // surface the first failure in replicate order so the outcome does
    // not depend on scheduling
    results.into_iter().collect()
}

/// Equilibrium infected fraction over `spec.replicates` replicates:
/// the mean of the surviving replicates' means, with the combined
/// standard error taken in quadrature. If fewer than half the replicates
/// survive the point is reported as extinct (0 ± 0).
pub fn estimate_f_inf(spec: &ReplicateSpec) -> Result<FInfEstimate, ExperimentError> {
    estimate_f_inf_block(spec, 0)
}

/// Same as [`estimate_f_inf`] but drawing replicate streams from
/// `derive(master_seed, stream_offset + i)`; sweeps give each grid cell
/// its own block of stream ids (cell 0 coincides with a direct call).
pub fn estimate_f_inf_block(
    spec: &ReplicateSpec,
    stream_offset: u64,
) -> Result<FInfEstimate, ExperimentError> {
    let analyses = replicate_analyses(spec, stream_offset)?;
    let survivors: Vec<&EquilibriumEstimate> =
        analyses.iter().filter(|e| !e.extinct).collect();
    let surviving = survivors.len() as u32;
    if (surviving as u64) * 2 < spec.replicates as u64 {
        return Ok(FInfEstimate { f_inf: 0.0, std_error: 0.0, surviving });
    }
    let k = survivors.len() as f64;
    let mean = survivors.iter().map(|e| e.mean).sum::<f64>() / k;
    let quad = survivors.iter().map(|e| e.std_error * e.std_error).sum::<f64>();
    Ok(FInfEstimate { f_inf: mean, std_error: quad.sqrt() / k, surviving })
}

/// Counts replicates whose infection is still alive at the horizon
/// (absorbed runs stop early; they can never recover).
pub fn survival_probe(
    params: &SimParams,
    replicates: u32,
    master_seed: u64,
) -> Result<u32, ExperimentError> {
    if replicates == 0 {
        return Err(ExperimentError::Config("replicates must be at least 1".into()));
    }
    params.validate()?;
    let survived: Vec<bool> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let stream = RngStream::derive(master_seed, i as u64);
            let mut world = World::with_stream(*params, stream).expect("validated above");
            for _ in 0..params.max_steps {
                if world.is_absorbed() {
                    break;
                }
                world.tick();
            }
            !world.is_absorbed()
        })
        .collect();
    Ok(survived.iter().filter(|&&s| s).count() as u32)
}

/// Inputs of an empirical-threshold search at one `(p, d)` point.
#[derive(Clone, Copy, Debug)]
pub struct ThresholdSearch {
    pub infect_prob: f64,
    pub density: f64,
    pub lattice_side: u32,
    pub replicates: u32,
    pub max_steps: u64,
    pub resolution: f64,
    pub initial_infected_fraction: f64,
    pub master_seed: u64,
}

/// Default probe horizon: 50·L² ticks, scaling with the lattice cover
/// time.
pub fn default_threshold_steps(lattice_side: u32) -> u64 {
    50 * lattice_side as u64 * lattice_side as u64
}

/// One bisection probe: survivors out of `replicates` at healing
/// probability `q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurvivalProbe {
    pub q: f64,
    pub surviving: u32,
    pub replicates: u32,
}

/// Empirical threshold estimate with its bisection bracket and the full
/// probe record.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdEstimate {
    pub p: f64,
    pub d: f64,
    pub q_star: f64,
    pub bracket_low: f64,
    pub bracket_high: f64,
    pub survival_counts: Vec<SurvivalProbe>,
    pub resolution: f64,
}

/// Bisects the healing probability for the empirical threshold q*.
///
/// A probed q counts as epidemic when at least half the replicates
/// survive to the horizon. The endpoints need no probing: q = 0 always
/// survives (nothing heals) and q = 1 extinguishes in one tick (every
/// infected agent, including the freshly infected, heals). Probes reuse
/// the same replicate streams at every q, so repeated searches with one
/// master seed are identical and comparisons across nearby parameters
/// are seed-paired.
pub fn find_q_star(search: &ThresholdSearch) -> Result<ThresholdEstimate, ExperimentError> {
    if !search.resolution.is_finite() || search.resolution <= 0.0 {
        return Err(ExperimentError::Config(format!(
            "resolution must be positive; got {}",
            search.resolution
        )));
    }
    let agents = agents_for_density(search.lattice_side, search.density);
    if search.infect_prob <= 0.0 || search.density <= 0.0 || agents == 0 {
        // no epidemic is possible at any q
        return Ok(ThresholdEstimate {
            p: search.infect_prob,
            d: search.density,
            q_star: 0.0,
            bracket_low: 0.0,
            bracket_high: 0.0,
            survival_counts: Vec::new(),
            resolution: search.resolution,
        });
    }

    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut probes = Vec::new();
    while hi - lo > search.resolution {
        let mid = 0.5 * (lo + hi);
        let params = SimParams {
            lattice_side: search.lattice_side,
            agent_count: agents,
            infect_prob: search.infect_prob,
            heal_prob: mid,
            initial_infected_fraction: search.initial_infected_fraction,
            max_steps: search.max_steps,
            seed: search.master_seed,
        };
        let surviving = survival_probe(&params, search.replicates, search.master_seed)?;
        probes.push(SurvivalProbe { q: mid, surviving, replicates: search.replicates });
        if (surviving as u64) * 2 >= search.replicates as u64 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdEstimate {
        p: search.infect_prob,
        d: search.density,
        q_star: 0.5 * (lo + hi),
        bracket_low: lo,
        bracket_high: hi,
        survival_counts: probes,
        resolution: search.resolution,
    })
}

/// Grid sweep configuration. Cells are evaluated in (p, q, d) nested
/// order, p outermost; cell `j` draws its replicate streams from the id
/// block starting at `j·replicates`.
#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub p_grid: Vec<f64>,
    pub q_grid: Vec<f64>,
    pub d_grid: Vec<f64>,
    pub lattice_side: u32,
    pub max_steps: u64,
    pub replicates: u32,
    pub initial_infected_fraction: f64,
    pub master_seed: u64,
}

/// One sweep result row; failures are carried per row so a sweep never
/// aborts half way.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub p: f64,
    pub q: f64,
    pub d: f64,
    pub outcome: Result<FInfEstimate, String>,
}

/// Number of cells evaluated concurrently between output flushes.
const SWEEP_CHUNK: usize = 32;

/// Runs the Cartesian-product sweep, invoking `emit` for every row in
/// deterministic grid order as chunks complete. Row content depends only
/// on the configuration, never on scheduling.
pub fn sweep<F: FnMut(&SweepRow)>(
    config: &SweepConfig,
    mut emit: F,
) -> Result<(), ExperimentError> {
    if config.replicates == 0 {
        return Err(ExperimentError::Config("replicates must be at least 1".into()));
    }
    let mut cells = Vec::new();
    for &p in &config.p_grid {
        for &q in &config.q_grid {
            for &d in &config.d_grid {
                cells.push((cells.len() as u64, p, q, d));
            }
        }
    }
    for chunk in cells.chunks(SWEEP_CHUNK) {
        let rows: Vec<SweepRow> = chunk
            .par_iter()
            .map(|&(index, p, q, d)| {
                let outcome = sweep_cell(config, index, p, q, d).map_err(|e| e.to_string());
                SweepRow { p, q, d, outcome }
            })
            .collect();
        for row in &rows {
            emit(row);
        }
    }
    Ok(())
}

fn sweep_cell(
    config: &SweepConfig,
    index: u64,
    p: f64,
    q: f64,
    d: f64,
) -> Result<FInfEstimate, ExperimentError> {
    let agents = agents_for_density(config.lattice_side, d);
    let base = SimParams {
        lattice_side: config.lattice_side,
        agent_count: agents,
        infect_prob: p,
        heal_prob: q,
        initial_infected_fraction: config.initial_infected_fraction,
        max_steps: config.max_steps,
        seed: config.master_seed,
    };
    let spec = ReplicateSpec {
        base,
        replicates: config.replicates,
        master_seed: config.master_seed,
    };
    estimate_f_inf_block(&spec, index * config.replicates as u64)
}
