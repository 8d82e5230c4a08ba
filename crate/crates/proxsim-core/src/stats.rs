//! Time-series analysis for equilibrium Monte Carlo data: autocovariance,
//! integrated autocorrelation time with a self-consistent (Sokal) window,
//! and burn-in/equilibrium estimation with autocorrelation-aware error
//! bars.
//!
//! The autocorrelation time here is `tau = 1 + 2·Σ_{t=1..W} rho(t)` with
//! the window `W` chosen as the smallest integer satisfying
//! `W >= c·tau(W)` (default `c = 7`). Effective sample sizes and standard
//! errors follow the same convention: `n_eff = n / (2·tau)` and
//! `std_error = sqrt(c(0)·2·tau / n)`.

use alloc::vec::Vec;
use core::fmt;

/// Default Sokal windowing constant.
pub const DEFAULT_SOKAL_C: f64 = 7.0;

/// Minimum series length accepted by the public estimators.
pub const MIN_SERIES_LEN: usize = 100;

/// Shorter floor used for internal pilot estimates on series halves.
const PILOT_MIN_LEN: usize = 50;

/// A per-tick scalar trajectory. Never empty.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::EmptySeries);
        }
        Ok(TimeSeries { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // by construction
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StatsError {
    EmptySeries,
    SeriesTooShort { len: usize, min: usize },
    MaxLagTooLarge { max_lag: usize, len: usize },
    /// Zero variance: autocorrelation time is undefined.
    ConstantSeries,
    /// The Sokal window grew past half the series length.
    WindowNonConvergent { len: usize },
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsError::EmptySeries => write!(f, "time series must not be empty"),
            StatsError::SeriesTooShort { len, min } => {
                write!(f, "series length {len} below the required minimum {min}")
            }
            StatsError::MaxLagTooLarge { max_lag, len } => {
                write!(f, "max lag {max_lag} must be below the series length {len}")
            }
            StatsError::ConstantSeries => {
                write!(f, "constant series: autocorrelation time is undefined")
            }
            StatsError::WindowNonConvergent { len } => {
                write!(f, "series of length {len} is too short relative to its correlation time")
            }
        }
    }
}

impl core::error::Error for StatsError {}

/// Neumaier-compensated sum, so long trajectories do not lose mass to
/// rounding.
fn compensated_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn mean(xs: &[f64]) -> f64 {
    compensated_sum(xs) / xs.len() as f64
}

/// ĉ(lag) = (1/(n−lag)) Σ (x_i − x̄)(x_{i+lag} − x̄).
fn autocov_at(xs: &[f64], mu: f64, lag: usize) -> f64 {
    let n = xs.len();
    let mut sum = 0.0;
    let mut comp = 0.0;
    for i in 0..n - lag {
        let term = (xs[i] - mu) * (xs[i + lag] - mu);
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    (sum + comp) / (n - lag) as f64
}

fn is_constant(xs: &[f64]) -> bool {
    xs.iter().all(|&x| x == xs[0])
}

/// Autocovariance estimates for lags `0..=max_lag`. A constant series
/// yields all zeros (flagged by ĉ(0) = 0, not an error).
pub fn autocovariance(series: &TimeSeries, max_lag: usize) -> Result<Vec<f64>, StatsError> {
    let xs = series.values();
    if max_lag >= xs.len() {
        return Err(StatsError::MaxLagTooLarge { max_lag, len: xs.len() });
    }
    let mu = mean(xs);
    Ok((0..=max_lag).map(|lag| autocov_at(xs, mu, lag)).collect())
}

/// Integrated autocorrelation time plus the window it was computed with.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Iat {
    /// Integrated autocorrelation time, clamped below at 0.5.
    pub tau: f64,
    /// Self-consistent summation window actually used.
    pub window: usize,
}

fn iat_on(xs: &[f64], sokal_c: f64, min_len: usize) -> Result<Iat, StatsError> {
    let n = xs.len();
    if n < min_len {
        return Err(StatsError::SeriesTooShort { len: n, min: min_len });
    }
    let mu = mean(xs);
    let c0 = autocov_at(xs, mu, 0);
    if c0 <= 0.0 {
        return Err(StatsError::ConstantSeries);
    }
    let mut tau = 1.0;
    for window in 1..=n / 2 {
        tau += 2.0 * autocov_at(xs, mu, window) / c0;
        if window as f64 >= sokal_c * tau {
            return Ok(Iat { tau: tau.max(0.5), window });
        }
    }
    Err(StatsError::WindowNonConvergent { len: n })
}

/// Integrated autocorrelation time with the default Sokal constant.
/// Requires at least [`MIN_SERIES_LEN`] samples.
pub fn integrated_autocorrelation_time(series: &TimeSeries) -> Result<Iat, StatsError> {
    integrated_autocorrelation_time_with(series, DEFAULT_SOKAL_C)
}

/// Same, with an explicit windowing constant `c`: the window is the
/// smallest `W` with `W >= c·tau(W)`.
pub fn integrated_autocorrelation_time_with(
    series: &TimeSeries,
    sokal_c: f64,
) -> Result<Iat, StatsError> {
    iat_on(series.values(), sokal_c, MIN_SERIES_LEN)
}

/// Equilibrium summary of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquilibriumEstimate {
    pub tau: f64,
    /// Ticks discarded before averaging.
    pub burn_in: usize,
    /// Equilibrium mean over the retained ticks.
    pub mean: f64,
    pub std_error: f64,
    /// Retained length / (2·tau).
    pub n_effective: f64,
    /// True when the series ends at exactly 0 (the absorbing state).
    pub extinct: bool,
}

/// Burn-in plus equilibrium mean and error bar.
///
/// A series whose final value is exactly 0 is classified extinct (a
/// simulator trajectory that touches 0 stays there) and reported as mean
/// 0 with zero error. Otherwise a pilot autocorrelation time from the
/// second half of the series sets `burn_in = min(ceil(20·tau_pilot),
/// n/4)`, and tau, mean and standard error are recomputed on the
/// retained tail. Constant stretches (e.g. a trajectory pinned at 1)
/// report `tau = 0.5` with zero error instead of failing.
pub fn estimate_equilibrium(series: &TimeSeries) -> Result<EquilibriumEstimate, StatsError> {
    estimate_equilibrium_with(series, DEFAULT_SOKAL_C)
}

pub fn estimate_equilibrium_with(
    series: &TimeSeries,
    sokal_c: f64,
) -> Result<EquilibriumEstimate, StatsError> {
    let xs = series.values();
    let n = xs.len();
    if n < MIN_SERIES_LEN {
        return Err(StatsError::SeriesTooShort { len: n, min: MIN_SERIES_LEN });
    }

    if xs[n - 1] == 0.0 {
        return Ok(EquilibriumEstimate {
            tau: 0.5,
            burn_in: 0,
            mean: 0.0,
            std_error: 0.0,
            n_effective: n as f64,
            extinct: true,
        });
    }

    let pilot = &xs[n / 2..];
    let burn_in = if is_constant(pilot) {
        // the trajectory has frozen; discard the maximum allowed prefix
        // so any transient ahead of the plateau goes with it
        n / 4
    } else {
        let tau_pilot = iat_on(pilot, sokal_c, PILOT_MIN_LEN)?.tau;
        (libm::ceil(20.0 * tau_pilot) as usize).min(n / 4)
    };
    let retained = &xs[burn_in..];
    let len = retained.len();

    if is_constant(retained) {
        return Ok(EquilibriumEstimate {
            tau: 0.5,
            burn_in,
            mean: retained[0],
            std_error: 0.0,
            n_effective: len as f64,
            extinct: false,
        });
    }

    let iat = iat_on(retained, sokal_c, PILOT_MIN_LEN)?;
    let mu = mean(retained);
    let c0 = autocov_at(retained, mu, 0);
    Ok(EquilibriumEstimate {
        tau: iat.tau,
        burn_in,
        mean: mu,
        std_error: libm::sqrt(c0 * 2.0 * iat.tau / len as f64),
        n_effective: len as f64 / (2.0 * iat.tau),
        extinct: false,
    })
}
