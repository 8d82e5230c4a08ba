//! Single-agent mean-field approximation of the lattice dynamics.
//!
//! One agent evolves against the population average: with infected
//! fraction `f` and density `d` it meets `f·d` infected agents per tick,
//! so its effective infection probability is `p' = 1 − (1−p)^{f·d}` (real
//! exponent). Its state then follows a two-state Markov chain whose
//! stationary infected probability must equal `f` itself, giving the
//! self-consistency map
//!
//! ```text
//! phi(f) = 1 − q / (1 − (1−q)·(1−p)^{f·d})
//! ```
//!
//! whose nonzero fixed point (when it exists) is the mean-field
//! equilibrium infected fraction. `phi` is increasing and concave with
//! `phi(0) = 0`, so a nonzero fixed point exists exactly when
//! `phi'(0) > 1`, which solves in closed form to the epidemic threshold
//! `q0 = α / (1 + α)` with `α = d·ln(1/(1−p))`: the epidemic thrives for
//! `q < q0` and goes extinct for `q > q0`.

use alloc::vec::Vec;
use core::fmt;

/// Mean-field inputs. Density may exceed 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanFieldParams {
    pub infect_prob: f64,
    pub heal_prob: f64,
    pub density: f64,
}

/// Which side of the epidemic threshold the parameters fall on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Extinct,
    Epidemic,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::Extinct => write!(f, "extinct"),
            Regime::Epidemic => write!(f, "epidemic"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanFieldResult {
    /// Fixed point of the self-consistency map (0 when extinct).
    pub f_mf: f64,
    /// Closed-form epidemic threshold q0(p, d).
    pub q0: f64,
    /// Effective infection probability evaluated at the fixed point.
    pub p_prime_at_solution: f64,
    /// |phi(f_mf) − f_mf| actually achieved by the solver.
    pub residual: f64,
    pub regime: Regime,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeanFieldError {
    NonFinite { name: &'static str, value: f64 },
    OutOfRange { name: &'static str, value: f64 },
    /// p' = q = 0 leaves every distribution stationary.
    DegenerateChain,
    NoConvergence,
}

impl fmt::Display for MeanFieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeanFieldError::NonFinite { name, value } => {
                write!(f, "{name} must be finite; got {value}")
            }
            MeanFieldError::OutOfRange { name, value } => {
                write!(f, "{name} out of range: {value}")
            }
            MeanFieldError::DegenerateChain => {
                write!(f, "p' = q = 0: every distribution is stationary")
            }
            MeanFieldError::NoConvergence => write!(f, "fixed-point solver failed to converge"),
        }
    }
}

impl core::error::Error for MeanFieldError {}

/// Effective infection probability `1 − (1−p)^{f·d}` with a real
/// exponent. `f·d = 0` gives 0; `p = 1` with `f·d > 0` gives exactly 1.
pub fn p_prime(p: f64, f: f64, d: f64) -> f64 {
    1.0 - libm::pow(1.0 - p, f * d)
}

/// The two-state transition matrix, rows indexed (healthy, infected):
/// `[[1−p'+p'q, p'−p'q], [q, 1−q]]`. Each row sums to 1 up to rounding.
pub fn transition_matrix(p_prime: f64, q: f64) -> [[f64; 2]; 2] {
    [[1.0 - p_prime + p_prime * q, p_prime - p_prime * q], [q, 1.0 - q]]
}

/// Stationary distribution (prob_healthy, prob_infected) of the chain:
/// the normalized eigenvector of eigenvalue 1,
/// `( q/(p'+q−p'q), (p'−p'q)/(p'+q−p'q) )`.
pub fn stationary_distribution(p_prime: f64, q: f64) -> Result<(f64, f64), MeanFieldError> {
    let denom = p_prime + q - p_prime * q;
    if denom <= 0.0 {
        return Err(MeanFieldError::DegenerateChain);
    }
    Ok((q / denom, (p_prime - p_prime * q) / denom))
}

/// Closed-form epidemic threshold `q0 = α/(1+α)` with
/// `α = d·ln(1/(1−p))`. The limits are handled explicitly: `p = 0` or
/// `d = 0` give 0, `p = 1` (with `d > 0`) gives 1.
pub fn threshold_q0(p: f64, d: f64) -> f64 {
    if p <= 0.0 || d <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let alpha = d * -libm::log1p(-p);
    alpha / (1.0 + alpha)
}

/// The self-consistency map `phi(f) = 1 − q/(1 − (1−q)(1−p)^{f·d})`.
///
/// Defined for every `f` when `q > 0`; at `q = 0` it is 1 for `f·d > 0`
/// and undefined (0/0) at `f = 0` — the solver treats `q = 0` as an
/// analytic limit instead of evaluating the map there.
pub fn fixed_point_map(f: f64, params: &MeanFieldParams) -> f64 {
    let q = params.heal_prob;
    let survive_all = libm::pow(1.0 - params.infect_prob, f * params.density);
    // denominator 1 − (1−q)s arranged as (1−s) + q·s so that f = 0
    // (s = 1) yields exactly zero
    1.0 - q / ((1.0 - survive_all) + q * survive_all)
}

fn check_finite(name: &'static str, value: f64) -> Result<(), MeanFieldError> {
    if !value.is_finite() {
        return Err(MeanFieldError::NonFinite { name, value });
    }
    Ok(())
}

fn check_range(
    name: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
) -> Result<(), MeanFieldError> {
    check_finite(name, value)?;
    if value < lo || value > hi {
        return Err(MeanFieldError::OutOfRange { name, value });
    }
    Ok(())
}

/// Solves for the mean-field equilibrium infected fraction.
///
/// For `q >= q0(p, d)` the only fixed point is 0 and the regime is
/// extinct. Otherwise the unique root of `phi(f) − f` on (0, 1] is
/// bracketed by bisection until the residual drops to `tol`; the analytic
/// special cases `q = 0` (fixed point 1) and `p = 1` (map constant at
/// `1 − q`) bypass the iteration.
pub fn solve_fmf(params: &MeanFieldParams, tol: f64) -> Result<MeanFieldResult, MeanFieldError> {
    let p = params.infect_prob;
    let q = params.heal_prob;
    let d = params.density;
    check_range("infect_prob", p, 0.0, 1.0)?;
    check_range("heal_prob", q, 0.0, 1.0)?;
    check_finite("density", d)?;
    if d < 0.0 {
        return Err(MeanFieldError::OutOfRange { name: "density", value: d });
    }
    check_finite("tol", tol)?;
    if tol <= 0.0 {
        return Err(MeanFieldError::OutOfRange { name: "tol", value: tol });
    }

    let q0 = threshold_q0(p, d);
    if q >= q0 {
        return Ok(MeanFieldResult {
            f_mf: 0.0,
            q0,
            p_prime_at_solution: 0.0,
            residual: 0.0,
            regime: Regime::Extinct,
        });
    }

    // epidemic branch: q < q0 forces p > 0, d > 0 and q < 1
    let f_mf = if q == 0.0 {
        1.0
    } else if p >= 1.0 {
        1.0 - q
    } else {
        bisect_fixed_point(params, tol)?
    };
    let residual = if q == 0.0 {
        0.0 // phi ≡ 1 on (0, 1]
    } else {
        (fixed_point_map(f_mf, params) - f_mf).abs()
    };
    Ok(MeanFieldResult {
        f_mf,
        q0,
        p_prime_at_solution: p_prime(p, f_mf, d),
        residual,
        regime: Regime::Epidemic,
    })
}

/// Bisection of `g(f) = phi(f) − f` on [0, 1]. In the epidemic regime
/// `phi'(0) > 1`, so g is positive just right of 0 and `g(1) < 0`; the
/// sign of g at the trivial root f = 0 is treated as positive.
fn bisect_fixed_point(params: &MeanFieldParams, tol: f64) -> Result<f64, MeanFieldError> {
    let g = |f: f64| fixed_point_map(f, params) - f;
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    debug_assert!(g(hi) < 0.0);
    for _ in 0..4096 {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm.abs() <= tol {
            return Ok(mid);
        }
        if gm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(MeanFieldError::NoConvergence)
}

/// Tabulates `(p, q0(p, d))` over a grid, for CSV emission.
pub fn threshold_curve(d: f64, p_grid: &[f64]) -> Vec<(f64, f64)> {
    p_grid.iter().map(|&p| (p, threshold_q0(p, d))).collect()
}
