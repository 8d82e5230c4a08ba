//! Core algorithms for a discrete-time SIS epidemic among random-walking
//! agents on a torus lattice.
//!
//! The crate is split along the natural seams of the problem:
//!
//! * [`rng`] — deterministic, splittable random-number streams; every
//!   trajectory is a pure function of `(params, stream)`.
//! * [`world`] — the exact stochastic dynamics: movement, per-site
//!   pairwise infection trials, healing.
//! * [`meanfield`] — the single-agent mean-field approximation: effective
//!   infection probability, two-state chain, fixed point and epidemic
//!   threshold.
//! * [`stats`] — integrated autocorrelation time and equilibrium
//!   estimation for simulated time series.
//!
//! Everything here is `no_std` (with `alloc`); IO, parallel execution and
//! the command-line front end live in the companion `proxsim` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod meanfield;
pub mod rng;
pub mod stats;
pub mod world;
