//! Experiment harness, CSV output and command-line front end for the
//! torus SIS simulator in `proxsim-core`.

pub mod cli;
pub mod experiments;
pub mod output;
