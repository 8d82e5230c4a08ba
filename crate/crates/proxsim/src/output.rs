//! CSV emission and parsing.
//!
//! Every output file starts with a comment header carrying the tool
//! version, the canonical command line that produced the file, the master
//! seed, and the full parameter set as `# key = value` lines. Data
//! channels stay pure CSV: one header line naming the columns, then
//! newline-terminated rows with `.` as the decimal separator. Headers
//! contain nothing volatile, so rerunning the recorded command reproduces
//! the file byte for byte.

use std::collections::BTreeMap;
use std::io::{self, Write};

use proxsim_core::meanfield::MeanFieldResult;
use proxsim_core::stats::{EquilibriumEstimate, TimeSeries};

use crate::experiments::{SweepRow, ThresholdEstimate};

/// Header metadata common to all output files.
#[derive(Clone, Debug)]
pub struct HeaderMeta {
    /// Canonical command line reproducing the file.
    pub command: String,
    pub master_seed: u64,
    /// `key = value` parameter pairs, already stringified.
    pub params: Vec<(String, String)>,
}

impl HeaderMeta {
    pub fn new(command: String, master_seed: u64) -> Self {
        HeaderMeta { command, master_seed, params: Vec::new() }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }
}

pub fn write_header<W: Write>(w: &mut W, meta: &HeaderMeta) -> io::Result<()> {
    writeln!(w, "# proxsim {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "# command: {}", meta.command)?;
    writeln!(w, "# master_seed = {}", meta.master_seed)?;
    for (key, value) in &meta.params {
        writeln!(w, "# {key} = {value}")?;
    }
    Ok(())
}

/// Trajectory rows `tick,f`, keeping every `thin`-th tick. The series
/// holds the fraction after ticks 1..=T.
pub fn write_trajectory<W: Write>(w: &mut W, series: &TimeSeries, thin: u64) -> io::Result<()> {
    writeln!(w, "tick,f")?;
    for (i, value) in series.values().iter().enumerate() {
        let tick = i as u64 + 1;
        if tick.is_multiple_of(thin) {
            writeln!(w, "{tick},{value}")?;
        }
    }
    Ok(())
}

/// Mean-field threshold rows `p,d,q0`.
pub fn write_threshold_curve<W: Write>(
    w: &mut W,
    rows: impl Iterator<Item = (f64, f64, f64)>,
) -> io::Result<()> {
    writeln!(w, "p,d,q0")?;
    for (p, d, q0) in rows {
        writeln!(w, "{p},{d},{q0}")?;
    }
    Ok(())
}

/// Mean-field solver rows `p,q,d,f_mf,regime,residual`.
pub fn write_solver_rows<W: Write>(
    w: &mut W,
    rows: impl Iterator<Item = (f64, f64, f64, MeanFieldResult)>,
) -> io::Result<()> {
    writeln!(w, "p,q,d,f_mf,regime,residual")?;
    for (p, q, d, r) in rows {
        writeln!(w, "{p},{q},{d},{},{},{}", r.f_mf, r.regime, r.residual)?;
    }
    Ok(())
}

/// Context identifying the run an analysis row belongs to.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunKey {
    pub p: f64,
    pub q: f64,
    pub d: f64,
    pub lattice_side: u64,
    pub seed: u64,
}

/// Analysis row `p,q,d,L,seed,tau,burn_in,f_inf,std_err,n_eff,extinct`.
pub fn write_analysis_row<W: Write>(
    w: &mut W,
    key: &RunKey,
    est: &EquilibriumEstimate,
) -> io::Result<()> {
    writeln!(w, "p,q,d,L,seed,tau,burn_in,f_inf,std_err,n_eff,extinct")?;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{},{},{}",
        key.p,
        key.q,
        key.d,
        key.lattice_side,
        key.seed,
        est.tau,
        est.burn_in,
        est.mean,
        est.std_error,
        est.n_effective,
        est.extinct
    )
}

pub fn write_sweep_header<W: Write>(w: &mut W) -> io::Result<()> {
    writeln!(w, "p,q,d,L,seed,replicates,f_inf,std_err,surviving,status")
}

pub fn write_sweep_row<W: Write>(
    w: &mut W,
    lattice_side: u32,
    seed: u64,
    replicates: u32,
    row: &SweepRow,
) -> io::Result<()> {
    match &row.outcome {
        Ok(est) => writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},ok",
            row.p,
            row.q,
            row.d,
            lattice_side,
            seed,
            replicates,
            est.f_inf,
            est.std_error,
            est.surviving
        ),
        Err(message) => writeln!(
            w,
            "{},{},{},{},{},{},,,,{}",
            row.p,
            row.q,
            row.d,
            lattice_side,
            seed,
            replicates,
            message.replace(',', ";")
        ),
    }
}

pub fn write_threshold_header<W: Write>(w: &mut W) -> io::Result<()> {
    writeln!(w, "p,d,q_star,bracket_low,bracket_high,resolution,probes")
}

/// Threshold row; the probe record is packed as `q:surviving/replicates`
/// triples joined with `;` so it stays a single CSV field.
pub fn write_threshold_row<W: Write>(w: &mut W, est: &ThresholdEstimate) -> io::Result<()> {
    let probes: Vec<String> = est
        .survival_counts
        .iter()
        .map(|probe| format!("{}:{}/{}", probe.q, probe.surviving, probe.replicates))
        .collect();
    writeln!(
        w,
        "{},{},{},{},{},{},{}",
        est.p,
        est.d,
        est.q_star,
        est.bracket_low,
        est.bracket_high,
        est.resolution,
        probes.join(";")
    )
}

/// A parsed trajectory file: header map plus the data column.
#[derive(Clone, Debug)]
pub struct TrajectoryFile {
    pub header: BTreeMap<String, String>,
    pub values: Vec<f64>,
}

impl TrajectoryFile {
    pub fn header_f64(&self, key: &str) -> Option<f64> {
        self.header.get(key).and_then(|v| v.parse().ok())
    }

    pub fn header_u64(&self, key: &str) -> Option<u64> {
        self.header.get(key).and_then(|v| v.parse().ok())
    }
}

/// Parses a trajectory CSV as written by `simulate`: `#`-comment header
/// lines (`key = value` pairs are collected), an optional column-name
/// row, then one value per line. The column named `f` is used when
/// present, otherwise the last column.
pub fn parse_trajectory_file(text: &str) -> Result<TrajectoryFile, String> {
    let mut header = BTreeMap::new();
    let mut values = Vec::new();
    let mut column: Option<usize> = None;
    let mut saw_data_header = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                header.insert(key.trim().to_string(), value.trim().to_string());
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parsed: Option<Vec<f64>> =
            fields.iter().map(|f| f.trim().parse::<f64>().ok()).collect();
        match parsed {
            Some(numbers) => {
                let idx = *column.get_or_insert(numbers.len() - 1);
                let value = numbers.get(idx).copied().ok_or_else(|| {
                    format!("line {}: expected at least {} columns", lineno + 1, idx + 1)
                })?;
                values.push(value);
            }
            None if !saw_data_header => {
                // the column-name row; pick the `f` column if named
                saw_data_header = true;
                column = Some(
                    fields
                        .iter()
                        .position(|name| name.trim() == "f")
                        .unwrap_or(fields.len() - 1),
                );
            }
            None => {
                return Err(format!("line {}: unparseable data row `{line}`", lineno + 1));
            }
        }
    }
    if values.is_empty() {
        return Err("no data rows found".to_string());
    }
    Ok(TrajectoryFile { header, values })
}
