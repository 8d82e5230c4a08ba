//! Oracle-backed integration tests of the experiment layer.

use proxsim::experiments::{
    estimate_f_inf, find_q_star, run_trajectory, survival_probe, sweep, ReplicateSpec,
    SweepConfig, ThresholdSearch,
};
use proxsim_core::rng::RngStream;
use proxsim_core::world::SimParams;

fn params(l: u32, n: u32, p: f64, q: f64, f0: f64, steps: u64, seed: u64) -> SimParams {
    SimParams {
        lattice_side: l,
        agent_count: n,
        infect_prob: p,
        heal_prob: q,
        initial_infected_fraction: f0,
        max_steps: steps,
        seed,
    }
}

#[test]
fn trajectory_without_initial_infection_is_identically_zero() {
    let p = params(16, 256, 0.9, 0.1, 0.0, 500, 3);
    let series = run_trajectory(&p, RngStream::derive(3, 0)).unwrap();
    assert_eq!(series.len(), 500);
    assert!(series.values().iter().all(|&v| v == 0.0));
}

#[test]
fn pure_death_process_dies_within_the_oracle_bound() {
    // p = 0: infections only disappear; extinction by 10·(1/q)·ln N ticks
    // in at least 99 of 100 seeded runs
    let n = 1000u32;
    let q = 0.1;
    let bound = (10.0 * (1.0 / q) * (n as f64).ln()).ceil() as usize; // ≈ 691
    let mut extinct_in_time = 0;
    for seed in 0..100u64 {
        let p = params(32, n, 0.0, q, 0.2, 1000, seed);
        let series = run_trajectory(&p, RngStream::derive(seed, 0)).unwrap();
        // monotone nonincreasing while alive
        for w in series.values().windows(2) {
            assert!(w[1] <= w[0], "infected fraction rose with p = 0");
        }
        if let Some(first_zero) = series.values().iter().position(|&v| v == 0.0) {
            if first_zero < bound {
                extinct_in_time += 1;
            }
        }
    }
    assert!(extinct_in_time >= 99, "only {extinct_in_time}/100 runs died in time");
}

#[test]
fn trajectory_reaches_a_nonzero_plateau_below_threshold() {
    // deep in the epidemic regime the series settles at a nonzero level
    let p = params(128, 16384, 0.5, 0.05, 0.2, 100_000, 7);
    let series = run_trajectory(&p, RngStream::derive(7, 0)).unwrap();
    let est = proxsim_core::stats::estimate_equilibrium(&series).unwrap();
    assert!(!est.extinct);
    assert!(est.mean > 0.5, "plateau at {}", est.mean);
    // absorption dominance: a simulator series is zero from its first
    // zero onward (here it never hits zero at all)
    assert!(series.values().iter().all(|&v| v > 0.0));

    // self-consistency: the two halves of the retained window agree
    // within two combined standard errors
    let retained = &series.values()[est.burn_in..];
    let mid = retained.len() / 2;
    let first = proxsim_core::stats::estimate_equilibrium(
        &proxsim_core::stats::TimeSeries::new(retained[..mid].to_vec()).unwrap(),
    )
    .unwrap();
    let second = proxsim_core::stats::estimate_equilibrium(
        &proxsim_core::stats::TimeSeries::new(retained[mid..].to_vec()).unwrap(),
    )
    .unwrap();
    let gap = (first.mean - second.mean).abs();
    let sigma = (first.std_error.powi(2) + second.std_error.powi(2)).sqrt();
    assert!(gap <= 2.0 * sigma, "halves disagree: {gap} vs 2 sigma = {}", 2.0 * sigma);
}

#[test]
fn estimate_handles_total_extinction() {
    let base = params(16, 256, 0.0, 0.5, 0.2, 200, 11);
    let spec = ReplicateSpec { base, replicates: 4, master_seed: 11 };
    let est = estimate_f_inf(&spec).unwrap();
    assert_eq!(est.surviving, 0);
    assert_eq!(est.f_inf, 0.0);
    assert_eq!(est.std_error, 0.0);
}

#[test]
fn estimate_saturates_at_certain_infection_without_healing() {
    let base = params(8, 64, 1.0, 0.0, 0.2, 500, 13);
    let spec = ReplicateSpec { base, replicates: 4, master_seed: 13 };
    let est = estimate_f_inf(&spec).unwrap();
    assert_eq!(est.surviving, 4);
    assert_eq!(est.f_inf, 1.0);
    assert_eq!(est.std_error, 0.0);
}

#[test]
fn equilibrium_fraction_decreases_in_q() {
    // paired master seeds, 3-sigma separation between q = 0.01 and q = 0.05
    let r = 16;
    let base_low = params(128, 16384, 0.5, 0.01, 0.2, 10_000, 2024);
    let base_high = params(128, 16384, 0.5, 0.05, 0.2, 10_000, 2024);
    let low = estimate_f_inf(&ReplicateSpec { base: base_low, replicates: r, master_seed: 2024 })
        .unwrap();
    let high =
        estimate_f_inf(&ReplicateSpec { base: base_high, replicates: r, master_seed: 2024 })
            .unwrap();
    assert_eq!(low.surviving, r);
    assert_eq!(high.surviving, r);
    assert!(low.f_inf > 0.0 && high.f_inf > 0.0);
    let gap = low.f_inf - high.f_inf;
    let sigma = (low.std_error.powi(2) + high.std_error.powi(2)).sqrt();
    assert!(gap > 3.0 * sigma, "gap {gap} vs sigma {sigma}");
}

#[test]
fn survival_probe_limits() {
    // q = 1 heals everything every tick, survivors impossible
    let p = params(16, 256, 0.0, 1.0, 0.5, 100, 5);
    assert_eq!(survival_probe(&p, 8, 5).unwrap(), 0);
    let p = params(16, 256, 0.7, 1.0, 0.5, 100, 5);
    assert_eq!(survival_probe(&p, 8, 5).unwrap(), 0);
    // q = 0 with anything infected can never be absorbed
    let p = params(16, 256, 0.3, 0.0, 0.2, 100, 5);
    assert_eq!(survival_probe(&p, 8, 5).unwrap(), 8);
}

fn quick_search(p: f64, d: f64, seed: u64) -> ThresholdSearch {
    ThresholdSearch {
        infect_prob: p,
        density: d,
        lattice_side: 32,
        replicates: 8,
        max_steps: 10_000,
        resolution: 1.0 / 32.0,
        initial_infected_fraction: 0.2,
        master_seed: seed,
    }
}

#[test]
fn threshold_search_is_degenerate_without_infection() {
    let est = find_q_star(&quick_search(0.0, 1.0, 1)).unwrap();
    assert_eq!(est.q_star, 0.0);
    assert!(est.survival_counts.is_empty());
    let est = find_q_star(&quick_search(0.5, 0.0, 1)).unwrap();
    assert_eq!(est.q_star, 0.0);
}

#[test]
fn threshold_search_is_seed_stable_and_bracketed() {
    let a = find_q_star(&quick_search(0.5, 1.0, 99)).unwrap();
    let b = find_q_star(&quick_search(0.5, 1.0, 99)).unwrap();
    assert_eq!(a, b);
    assert!(a.bracket_low < a.q_star && a.q_star <= a.bracket_high);
    assert!(a.bracket_high - a.bracket_low <= a.resolution + 1e-12);
    assert_eq!(a.survival_counts.len(), 5); // ceil(log2(32)) probes
    // bisection necessarily crosses the stochastic regime: some probe
    // returns a survivor count strictly between 0 and R
    assert!(
        a.survival_counts.iter().any(|pr| pr.surviving > 0 && pr.surviving < pr.replicates),
        "no mixed-survival probe: {:?}",
        a.survival_counts
    );
}

#[test]
fn threshold_sandwich_on_the_bisection_seeds() {
    let search = quick_search(0.5, 1.0, 99);
    let est = find_q_star(&search).unwrap();
    let offset = 4.0 * est.resolution;
    let below = est.q_star - offset;
    let above = est.q_star + offset;
    assert!(below > 0.0 && above < 1.0);
    let probe_at = |q: f64| {
        let p = params(32, 1024, 0.5, q, 0.2, 10_000, search.master_seed);
        survival_probe(&p, search.replicates, search.master_seed).unwrap()
    };
    assert!(probe_at(below) * 2 >= search.replicates, "no epidemic below the bracket");
    assert!(probe_at(above) * 2 < search.replicates, "epidemic above the bracket");
}

#[test]
fn sweep_composition_identity_and_order() {
    let config = SweepConfig {
        p_grid: vec![0.6],
        q_grid: vec![0.1],
        d_grid: vec![1.0],
        lattice_side: 16,
        max_steps: 2000,
        replicates: 4,
        initial_infected_fraction: 0.2,
        master_seed: 77,
    };
    let mut rows = Vec::new();
    sweep(&config, |row| rows.push(row.clone())).unwrap();
    assert_eq!(rows.len(), 1);
    let direct = estimate_f_inf(&ReplicateSpec {
        base: params(16, 256, 0.6, 0.1, 0.2, 2000, 77),
        replicates: 4,
        master_seed: 77,
    })
    .unwrap();
    let swept = rows[0].outcome.as_ref().unwrap();
    assert_eq!(swept, &direct);
}

#[test]
fn sweep_visits_cells_in_grid_order() {
    let config = SweepConfig {
        p_grid: vec![0.2, 0.8],
        q_grid: vec![0.9, 1.0],
        d_grid: vec![0.5],
        lattice_side: 8,
        max_steps: 200,
        replicates: 2,
        initial_infected_fraction: 0.2,
        master_seed: 5,
    };
    let mut cells = Vec::new();
    sweep(&config, |row| cells.push((row.p, row.q, row.d))).unwrap();
    assert_eq!(
        cells,
        vec![(0.2, 0.9, 0.5), (0.2, 1.0, 0.5), (0.8, 0.9, 0.5), (0.8, 1.0, 0.5)]
    );
}

#[test]
fn sweep_of_an_empty_grid_emits_no_rows() {
    let config = SweepConfig {
        p_grid: vec![],
        q_grid: vec![0.1],
        d_grid: vec![1.0],
        lattice_side: 8,
        max_steps: 200,
        replicates: 2,
        initial_infected_fraction: 0.2,
        master_seed: 1,
    };
    let mut rows = 0;
    sweep(&config, |_| rows += 1).unwrap();
    assert_eq!(rows, 0);
}

#[test]
fn sweep_records_failures_per_row() {
    // density 0 rounds to zero agents: invalid parameters, carried in the
    // row instead of aborting
    let config = SweepConfig {
        p_grid: vec![0.5],
        q_grid: vec![0.1],
        d_grid: vec![0.0, 1.0],
        lattice_side: 8,
        max_steps: 200,
        replicates: 2,
        initial_infected_fraction: 0.2,
        master_seed: 6,
    };
    let mut rows = Vec::new();
    sweep(&config, |row| rows.push(row.clone())).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].outcome.is_err());
    assert!(rows[1].outcome.is_ok());
}
