//! Discrete-time SIS dynamics on an L×L torus.
//!
//! `N` agents random-walk on the lattice; agents sharing a site expose each
//! other to infection and infected agents heal with a fixed per-tick
//! probability. A tick advances three phases in a fixed order:
//!
//! 1. movement — every agent steps to one of its four neighbour sites,
//!    coordinates wrapping around the edges;
//! 2. infection — with the infected set *snapshotted at phase entry*, each
//!    healthy agent runs one independent Bernoulli(p) trial per infected
//!    co-occupant of its site and turns infected if any trial succeeds
//!    (agents infected during this phase are not sources within it);
//! 3. healing — every agent infected after the trials, including agents
//!    infected in this very tick, heals independently with probability q.
//!
//! The all-healthy configuration is absorbing: with no sources left the
//! infection can never restart.
//!
//! Randomness is consumed in a canonical order — agents in id order for
//! movement (one draw each); infected-occupied sites in row-major order
//! with healthy occupants in id order for infection (one draw per
//! co-occupant trial); agents in id order for healing (one draw per
//! infected agent). A tick that starts absorbed advances movement only.
//! Trajectories are therefore a pure function of `(SimParams, RngStream)`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::rng::RngStream;

/// Upper bound on the lattice side, so coordinates fit in `u16` and the
/// per-site occupancy index stays within sane memory.
pub const MAX_LATTICE_SIDE: u32 = 4096;

/// Parameters of one simulation run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimParams {
    /// Sites per lattice edge (L).
    pub lattice_side: u32,
    /// Number of agents (N). Density d = N / L² is always derived from
    /// these two, never stored.
    pub agent_count: u32,
    /// Per-pair, per-tick infection probability (p).
    pub infect_prob: f64,
    /// Per-tick healing probability (q).
    pub heal_prob: f64,
    /// Fraction of agents infected at tick 0 (f0).
    pub initial_infected_fraction: f64,
    /// Trajectory horizon in ticks (T).
    pub max_steps: u64,
    /// Master seed recorded with the run.
    pub seed: u64,
}

impl SimParams {
    /// Agent density d = N / L².
    pub fn density(&self) -> f64 {
        let l = self.lattice_side as f64;
        self.agent_count as f64 / (l * l)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.lattice_side == 0 {
            return Err(ParamError::ZeroLatticeSide);
        }
        if self.lattice_side > MAX_LATTICE_SIDE {
            return Err(ParamError::LatticeSideTooLarge {
                side: self.lattice_side,
                max: MAX_LATTICE_SIDE,
            });
        }
        if self.agent_count == 0 {
            return Err(ParamError::ZeroAgentCount);
        }
        if self.max_steps == 0 {
            return Err(ParamError::ZeroMaxSteps);
        }
        check_unit_interval("infect_prob", self.infect_prob)?;
        check_unit_interval("heal_prob", self.heal_prob)?;
        check_unit_interval("initial_infected_fraction", self.initial_infected_fraction)?;
        Ok(())
    }
}

fn check_unit_interval(name: &'static str, value: f64) -> Result<(), ParamError> {
    if !value.is_finite() || !(0.0..=1.0).contains(&value) {
        return Err(ParamError::OutOfUnitInterval { name, value });
    }
    Ok(())
}

/// Nearest integer with ties to even; used wherever a real-valued count
/// (f0·N, d·L²) must become a whole number of agents.
pub fn round_ties_even(x: f64) -> u64 {
    libm::rint(x) as u64
}

/// Number of agents realizing density `d` on an `l × l` lattice,
/// saturating at `u32::MAX`.
pub fn agents_for_density(l: u32, d: f64) -> u32 {
    let sites = l as f64 * l as f64;
    round_ties_even(d * sites).min(u32::MAX as u64) as u32
}

#[derive(Clone, Debug, PartialEq)]
pub enum ParamError {
    ZeroLatticeSide,
    ZeroAgentCount,
    ZeroMaxSteps,
    LatticeSideTooLarge { side: u32, max: u32 },
    OutOfUnitInterval { name: &'static str, value: f64 },
}

impl fmt::Display for ParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamError::ZeroLatticeSide => write!(f, "lattice side must be at least 1"),
            ParamError::ZeroAgentCount => write!(f, "agent count must be at least 1"),
            ParamError::ZeroMaxSteps => write!(f, "max steps must be at least 1"),
            ParamError::LatticeSideTooLarge { side, max } => {
                write!(f, "lattice side {side} exceeds the supported maximum {max}")
            }
            ParamError::OutOfUnitInterval { name, value } => {
                write!(f, "{name} must lie in [0; 1]; got {value}")
            }
        }
    }
}

impl core::error::Error for ParamError {}

/// Errors from building a [`World`] out of explicit state.
#[derive(Clone, Debug, PartialEq)]
pub enum StateError {
    Params(ParamError),
    PositionCount { expected: usize, got: usize },
    FlagCount { expected: usize, got: usize },
    PositionOutOfRange { agent: u32, x: u16, y: u16, lattice_side: u32 },
}

impl fmt::Display for StateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateError::Params(e) => e.fmt(f),
            StateError::PositionCount { expected, got } => {
                write!(f, "expected {expected} positions; got {got}")
            }
            StateError::FlagCount { expected, got } => {
                write!(f, "expected {expected} infection flags; got {got}")
            }
            StateError::PositionOutOfRange { agent, x, y, lattice_side } => {
                write!(f, "agent {agent} at ({x}; {y}) outside {lattice_side}x{lattice_side} lattice")
            }
        }
    }
}

impl core::error::Error for StateError {}

impl From<ParamError> for StateError {
    fn from(e: ParamError) -> Self {
        StateError::Params(e)
    }
}

/// Full simulation state: agent positions and infection flags, the
/// per-site occupancy index (kept exactly inverse to the positions at all
/// times), the tick counter and the random stream driving the run.
///
/// The occupancy index is stored compressed: `occ_agents` holds all agent
/// ids grouped by site (ascending within a site), and site `s` owns the
/// slice `occ_agents[occ_starts[s]..occ_starts[s + 1]]`. It is rebuilt by
/// one counting-sort pass after every movement phase, which is far
/// cheaper than maintaining per-site vectors agent by agent.
#[derive(Clone, Debug)]
pub struct World {
    params: SimParams,
    positions: Vec<(u16, u16)>,
    infected: Vec<bool>,
    /// Slice offsets per site, length L² + 1.
    occ_starts: Vec<u32>,
    /// Agent ids grouped by site, id-ascending within each site.
    occ_agents: Vec<u32>,
    infected_count: u32,
    tick_count: u64,
    rng: RngStream,
    // scratch reused across ticks
    counts: Vec<u32>,
    snapshot: Vec<bool>,
    source_sites: Vec<u32>,
}

impl World {
    /// Uniform initial condition driven by `derive(params.seed, 0)`.
    pub fn new(params: SimParams) -> Result<Self, ParamError> {
        let stream = RngStream::derive(params.seed, 0);
        Self::with_stream(params, stream)
    }

    /// Uniform initial condition with an explicit stream (used by
    /// replicated experiments, which derive one stream per replicate).
    ///
    /// Each agent's x and then y coordinate is drawn uniformly over
    /// `[0, L)`, agents in id order; then `round_ties_even(f0·N)` agents
    /// are infected, chosen without replacement via a partial
    /// Fisher-Yates pass over the id array.
    pub fn with_stream(params: SimParams, mut rng: RngStream) -> Result<Self, ParamError> {
        params.validate()?;
        let n = params.agent_count as usize;
        let l = params.lattice_side;

        let mut positions = Vec::with_capacity(n);
        for _ in 0..n {
            let x = rng.uniform_index(l) as u16;
            let y = rng.uniform_index(l) as u16;
            positions.push((x, y));
        }

        let k = round_ties_even(params.initial_infected_fraction * n as f64) as usize;
        debug_assert!(k <= n);
        let mut ids: Vec<u32> = (0..params.agent_count).collect();
        for i in 0..k {
            let j = i + rng.uniform_index((n - i) as u32) as usize;
            ids.swap(i, j);
        }
        let mut infected = vec![false; n];
        for &id in &ids[..k] {
            infected[id as usize] = true;
        }

        Ok(Self::assemble(params, positions, infected, k as u32, rng))
    }

    /// Builds a world from explicit positions and flags; for fixed
    /// configurations in tests and oracles.
    pub fn from_state(
        params: SimParams,
        positions: Vec<(u16, u16)>,
        infected: Vec<bool>,
        rng: RngStream,
    ) -> Result<Self, StateError> {
        params.validate()?;
        let n = params.agent_count as usize;
        if positions.len() != n {
            return Err(StateError::PositionCount { expected: n, got: positions.len() });
        }
        if infected.len() != n {
            return Err(StateError::FlagCount { expected: n, got: infected.len() });
        }
        for (id, &(x, y)) in positions.iter().enumerate() {
            if x as u32 >= params.lattice_side || y as u32 >= params.lattice_side {
                return Err(StateError::PositionOutOfRange {
                    agent: id as u32,
                    x,
                    y,
                    lattice_side: params.lattice_side,
                });
            }
        }
        let count = infected.iter().filter(|&&b| b).count() as u32;
        Ok(Self::assemble(params, positions, infected, count, rng))
    }

    fn assemble(
        params: SimParams,
        positions: Vec<(u16, u16)>,
        infected: Vec<bool>,
        infected_count: u32,
        rng: RngStream,
    ) -> Self {
        let l = params.lattice_side as usize;
        let sites = l * l;
        let n = positions.len();
        let mut world = World {
            params,
            positions,
            infected,
            occ_starts: vec![0; sites + 1],
            occ_agents: vec![0; n],
            infected_count,
            tick_count: 0,
            rng,
            counts: vec![0; sites],
            snapshot: vec![false; n],
            source_sites: Vec::new(),
        };
        world.rebuild_index();
        world
    }

    /// Counting sort of agent ids by site. Scattering in ascending id
    /// order keeps every per-site group id-sorted.
    fn rebuild_index(&mut self) {
        let l = self.params.lattice_side;
        self.counts.fill(0);
        for &(x, y) in &self.positions {
            self.counts[site_of(x, y, l)] += 1;
        }
        self.finish_index();
    }

    /// Prefix-sum and scatter passes of the counting sort; expects
    /// `counts` to already hold the per-site occupancy.
    fn finish_index(&mut self) {
        let l = self.params.lattice_side;
        let mut running = 0u32;
        self.occ_starts[0] = 0;
        for (site, &count) in self.counts.iter().enumerate() {
            running += count;
            self.occ_starts[site + 1] = running;
        }
        // reuse counts as per-site write cursors
        let sites = self.counts.len();
        self.counts.copy_from_slice(&self.occ_starts[..sites]);
        for (id, &(x, y)) in self.positions.iter().enumerate() {
            let cursor = &mut self.counts[site_of(x, y, l)];
            self.occ_agents[*cursor as usize] = id as u32;
            *cursor += 1;
        }
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn current_tick(&self) -> u64 {
        self.tick_count
    }

    pub fn infected_count(&self) -> u32 {
        self.infected_count
    }

    /// Infected fraction: infected_count / agent_count, exactly.
    pub fn infected_fraction(&self) -> f64 {
        self.infected_count as f64 / self.params.agent_count as f64
    }

    /// True once the all-healthy absorbing state has been reached.
    pub fn is_absorbed(&self) -> bool {
        self.infected_count == 0
    }

    pub fn positions(&self) -> &[(u16, u16)] {
        &self.positions
    }

    pub fn infected(&self) -> &[bool] {
        &self.infected
    }

    pub fn is_infected(&self, agent: u32) -> bool {
        self.infected[agent as usize]
    }

    /// Agent ids currently on site `(x, y)`, ascending.
    pub fn occupants(&self, x: u16, y: u16) -> &[u32] {
        assert!((x as u32) < self.params.lattice_side && (y as u32) < self.params.lattice_side);
        self.site_slice(site_of(x, y, self.params.lattice_side))
    }

    fn site_slice(&self, site: usize) -> &[u32] {
        &self.occ_agents[self.occ_starts[site] as usize..self.occ_starts[site + 1] as usize]
    }

    /// Movement phase: every agent steps to one of its four neighbour
    /// sites (direction code 0:+x, 1:−x, 2:+y, 3:−y; one draw per agent,
    /// agents in id order), coordinates wrapping mod L, and the occupancy
    /// index is rebuilt. Infection flags are untouched.
    pub fn step_move(&mut self) {
        let l = self.params.lattice_side;
        let side = l as u16;
        self.counts.fill(0);
        for id in 0..self.positions.len() {
            let dir = self.rng.uniform_index(4);
            let (x, y) = self.positions[id];
            let moved = match dir {
                0 => (if x + 1 == side { 0 } else { x + 1 }, y),
                1 => (if x == 0 { side - 1 } else { x - 1 }, y),
                2 => (x, if y + 1 == side { 0 } else { y + 1 }),
                _ => (x, if y == 0 { side - 1 } else { y - 1 }),
            };
            self.positions[id] = moved;
            self.counts[site_of(moved.0, moved.1, l)] += 1;
        }
        self.finish_index();
    }

    /// Infection phase. Sources are the agents infected when the phase
    /// begins; a healthy agent sharing a site with k sources runs k
    /// independent Bernoulli(p) trials (all k are drawn, so consumption
    /// does not depend on outcomes) and turns infected if any succeeds —
    /// the per-agent infection probability is exactly 1 − (1−p)^k.
    /// Consumption order: infected-occupied sites in row-major order,
    /// healthy occupants in id order within each site.
    pub fn step_infect(&mut self) {
        if self.infected_count == 0 {
            return;
        }
        let p = self.params.infect_prob;
        let World {
            positions,
            infected,
            occ_starts,
            occ_agents,
            rng,
            snapshot,
            source_sites,
            infected_count,
            params,
            ..
        } = self;
        let l = params.lattice_side;
        let sites = occ_starts.len() - 1;

        snapshot.copy_from_slice(infected);
        let dense = (*infected_count as usize) * 8 >= sites;

        let mut run_site = |site: usize| {
            let slice =
                &occ_agents[occ_starts[site] as usize..occ_starts[site + 1] as usize];
            let sources = slice.iter().filter(|&&a| snapshot[a as usize]).count();
            if sources == 0 {
                return;
            }
            for &agent in slice {
                if !snapshot[agent as usize] {
                    let mut hit = false;
                    for _ in 0..sources {
                        hit |= rng.bernoulli(p);
                    }
                    if hit {
                        debug_assert!(!infected[agent as usize]);
                        infected[agent as usize] = true;
                        *infected_count += 1;
                    }
                }
            }
        };

        // Both paths visit source sites in the same ascending (row-major)
        // order, so the randomness consumed is identical; the sparse one
        // skips the full-lattice scan when infection is rare.
        if dense {
            for site in 0..sites {
                run_site(site);
            }
        } else {
            source_sites.clear();
            for (id, &(x, y)) in positions.iter().enumerate() {
                if snapshot[id] {
                    source_sites.push(site_of(x, y, l) as u32);
                }
            }
            source_sites.sort_unstable();
            source_sites.dedup();
            for site in source_sites.iter() {
                run_site(*site as usize);
            }
        }
    }

    /// Healing phase: every agent infected at phase entry — including
    /// agents infected earlier in the same tick — heals independently
    /// with probability q. One draw per infected agent, agents in id
    /// order.
    pub fn step_heal(&mut self) {
        let q = self.params.heal_prob;
        for id in 0..self.infected.len() {
            if self.infected[id] && self.rng.bernoulli(q) {
                self.infected[id] = false;
                self.infected_count -= 1;
            }
        }
    }

    /// One full tick: movement, then infection, then healing. A world
    /// that is already absorbed advances movement only (the other phases
    /// would neither change state nor draw randomness from a live run,
    /// so skipping them keeps trajectories identical and cheap).
    pub fn tick(&mut self) {
        if self.infected_count == 0 {
            self.step_move();
        } else {
            self.step_move();
            self.step_infect();
            self.step_heal();
        }
        self.tick_count += 1;
    }

    /// Consumes the world, returning its stream (so fixed-configuration
    /// trial loops can keep drawing from where the world left off).
    pub fn into_stream(self) -> RngStream {
        self.rng
    }

    #[cfg(test)]
    fn check_site_index(&self) {
        let sites = self.occ_starts.len() - 1;
        let mut seen = 0usize;
        for site in 0..sites {
            let mut prev: Option<u32> = None;
            for &id in self.site_slice(site) {
                assert!(prev.is_none_or(|p| p < id), "bucket not sorted");
                prev = Some(id);
                let (x, y) = self.positions[id as usize];
                assert_eq!(site_of(x, y, self.params.lattice_side), site);
                seen += 1;
            }
        }
        assert_eq!(seen, self.positions.len());
    }
}

fn site_of(x: u16, y: u16, l: u32) -> usize {
    y as usize * l as usize + x as usize
}
