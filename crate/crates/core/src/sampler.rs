//! Uniform sampling of equilibrium micro-outcomes.
//!
//! Small outcome spaces are enumerated once and indexed uniformly. Larger
//! ones use a Metropolis chain whose proposals are symmetric and whose
//! acceptance rule is "keep total revenue unchanged", so the stationary law
//! is uniform over feasible outcomes.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::economy::{EconomicOrder, EconomyConfig, RevenueGrid};
use crate::enumerate::{
    enumerate_outcomes, first_feasible_order, infeasible_message, outcome_count_bound, MicroOutcome,
    Position, DEFAULT_OUTCOME_CAP,
};
use crate::error::{Error, Result};

/// Outcome spaces up to this size are sampled exactly in `Auto` mode.
pub const DEFAULT_EXACT_CAP: u64 = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerMode {
    /// Exact when the outcome-count bound is within `exact_cap`, Markov otherwise.
    Auto,
    Exact,
    Markov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerOptions {
    pub mode: SamplerMode,
    pub seed: u64,
    /// Markov steps discarded before the first draw.
    pub burn_in: u64,
    /// Markov steps between consecutive draws (at least 1).
    pub thinning: u64,
    pub exact_cap: u64,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self { mode: SamplerMode::Auto, seed: 0, burn_in: 1_000, thinning: 10, exact_cap: DEFAULT_EXACT_CAP }
    }
}

impl SamplerOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

/// Endless, seeded stream of uniformly distributed outcomes.
pub struct OutcomeSampler {
    rng: ChaCha8Rng,
    kind: Kind,
    n_levels: usize,
}

enum Kind {
    Exact(Vec<MicroOutcome>),
    Markov(Chain),
}

impl OutcomeSampler {
    pub fn new(grid: &RevenueGrid, config: &EconomyConfig, options: SamplerOptions) -> Result<Self> {
        let exact = match options.mode {
            SamplerMode::Exact => true,
            SamplerMode::Markov => false,
            SamplerMode::Auto => outcome_count_bound(grid, config) <= BigUint::from(options.exact_cap),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let kind = if exact {
            let cap = if options.mode == SamplerMode::Exact { DEFAULT_OUTCOME_CAP } else { options.exact_cap };
            let outcomes: Vec<MicroOutcome> = enumerate_outcomes(grid, config, cap)?
                .into_iter()
                .flat_map(|g| g.outcomes)
                .collect();
            if outcomes.is_empty() {
                return Err(Error::Domain(format!(
                    "no feasible outcome: {}",
                    infeasible_message(grid, config)
                )));
            }
            Kind::Exact(outcomes)
        } else {
            let mut chain = Chain::new(grid, config, options.thinning.max(1))?;
            for _ in 0..options.burn_in {
                chain.step(&mut rng);
            }
            Kind::Markov(chain)
        };
        Ok(Self { rng, kind, n_levels: grid.len() })
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.kind, Kind::Exact(_))
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    /// Fraction of accepted Markov proposals so far (`None` in exact mode).
    pub fn acceptance_rate(&self) -> Option<f64> {
        match &self.kind {
            Kind::Exact(_) => None,
            Kind::Markov(c) => Some(if c.proposed == 0 { 0.0 } else { c.accepted as f64 / c.proposed as f64 }),
        }
    }
}

impl Iterator for OutcomeSampler {
    type Item = MicroOutcome;

    fn next(&mut self) -> Option<MicroOutcome> {
        match &mut self.kind {
            Kind::Exact(all) => Some(all[self.rng.random_range(0..all.len())].clone()),
            Kind::Markov(chain) => {
                for _ in 0..chain.thinning {
                    chain.step(&mut self.rng);
                }
                Some(chain.outcome())
            }
        }
    }
}

/// Convenience constructor mirroring [`OutcomeSampler::new`].
pub fn sample_outcomes(
    grid: &RevenueGrid,
    config: &EconomyConfig,
    options: SamplerOptions,
) -> Result<OutcomeSampler> {
    OutcomeSampler::new(grid, config, options)
}

/// Metropolis chain over outcomes with symmetric proposals.
///
/// A proposal relocates `m` firms (or `m` units of occupation) to uniformly
/// chosen industry slots, with `m` drawn independently of the state: one or
/// two with probability 3/8 each, otherwise `3 + Geometric(1/2)`, capped at
/// `N`. Every proposal tuple has a
/// reverse tuple of equal probability, so accepting exactly the
/// revenue-preserving ones leaves the uniform law on feasible outcomes
/// invariant. Moves of all `N` units reach any outcome in one step, which
/// makes the chain irreducible even when orders differ in many firms at once.
struct Chain {
    slot_level: Vec<usize>,
    slot_index: Vec<usize>,
    slot_eps: Vec<u128>,
    level_offset: Vec<usize>,
    labeled: bool,
    /// Labeled: slot of each firm. Unlabeled: unused.
    firm_slot: Vec<usize>,
    /// Unlabeled: units per slot. Labeled: unused.
    slot_count: Vec<u64>,
    n_firms: u64,
    /// False when the revenue constraint is dropped: every move is accepted.
    constrained: bool,
    thinning: u64,
    proposed: u64,
    accepted: u64,
    grid_degeneracies: Vec<u64>,
}

impl Chain {
    fn new(grid: &RevenueGrid, config: &EconomyConfig, thinning: u64) -> Result<Self> {
        let start = first_feasible_order(grid, config).ok_or_else(|| {
            Error::Domain(format!("no feasible outcome: {}", infeasible_message(grid, config)))
        })?;
        let mut slot_level = Vec::new();
        let mut slot_index = Vec::new();
        let mut slot_eps = Vec::new();
        let mut level_offset = Vec::new();
        for k in 0..grid.len() {
            level_offset.push(slot_level.len());
            for s in 0..grid.degeneracy(k) as usize {
                slot_level.push(k);
                slot_index.push(s);
                slot_eps.push(grid.level(k) as u128);
            }
        }
        let labeled = config.regime.indicator() == 0;
        let mut firm_slot = Vec::new();
        let mut slot_count = vec![0u64; slot_level.len()];
        for (k, &a) in start.occupancy().iter().enumerate() {
            if labeled {
                firm_slot.extend(std::iter::repeat_n(level_offset[k], a as usize));
            } else {
                slot_count[level_offset[k]] = a;
            }
        }
        Ok(Self {
            slot_level,
            slot_index,
            slot_eps,
            level_offset,
            labeled,
            firm_slot,
            slot_count,
            n_firms: config.n_firms,
            constrained: config.total_revenue.is_some(),
            thinning,
            proposed: 0,
            accepted: 0,
            grid_degeneracies: grid.degeneracies().to_vec(),
        })
    }

    fn step<R: Rng>(&mut self, rng: &mut R) {
        let s = self.slot_level.len();
        let n = self.n_firms as usize;
        let u: f64 = rng.random();
        let mut m = if u < 0.375 {
            1
        } else if u < 0.75 {
            2
        } else {
            3
        };
        if m == 3 {
            while m < n && rng.random_bool(0.5) {
                m += 1;
            }
        }
        let m = m.min(n);
        self.proposed += 1;
        if self.labeled {
            let firms = rand::seq::index::sample(rng, self.firm_slot.len(), m);
            let targets: Vec<usize> = (0..m).map(|_| rng.random_range(0..s)).collect();
            let before: u128 = firms.iter().map(|i| self.slot_eps[self.firm_slot[i]]).sum();
            let after: u128 = targets.iter().map(|&t| self.slot_eps[t]).sum();
            if !self.constrained || before == after {
                for (i, &t) in firms.iter().zip(&targets) {
                    self.firm_slot[i] = t;
                }
                self.accepted += 1;
            }
        } else {
            let sources: Vec<usize> = (0..m).map(|_| rng.random_range(0..s)).collect();
            let targets: Vec<usize> = (0..m).map(|_| rng.random_range(0..s)).collect();
            let mut taken = 0;
            for &src in &sources {
                if self.slot_count[src] == 0 {
                    break;
                }
                self.slot_count[src] -= 1;
                taken += 1;
            }
            let before: u128 = sources.iter().map(|&t| self.slot_eps[t]).sum();
            let after: u128 = targets.iter().map(|&t| self.slot_eps[t]).sum();
            if taken == m && (!self.constrained || before == after) {
                for &t in &targets {
                    self.slot_count[t] += 1;
                }
                self.accepted += 1;
            } else {
                for &src in &sources[..taken] {
                    self.slot_count[src] += 1;
                }
            }
        }
    }

    fn outcome(&self) -> MicroOutcome {
        if self.labeled {
            MicroOutcome::labeled(
                self.firm_slot
                    .iter()
                    .map(|&t| Position { level: self.slot_level[t], slot: self.slot_index[t] })
                    .collect(),
            )
        } else {
            let counts = self
                .grid_degeneracies
                .iter()
                .enumerate()
                .map(|(k, &g)| {
                    let o = self.level_offset[k];
                    self.slot_count[o..o + g as usize].to_vec()
                })
                .collect();
            MicroOutcome::unlabeled(counts)
        }
    }
}

/// Number of draws that fell in each order.
pub fn order_counts<I>(outcomes: I, n_levels: usize) -> BTreeMap<EconomicOrder, u64>
where
    I: IntoIterator<Item = MicroOutcome>,
{
    let mut counts = BTreeMap::new();
    for o in outcomes {
        *counts.entry(o.order(n_levels)).or_insert(0) += 1;
    }
    counts
}

/// Relative frequency of each order in a stream of outcomes.
pub fn empirical_frequencies<I>(outcomes: I, n_levels: usize) -> Result<BTreeMap<EconomicOrder, f64>>
where
    I: IntoIterator<Item = MicroOutcome>,
{
    let counts = order_counts(outcomes, n_levels);
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(Error::Domain("empty outcome stream".into()));
    }
    Ok(counts.into_iter().map(|(o, c)| (o, c as f64 / total as f64)).collect())
}
