//! Exhaustive enumeration at desk scale: feasible economic orders, every
//! equilibrium micro-outcome, and the exact probability catalog obtained by
//! treating all outcomes as equally likely.

use std::collections::{BTreeMap, HashMap};
use std::ops::ControlFlow;

use num_bigint::{BigInt, BigUint};
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::counting::multiplicity;
use crate::economy::{EconomicOrder, EconomyConfig, Money, Regime, RevenueGrid};
use crate::error::{Error, Result};

/// Default refusal threshold for exhaustive outcome enumeration.
pub const DEFAULT_OUTCOME_CAP: u64 = 10_000_000;

/// Visits every feasible order in reverse lexicographic order (largest `a_1`
/// first). The visitor may stop the walk early.
pub fn try_for_each_order<F>(grid: &RevenueGrid, config: &EconomyConfig, mut visit: F)
where
    F: FnMut(&[u64]) -> ControlFlow<()>,
{
    let mut buf = vec![0u64; grid.len()];
    let revenue = config.total_revenue.map(u128::from);
    let _ = order_dfs(grid, 0, config.n_firms, revenue, &mut buf, &mut visit);
}

fn order_dfs<F>(
    grid: &RevenueGrid,
    k: usize,
    firms_left: u64,
    revenue_left: Option<u128>,
    buf: &mut [u64],
    visit: &mut F,
) -> ControlFlow<()>
where
    F: FnMut(&[u64]) -> ControlFlow<()>,
{
    let n = grid.len();
    let eps = |i: usize| grid.level(i) as u128;
    if k == n - 1 {
        if let Some(r) = revenue_left {
            if firms_left as u128 * eps(k) != r {
                return ControlFlow::Continue(());
            }
        }
        buf[k] = firms_left;
        return visit(buf);
    }
    for a in (0..=firms_left).rev() {
        let rest = (firms_left - a) as u128;
        let next_revenue = match revenue_left {
            Some(r) => {
                let spent = a as u128 * eps(k);
                if spent > r {
                    continue;
                }
                let left = r - spent;
                // Remaining firms must fit between the next level and the top level.
                if rest * eps(k + 1) > left || rest * eps(n - 1) < left {
                    continue;
                }
                Some(left)
            }
            None => None,
        };
        buf[k] = a;
        order_dfs(grid, k + 1, firms_left - a, next_revenue, buf, visit)?;
    }
    buf[k] = 0;
    ControlFlow::Continue(())
}

/// All integer compositions of `N` over the grid levels that meet the revenue
/// constraint, in reverse lexicographic order. An empty result is not an error.
pub fn enumerate_orders(grid: &RevenueGrid, config: &EconomyConfig) -> Vec<EconomicOrder> {
    let mut out = Vec::new();
    try_for_each_order(grid, config, |a| {
        out.push(EconomicOrder::new(a.to_vec()));
        ControlFlow::Continue(())
    });
    out
}

/// The first feasible order of [`enumerate_orders`], found without listing the rest.
pub fn first_feasible_order(grid: &RevenueGrid, config: &EconomyConfig) -> Option<EconomicOrder> {
    let mut found = None;
    try_for_each_order(grid, config, |a| {
        found = Some(EconomicOrder::new(a.to_vec()));
        ControlFlow::Break(())
    });
    found
}

/// Number of compositions of `N` over `n` levels, ignoring revenue.
pub fn composition_count(n_firms: u64, n_levels: usize) -> BigUint {
    binomial(BigUint::from(n_firms + n_levels as u64 - 1), BigUint::from(n_levels as u64 - 1))
}

/// Where one firm sits: a revenue level and one of that level's industries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Position {
    pub level: usize,
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Assignment {
    /// Distinguishable firms: one position per firm, indexed by firm label.
    Labeled(Vec<Position>),
    /// Indistinguishable firms: occupation count of each industry, by level then slot.
    Unlabeled(Vec<Vec<u64>>),
}

/// One equilibrium outcome of the economy.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct MicroOutcome {
    assignment: Assignment,
}

impl MicroOutcome {
    pub fn labeled(positions: Vec<Position>) -> Self {
        Self { assignment: Assignment::Labeled(positions) }
    }

    pub fn unlabeled(counts: Vec<Vec<u64>>) -> Self {
        Self { assignment: Assignment::Unlabeled(counts) }
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn regime(&self) -> Regime {
        match self.assignment {
            Assignment::Labeled(_) => Regime::Monopolistic,
            Assignment::Unlabeled(_) => Regime::Perfect,
        }
    }

    pub fn n_firms(&self) -> u64 {
        match &self.assignment {
            Assignment::Labeled(p) => p.len() as u64,
            Assignment::Unlabeled(c) => c.iter().flatten().sum(),
        }
    }

    /// The economic order this outcome belongs to.
    pub fn order(&self, n_levels: usize) -> EconomicOrder {
        let mut a = vec![0u64; n_levels];
        match &self.assignment {
            Assignment::Labeled(p) => p.iter().for_each(|pos| a[pos.level] += 1),
            Assignment::Unlabeled(c) => {
                for (k, slots) in c.iter().enumerate() {
                    a[k] = slots.iter().sum();
                }
            }
        }
        EconomicOrder::new(a)
    }

    /// Checks slot bounds and the firm count against `grid` / `config`.
    pub fn is_consistent(&self, grid: &RevenueGrid, config: &EconomyConfig) -> bool {
        let slots_ok = match &self.assignment {
            Assignment::Labeled(p) => p
                .iter()
                .all(|pos| pos.level < grid.len() && (pos.slot as u64) < grid.degeneracy(pos.level)),
            Assignment::Unlabeled(c) => {
                c.len() == grid.len()
                    && c.iter().enumerate().all(|(k, s)| s.len() as u64 == grid.degeneracy(k))
            }
        };
        slots_ok && self.n_firms() == config.n_firms
    }
}

/// Upper bound on the number of outcomes, ignoring the revenue constraint:
/// `S^N` labeled assignments or `C(N + S - 1, N)` multisets over `S` slots.
pub fn outcome_count_bound(grid: &RevenueGrid, config: &EconomyConfig) -> BigUint {
    let s = grid.total_slots();
    match config.regime {
        Regime::Monopolistic => {
            let n = u32::try_from(config.n_firms).unwrap_or(u32::MAX);
            BigUint::from(s).pow(n)
        }
        Regime::Perfect => binomial(BigUint::from(config.n_firms + s - 1), BigUint::from(config.n_firms)),
    }
}

fn check_cap(grid: &RevenueGrid, config: &EconomyConfig, cap: u64) -> Result<()> {
    let bound = outcome_count_bound(grid, config);
    if bound > BigUint::from(cap) {
        return Err(Error::CapExceeded { bound: bound.to_string(), cap });
    }
    Ok(())
}

/// Generates every feasible micro-outcome directly from its definition
/// (functions from labeled firms to industry slots, or multisets of
/// unlabeled firms over slots), never from the counting formula.
///
/// The visitor receives each outcome together with its occupancy vector.
/// Returns the number of outcomes visited.
pub fn for_each_outcome<F>(
    grid: &RevenueGrid,
    config: &EconomyConfig,
    cap: u64,
    mut visit: F,
) -> Result<u64>
where
    F: FnMut(&MicroOutcome, &[u64]),
{
    check_cap(grid, config, cap)?;
    let mut walker = OutcomeWalker::new(grid, config);
    let mut count = 0u64;
    match config.regime {
        Regime::Monopolistic => walker.labeled(0, 0, &mut |o, a| {
            count += 1;
            visit(o, a)
        }),
        Regime::Perfect => walker.unlabeled(0, config.n_firms, 0, &mut |o, a| {
            count += 1;
            visit(o, a)
        }),
    }
    Ok(count)
}

struct OutcomeWalker {
    /// (level, slot, revenue) for every industry slot, ordered by level.
    slots: Vec<(usize, usize, u128)>,
    n_firms: u64,
    revenue: Option<u128>,
    eps_min: u128,
    eps_max: u128,
    occupancy: Vec<u64>,
    outcome: MicroOutcome,
}

impl OutcomeWalker {
    fn new(grid: &RevenueGrid, config: &EconomyConfig) -> Self {
        let mut slots = Vec::new();
        for k in 0..grid.len() {
            for s in 0..grid.degeneracy(k) as usize {
                slots.push((k, s, grid.level(k) as u128));
            }
        }
        let outcome = match config.regime {
            Regime::Monopolistic => {
                MicroOutcome::labeled(vec![Position { level: 0, slot: 0 }; config.n_firms as usize])
            }
            Regime::Perfect => MicroOutcome::unlabeled(
                (0..grid.len()).map(|k| vec![0; grid.degeneracy(k) as usize]).collect(),
            ),
        };
        Self {
            slots,
            n_firms: config.n_firms,
            revenue: config.total_revenue.map(u128::from),
            eps_min: grid.lowest() as u128,
            eps_max: grid.highest() as u128,
            occupancy: vec![0; grid.len()],
            outcome,
        }
    }

    fn labeled<F: FnMut(&MicroOutcome, &[u64])>(&mut self, firm: usize, spent: u128, visit: &mut F) {
        if firm as u64 == self.n_firms {
            if self.revenue.is_none_or(|r| r == spent) {
                visit(&self.outcome, &self.occupancy);
            }
            return;
        }
        let rest = self.n_firms as u128 - firm as u128 - 1;
        for i in 0..self.slots.len() {
            let (level, slot, eps) = self.slots[i];
            let total = spent + eps;
            if let Some(r) = self.revenue {
                if total + rest * self.eps_min > r || total + rest * self.eps_max < r {
                    continue;
                }
            }
            if let Assignment::Labeled(p) = &mut self.outcome.assignment {
                p[firm] = Position { level, slot };
            }
            self.occupancy[level] += 1;
            self.labeled(firm + 1, total, visit);
            self.occupancy[level] -= 1;
        }
    }

    fn unlabeled<F: FnMut(&MicroOutcome, &[u64])>(
        &mut self,
        slot_index: usize,
        firms_left: u64,
        spent: u128,
        visit: &mut F,
    ) {
        let (level, slot, eps) = self.slots[slot_index];
        let last = slot_index + 1 == self.slots.len();
        let choices: Vec<u64> = if last { vec![firms_left] } else { (0..=firms_left).rev().collect() };
        for c in choices {
            let total = spent + c as u128 * eps;
            let rest = (firms_left - c) as u128;
            if let Some(r) = self.revenue {
                if last {
                    if total != r {
                        continue;
                    }
                } else {
                    let next_eps = self.slots[slot_index + 1].2;
                    if total + rest * next_eps > r || total + rest * self.eps_max < r {
                        continue;
                    }
                }
            }
            if let Assignment::Unlabeled(counts) = &mut self.outcome.assignment {
                counts[level][slot] = c;
            }
            self.occupancy[level] += c;
            if last {
                visit(&self.outcome, &self.occupancy);
            } else {
                self.unlabeled(slot_index + 1, firms_left - c, total, visit);
            }
            self.occupancy[level] -= c;
        }
        if let Assignment::Unlabeled(counts) = &mut self.outcome.assignment {
            counts[level][slot] = 0;
        }
    }
}

/// All outcomes of one economic order.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeGroup {
    pub order: EconomicOrder,
    pub outcomes: Vec<MicroOutcome>,
}

/// Every feasible outcome grouped by order; groups follow the order of
/// [`enumerate_orders`].
pub fn enumerate_outcomes(
    grid: &RevenueGrid,
    config: &EconomyConfig,
    cap: u64,
) -> Result<Vec<OutcomeGroup>> {
    let mut groups: BTreeMap<Vec<u64>, Vec<MicroOutcome>> = BTreeMap::new();
    for_each_outcome(grid, config, cap, |o, a| {
        groups.entry(a.to_vec()).or_default().push(o.clone());
    })?;
    Ok(groups
        .into_iter()
        .rev()
        .map(|(a, outcomes)| OutcomeGroup { order: EconomicOrder::new(a), outcomes })
        .collect())
}

/// Number of enumerated outcomes in each order, without storing the outcomes.
pub fn outcome_group_sizes(
    grid: &RevenueGrid,
    config: &EconomyConfig,
    cap: u64,
) -> Result<BTreeMap<EconomicOrder, u64>> {
    let mut sizes: HashMap<Vec<u64>, u64> = HashMap::new();
    for_each_outcome(grid, config, cap, |_, a| {
        if let Some(c) = sizes.get_mut(a) {
            *c += 1;
        } else {
            sizes.insert(a.to_vec(), 1);
        }
    })?;
    Ok(sizes.into_iter().map(|(a, c)| (EconomicOrder::new(a), c)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub order: EconomicOrder,
    pub multiplicity: BigUint,
    pub probability: BigRational,
}

/// Exact probability of every feasible order under equally likely outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderCatalog {
    /// Sorted by multiplicity, largest first; ties by ascending occupancy.
    pub entries: Vec<CatalogEntry>,
    pub total_outcomes: BigUint,
}

impl OrderCatalog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn probability_of(&self, order: &EconomicOrder) -> Option<&BigRational> {
        self.entries.iter().find(|e| &e.order == order).map(|e| &e.probability)
    }
}

/// Builds the catalog `P[order] = Omega(order) / sum Omega`.
pub fn catalog(grid: &RevenueGrid, config: &EconomyConfig) -> Result<OrderCatalog> {
    catalog_with(grid, config, multiplicity)
}

/// [`catalog`] with a caller-supplied counting function.
pub fn catalog_with<C>(grid: &RevenueGrid, config: &EconomyConfig, count: C) -> Result<OrderCatalog>
where
    C: Fn(&EconomicOrder, &RevenueGrid, Regime) -> Result<BigUint>,
{
    let orders = enumerate_orders(grid, config);
    if orders.is_empty() {
        return Err(Error::Infeasible(infeasible_message(grid, config)));
    }
    let mut weighted = Vec::with_capacity(orders.len());
    let mut total = BigUint::zero();
    for order in orders {
        let omega = count(&order, grid, config.regime)?;
        total += &omega;
        weighted.push((order, omega));
    }
    weighted.sort_by(|(oa, wa), (ob, wb)| wb.cmp(wa).then_with(|| oa.cmp(ob)));
    let denom = BigInt::from(total.clone());
    let entries = weighted
        .into_iter()
        .map(|(order, omega)| CatalogEntry {
            probability: BigRational::new(BigInt::from(omega.clone()), denom.clone()),
            order,
            multiplicity: omega,
        })
        .collect();
    Ok(OrderCatalog { entries, total_outcomes: total })
}

pub(crate) fn infeasible_message(grid: &RevenueGrid, config: &EconomyConfig) -> String {
    match config.total_revenue {
        Some(pi) => format!(
            "no occupancy of {} firms over levels {:?} has total revenue {}",
            config.n_firms,
            grid.levels(),
            pi
        ),
        None => format!("no occupancy of {} firms exists", config.n_firms),
    }
}

/// The most probable order with its full tie set.
#[derive(Debug, Clone, PartialEq)]
pub struct SpontaneousOrder {
    /// Lexicographically smallest among the maximizers.
    pub order: EconomicOrder,
    pub multiplicity: BigUint,
    /// Every order attaining the maximal multiplicity, ascending.
    pub ties: Vec<EconomicOrder>,
}

/// Exact argmax of the catalog. Ties resolve to the lexicographically smallest
/// occupancy; the whole tie set is reported alongside.
pub fn spontaneous_order_exact(catalog: &OrderCatalog) -> Result<SpontaneousOrder> {
    let first = catalog
        .entries
        .first()
        .ok_or_else(|| Error::Domain("catalog is empty".into()))?;
    let ties = catalog
        .entries
        .iter()
        .take_while(|e| e.multiplicity == first.multiplicity)
        .map(|e| e.order.clone())
        .collect();
    Ok(SpontaneousOrder {
        order: first.order.clone(),
        multiplicity: first.multiplicity.clone(),
        ties,
    })
}

/// Rational probability as a float; exact enough for reporting.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    let (n, d) = (r.numer(), r.denom());
    match (n.to_f64(), d.to_f64()) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() => a / b,
        _ => {
            // Scale both down to a common bit length first.
            let shift = d.bits().saturating_sub(1000);
            let a = (n >> shift).to_f64().unwrap_or(0.0);
            let b = (d >> shift).to_f64().unwrap_or(f64::INFINITY);
            a / b
        }
    }
}

/// Sum of all catalog probabilities; exactly one by construction.
pub fn total_probability(catalog: &OrderCatalog) -> BigRational {
    catalog.entries.iter().fold(BigRational::zero(), |acc, e| acc + &e.probability)
}

/// Convenience for configs: is `Pi` reachable at all?
pub fn revenue_in_range(grid: &RevenueGrid, n_firms: u64, total_revenue: Money) -> bool {
    let lo = n_firms as u128 * grid.lowest() as u128;
    let hi = n_firms as u128 * grid.highest() as u128;
    (lo..=hi).contains(&(total_revenue as u128))
}

impl CatalogEntry {
    pub fn is_certain(&self) -> bool {
        self.probability.is_one()
    }
}
