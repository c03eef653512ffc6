//! Domain types: the revenue grid, the economy being studied, economic orders
//! and equilibrium share vectors.
//!
//! Money is stored as non-negative integers counted in a configurable quantum,
//! so the revenue constraint `sum a_k * eps_k == Pi` is an exact integer test.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An amount of money, in grid quanta.
pub type Money = u64;

/// Ladder of revenue levels `eps_1 < ... < eps_n` with the number of
/// industries `g_k` paying each level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RevenueGrid {
    levels: Vec<Money>,
    degeneracies: Vec<u64>,
    quantum: f64,
}

impl RevenueGrid {
    pub fn new(levels: Vec<Money>, degeneracies: Vec<u64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidGrid("at least one revenue level is required".into()));
        }
        if degeneracies.len() != levels.len() {
            return Err(Error::InvalidGrid(format!(
                "{} degeneracies given for {} levels",
                degeneracies.len(),
                levels.len()
            )));
        }
        if let Some(w) = levels.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(format!(
                "levels must be strictly increasing (level {} = {} is not below level {} = {})",
                w + 1,
                levels[w],
                w + 2,
                levels[w + 1]
            )));
        }
        if let Some(k) = degeneracies.iter().position(|&g| g == 0) {
            return Err(Error::InvalidGrid(format!("degeneracy of level {} must be >= 1", k + 1)));
        }
        Ok(Self { levels, degeneracies, quantum: 1.0 })
    }

    /// A grid where every level is paid by a single industry.
    pub fn with_unit_degeneracy(levels: Vec<Money>) -> Result<Self> {
        let n = levels.len();
        Self::new(levels, vec![1; n])
    }

    /// Sets the size of one money quantum (default 1).
    pub fn with_quantum(mut self, quantum: f64) -> Result<Self> {
        if !(quantum.is_finite() && quantum > 0.0) {
            return Err(Error::InvalidGrid(format!("quantum must be positive, got {quantum}")));
        }
        self.quantum = quantum;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    /// Always false; a grid has at least one level.
    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[Money] {
        &self.levels
    }

    pub fn degeneracies(&self) -> &[u64] {
        &self.degeneracies
    }

    pub fn quantum(&self) -> f64 {
        self.quantum
    }

    pub fn level(&self, k: usize) -> Money {
        self.levels[k]
    }

    pub fn degeneracy(&self, k: usize) -> u64 {
        self.degeneracies[k]
    }

    /// Revenue of level `k` in money units (quanta times quantum size).
    pub fn money(&self, k: usize) -> f64 {
        self.levels[k] as f64 * self.quantum
    }

    /// All levels in money units.
    pub fn money_levels(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.money(k)).collect()
    }

    pub fn lowest(&self) -> Money {
        self.levels[0]
    }

    pub fn highest(&self) -> Money {
        self.levels[self.levels.len() - 1]
    }

    /// Total number of industry slots, `sum g_k`.
    pub fn total_slots(&self) -> u64 {
        self.degeneracies.iter().sum()
    }

    /// The same grid with every level multiplied by `c`.
    pub fn scaled(&self, c: u64) -> Result<Self> {
        if c == 0 {
            return Err(Error::InvalidGrid("scale factor must be positive".into()));
        }
        let mut levels = Vec::with_capacity(self.len());
        for &e in &self.levels {
            levels.push(
                e.checked_mul(c)
                    .ok_or_else(|| Error::InvalidGrid("scaled level overflows".into()))?,
            );
        }
        Ok(Self { levels, degeneracies: self.degeneracies.clone(), quantum: self.quantum })
    }
}

/// Competition regime, i.e. the statistics indicator `I` of the occupancy law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `I = 0`: distinguishable firms, Boltzmann counting.
    Monopolistic,
    /// `I = 1`: indistinguishable firms, Bose-Einstein counting.
    Perfect,
}

impl Regime {
    pub const BOTH: [Regime; 2] = [Regime::Monopolistic, Regime::Perfect];

    pub fn indicator(self) -> u8 {
        match self {
            Regime::Monopolistic => 0,
            Regime::Perfect => 1,
        }
    }

    pub fn from_indicator(i: u8) -> Result<Self> {
        match i {
            0 => Ok(Regime::Monopolistic),
            1 => Ok(Regime::Perfect),
            other => Err(Error::InvalidConfig(format!("regime indicator must be 0 or 1, got {other}"))),
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Regime::Monopolistic => "mon",
            Regime::Perfect => "per",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Monopolistic => "monopolistic",
            Regime::Perfect => "perfect",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mon" | "monopolistic" | "boltzmann" | "0" => Ok(Regime::Monopolistic),
            "per" | "perfect" | "bose-einstein" | "bose_einstein" | "1" => Ok(Regime::Perfect),
            other => Err(Error::InvalidConfig(format!(
                "unknown regime '{other}' (expected mon or per)"
            ))),
        }
    }
}

/// The economy under study: number of firms, total equilibrium revenue and
/// the competition regime.
///
/// `total_revenue == None` drops the revenue constraint, which is how the
/// unconstrained two-firm counting examples are expressed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EconomyConfig {
    pub n_firms: u64,
    pub total_revenue: Option<Money>,
    pub regime: Regime,
}

impl EconomyConfig {
    pub fn new(n_firms: u64, total_revenue: Money, regime: Regime) -> Result<Self> {
        Self::build(n_firms, Some(total_revenue), regime)
    }

    pub fn unconstrained(n_firms: u64, regime: Regime) -> Result<Self> {
        Self::build(n_firms, None, regime)
    }

    fn build(n_firms: u64, total_revenue: Option<Money>, regime: Regime) -> Result<Self> {
        if n_firms == 0 {
            return Err(Error::InvalidConfig("number of firms must be >= 1".into()));
        }
        Ok(Self { n_firms, total_revenue, regime })
    }

    pub fn with_regime(&self, regime: Regime) -> Self {
        Self { regime, ..self.clone() }
    }

    /// Mean revenue per firm in quanta, if the revenue constraint is active.
    pub fn mean_revenue(&self) -> Option<f64> {
        self.total_revenue.map(|pi| pi as f64 / self.n_firms as f64)
    }
}

/// Occupancy vector `a_k`: how many firms sit at each revenue level.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EconomicOrder(Vec<u64>);

impl EconomicOrder {
    pub fn new(occupancy: Vec<u64>) -> Self {
        Self(occupancy)
    }

    pub fn occupancy(&self) -> &[u64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<u64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn n_firms(&self) -> u64 {
        self.0.iter().sum()
    }

    /// `sum a_k * eps_k` in quanta. Panics if lengths differ.
    pub fn revenue(&self, grid: &RevenueGrid) -> u128 {
        assert_eq!(self.len(), grid.len());
        self.0
            .iter()
            .zip(grid.levels())
            .map(|(&a, &e)| a as u128 * e as u128)
            .sum()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&a| a as f64).collect()
    }

    pub(crate) fn check_len(&self, grid: &RevenueGrid) -> Result<()> {
        if self.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), found: self.len() });
        }
        Ok(())
    }
}

impl From<Vec<u64>> for EconomicOrder {
    fn from(v: Vec<u64>) -> Self {
        Self(v)
    }
}

impl fmt::Display for EconomicOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// Outcome of checking an order against the firm-count and revenue constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    /// `sum a_k - N`.
    pub firm_residual: i128,
    /// `sum a_k eps_k - Pi` in quanta; zero when the revenue constraint is dropped.
    pub revenue_residual: i128,
    pub feasible: bool,
}

pub fn validate_order(
    order: &EconomicOrder,
    grid: &RevenueGrid,
    config: &EconomyConfig,
) -> Result<ValidationReport> {
    order.check_len(grid)?;
    let firm_residual = order.n_firms() as i128 - config.n_firms as i128;
    let revenue_residual = match config.total_revenue {
        Some(pi) => order.revenue(grid) as i128 - pi as i128,
        None => 0,
    };
    Ok(ValidationReport {
        firm_residual,
        revenue_residual,
        feasible: firm_residual == 0 && revenue_residual == 0,
    })
}

/// Equilibrium output shares `t_j`, non-negative and summing to exactly one.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareVector(Vec<BigRational>);

impl ShareVector {
    pub fn new(shares: Vec<BigRational>) -> Result<Self> {
        if shares.is_empty() {
            return Err(Error::Domain("share vector must have at least one firm".into()));
        }
        if let Some(j) = shares.iter().position(|t| t.is_negative()) {
            return Err(Error::Domain(format!("share of firm {} is negative", j + 1)));
        }
        let total: BigRational = shares.iter().cloned().sum();
        if total != BigRational::from_integer(1.into()) {
            return Err(Error::Domain(format!("shares sum to {total}, not 1")));
        }
        Ok(Self(shares))
    }

    /// Builds shares from `(numerator, denominator)` pairs.
    pub fn from_ratios(ratios: &[(i64, i64)]) -> Result<Self> {
        let mut shares = Vec::with_capacity(ratios.len());
        for &(num, den) in ratios {
            if den == 0 {
                return Err(Error::Domain("share denominator is zero".into()));
            }
            shares.push(BigRational::new(BigInt::from(num), BigInt::from(den)));
        }
        Self::new(shares)
    }

    pub fn shares(&self) -> &[BigRational] {
        &self.0
    }
}

/// Firm revenues `eps_j = t_j * Pi`; they sum to `Pi` exactly.
pub fn shares_to_revenues(shares: &ShareVector, total_revenue: Money) -> Vec<BigRational> {
    let pi = BigRational::from_integer(BigInt::from(total_revenue));
    let revenues: Vec<BigRational> = shares.shares().iter().map(|t| t * &pi).collect();
    debug_assert!({
        let s: BigRational = revenues.iter().cloned().sum();
        (s - &pi).is_zero()
    });
    revenues
}
