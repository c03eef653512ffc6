//! End-to-end invariant suites: counting oracle, macro identities, and
//! solver convergence. Reports are plain data with deterministic ordering so
//! repeated runs serialize identically.

use num_bigint::BigUint;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::counting::multiplicity;
use crate::economy::{EconomicOrder, EconomyConfig, Money, Regime, RevenueGrid};
use crate::enumerate::{catalog, catalog_with, outcome_count_bound, outcome_group_sizes, spontaneous_order_exact};
use crate::error::{Error, Result};
use crate::macrolink::{
    entropy_identity_residual, log_w_gradient, macro_from_multipliers, multipliers_from_macro,
    occupancy_from_macro,
};
use crate::maxent::{solve_multipliers, MultiplierSolution, SolverOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckItem {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub items: Vec<CheckItem>,
}

impl SuiteReport {
    fn new(suite: &str, items: Vec<CheckItem>) -> Self {
        Self { suite: suite.into(), passed: items.iter().all(|i| i.passed), items }
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckItem> {
        self.items.iter().filter(|i| !i.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

/// Deliberate corruption used to prove that the suites can fail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fault {
    /// Report `Omega + 1` for this order.
    CorruptMultiplicity(EconomicOrder),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckSettings {
    pub grid: RevenueGrid,
    pub config: EconomyConfig,
    pub seeds: Vec<u64>,
    pub lambda: f64,
    /// Random small instances per seed and regime in the oracle suite.
    pub random_instances: usize,
    pub outcome_cap: u64,
    /// Largest accepted relative entropy-identity residual.
    pub identity_tolerance: f64,
    pub solver: SolverOptions,
    pub fault: Option<Fault>,
}

impl CheckSettings {
    pub fn new(grid: RevenueGrid, config: EconomyConfig) -> Self {
        Self {
            grid,
            config,
            seeds: vec![0],
            lambda: 1.0,
            random_instances: 25,
            outcome_cap: 1_000_000,
            identity_tolerance: 0.01,
            solver: SolverOptions::default(),
            fault: None,
        }
    }

    fn count(&self, order: &EconomicOrder, grid: &RevenueGrid, regime: Regime) -> Result<BigUint> {
        let omega = multiplicity(order, grid, regime)?;
        match &self.fault {
            Some(Fault::CorruptMultiplicity(bad)) if bad == order => Ok(omega + BigUint::one()),
            _ => Ok(omega),
        }
    }
}

pub fn run_all(settings: &CheckSettings) -> CheckReport {
    let suites = vec![oracle_suite(settings), identity_suite(settings), convergence_suite(settings)];
    CheckReport { passed: suites.iter().all(|s| s.passed), suites }
}

/// A random desk-scale instance: `n <= 4` levels, `g_k <= 3`, `N <= 6`, with
/// the revenue of a random order (so it is feasible) or no revenue constraint.
pub fn random_small_instance<R: Rng>(rng: &mut R, regime: Regime) -> (RevenueGrid, EconomyConfig) {
    let n = rng.random_range(1..=4usize);
    let mut levels = Vec::with_capacity(n);
    let mut e: Money = rng.random_range(0..=3);
    for _ in 0..n {
        e += rng.random_range(1..=4);
        levels.push(e);
    }
    let g = (0..n).map(|_| rng.random_range(1..=3u64)).collect();
    let grid = RevenueGrid::new(levels, g).expect("increasing levels");
    let n_firms = rng.random_range(1..=6u64);
    let config = if rng.random_bool(0.2) {
        EconomyConfig::unconstrained(n_firms, regime)
    } else {
        let revenue: Money = (0..n_firms).map(|_| grid.level(rng.random_range(0..n))).sum();
        EconomyConfig::new(n_firms, revenue, regime)
    };
    (grid, config.expect("positive firm count"))
}

fn oracle_item(settings: &CheckSettings, label: &str, grid: &RevenueGrid, config: &EconomyConfig) -> Result<CheckItem> {
    let sizes = outcome_group_sizes(grid, config, settings.outcome_cap)?;
    let mut mismatches = Vec::new();
    for (order, &size) in &sizes {
        let omega = settings.count(order, grid, config.regime)?;
        if omega != BigUint::from(size) {
            mismatches.push(format!("order {order}: formula {omega}, enumerated {size}"));
        }
    }
    let mut detail = format!("{} orders, {} outcomes", sizes.len(), sizes.values().sum::<u64>());
    if !mismatches.is_empty() {
        detail = mismatches.join("; ");
    } else if !sizes.is_empty() {
        // Argmax of group sizes must agree with the exact catalog.
        let cat = catalog_with(grid, config, |o, g, r| settings.count(o, g, r))?;
        let best = spontaneous_order_exact(&cat)?;
        let max_size = sizes.values().max().copied().unwrap_or(0);
        if sizes.get(&best.order) != Some(&max_size) {
            mismatches.push(format!("catalog argmax {} is not a largest group", best.order));
            detail = mismatches.join("; ");
        }
    }
    Ok(CheckItem::new(format!("oracle {label}"), mismatches.is_empty(), detail))
}

/// Formula multiplicities against exhaustive enumeration.
pub fn oracle_suite(settings: &CheckSettings) -> SuiteReport {
    let mut items = Vec::new();
    let (grid, config) = (&settings.grid, &settings.config);
    if outcome_count_bound(grid, config) <= BigUint::from(settings.outcome_cap) {
        items.push(
            oracle_item(settings, "configured economy", grid, config)
                .unwrap_or_else(|e| CheckItem::new("oracle configured economy", false, e.to_string())),
        );
    } else {
        items.push(CheckItem::new(
            "oracle configured economy",
            true,
            format!("skipped: up to {} outcomes exceeds the cap", outcome_count_bound(grid, config)),
        ));
    }
    for &seed in &settings.seeds {
        for regime in Regime::BOTH {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut failures = Vec::new();
            for i in 0..settings.random_instances {
                let (g, c) = random_small_instance(&mut rng, regime);
                match oracle_item(settings, "", &g, &c) {
                    Ok(item) if item.passed => {}
                    Ok(item) => failures.push(format!("instance {i}: {}", item.detail)),
                    Err(e) => failures.push(format!("instance {i}: {e}")),
                }
            }
            let detail = if failures.is_empty() {
                format!("{} instances agree", settings.random_instances)
            } else {
                failures.join("; ")
            };
            items.push(CheckItem::new(format!("oracle random seed={seed} regime={regime}"), failures.is_empty(), detail));
        }
    }
    if let Ok(cat) = catalog(grid, config) {
        let total: num_rational::BigRational = cat.entries.iter().map(|e| e.probability.clone()).sum();
        items.push(CheckItem::new("catalog normalization", total.is_one(), format!("sum of probabilities = {total}")));
    }
    SuiteReport::new("oracle", items)
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Macro mapping round trip, occupancy equivalence, constraint recovery from
/// `ln W`, and the entropy identity.
pub fn identity_suite(settings: &CheckSettings) -> SuiteReport {
    let (grid, config) = (&settings.grid, &settings.config);
    if config.total_revenue.is_none() {
        let item = CheckItem::new("identities", true, "skipped: no revenue constraint, so no multipliers");
        return SuiteReport::new("identity", vec![item]);
    }
    let solution = match solve_multipliers(grid, config, settings.solver) {
        Ok(s) if s.boundary.is_none() => s,
        Ok(_) => {
            let item = CheckItem::new("identities", true, "skipped: boundary economy has no finite multipliers");
            return SuiteReport::new("identity", vec![item]);
        }
        Err(e) => return SuiteReport::new("identity", vec![CheckItem::new("solve", false, e.to_string())]),
    };
    let items = identity_items(settings, &solution).unwrap_or_else(|e| vec![CheckItem::new("identities", false, e.to_string())]);
    SuiteReport::new("identity", items)
}

fn identity_items(settings: &CheckSettings, s: &MultiplierSolution) -> Result<Vec<CheckItem>> {
    let (grid, config) = (&settings.grid, &settings.config);
    let regime = config.regime;
    let mut items = Vec::new();

    let params = macro_from_multipliers(s.alpha, s.beta, settings.lambda)?;
    let (a2, b2) = multipliers_from_macro(&params)?;
    let trip = relative(a2, s.alpha).max(relative(b2, s.beta));
    items.push(CheckItem::new("macro round trip", trip <= 1e-12, format!("relative error {trip:.3e} (limit 1e-12)")));

    let occ = occupancy_from_macro(&params, grid, regime)?;
    let gap = occ.iter().zip(&s.occupancy).map(|(a, b)| relative(*a, *b)).fold(0.0, f64::max);
    items.push(CheckItem::new("macro occupancy", gap <= 1e-10, format!("relative error {gap:.3e} (limit 1e-10)")));

    let n = config.n_firms as f64;
    let pi = config.total_revenue.map_or(0.0, |p| p as f64 * grid.quantum());
    let grad = log_w_gradient(s.alpha, s.beta, grid, regime)?;
    let rec = relative(grad[0], n).max(relative(grad[1], pi));
    items.push(CheckItem::new(
        "constraints from ln W",
        rec <= 1e-8,
        format!("d lnW/d alpha = {:.12e}, d lnW/d beta = {:.12e}, relative error {rec:.3e} (limit 1e-8)", grad[0], grad[1]),
    ));

    let id = entropy_identity_residual(s.alpha, s.beta, grid, regime)?;
    items.push(CheckItem::new(
        "ln W gradient finite differences",
        id.gradient_fd_error <= 1e-6,
        format!("relative error {:.3e} (limit 1e-6)", id.gradient_fd_error),
    ));
    items.push(CheckItem::new(
        "entropy identity",
        id.relative_residual <= settings.identity_tolerance,
        format!(
            "best sign {:+}, residual {:.6e}, relative {:.6e} (limit {})",
            id.best_sign, id.best_residual, id.relative_residual, settings.identity_tolerance
        ),
    ));
    Ok(items)
}

/// L1 distance between the exact most probable order and the maxent
/// occupancy, both divided by `N`.
pub fn argmax_distance(grid: &RevenueGrid, config: &EconomyConfig, solver: SolverOptions) -> Result<f64> {
    let exact = spontaneous_order_exact(&catalog(grid, config)?)?;
    let sol = solve_multipliers(grid, config, solver)?;
    if !sol.converged {
        return Err(Error::NonConvergence(format!("solver did not converge for N = {}", config.n_firms)));
    }
    let n = config.n_firms as f64;
    Ok(exact.order.occupancy().iter().zip(&sol.occupancy).map(|(&a, &b)| (a as f64 / n - b / n).abs()).sum())
}

/// Solver convergence on the configured economy and on random feasible ones,
/// plus the exact-argmax distance as `N` doubles at fixed mean revenue.
pub fn convergence_suite(settings: &CheckSettings) -> SuiteReport {
    let (grid, config) = (&settings.grid, &settings.config);
    let mut items = Vec::new();
    match config.total_revenue.map(|_| solve_multipliers(grid, config, settings.solver)) {
        None => items.push(CheckItem::new("solver on configured economy", true, "skipped: no revenue constraint")),
        Some(Ok(s)) => items.push(CheckItem::new(
            "solver on configured economy",
            s.converged,
            format!("residuals N {:.3e}, Pi {:.3e}, {} iterations, {:?}", s.residual_n, s.residual_pi, s.iterations, s.method),
        )),
        Some(Err(e)) => items.push(CheckItem::new("solver on configured economy", false, e.to_string())),
    }

    for &seed in &settings.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut failed = Vec::new();
        for i in 0..settings.random_instances {
            let regime = if i % 2 == 0 { Regime::Monopolistic } else { Regime::Perfect };
            let n = rng.random_range(2..=8usize);
            let mut levels = Vec::with_capacity(n);
            let mut e: Money = 0;
            for _ in 0..n {
                e += rng.random_range(1..=20);
                levels.push(e);
            }
            let g = (0..n).map(|_| rng.random_range(1..=10u64)).collect();
            let grid = RevenueGrid::new(levels, g).expect("increasing levels");
            let n_firms = rng.random_range(1..=10_000u64);
            let lo = n_firms * grid.lowest();
            let hi = n_firms * grid.highest();
            let pi = rng.random_range(lo + 1..hi);
            let c = EconomyConfig::new(n_firms, pi, regime).expect("positive firm count");
            match solve_multipliers(&grid, &c, settings.solver) {
                Ok(s) if s.converged => {}
                Ok(s) => failed.push(format!("instance {i}: residuals {:.3e}, {:.3e}", s.residual_n, s.residual_pi)),
                Err(e) => failed.push(format!("instance {i}: {e}")),
            }
        }
        let detail = if failed.is_empty() {
            format!("{} instances converged", settings.random_instances)
        } else {
            failed.join("; ")
        };
        items.push(CheckItem::new(format!("solver random seed={seed}"), failed.is_empty(), detail));
    }

    if let Some(mean) = config.mean_revenue() {
        let mut distances = Vec::new();
        let mut error = None;
        for n in [8u64, 16, 32, 64] {
            let pi = (mean * n as f64).round() as Money;
            let c = EconomyConfig::new(n, pi, config.regime).expect("positive firm count");
            match argmax_distance(grid, &c, settings.solver) {
                Ok(d) => distances.push((n, d)),
                Err(e) => {
                    error = Some(format!("N = {n}: {e}"));
                    break;
                }
            }
        }
        let item = match error {
            Some(e) => CheckItem::new("argmax convergence", false, e),
            None => {
                let monotone = distances.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
                let last = distances.last().map_or(f64::INFINITY, |d| d.1);
                let text: Vec<String> = distances.iter().map(|(n, d)| format!("N={n}: {d:.6}")).collect();
                CheckItem::new(
                    "argmax convergence",
                    monotone && last <= 0.05,
                    format!("{} (non-increasing, final <= 0.05)", text.join(", ")),
                )
            }
        };
        items.push(item);
    }
    SuiteReport::new("convergence", items)
}
