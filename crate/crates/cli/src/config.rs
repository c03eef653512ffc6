//! Run configuration: a TOML file with `[economy]`, `[grid]`, `[thresholds]`,
//! `[caps]` and `[run]` sections. Every problem is reported with the path of
//! the offending field.

use std::path::{Path, PathBuf};

use econorder::enumerate::DEFAULT_OUTCOME_CAP;
use econorder::maxent::CondensationThresholds;
use econorder::sampler::DEFAULT_EXACT_CAP;
use econorder::{EconomyConfig, Regime, RevenueGrid};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    economy: RawEconomy,
    grid: RawGrid,
    #[serde(default)]
    thresholds: RawThresholds,
    #[serde(default)]
    caps: RawCaps,
    #[serde(default)]
    run: RawRun,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEconomy {
    n_firms: u64,
    /// Omitted: no revenue constraint.
    total_revenue: Option<u64>,
    regime: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    levels: Vec<u64>,
    degeneracies: Option<Vec<u64>>,
    quantum: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawThresholds {
    ground_fraction: f64,
    gap: f64,
    identity: f64,
}

impl Default for RawThresholds {
    fn default() -> Self {
        let c = CondensationThresholds::default();
        Self { ground_fraction: c.ground_fraction, gap: c.gap, identity: 0.01 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawCaps {
    outcomes: u64,
    exact_sampling: u64,
}

impl Default for RawCaps {
    fn default() -> Self {
        Self { outcomes: DEFAULT_OUTCOME_CAP, exact_sampling: DEFAULT_EXACT_CAP }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawRun {
    lambda: f64,
    seeds: Vec<u64>,
    draws: u64,
    burn_in: u64,
    thinning: u64,
    out: Option<PathBuf>,
    tail_quantile: f64,
    bins: usize,
    random_instances: usize,
}

impl Default for RawRun {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            seeds: vec![0],
            draws: 100_000,
            burn_in: 1_000,
            thinning: 10,
            out: None,
            tail_quantile: econorder::empirics::DEFAULT_TAIL_QUANTILE,
            bins: econorder::empirics::DEFAULT_BINS,
            random_instances: 25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Caps {
    pub outcomes: u64,
    pub exact_sampling: u64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub economy: EconomyConfig,
    pub grid: RevenueGrid,
    pub lambda: f64,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub thresholds: CondensationThresholds,
    pub identity_tolerance: f64,
    pub caps: Caps,
    pub draws: u64,
    pub burn_in: u64,
    pub thinning: u64,
    pub tail_quantile: f64,
    pub bins: usize,
    pub random_instances: usize,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub regime: Option<Regime>,
    pub lambda: Option<f64>,
    pub tail_quantile: Option<f64>,
}

fn field(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config { field: path.into(), message: message.into() }
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.into(), source: e })?;
        Self::parse(&text, overrides)
    }

    pub fn parse(text: &str, overrides: &Overrides) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| field("<file>", e.to_string().trim().to_string()))?;
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let message = e.inner().message().trim().to_string();
            field(if path == "." { "<file>" } else { &path }, message)
        })?;
        Self::validate(raw, overrides)
    }

    fn validate(raw: RawConfig, o: &Overrides) -> Result<Self, CliError> {
        let e = &raw.economy;
        if e.n_firms == 0 {
            return Err(field("economy.n_firms", "must be at least 1"));
        }
        let regime = match o.regime {
            Some(r) => r,
            None => e.regime.parse().map_err(|_| field("economy.regime", format!("unknown regime {:?}", e.regime)))?,
        };

        let g = &raw.grid;
        if g.levels.is_empty() {
            return Err(field("grid.levels", "needs at least one level"));
        }
        if let Some(k) = (1..g.levels.len()).find(|&k| g.levels[k] <= g.levels[k - 1]) {
            return Err(field(&format!("grid.levels[{k}]"), "levels must be strictly increasing"));
        }
        let degeneracies = g.degeneracies.clone().unwrap_or_else(|| vec![1; g.levels.len()]);
        if degeneracies.len() != g.levels.len() {
            return Err(field(
                "grid.degeneracies",
                format!("has {} entries but there are {} levels", degeneracies.len(), g.levels.len()),
            ));
        }
        if let Some(k) = degeneracies.iter().position(|&d| d == 0) {
            return Err(field(&format!("grid.degeneracies[{k}]"), "must be at least 1"));
        }
        let mut grid = RevenueGrid::new(g.levels.clone(), degeneracies).map_err(|e| field("grid", e.to_string()))?;
        if let Some(q) = g.quantum {
            if !(q > 0.0 && q.is_finite()) {
                return Err(field("grid.quantum", "must be positive"));
            }
            grid = grid.with_quantum(q).map_err(|e| field("grid.quantum", e.to_string()))?;
        }
        let economy = match e.total_revenue {
            Some(pi) => EconomyConfig::new(e.n_firms, pi, regime),
            None => EconomyConfig::unconstrained(e.n_firms, regime),
        }
        .map_err(|err| field("economy", err.to_string()))?;

        let t = &raw.thresholds;
        if !(0.0..=1.0).contains(&t.ground_fraction) {
            return Err(field("thresholds.ground_fraction", "must lie in [0, 1]"));
        }
        if !(t.gap >= 0.0 && t.gap.is_finite()) {
            return Err(field("thresholds.gap", "must be finite and non-negative"));
        }
        if !(t.identity > 0.0 && t.identity.is_finite()) {
            return Err(field("thresholds.identity", "must be positive"));
        }
        if raw.caps.outcomes == 0 {
            return Err(field("caps.outcomes", "must be positive"));
        }

        let r = &raw.run;
        let lambda = o.lambda.unwrap_or(r.lambda);
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(field(if o.lambda.is_some() { "--lambda" } else { "run.lambda" }, "must be positive"));
        }
        let tail_quantile = o.tail_quantile.unwrap_or(r.tail_quantile);
        if !(0.0..=0.2).contains(&tail_quantile) {
            let name = if o.tail_quantile.is_some() { "--tail-quantile" } else { "run.tail_quantile" };
            return Err(field(name, "must lie in [0, 0.2]"));
        }
        let seeds = if o.seeds.is_empty() { r.seeds.clone() } else { o.seeds.clone() };
        if seeds.is_empty() {
            return Err(field("run.seeds", "needs at least one seed"));
        }
        if r.draws == 0 {
            return Err(field("run.draws", "must be positive"));
        }
        if r.thinning == 0 {
            return Err(field("run.thinning", "must be positive"));
        }
        if r.bins < 5 {
            return Err(field("run.bins", "must be at least 5"));
        }
        Ok(Self {
            economy,
            grid,
            lambda,
            seeds,
            output_dir: o.out.clone().or_else(|| r.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
            thresholds: CondensationThresholds { ground_fraction: t.ground_fraction, gap: t.gap },
            identity_tolerance: t.identity,
            caps: Caps { outcomes: raw.caps.outcomes, exact_sampling: raw.caps.exact_sampling },
            draws: r.draws,
            burn_in: r.burn_in,
            thinning: r.thinning,
            tail_quantile,
            bins: r.bins,
            random_instances: r.random_instances,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[economy]\nn_firms = 2\nregime = \"mon\"\n[grid]\nlevels = [1, 2]\n";

    fn err_field(text: &str) -> String {
        match RunConfig::parse(text, &Overrides::default()) {
            Err(CliError::Config { field, .. }) => field,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::parse(MINIMAL, &Overrides::default()).unwrap();
        assert_eq!(c.grid.degeneracies(), &[1, 1]);
        assert_eq!(c.economy.total_revenue, None);
        assert_eq!(c.lambda, 1.0);
        assert_eq!(c.seeds, vec![0]);
        assert_eq!(c.caps.outcomes, 10_000_000);
    }

    #[test]
    fn overrides_win() {
        let o = Overrides {
            seeds: vec![4, 5],
            regime: Some(Regime::Perfect),
            lambda: Some(2.0),
            ..Overrides::default()
        };
        let c = RunConfig::parse(MINIMAL, &o).unwrap();
        assert_eq!(c.seeds, vec![4, 5]);
        assert_eq!(c.economy.regime, Regime::Perfect);
        assert_eq!(c.lambda, 2.0);
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(err_field("[economy]\nn_firms = 0\nregime = \"mon\"\n[grid]\nlevels = [1]\n"), "economy.n_firms");
        assert_eq!(err_field("[economy]\nn_firms = 2\nregime = \"x\"\n[grid]\nlevels = [1]\n"), "economy.regime");
        assert_eq!(err_field("[economy]\nn_firms = 2\nregime = \"mon\"\n[grid]\nlevels = [1, 3, 2]\n"), "grid.levels[2]");
        assert_eq!(
            err_field("[economy]\nn_firms = 2\nregime = \"mon\"\n[grid]\nlevels = [1, 3]\ndegeneracies = [1]\n"),
            "grid.degeneracies"
        );
        assert_eq!(
            err_field("[economy]\nn_firms = 2\nregime = \"mon\"\n[grid]\nlevels = [1, 3]\ndegeneracies = [1, 0]\n"),
            "grid.degeneracies[1]"
        );
        assert_eq!(err_field(&format!("{MINIMAL}[run]\nlambda = -1.0\n")), "run.lambda");
        assert_eq!(err_field(&format!("{MINIMAL}[run]\ntail_quantile = 0.5\n")), "run.tail_quantile");
        assert_eq!(err_field(&format!("{MINIMAL}[thresholds]\nground_fraction = 2.0\n")), "thresholds.ground_fraction");
        assert_eq!(err_field(&format!("{MINIMAL}[caps]\noutcomes = 0\n")), "caps.outcomes");
        assert_eq!(err_field(&format!("{MINIMAL}[run]\nbins = 3\n")), "run.bins");
        assert_eq!(err_field(&format!("{MINIMAL}[run]\nseeds = []\n")), "run.seeds");
    }

    #[test]
    fn type_errors_name_the_field() {
        assert_eq!(err_field("[economy]\nn_firms = \"two\"\nregime = \"mon\"\n[grid]\nlevels = [1]\n"), "economy.n_firms");
        assert_eq!(err_field("[economy]\nn_firms = 2\nregime = \"mon\"\n[grid]\nlevels = [1, -2]\n"), "grid.levels[1]");
        assert_eq!(err_field(&format!("{MINIMAL}[run]\nbogus = 1\n")), "run.bogus");
    }
}
