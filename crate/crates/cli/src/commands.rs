use std::fs;
use std::path::{Path, PathBuf};

use econorder::checks::{self, CheckSettings, Fault};
use econorder::empirics::{self, FitResult, GoodnessOfFit, SampleFormat, SampleSet};
use econorder::enumerate::{composition_count, for_each_outcome, outcome_count_bound, rational_to_f64};
use econorder::macrolink::{macro_production, macro_report, EntropyIdentity};
use econorder::maxent::detect_condensation;
use econorder::sampler::order_counts;
use econorder::stats::{chi_square_gof, ChiSquareTest};
use econorder::{
    catalog, solve_multipliers, spontaneous_order_exact, EconomicOrder, EconomyConfig, Error, MultiplierSolution,
    OrderCatalog, OutcomeSampler, RevenueGrid, SamplerMode, SamplerOptions, SolverOptions,
};
use num_bigint::BigUint;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).expect("serializable report");
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

fn write_csv(dir: &Path, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(header).map_err(|e| csv_err(&path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(path)
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::Io { path: path.to_path_buf(), source: std::io::Error::other(e.to_string()) }
}

fn occupancy_text(order: &EconomicOrder) -> String {
    order.to_string()
}

#[derive(Serialize)]
struct EconomySummary<'a> {
    n_firms: u64,
    total_revenue: Option<u64>,
    regime: String,
    levels: &'a [u64],
    degeneracies: &'a [u64],
    quantum: f64,
}

fn economy_summary<'a>(grid: &'a RevenueGrid, economy: &EconomyConfig) -> EconomySummary<'a> {
    EconomySummary {
        n_firms: economy.n_firms,
        total_revenue: economy.total_revenue,
        regime: economy.regime.short_name().into(),
        levels: grid.levels(),
        degeneracies: grid.degeneracies(),
        quantum: grid.quantum(),
    }
}

fn order_cap(config: &RunConfig) -> Result<(), CliError> {
    let orders = composition_count(config.economy.n_firms, config.grid.len());
    if orders > BigUint::from(config.caps.outcomes) {
        return Err(Error::CapExceeded { bound: orders.to_string(), cap: config.caps.outcomes }.into());
    }
    Ok(())
}

#[derive(Serialize)]
struct Probability {
    numerator: String,
    denominator: String,
    float: f64,
}

#[derive(Serialize)]
struct SpontaneousOut<'a> {
    economy: EconomySummary<'a>,
    order: EconomicOrder,
    multiplicity: String,
    probability: Probability,
    ties: Vec<EconomicOrder>,
    n_orders: usize,
    total_outcomes: String,
    /// Outcomes generated one by one, when within the cap.
    enumerated_outcomes: Option<u64>,
}

pub fn enumerate(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let (grid, economy) = (&config.grid, &config.economy);
    order_cap(config)?;
    let cat = catalog(grid, economy)?;
    let top = spontaneous_order_exact(&cat)?;
    let enumerated = if outcome_count_bound(grid, economy) <= BigUint::from(config.caps.outcomes) {
        Some(for_each_outcome(grid, economy, config.caps.outcomes, |_, _| {})?)
    } else {
        None
    };

    let dir = &config.output_dir;
    prepare_dir(dir)?;
    let rows = cat
        .entries
        .iter()
        .map(|e| {
            vec![
                occupancy_text(&e.order),
                e.multiplicity.to_string(),
                e.probability.numer().to_string(),
                e.probability.denom().to_string(),
                rational_to_f64(&e.probability).to_string(),
            ]
        })
        .collect();
    let orders = write_csv(
        dir,
        "orders.csv",
        &["occupancy", "multiplicity", "probability_num", "probability_den", "probability_float"],
        rows,
    )?;
    let p = cat.probability_of(&top.order).expect("argmax is in the catalog");
    let summary = SpontaneousOut {
        economy: economy_summary(grid, economy),
        probability: Probability {
            numerator: p.numer().to_string(),
            denominator: p.denom().to_string(),
            float: rational_to_f64(p),
        },
        order: top.order,
        multiplicity: top.multiplicity.to_string(),
        ties: top.ties,
        n_orders: cat.len(),
        total_outcomes: cat.total_outcomes.to_string(),
        enumerated_outcomes: enumerated,
    };
    let spontaneous = write_json(dir, "spontaneous.json", &summary)?;
    Ok(vec![orders, spontaneous])
}

#[derive(Serialize)]
struct SolutionOut<'a> {
    economy: EconomySummary<'a>,
    solution: &'a MultiplierSolution,
    condensation: econorder::CondensationReport,
    /// Absent for boundary solutions, which have no finite multipliers.
    #[serde(rename = "macro")]
    macro_: Option<econorder::MacroReport>,
}

fn solve_checked(config: &RunConfig) -> Result<MultiplierSolution, CliError> {
    Ok(solve_multipliers(&config.grid, &config.economy, SolverOptions::default())?)
}

fn not_converged(s: &MultiplierSolution) -> CliError {
    Error::NonConvergence(format!(
        "residuals {:.3e} (firms), {:.3e} (revenue) after {} iterations",
        s.residual_n, s.residual_pi, s.iterations
    ))
    .into()
}

pub fn solve(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let (grid, economy) = (&config.grid, &config.economy);
    let solution = solve_checked(config)?;
    let condensation = detect_condensation(&solution, grid, economy, config.thresholds);
    let macro_ = if solution.boundary.is_none() && solution.converged {
        Some(macro_report(&solution, grid, economy.regime, config.lambda)?)
    } else {
        None
    };
    let dir = &config.output_dir;
    prepare_dir(dir)?;
    let out = SolutionOut { economy: economy_summary(grid, economy), solution: &solution, condensation, macro_ };
    let json = write_json(dir, "solution.json", &out)?;
    let rows = (0..grid.len())
        .map(|k| {
            vec![
                (k + 1).to_string(),
                grid.money(k).to_string(),
                grid.degeneracy(k).to_string(),
                solution.occupancy[k].to_string(),
            ]
        })
        .collect();
    let csv = write_csv(dir, "occupancy.csv", &["level", "revenue", "degeneracy", "occupancy"], rows)?;
    if !solution.converged {
        return Err(not_converged(&solution));
    }
    Ok(vec![json, csv])
}

#[derive(Serialize)]
struct SampleRun {
    seed: u64,
    sampler: &'static str,
    draws: u64,
    acceptance_rate: Option<f64>,
    distinct_orders: usize,
    chi_square: Option<ChiSquareTest>,
    passes_at_0_01: Option<bool>,
}

#[derive(Serialize)]
struct SampleOut<'a> {
    economy: EconomySummary<'a>,
    feasible_orders: Option<usize>,
    runs: Vec<SampleRun>,
}

pub fn sample(config: &RunConfig, draws: u64, mode: SamplerMode) -> Result<Vec<PathBuf>, CliError> {
    let (grid, economy) = (&config.grid, &config.economy);
    let exact: Option<OrderCatalog> = if composition_count(economy.n_firms, grid.len())
        <= BigUint::from(config.caps.outcomes)
    {
        Some(catalog(grid, economy)?)
    } else {
        None
    };

    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for &seed in &config.seeds {
        let options = SamplerOptions {
            mode,
            seed,
            burn_in: config.burn_in,
            thinning: config.thinning,
            exact_cap: config.caps.exact_sampling,
        };
        let mut sampler = OutcomeSampler::new(grid, economy, options)?;
        let counts = order_counts(sampler.by_ref().take(draws as usize), grid.len());
        let n = draws as f64;
        let chi = match &exact {
            Some(cat) => {
                let observed: Vec<u64> = cat.entries.iter().map(|e| counts.get(&e.order).copied().unwrap_or(0)).collect();
                let probs: Vec<f64> = cat.entries.iter().map(|e| rational_to_f64(&e.probability)).collect();
                for (e, &o) in cat.entries.iter().zip(&observed) {
                    rows.push(vec![
                        seed.to_string(),
                        occupancy_text(&e.order),
                        o.to_string(),
                        (o as f64 / n).to_string(),
                        rational_to_f64(&e.probability).to_string(),
                    ]);
                }
                Some(chi_square_gof(&observed, &probs)?)
            }
            None => {
                for (order, &o) in &counts {
                    rows.push(vec![seed.to_string(), occupancy_text(order), o.to_string(), (o as f64 / n).to_string(), String::new()]);
                }
                None
            }
        };
        runs.push(SampleRun {
            seed,
            sampler: if sampler.is_exact() { "exact" } else { "markov" },
            draws,
            acceptance_rate: sampler.acceptance_rate(),
            distinct_orders: counts.len(),
            passes_at_0_01: chi.map(|c| c.passes(0.01)),
            chi_square: chi,
        });
    }

    let dir = &config.output_dir;
    prepare_dir(dir)?;
    let csv = write_csv(dir, "frequencies.csv", &["seed", "occupancy", "count", "frequency", "exact_probability"], rows)?;
    let out = SampleOut { economy: economy_summary(grid, economy), feasible_orders: exact.as_ref().map(|c| c.len()), runs };
    let json = write_json(dir, "sample.json", &out)?;
    Ok(vec![csv, json])
}

#[derive(Serialize)]
struct FitSummary {
    model: empirics::Model,
    mu: f64,
    temperature: f64,
    ks_statistic: f64,
    log_likelihood: Option<f64>,
    n_used: usize,
    tail_truncated_fraction: f64,
    status: empirics::FitStatus,
    scale: Option<f64>,
    goodness_of_fit: GoodnessOfFit,
}

#[derive(Serialize)]
#[serde(untagged)]
enum FitOutcome {
    Fit(FitSummary),
    Failed { error: String },
}

#[derive(Serialize)]
struct FitOut {
    source: String,
    n: usize,
    tail_quantile: f64,
    bins: usize,
    boltzmann: FitOutcome,
    bose_einstein: FitOutcome,
    /// Model with the smaller KS statistic among successful fits.
    preferred: Option<empirics::Model>,
}

fn summarize(samples: &SampleSet, fit: &FitResult) -> FitSummary {
    FitSummary {
        model: fit.model,
        mu: fit.mu,
        temperature: fit.temperature,
        ks_statistic: fit.ks_statistic,
        log_likelihood: fit.log_likelihood,
        n_used: fit.n_used,
        tail_truncated_fraction: fit.tail_truncated_fraction,
        status: fit.status,
        scale: fit.scale,
        goodness_of_fit: empirics::goodness_of_fit(samples, fit),
    }
}

pub fn fit(
    data: &Path,
    format: SampleFormat,
    tail_quantile: f64,
    bins: usize,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let samples = empirics::load_samples(data, format).map_err(|e| match e {
        Error::Io(source) => CliError::Io { path: data.to_path_buf(), source },
        other => other.into(),
    })?;
    let boltzmann = empirics::fit_boltzmann(&samples, tail_quantile);
    let bose = empirics::fit_bose_einstein(&samples, bins);

    let mut rows = Vec::new();
    for fit in [&boltzmann, &bose].into_iter().flatten() {
        let name = match fit.model {
            empirics::Model::Boltzmann => "boltzmann",
            empirics::Model::BoseEinstein => "bose_einstein",
        };
        for b in &fit.bins {
            rows.push(vec![name.to_string(), b.center.to_string(), b.observed.to_string(), b.fitted.to_string()]);
        }
    }
    let preferred = match (&boltzmann, &bose) {
        (Ok(a), Ok(b)) => Some(if b.ks_statistic < a.ks_statistic { b.model } else { a.model }),
        (Ok(a), Err(_)) => Some(a.model),
        (Err(_), Ok(b)) => Some(b.model),
        (Err(_), Err(_)) => None,
    };
    let outcome = |r: &Result<FitResult, Error>| match r {
        Ok(f) => FitOutcome::Fit(summarize(&samples, f)),
        Err(e) => FitOutcome::Failed { error: e.to_string() },
    };
    let out = FitOut {
        source: samples.source.clone(),
        n: samples.len(),
        tail_quantile,
        bins,
        boltzmann: outcome(&boltzmann),
        bose_einstein: outcome(&bose),
        preferred,
    };

    prepare_dir(out_dir)?;
    let json = write_json(out_dir, "fit.json", &out)?;
    let csv = write_csv(out_dir, "bins.csv", &["model", "center", "observed", "fitted"], rows)?;
    // Report the first failure only after the partial results are on disk.
    boltzmann?;
    bose?;
    Ok(vec![json, csv])
}

#[derive(Serialize)]
struct Production {
    labor: f64,
    capital: f64,
    exponents: [f64; 3],
    output: f64,
}

#[derive(Serialize)]
struct MacroOut {
    mu: f64,
    theta: f64,
    lambda: f64,
    alpha: f64,
    beta: f64,
    #[serde(rename = "T")]
    technology: f64,
    #[serde(rename = "lnOmega")]
    ln_omega: f64,
    identity_residual: f64,
    best_sign: i8,
    identity: EntropyIdentity,
    production: Option<Production>,
}

pub struct ProductionArgs {
    pub labor: f64,
    pub capital: f64,
    pub exponents: [f64; 3],
}

pub fn macro_cmd(config: &RunConfig, production: Option<ProductionArgs>) -> Result<Vec<PathBuf>, CliError> {
    let solution = solve_checked(config)?;
    if !solution.converged {
        return Err(not_converged(&solution));
    }
    let r = macro_report(&solution, &config.grid, config.economy.regime, config.lambda)?;
    let production = match production {
        Some(p) => {
            let [x, y, z] = p.exponents;
            Some(Production {
                output: macro_production(p.labor, p.capital, r.technology, x, y, z)?,
                labor: p.labor,
                capital: p.capital,
                exponents: p.exponents,
            })
        }
        None => None,
    };
    let out = MacroOut {
        mu: r.mu,
        theta: r.theta,
        lambda: r.lambda,
        alpha: r.alpha,
        beta: r.beta,
        technology: r.technology,
        ln_omega: r.ln_omega,
        identity_residual: r.identity_residual,
        best_sign: r.best_sign,
        identity: r.identity,
        production,
    };
    let dir = &config.output_dir;
    prepare_dir(dir)?;
    Ok(vec![write_json(dir, "macro.json", &out)?])
}

pub fn parse_order(text: &str) -> Result<EconomicOrder, CliError> {
    let inner = text.trim().trim_start_matches('(').trim_end_matches(')');
    let occupancy: Result<Vec<u64>, _> = inner.split(',').map(|t| t.trim().parse::<u64>()).collect();
    match occupancy {
        Ok(v) if !v.is_empty() => Ok(EconomicOrder::new(v)),
        _ => Err(CliError::Config {
            field: "--inject-fault".into(),
            message: format!("expected an occupancy such as 1,1 but got {text:?}"),
        }),
    }
}

pub fn check(config: &RunConfig, fault: Option<EconomicOrder>) -> Result<Vec<PathBuf>, CliError> {
    let mut settings = CheckSettings::new(config.grid.clone(), config.economy.clone());
    settings.seeds = config.seeds.clone();
    settings.lambda = config.lambda;
    settings.random_instances = config.random_instances;
    settings.outcome_cap = config.caps.outcomes;
    settings.identity_tolerance = config.identity_tolerance;
    settings.fault = fault.map(Fault::CorruptMultiplicity);
    let report = checks::run_all(&settings);

    let dir = &config.output_dir;
    prepare_dir(dir)?;
    let mut written = vec![write_json(dir, "check.json", &report)?];
    for suite in &report.suites {
        written.push(write_json(dir, &format!("check_{}.json", suite.suite), suite)?);
    }
    if !report.passed {
        let failures = report
            .suites
            .iter()
            .flat_map(|s| s.failures().map(move |i| format!("{}/{}: {}", s.suite, i.name, i.detail)))
            .collect();
        return Err(CliError::ChecksFailed(failures));
    }
    Ok(written)
}

