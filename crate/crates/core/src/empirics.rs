//! Fitting revenue or income samples with the two candidate laws:
//! exponential (monopolistic competition) and Bose-Einstein (perfect
//! competition), plus Kolmogorov-Smirnov goodness of fit.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::{ks_critical_value_01, ks_statistic};

/// Default share of the top of the sample dropped before the exponential fit.
pub const DEFAULT_TAIL_QUANTILE: f64 = 0.03;
pub const DEFAULT_BINS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    pub values: Vec<f64>,
    pub source: String,
}

impl SampleSet {
    pub fn new(values: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("no samples".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!("sample value {v} must be finite and non-negative")));
        }
        Ok(Self { values, source: source.into() })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn sorted(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleFormat {
    /// One value per line.
    OneColumn,
    /// `value,count` per line.
    ValueCount,
}

/// Reads samples from a CSV file. Blank lines and lines starting with `#`
/// are skipped.
pub fn load_samples(path: &Path, format: SampleFormat) -> Result<SampleSet> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_samples(&text, format, &path.display().to_string())
}

/// [`load_samples`] on in-memory text.
pub fn parse_samples(text: &str, format: SampleFormat, source: &str) -> Result<SampleSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse { line, message };
        let expected = match format {
            SampleFormat::OneColumn => 1,
            SampleFormat::ValueCount => 2,
        };
        if record.len() != expected {
            return Err(bad(format!("expected {expected} field(s), found {}", record.len())));
        }
        let value: f64 = record[0].parse().map_err(|_| bad(format!("cannot parse value {:?}", &record[0])))?;
        if !(value >= 0.0 && value.is_finite()) {
            return Err(bad(format!("value {value} must be finite and non-negative")));
        }
        let count: u64 = if expected == 2 {
            let c = record[1].parse().map_err(|_| bad(format!("cannot parse count {:?}", &record[1])))?;
            if c == 0 {
                return Err(bad("count must be at least 1".into()));
            }
            c
        } else {
            1
        };
        values.extend(std::iter::repeat_n(value, count as usize));
    }
    SampleSet::new(values, source)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Boltzmann,
    BoseEinstein,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    /// The best fit sits on a search bound, e.g. a Bose-Einstein fit to
    /// exponential data drives `mu` far below the support.
    AtBound,
}

/// Fitted distribution, used for the KS comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedLaw {
    /// Exponential with location `mu`, optionally truncated above at `cutoff`.
    Exponential { mu: f64, temperature: f64, cutoff: Option<f64> },
    /// Piecewise-uniform law with bin probabilities from the fitted counts.
    Binned { edges: Vec<f64>, probabilities: Vec<f64> },
}

impl FittedLaw {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            FittedLaw::Exponential { mu, temperature, cutoff } => {
                if x <= *mu {
                    return 0.0;
                }
                let f = -(-(x - mu) / temperature).exp_m1();
                match cutoff {
                    Some(c) if x >= *c => 1.0,
                    Some(c) => f / -(-(c - mu) / temperature).exp_m1(),
                    None => f,
                }
            }
            FittedLaw::Binned { edges, probabilities } => {
                if x <= edges[0] {
                    return 0.0;
                }
                let mut acc = 0.0;
                for (j, p) in probabilities.iter().enumerate() {
                    let (lo, hi) = (edges[j], edges[j + 1]);
                    if x < hi {
                        return acc + p * (x - lo) / (hi - lo);
                    }
                    acc += p;
                }
                1.0
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinRow {
    pub center: f64,
    pub observed: u64,
    pub fitted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub model: Model,
    /// Location: the minimum for the exponential, the chemical-potential-like
    /// `mu` for Bose-Einstein.
    pub mu: f64,
    /// `lambda theta`.
    pub temperature: f64,
    pub ks_statistic: f64,
    /// Exponential only.
    pub log_likelihood: Option<f64>,
    pub n_used: usize,
    pub tail_truncated_fraction: f64,
    pub status: FitStatus,
    /// Bose-Einstein only: fitted count scale `c`.
    pub scale: Option<f64>,
    pub law: FittedLaw,
    pub bins: Vec<BinRow>,
}

/// Maximum-likelihood exponential fit on the body of the sample.
///
/// The top `tail_quantile` share is dropped first. The location is the
/// sample minimum. Without truncation the temperature is the mean excess; with
/// truncation at `C` it solves the truncated-exponential likelihood equation
/// `mean excess = T - c / (exp(c / T) - 1)`, `c = C - mu`.
pub fn fit_boltzmann(samples: &SampleSet, tail_quantile: f64) -> Result<FitResult> {
    if !(0.0..=0.2).contains(&tail_quantile) {
        return Err(Error::InvalidConfig(format!("tail quantile {tail_quantile} must lie in [0, 0.2]")));
    }
    let sorted = samples.sorted();
    let n = sorted.len();
    let dropped = (tail_quantile * n as f64).floor() as usize;
    let n_used = n - dropped;
    if n_used < 10 {
        return Err(Error::Domain(format!("need at least 10 samples after truncation, have {n_used}")));
    }
    let body = &sorted[..n_used];
    let mu = body[0];
    let mean_excess = body.iter().map(|x| x - mu).sum::<f64>() / n_used as f64;
    if !(mean_excess > 0.0) {
        return Err(Error::Domain("zero temperature: all retained samples are equal".into()));
    }
    let cutoff = (dropped > 0).then(|| sorted[n_used]);
    let temperature = match cutoff {
        None => mean_excess,
        Some(c) => truncated_temperature(mean_excess, c - mu)?,
    };
    let norm = cutoff.map_or(0.0, |c| (-(-(c - mu) / temperature).exp_m1()).ln());
    let log_likelihood =
        -(n_used as f64) * (temperature.ln() + norm) - n_used as f64 * mean_excess / temperature;
    let law = FittedLaw::Exponential { mu, temperature, cutoff };
    let ks = ks_statistic(body, |x| law.cdf(x));
    let hi = cutoff.unwrap_or(body[n_used - 1]);
    let bins = binned_rows(body, mu, hi, DEFAULT_BINS, |a, b| n_used as f64 * (law.cdf(b) - law.cdf(a)));
    Ok(FitResult {
        model: Model::Boltzmann,
        mu,
        temperature,
        ks_statistic: ks,
        log_likelihood: Some(log_likelihood),
        n_used,
        tail_truncated_fraction: dropped as f64 / n as f64,
        status: FitStatus::Converged,
        scale: None,
        law,
        bins,
    })
}

/// Solves `m = T - c / (exp(c/T) - 1)` for `T`; the right side increases from
/// 0 to `c/2`, so `m >= c/2` has no finite solution.
fn truncated_temperature(mean_excess: f64, c: f64) -> Result<f64> {
    if mean_excess >= 0.5 * c {
        return Err(Error::NonConvergence(format!(
            "mean excess {mean_excess} is at least half the truncation width {c}: \
             the truncated likelihood has no finite maximum"
        )));
    }
    let h = |t: f64| t - c / (c / t).exp_m1() - mean_excess;
    // h(m) < 0 and h grows without bound, so bracket upward from m.
    let (mut lo, mut hi) = (mean_excess.ln(), mean_excess.ln() + 1.0);
    while h(hi.exp()) < 0.0 {
        lo = hi;
        hi += 1.0;
        if hi > 700.0 {
            return Err(Error::NonConvergence("no bracket for the truncated temperature".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid.exp()) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

fn histogram(sorted: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<u64> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &x in sorted {
        let j = (((x - lo) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[j] += 1;
    }
    counts
}

fn binned_rows<F: Fn(f64, f64) -> f64>(sorted: &[f64], lo: f64, hi: f64, bins: usize, fitted: F) -> Vec<BinRow> {
    if !(hi > lo) {
        return Vec::new();
    }
    let width = (hi - lo) / bins as f64;
    histogram(sorted, lo, hi, bins)
        .into_iter()
        .enumerate()
        .map(|(j, observed)| {
            let (a, b) = (lo + j as f64 * width, lo + (j + 1) as f64 * width);
            BinRow { center: 0.5 * (a + b), observed, fitted: fitted(a, b) }
        })
        .collect()
}

/// Search box for the Bose-Einstein fit in log coordinates:
/// `mu = c_1 - span e^p`, `T = span e^q`.
const P_BOUNDS: (f64, f64) = (-12.0, 6.0);
const Q_BOUNDS: (f64, f64) = (-8.0, 6.0);

/// Least-squares fit of bin counts to `c / (exp((eps - mu) / T) - 1)` over
/// equal-width bins spanning the sample, with `mu` below the first bin center.
/// The scale `c` is profiled out in closed form.
pub fn fit_bose_einstein(samples: &SampleSet, bins: usize) -> Result<FitResult> {
    if samples.len() < 100 {
        return Err(Error::Domain(format!("need at least 100 samples, have {}", samples.len())));
    }
    if bins < 5 {
        return Err(Error::InvalidConfig(format!("need at least 5 bins, got {bins}")));
    }
    let sorted = samples.sorted();
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let span = hi - lo;
    if !(span > 0.0) {
        return Err(Error::Domain("zero temperature: all samples are equal".into()));
    }
    let counts = histogram(&sorted, lo, hi, bins);
    let width = span / bins as f64;
    let centers: Vec<f64> = (0..bins).map(|j| lo + (j as f64 + 0.5) * width).collect();
    let y: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let c1 = centers[0];
    let sum_y2: f64 = y.iter().map(|v| v * v).sum();

    // Shape up to a constant factor, which the profiled scale absorbs.
    // Normalizing in log space keeps far-off trial points from underflowing.
    let shape = |p: f64, q: f64| -> Vec<f64> {
        let (mu, t) = (c1 - span * p.exp(), span * q.exp());
        let log_f: Vec<f64> = centers.iter().map(|&e| -ln_expm1((e - mu) / t)).collect();
        let top = log_f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        log_f.iter().map(|l| (l - top).exp()).collect()
    };
    let sse = |v: [f64; 2]| -> f64 {
        let f = shape(v[0], v[1]);
        let (mut yf, mut ff) = (0.0, 0.0);
        for (a, b) in y.iter().zip(&f) {
            yf += a * b;
            ff += b * b;
        }
        let r = sum_y2 - yf * yf / ff;
        if r.is_finite() {
            r.max(0.0)
        } else {
            f64::INFINITY
        }
    };

    let mut best: Option<([f64; 2], f64)> = None;
    for p0 in [-6.0, -3.0, -1.0, 1.0, 3.0] {
        for q0 in [-3.0, -1.0, 1.0, 3.0] {
            let (x, fx) = nelder_mead(&sse, [p0, q0], [P_BOUNDS, Q_BOUNDS]);
            if fx.is_finite() && best.is_none_or(|(_, fb)| fx < fb) {
                best = Some((x, fx));
            }
        }
    }
    let ([p, q], _) = best.ok_or_else(|| Error::NonConvergence("no finite least-squares value".into()))?;
    let f = shape(p, q);
    let yf: f64 = y.iter().zip(&f).map(|(a, b)| a * b).sum();
    let ff: f64 = f.iter().map(|b| b * b).sum();
    let scale = yf / ff;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::NonConvergence("fitted count scale is not positive".into()));
    }
    let near = |v: f64, (a, b): (f64, f64)| (v - a).abs() < 1e-6 || (v - b).abs() < 1e-6;
    let status = if near(p, P_BOUNDS) || near(q, Q_BOUNDS) { FitStatus::AtBound } else { FitStatus::Converged };

    let fitted: Vec<f64> = f.iter().map(|v| scale * v).collect();
    let total: f64 = fitted.iter().sum();
    let edges: Vec<f64> = (0..=bins).map(|j| lo + j as f64 * width).collect();
    let law = FittedLaw::Binned { edges, probabilities: fitted.iter().map(|v| v / total).collect() };
    let ks = ks_statistic(&sorted, |x| law.cdf(x));
    let rows = centers
        .iter()
        .zip(&counts)
        .zip(&fitted)
        .map(|((&center, &observed), &fitted)| BinRow { center, observed, fitted })
        .collect();
    Ok(FitResult {
        model: Model::BoseEinstein,
        mu: c1 - span * p.exp(),
        temperature: span * q.exp(),
        ks_statistic: ks,
        log_likelihood: None,
        n_used: sorted.len(),
        tail_truncated_fraction: 0.0,
        status,
        scale: Some(scale),
        law,
        bins: rows,
    })
}

/// `ln(e^x - 1)` for `x > 0` without overflow.
fn ln_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// Two-dimensional Nelder-Mead with the search box enforced by clamping.
fn nelder_mead<F: Fn([f64; 2]) -> f64>(f: &F, start: [f64; 2], bounds: [(f64, f64); 2]) -> ([f64; 2], f64) {
    let clamp = |v: [f64; 2]| [v[0].clamp(bounds[0].0, bounds[0].1), v[1].clamp(bounds[1].0, bounds[1].1)];
    let start = clamp(start);
    let mut simplex: Vec<([f64; 2], f64)> = [start, clamp([start[0] + 0.5, start[1]]), clamp([start[0], start[1] + 0.5])]
        .into_iter()
        .map(|v| (v, f(v)))
        .collect();
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| clamp([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
    for _ in 0..2000 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[2].1);
        let size = (simplex[2].0[0] - simplex[0].0[0]).abs().max((simplex[2].0[1] - simplex[0].0[1]).abs());
        if (worst - best).abs() <= 1e-13 * best.abs().max(1e-300) && size < 1e-9 {
            break;
        }
        let centroid = [(simplex[0].0[0] + simplex[1].0[0]) / 2.0, (simplex[0].0[1] + simplex[1].0[1]) / 2.0];
        let w = simplex[2].0;
        let r = lerp(centroid, w, -1.0);
        let fr = f(r);
        if fr < simplex[0].1 {
            let e = lerp(centroid, w, -2.0);
            let fe = f(e);
            simplex[2] = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < simplex[1].1 {
            simplex[2] = (r, fr);
        } else {
            let c = if fr < worst { lerp(centroid, r, 0.5) } else { lerp(centroid, w, 0.5) };
            let fc = f(c);
            if fc < worst.min(fr) {
                simplex[2] = (c, fc);
            } else {
                let b = simplex[0].0;
                for s in simplex.iter_mut().skip(1) {
                    let v = lerp(b, s.0, 0.5);
                    *s = (v, f(v));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoodnessOfFit {
    pub ks_statistic: f64,
    pub critical_value: f64,
    pub n_used: usize,
    /// Statistic below the level-0.01 critical value.
    pub passed: bool,
}

/// One-sample KS test of the samples the fit used against its fitted law.
pub fn goodness_of_fit(samples: &SampleSet, fit: &FitResult) -> GoodnessOfFit {
    let sorted = samples.sorted();
    let used = &sorted[..fit.n_used.min(sorted.len())];
    let d = ks_statistic(used, |x| fit.law.cdf(x));
    let critical_value = ks_critical_value_01(used.len().max(1));
    GoodnessOfFit { ks_statistic: d, critical_value, n_used: used.len(), passed: d < critical_value }
}

/// `n` draws of `mu + Exp(1 / temperature)`.
pub fn synthetic_exponential(n: usize, mu: f64, temperature: f64, seed: u64) -> Result<SampleSet> {
    let exp = Exp::new(1.0 / temperature).map_err(|e| Error::Domain(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n).map(|_| mu + exp.sample(&mut rng)).collect();
    SampleSet::new(values, format!("synthetic exponential mu={mu} T={temperature} seed={seed}"))
}

/// `n` draws from discrete levels with the given weights, each jittered
/// uniformly within half a unit spacing so the data are continuous.
pub fn synthetic_from_levels(levels: &[f64], weights: &[f64], n: usize, seed: u64) -> Result<SampleSet> {
    if levels.len() != weights.len() || levels.is_empty() {
        return Err(Error::LengthMismatch { expected: levels.len(), found: weights.len() });
    }
    let index = WeightedIndex::new(weights).map_err(|e| Error::Domain(e.to_string()))?;
    let spacing = if levels.len() > 1 { levels[1] - levels[0] } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n)
        .map(|_| levels[index.sample(&mut rng)] + spacing * (rng.random::<f64>() - 0.5))
        .collect();
    SampleSet::new(values, format!("synthetic levels n={n} seed={seed}"))
}

/// Bose-Einstein synthetic data: level weights `g / (exp((eps - mu) / T) - 1)`.
pub fn synthetic_bose_einstein(levels: &[f64], mu: f64, temperature: f64, n: usize, seed: u64) -> Result<SampleSet> {
    let weights: Vec<f64> = levels
        .iter()
        .map(|&e| {
            let x = (e - mu) / temperature;
            if x > 0.0 {
                Ok(1.0 / x.exp_m1())
            } else {
                Err(Error::Domain(format!("level {e} is not above mu = {mu}")))
            }
        })
        .collect::<Result<_>>()?;
    synthetic_from_levels(levels, &weights, n, seed)
}
