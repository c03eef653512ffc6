//! Goodness-of-fit statistics shared by the sampler checks and the fitters.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquareTest {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value >= level
    }
}

/// Pearson chi-square test of observed counts against category probabilities.
///
/// Categories with zero probability contribute nothing unless they were
/// observed, in which case the test fails outright (`p = 0`).
pub fn chi_square_gof(observed: &[u64], probabilities: &[f64]) -> Result<ChiSquareTest> {
    if observed.len() != probabilities.len() {
        return Err(Error::LengthMismatch { expected: probabilities.len(), found: observed.len() });
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(Error::Domain("no observations".into()));
    }
    let n = total as f64;
    let mut statistic = 0.0;
    let mut categories = 0usize;
    for (&o, &p) in observed.iter().zip(probabilities) {
        if !(p >= 0.0) {
            return Err(Error::Domain(format!("probability {p} is negative")));
        }
        if p == 0.0 {
            if o > 0 {
                return Ok(ChiSquareTest { statistic: f64::INFINITY, dof: 0, p_value: 0.0 });
            }
            continue;
        }
        let e = n * p;
        statistic += (o as f64 - e).powi(2) / e;
        categories += 1;
    }
    let dof = categories.saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
        dist.sf(statistic)
    };
    Ok(ChiSquareTest { statistic, dof, p_value })
}

/// One-sample Kolmogorov-Smirnov statistic `sup |F_n - F|` of `sorted`
/// (ascending) against a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x).clamp(0.0, 1.0);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d.min(1.0)
}

/// Exact two-sided critical values at level 0.01 for `n = 1..=35`.
const KS_CRITICAL_01: [f64; 35] = [
    0.995, 0.92929, 0.829, 0.73424, 0.66853, 0.61661, 0.57581, 0.54179, 0.51332, 0.48893,
    0.4677, 0.44905, 0.43247, 0.41762, 0.4042, 0.39201, 0.38086, 0.37062, 0.36117, 0.35241,
    0.34426, 0.33666, 0.32954, 0.32286, 0.31657, 0.31063, 0.30502, 0.29971, 0.29466, 0.28986,
    0.28529, 0.28094, 0.27677, 0.27279, 0.26897,
];

/// `sqrt(-ln(0.005) / 2)`, the asymptotic Kolmogorov quantile at level 0.01.
const KS_ASYMPTOTIC_01: f64 = 1.627_623_630_718_729_3;

/// Critical KS distance at significance 0.01: tabulated for small samples,
/// `1.6276 / sqrt(n)` beyond the table.
pub fn ks_critical_value_01(n: usize) -> f64 {
    assert!(n > 0, "KS critical value needs n >= 1");
    if n <= KS_CRITICAL_01.len() {
        KS_CRITICAL_01[n - 1]
    } else {
        KS_ASYMPTOTIC_01 / (n as f64).sqrt()
    }
}
