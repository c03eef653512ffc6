//! Bridge to the neoclassical macro quantities: marginal returns `mu` and
//! `theta`, the scale constant `lambda`, and technology `T = lambda ln Omega`.
//!
//! `alpha = -mu / (lambda theta)` and `beta = 1 / (lambda theta)`.

use serde::Serialize;

use crate::counting::stirling_entropy;
use crate::economy::{Regime, RevenueGrid};
use crate::error::{Error, Result};
use crate::maxent::{occupancy, occupancy_from_exponents, MultiplierSolution};

/// Step of the central differences used to cross-check `d ln W`.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MacroParams {
    /// Marginal labor-capital return, money units.
    pub mu: f64,
    /// Marginal technology return, money per technology unit.
    pub theta: f64,
    pub lambda: f64,
}

impl MacroParams {
    pub fn new(mu: f64, theta: f64, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
        }
        if theta == 0.0 || !theta.is_finite() || !mu.is_finite() {
            return Err(Error::Domain(format!("theta must be finite and non-zero, got {theta}")));
        }
        Ok(Self { mu, theta, lambda })
    }

    /// `lambda theta`, the effective temperature of the revenue distribution.
    pub fn temperature(&self) -> f64 {
        self.lambda * self.theta
    }
}

/// `Pi = L^x K^y T^z`.
pub fn macro_production(labor: f64, capital: f64, technology: f64, x: f64, y: f64, z: f64) -> Result<f64> {
    for (name, v) in [("labor", labor), ("capital", capital), ("technology", technology)] {
        if !(v > 0.0) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(labor.powf(x) * capital.powf(y) * technology.powf(z))
}

/// `(alpha, beta)` of a macro parameter set.
pub fn multipliers_from_macro(params: &MacroParams) -> Result<(f64, f64)> {
    let t = params.temperature();
    if t == 0.0 || !t.is_finite() {
        return Err(Error::Domain("lambda * theta must be finite and non-zero".into()));
    }
    Ok((-params.mu / t, 1.0 / t))
}

/// Inverse of [`multipliers_from_macro`] at a given `lambda`.
pub fn macro_from_multipliers(alpha: f64, beta: f64, lambda: f64) -> Result<MacroParams> {
    if beta == 0.0 || !beta.is_finite() {
        return Err(Error::Domain("beta must be finite and non-zero (zero temperature slope)".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    MacroParams::new(-alpha / beta, 1.0 / (lambda * beta), lambda)
}

/// `a_k = g_k / (exp((eps_k - mu) / (lambda theta)) - I)`.
pub fn occupancy_from_macro(params: &MacroParams, grid: &RevenueGrid, regime: Regime) -> Result<Vec<f64>> {
    let t = params.temperature();
    let exponents: Vec<f64> = grid.money_levels().iter().map(|&e| (e - params.mu) / t).collect();
    occupancy_from_exponents(&exponents, grid.degeneracies(), regime)
}

fn exponents(alpha: f64, beta: f64, grid: &RevenueGrid) -> Vec<f64> {
    grid.money_levels().iter().map(|&e| alpha + beta * e).collect()
}

/// `ln W`: `sum g ln(1 - e^{-x})` for perfect competition and its `I -> 0`
/// limit `-sum g e^{-x}` for monopolistic competition, `x = alpha + beta eps`.
pub fn log_w(alpha: f64, beta: f64, grid: &RevenueGrid, regime: Regime) -> Result<f64> {
    let mut acc = 0.0;
    for (k, (x, &g)) in exponents(alpha, beta, grid).into_iter().zip(grid.degeneracies()).enumerate() {
        let g = g as f64;
        match regime {
            Regime::Monopolistic => acc -= g * (-x).exp(),
            Regime::Perfect => {
                if !(x > 0.0) {
                    return Err(Error::Singularity { level: k + 1, exponent: x });
                }
                acc += g * (-(-x).exp()).ln_1p();
            }
        }
    }
    Ok(acc)
}

/// Analytic `(d ln W / d alpha, d ln W / d beta)`, which equal
/// `(sum a_k, sum a_k eps_k)` for the occupancy at `(alpha, beta)`.
pub fn log_w_gradient(alpha: f64, beta: f64, grid: &RevenueGrid, regime: Regime) -> Result<[f64; 2]> {
    let a = occupancy(alpha, beta, grid, regime)?;
    let eps = grid.money_levels();
    Ok([a.iter().sum(), a.iter().zip(&eps).map(|(a, e)| a * e).sum()])
}

/// Central-difference gradient of `ln W` with step `h`.
pub fn log_w_gradient_fd(alpha: f64, beta: f64, grid: &RevenueGrid, regime: Regime, h: f64) -> Result<[f64; 2]> {
    let da = (log_w(alpha + h, beta, grid, regime)? - log_w(alpha - h, beta, grid, regime)?) / (2.0 * h);
    let db = (log_w(alpha, beta + h, grid, regime)? - log_w(alpha, beta - h, grid, regime)?) / (2.0 * h);
    Ok([da, db])
}

/// Evaluation of `S = s (ln W - alpha dlnW/dalpha - beta dlnW/dbeta)` for
/// both signs `s`, against the Stirling entropy of the occupancy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyIdentity {
    pub stirling_entropy: f64,
    pub log_w: f64,
    /// `ln W - alpha dlnW/dalpha - beta dlnW/dbeta`.
    pub bracket: f64,
    pub residual_plus: f64,
    pub residual_minus: f64,
    /// Sign with the smaller `|residual|`; ties go to `+1`.
    pub best_sign: i8,
    pub best_residual: f64,
    /// `|best_residual| / |stirling_entropy|`.
    pub relative_residual: f64,
    /// Largest relative gap between analytic and finite-difference gradients.
    pub gradient_fd_error: f64,
}

/// Measures both sign conventions of the entropy identity at `(alpha, beta)`.
pub fn entropy_identity_residual(
    alpha: f64,
    beta: f64,
    grid: &RevenueGrid,
    regime: Regime,
) -> Result<EntropyIdentity> {
    let a = occupancy(alpha, beta, grid, regime)?;
    let s = stirling_entropy(&a, grid, regime)?;
    let lw = log_w(alpha, beta, grid, regime)?;
    let grad = log_w_gradient(alpha, beta, grid, regime)?;
    let fd = log_w_gradient_fd(alpha, beta, grid, regime, FD_STEP)?;
    let gradient_fd_error = grad
        .iter()
        .zip(&fd)
        .map(|(g, f)| ((g - f) / g.abs().max(f64::MIN_POSITIVE)).abs())
        .fold(0.0, f64::max);
    let bracket = lw - alpha * grad[0] - beta * grad[1];
    let residual_plus = s - bracket;
    let residual_minus = s + bracket;
    let (best_sign, best_residual) =
        if residual_plus.abs() <= residual_minus.abs() { (1, residual_plus) } else { (-1, residual_minus) };
    Ok(EntropyIdentity {
        stirling_entropy: s,
        log_w: lw,
        bracket,
        residual_plus,
        residual_minus,
        best_sign,
        best_residual,
        relative_residual: best_residual.abs() / s.abs(),
        gradient_fd_error,
    })
}

/// `T = lambda ln Omega`.
pub fn technology(log_omega: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    Ok(lambda * log_omega)
}

/// Macro summary of a solved economy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroReport {
    pub mu: f64,
    pub theta: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `T = lambda ln Omega`, with `ln Omega` the Stirling entropy of the occupancy.
    pub technology: f64,
    pub ln_omega: f64,
    pub identity_residual: f64,
    pub best_sign: i8,
    pub identity: EntropyIdentity,
}

/// Macro mapping of an interior solution at scale `lambda`.
pub fn macro_report(
    solution: &MultiplierSolution,
    grid: &RevenueGrid,
    regime: Regime,
    lambda: f64,
) -> Result<MacroReport> {
    if solution.boundary.is_some() {
        return Err(Error::Domain("boundary solutions have no finite multipliers".into()));
    }
    let params = macro_from_multipliers(solution.alpha, solution.beta, lambda)?;
    let identity = entropy_identity_residual(solution.alpha, solution.beta, grid, regime)?;
    let ln_omega = stirling_entropy(&solution.occupancy, grid, regime)?;
    Ok(MacroReport {
        mu: params.mu,
        theta: params.theta,
        lambda,
        alpha: solution.alpha,
        beta: solution.beta,
        technology: technology(ln_omega, lambda)?,
        ln_omega,
        identity_residual: identity.best_residual,
        best_sign: identity.best_sign,
        identity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(levels: Vec<u64>, g: Vec<u64>) -> RevenueGrid {
        RevenueGrid::new(levels, g).unwrap()
    }

    #[test]
    fn production_examples() {
        assert_eq!(macro_production(1.0, 1.0, 1.0, 0.3, 0.7, 2.0).unwrap(), 1.0);
        assert!((macro_production(4.0, 9.0, 2.0, 0.5, 0.5, 1.0).unwrap() - 12.0).abs() < 1e-12);
        let a = macro_production(4.0, 9.0, 2.0, 0.5, 0.5, 0.0).unwrap();
        let b = macro_production(4.0, 9.0, 50.0, 0.5, 0.5, 0.0).unwrap();
        assert_eq!(a, b);
        assert!(matches!(macro_production(0.0, 1.0, 1.0, 1.0, 1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn multiplier_mapping() {
        let (a, b) = multipliers_from_macro(&MacroParams::new(0.0, 2.0, 1.5).unwrap()).unwrap();
        assert_eq!(a, 0.0);
        assert!((b - 1.0 / 3.0).abs() < 1e-15);
        let (a, b) = multipliers_from_macro(&MacroParams::new(2.0, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!((a, b), (-2.0, 1.0));
        assert!(MacroParams::new(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn inverse_mapping() {
        let p = macro_from_multipliers(-2.197225, 0.405465, 1.0).unwrap();
        assert!((p.mu - 5.419).abs() < 1e-3 && (p.theta - 2.466).abs() < 1e-3, "{p:?}");
        assert_eq!(macro_from_multipliers(0.0, 0.7, 1.0).unwrap().mu, 0.0);
        let p2 = macro_from_multipliers(-2.197225, 0.405465, 2.0).unwrap();
        assert_eq!(p2.mu, p.mu);
        assert!((p2.theta - p.theta / 2.0).abs() < 1e-15);
        assert!(matches!(macro_from_multipliers(1.0, 0.0, 1.0), Err(Error::Domain(_))));

        let (a, b) = multipliers_from_macro(&p).unwrap();
        assert!((a + 2.197225).abs() < 1e-12 && (b - 0.405465).abs() < 1e-12);
    }

    #[test]
    fn macro_occupancy() {
        let gr = grid(vec![1, 2], vec![1, 1]);
        let p = MacroParams::new(0.9, 0.5, 1.0).unwrap();
        let a = occupancy_from_macro(&p, &gr, Regime::Perfect).unwrap();
        assert!((a[0] - 1.0 / 0.2f64.exp_m1()).abs() < 1e-12);
        assert!((a[0] - 4.5167).abs() < 1e-4);

        let flat = MacroParams::new(0.0, 1e12, 1.0).unwrap();
        let a = occupancy_from_macro(&flat, &grid(vec![1, 2], vec![3, 5]), Regime::Monopolistic).unwrap();
        assert!((a[0] - 3.0).abs() < 1e-9 && (a[1] - 5.0).abs() < 1e-9);

        let crisis = MacroParams::new(1.0, 0.5, 1.0).unwrap();
        assert!(matches!(
            occupancy_from_macro(&crisis, &gr, Regime::Perfect),
            Err(Error::Singularity { level: 1, .. })
        ));
    }

    #[test]
    fn log_w_examples() {
        let one = grid(vec![2], vec![3]);
        assert!((log_w(-1.0, 0.5, &one, Regime::Monopolistic).unwrap() + 3.0).abs() < 1e-15);
        let single = grid(vec![1], vec![1]);
        let v = log_w(2f64.ln(), 0.0, &single, Regime::Perfect).unwrap();
        assert!((v - 0.5f64.ln()).abs() < 1e-15);

        let two = grid(vec![1, 3], vec![2, 1]);
        let (l1, l3) = (grid(vec![1], vec![2]), grid(vec![3], vec![1]));
        for r in Regime::BOTH {
            let sum = log_w(0.2, 0.3, &l1, r).unwrap() + log_w(0.2, 0.3, &l3, r).unwrap();
            assert!((log_w(0.2, 0.3, &two, r).unwrap() - sum).abs() < 1e-14);
        }
        assert!(log_w(-0.5, 0.1, &two, Regime::Perfect).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let gr = grid(vec![1, 2, 3], vec![1, 2, 1]);
        for r in Regime::BOTH {
            let g = log_w_gradient(0.4, 0.3, &gr, r).unwrap();
            let f = log_w_gradient_fd(0.4, 0.3, &gr, r, FD_STEP).unwrap();
            for i in 0..2 {
                assert!(((g[i] - f[i]) / g[i]).abs() < 1e-6, "{r}: {g:?} {f:?}");
            }
        }
    }

    #[test]
    fn technology_scales_with_lambda() {
        assert_eq!(technology(0.0, 3.0).unwrap(), 0.0);
        assert!((technology(2f64.ln(), 1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(technology(1.3, 2.0).unwrap(), 2.0 * technology(1.3, 1.0).unwrap());
        assert!(technology(1.0, 0.0).is_err());
    }

    #[test]
    fn two_level_identity_misses_by_ln_n_factorial() {
        // Occupancy (6, 4) on levels (1, 2): alpha = -ln 6 - ln 1.5, beta = ln 1.5.
        let gr = grid(vec![1, 2], vec![1, 1]);
        let beta = 1.5f64.ln();
        let alpha = -(6f64.ln()) - beta;
        let id = entropy_identity_residual(alpha, beta, &gr, Regime::Monopolistic).unwrap();
        let ln_10_fact: f64 = (2..=10).map(|k| (k as f64).ln()).sum();
        let s = ln_10_fact - 6.0 * 6f64.ln() - 4.0 * 4f64.ln() + 10.0;
        assert!((id.stirling_entropy - s).abs() < 1e-12);
        assert!((id.residual_minus - ln_10_fact).abs() < 1e-12);
        assert!((id.residual_plus - (2.0 * s - ln_10_fact)).abs() < 1e-12);
        assert_eq!(id.best_sign, 1);
        assert!((id.relative_residual - 0.28527).abs() < 1e-4, "{}", id.relative_residual);
    }

    #[test]
    fn identity_scale_invariance() {
        let gr = grid(vec![1, 2, 3], vec![64, 64, 64]);
        let gr10 = gr.scaled(10).unwrap();
        for r in Regime::BOTH {
            let a = entropy_identity_residual(0.3, 0.4, &gr, r).unwrap();
            let b = entropy_identity_residual(0.3, 0.04, &gr10, r).unwrap();
            assert!((a.best_residual - b.best_residual).abs() < 1e-9 * a.stirling_entropy.abs());
            assert_eq!(a.best_sign, b.best_sign);
        }
    }
}
