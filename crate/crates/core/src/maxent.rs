//! Most probable occupancy under the firm-count and revenue constraints.
//!
//! The Lagrange conditions give `a_k = g_k / (exp(alpha + beta eps_k) - I)`.
//! The multipliers are found by minimizing the convex dual
//! `Phi(A, B) = -ln W(A, B) + N A + N m B` in scaled coordinates
//! `u_k = (eps_k - eps_1) / span`, where `m` is the scaled mean revenue.
//! Damped Newton does the work; nested bisection is the fallback.

use serde::Serialize;

use crate::counting::stirling_entropy;
use crate::economy::{EconomyConfig, Regime, RevenueGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Relative tolerance on both constraint residuals.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iterations: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Newton,
    /// Nested bisection, then Newton polishing.
    Bisection,
    /// Mean revenue sits on the edge of the grid; no finite multipliers.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Every firm at the lowest level.
    Lowest,
    /// Every firm at the highest level.
    Highest,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplierSolution {
    /// NaN for boundary solutions.
    pub alpha: f64,
    /// Inverse money units; NaN for boundary solutions.
    pub beta: f64,
    pub occupancy: Vec<f64>,
    /// `sum a_k - N`.
    pub residual_n: f64,
    /// `sum a_k eps_k - Pi`, in money units.
    pub residual_pi: f64,
    pub iterations: usize,
    pub converged: bool,
    pub method: SolveMethod,
    pub boundary: Option<Boundary>,
    /// Perfect competition only: the smallest exponent `alpha + beta eps_k`
    /// is numerically zero.
    pub at_domain_wall: bool,
}

impl MultiplierSolution {
    /// Exponent `alpha + beta eps_1` of the lowest level.
    pub fn ground_gap(&self, grid: &RevenueGrid) -> f64 {
        self.alpha + self.beta * grid.money(0)
    }
}

/// `g_k / (exp(alpha + beta eps_k) - I)` for every level.
pub fn occupancy(alpha: f64, beta: f64, grid: &RevenueGrid, regime: Regime) -> Result<Vec<f64>> {
    let exponents: Vec<f64> = grid.money_levels().iter().map(|&e| alpha + beta * e).collect();
    occupancy_from_exponents(&exponents, grid.degeneracies(), regime)
}

/// Occupancy for precomputed exponents `x_k = alpha + beta eps_k`.
pub fn occupancy_from_exponents(exponents: &[f64], degeneracies: &[u64], regime: Regime) -> Result<Vec<f64>> {
    exponents
        .iter()
        .zip(degeneracies)
        .enumerate()
        .map(|(k, (&x, &g))| match regime {
            Regime::Monopolistic => Ok(g as f64 * (-x).exp()),
            Regime::Perfect => {
                if !(x > 0.0) {
                    Err(Error::Singularity { level: k + 1, exponent: x })
                } else {
                    Ok(g as f64 / x.exp_m1())
                }
            }
        })
        .collect()
}

/// Solves for the multipliers of `grid` / `config`.
pub fn solve_multipliers(
    grid: &RevenueGrid,
    config: &EconomyConfig,
    options: SolverOptions,
) -> Result<MultiplierSolution> {
    let pi = config
        .total_revenue
        .ok_or_else(|| Error::InvalidConfig("the solver needs a total revenue".into()))?;
    let n = config.n_firms as u128;
    let lo = n * grid.lowest() as u128;
    let hi = n * grid.highest() as u128;
    let pi_q = pi as u128;
    if pi_q < lo || pi_q > hi {
        return Err(Error::Infeasible(format!(
            "mean revenue {} lies outside the grid [{}, {}]",
            pi as f64 / config.n_firms as f64,
            grid.lowest(),
            grid.highest()
        )));
    }
    let eps = grid.money_levels();
    let pi_money = pi as f64 * grid.quantum();
    let g: Vec<f64> = grid.degeneracies().iter().map(|&g| g as f64).collect();
    let boundary = if pi_q == lo {
        Some(Boundary::Lowest)
    } else if pi_q == hi {
        Some(Boundary::Highest)
    } else {
        None
    };
    match boundary {
        Some(b) => Ok(boundary_solution(b, grid.len(), config.n_firms as f64)),
        None => solve_interior(&eps, &g, config.n_firms as f64, pi_money, config.regime, options),
    }
}

/// Solver on arbitrary real levels; `eps` strictly increasing, `g > 0`.
pub fn solve_multipliers_levels(
    eps: &[f64],
    g: &[f64],
    n_firms: f64,
    total_revenue: f64,
    regime: Regime,
    options: SolverOptions,
) -> Result<MultiplierSolution> {
    if eps.is_empty() || eps.len() != g.len() {
        return Err(Error::InvalidGrid("levels and degeneracies must be non-empty and equally long".into()));
    }
    if eps.windows(2).any(|w| !(w[0] < w[1])) || g.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidGrid("levels must increase and degeneracies be positive".into()));
    }
    if !(n_firms > 0.0) {
        return Err(Error::InvalidConfig("number of firms must be positive".into()));
    }
    let mean = total_revenue / n_firms;
    let (e1, en) = (eps[0], eps[eps.len() - 1]);
    if mean < e1 || mean > en {
        return Err(Error::Infeasible(format!("mean revenue {mean} lies outside the grid [{e1}, {en}]")));
    }
    if mean == e1 {
        return Ok(boundary_solution(Boundary::Lowest, eps.len(), n_firms));
    }
    if mean == en {
        return Ok(boundary_solution(Boundary::Highest, eps.len(), n_firms));
    }
    solve_interior(eps, g, n_firms, total_revenue, regime, options)
}

fn boundary_solution(b: Boundary, n_levels: usize, n_firms: f64) -> MultiplierSolution {
    let mut occupancy = vec![0.0; n_levels];
    match b {
        Boundary::Lowest => occupancy[0] = n_firms,
        Boundary::Highest => occupancy[n_levels - 1] = n_firms,
    }
    MultiplierSolution {
        alpha: f64::NAN,
        beta: f64::NAN,
        occupancy,
        residual_n: 0.0,
        residual_pi: 0.0,
        iterations: 0,
        converged: true,
        method: SolveMethod::Boundary,
        boundary: Some(b),
        at_domain_wall: false,
    }
}

/// The dual problem in scaled coordinates.
struct Dual<'a> {
    u: Vec<f64>,
    g: &'a [f64],
    n: f64,
    /// Scaled target mean in (0, 1).
    m: f64,
    perfect: bool,
}

struct Eval {
    phi: f64,
    /// Gradient of Phi: (N - sum a, N m - sum a u).
    grad: [f64; 2],
    hess: [[f64; 2]; 2],
    occ: Vec<f64>,
}

impl Dual<'_> {
    fn in_domain(&self, a: f64, b: f64) -> bool {
        // x is affine in u on [0, 1], so the endpoints bound it.
        a.is_finite() && b.is_finite() && (!self.perfect || (a > 0.0 && a + b > 0.0))
    }

    fn eval(&self, a: f64, b: f64) -> Eval {
        let mut phi = self.n * a + self.n * self.m * b;
        let (mut s0, mut s1) = (0.0, 0.0);
        let (mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0);
        let mut occ = Vec::with_capacity(self.u.len());
        for (&u, &g) in self.u.iter().zip(self.g) {
            let x = a + b * u;
            let (ak, w) = if self.perfect {
                let ak = g / x.exp_m1();
                phi -= g * (-(-x).exp()).ln_1p();
                (ak, ak * (1.0 + ak / g))
            } else {
                let ak = g * (-x).exp();
                phi += ak;
                (ak, ak)
            };
            s0 += ak;
            s1 += ak * u;
            h00 += w;
            h01 += w * u;
            h11 += w * u * u;
            occ.push(ak);
        }
        Eval { phi, grad: [self.n - s0, self.n * self.m - s1], hess: [[h00, h01], [h01, h11]], occ }
    }

    fn relative_residuals(&self, e: &Eval) -> (f64, f64) {
        // The revenue residual is measured against the scaled total, which
        // bounds the money-unit residual after rescaling.
        (e.grad[0].abs() / self.n, e.grad[1].abs() / (self.n * self.m.max(1e-300)))
    }
}

fn solve_interior(
    eps: &[f64],
    g: &[f64],
    n: f64,
    pi: f64,
    regime: Regime,
    options: SolverOptions,
) -> Result<MultiplierSolution> {
    let e1 = eps[0];
    let span = eps[eps.len() - 1] - e1;
    let dual = Dual {
        u: eps.iter().map(|&e| (e - e1) / span).collect(),
        g,
        n,
        m: (pi / n - e1) / span,
        perfect: regime == Regime::Perfect,
    };
    let start = if dual.perfect { (0.1, 0.0) } else { ((g.iter().sum::<f64>() / n).ln(), 0.0) };

    let (mut a, mut b, mut iterations, mut method) = match newton(&dual, start, options) {
        Some((a, b, it)) => (a, b, it, SolveMethod::Newton),
        None => {
            let (a0, b0) = bisection(&dual)?;
            let (a, b, it) = newton(&dual, (a0, b0), options).unwrap_or((a0, b0, 0));
            (a, b, it, SolveMethod::Bisection)
        }
    };
    let mut e = dual.eval(a, b);
    let (rn, rp) = dual.relative_residuals(&e);
    let mut converged = rn <= options.tolerance && rp <= options.tolerance;
    if !converged && method == SolveMethod::Newton {
        let (a0, b0) = bisection(&dual)?;
        let (a1, b1, it) = newton(&dual, (a0, b0), options).unwrap_or((a0, b0, 0));
        a = a1;
        b = b1;
        iterations += it;
        method = SolveMethod::Bisection;
        e = dual.eval(a, b);
        let (rn, rp) = dual.relative_residuals(&e);
        converged = rn <= options.tolerance && rp <= options.tolerance;
    }
    let beta = b / span;
    let alpha = a - beta * e1;
    let residual_n = e.occ.iter().sum::<f64>() - n;
    let residual_pi = e.occ.iter().zip(eps).map(|(a, e)| a * e).sum::<f64>() - pi;
    let min_gap = a.min(a + b);
    Ok(MultiplierSolution {
        alpha,
        beta,
        occupancy: e.occ,
        residual_n,
        residual_pi,
        iterations,
        converged,
        method,
        boundary: None,
        at_domain_wall: dual.perfect && min_gap < 1e-12,
    })
}

/// Damped Newton with Armijo backtracking. Returns `None` if it stalls.
fn newton(dual: &Dual, start: (f64, f64), options: SolverOptions) -> Option<(f64, f64, usize)> {
    let (mut a, mut b) = start;
    if !dual.in_domain(a, b) {
        return None;
    }
    let mut e = dual.eval(a, b);
    // Keep iterating a little past the tolerance to polish the last digits.
    let polish = options.tolerance.min(1e-14);
    let mut best_res = f64::INFINITY;
    let mut stalls = 0;
    for it in 1..=options.max_iterations {
        let (rn, rp) = dual.relative_residuals(&e);
        let res = rn.max(rp);
        if res <= polish {
            return Some((a, b, it - 1));
        }
        if res < best_res {
            best_res = res;
            stalls = 0;
        } else if res <= options.tolerance {
            stalls += 1;
            if stalls >= 3 {
                return Some((a, b, it - 1));
            }
        }
        let [[h00, h01], [_, h11]] = e.hess;
        let det = h00 * h11 - h01 * h01;
        if !(det > 0.0) || !det.is_finite() {
            return None;
        }
        let (g0, g1) = (e.grad[0], e.grad[1]);
        let da = -(h11 * g0 - h01 * g1) / det;
        let db = -(h00 * g1 - h01 * g0) / det;
        let slope = g0 * da + g1 * db;
        let gnorm = g0.hypot(g1);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..80 {
            let (na, nb) = (a + t * da, b + t * db);
            if dual.in_domain(na, nb) {
                let ne = dual.eval(na, nb);
                let armijo = ne.phi <= e.phi + 1e-4 * t * slope;
                let smaller_grad = ne.grad[0].hypot(ne.grad[1]) < gnorm;
                if ne.phi.is_finite() && (armijo || smaller_grad) {
                    accepted = Some((na, nb, ne));
                    break;
                }
            }
            t *= 0.5;
        }
        let (na, nb, ne) = accepted?;
        a = na;
        b = nb;
        e = ne;
    }
    let (rn, rp) = dual.relative_residuals(&e);
    (rn <= options.tolerance && rp <= options.tolerance).then_some((a, b, options.max_iterations))
}

/// Nested bisection: the inner solve fixes `A` so that `sum a = N` for a
/// given `B`; the outer one bisects `B`, along which the mean is decreasing.
fn bisection(dual: &Dual) -> Result<(f64, f64)> {
    let mean_gap = |b: f64| -> Result<f64> {
        let a = inner_a(dual, b)?;
        let e = dual.eval(a, b);
        Ok(e.occ.iter().zip(&dual.u).map(|(x, u)| x * u).sum::<f64>() / dual.n - dual.m)
    };
    let mut lo = -1.0;
    let mut hi = 1.0;
    while mean_gap(lo)? < 0.0 {
        lo *= 2.0;
        if lo < -1e8 {
            return Err(Error::NonConvergence("no lower bracket for beta".into()));
        }
    }
    while mean_gap(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::NonConvergence("no upper bracket for beta".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mean_gap(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b = 0.5 * (lo + hi);
    Ok((inner_a(dual, b)?, b))
}

fn inner_a(dual: &Dual, b: f64) -> Result<f64> {
    if !dual.perfect {
        // sum g e^{-A - B u} = N has a closed form.
        let z: f64 = dual.u.iter().zip(dual.g).map(|(&u, &g)| g * (-b * u).exp()).sum();
        return Ok((z / dual.n).ln());
    }
    // sum a is decreasing in A above the wall; bisect on ln(A - wall).
    let wall = 0f64.max(-b);
    let total = |t: f64| -> f64 {
        let a = wall + t.exp();
        dual.u.iter().zip(dual.g).map(|(&u, &g)| g / (a + b * u).exp_m1()).sum()
    };
    let (mut lo, mut hi) = (-700.0, 10.0);
    while total(hi) > dual.n {
        hi += 10.0;
        if hi > 700.0 {
            return Err(Error::NonConvergence("no bracket for alpha".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) > dual.n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(wall + (0.5 * (lo + hi)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CondensationThresholds {
    /// Ground-level share of firms at or above which a crisis is flagged.
    pub ground_fraction: f64,
    /// Lowest-level exponent at or below which a crisis is flagged.
    pub gap: f64,
}

impl Default for CondensationThresholds {
    fn default() -> Self {
        Self { ground_fraction: 0.5, gap: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CondensationReport {
    pub condensed: bool,
    /// `a_1 / N`.
    pub ground_fraction: f64,
    /// `alpha + beta eps_1`; NaN for boundary solutions.
    pub gap: f64,
    pub thresholds: CondensationThresholds,
}

/// Flags pile-up of firms at the lowest revenue level. Monopolistic
/// competition never condenses.
pub fn detect_condensation(
    solution: &MultiplierSolution,
    grid: &RevenueGrid,
    config: &EconomyConfig,
    thresholds: CondensationThresholds,
) -> CondensationReport {
    let ground_fraction = solution.occupancy[0] / config.n_firms as f64;
    let gap = solution.ground_gap(grid);
    let condensed = config.regime == Regime::Perfect
        && (ground_fraction >= thresholds.ground_fraction || gap <= thresholds.gap || solution.at_domain_wall);
    CondensationReport { condensed, ground_fraction, gap, thresholds }
}

/// Stirling entropy of a real-valued occupancy.
pub fn entropy_of(occupancy: &[f64], grid: &RevenueGrid, regime: Regime) -> Result<f64> {
    stirling_entropy(occupancy, grid, regime)
}
