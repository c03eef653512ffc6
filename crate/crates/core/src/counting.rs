//! Multiplicity of an economic order: how many equilibrium micro-outcomes
//! realize a given occupancy vector.
//!
//! Monopolistic competition (distinguishable firms):
//! `Omega = N! / prod a_k! * prod g_k^a_k`.
//! Perfect competition (indistinguishable firms):
//! `Omega = prod (a_k + g_k - 1)! / (a_k! (g_k - 1)!)`.

use num_bigint::BigUint;
use num_integer::binomial;
use num_traits::{One, ToPrimitive, Zero};
use statrs::function::factorial::ln_factorial;
use statrs::function::gamma::ln_gamma;

use crate::economy::{EconomicOrder, Regime, RevenueGrid};
use crate::error::{Error, Result};

/// Below this many factors a log-binomial is summed term by term, which keeps
/// small results accurate to a few ulps instead of suffering the cancellation
/// of three large log-gamma values.
const LN_BINOMIAL_DIRECT_LIMIT: u64 = 1024;

/// Exact multiplicity `Omega` of `order` on `grid`.
pub fn multiplicity(order: &EconomicOrder, grid: &RevenueGrid, regime: Regime) -> Result<BigUint> {
    order.check_len(grid)?;
    let a = order.occupancy();
    let g = grid.degeneracies();
    let mut omega = BigUint::one();
    match regime {
        Regime::Monopolistic => {
            // N! / prod a_k! as a product of binomials over prefix sums.
            let mut prefix = 0u64;
            for (&ak, &gk) in a.iter().zip(g) {
                prefix += ak;
                omega *= binomial(BigUint::from(prefix), BigUint::from(ak));
                if gk > 1 && ak > 0 {
                    let exp = u32::try_from(ak).map_err(|_| {
                        Error::Domain(format!("occupancy {ak} too large for exact g^a"))
                    })?;
                    omega *= BigUint::from(gk).pow(exp);
                }
            }
        }
        Regime::Perfect => {
            for (&ak, &gk) in a.iter().zip(g) {
                if gk > 1 && ak > 0 {
                    omega *= binomial(BigUint::from(ak + gk - 1), BigUint::from(ak));
                }
            }
        }
    }
    Ok(omega)
}

/// Alias of [`multiplicity`] under the freedom vocabulary: the degree of
/// freedom of an economy obeying `order` is the size of that order.
pub fn freedom_degree(order: &EconomicOrder, grid: &RevenueGrid, regime: Regime) -> Result<BigUint> {
    multiplicity(order, grid, regime)
}

/// `ln Omega` evaluated in floating point, usable where the exact integer is
/// astronomically large.
pub fn log_multiplicity(order: &EconomicOrder, grid: &RevenueGrid, regime: Regime) -> Result<f64> {
    order.check_len(grid)?;
    let a = order.occupancy();
    let g = grid.degeneracies();
    let value = match regime {
        Regime::Monopolistic => {
            let mut prefix = 0u64;
            let mut acc = 0.0;
            for (&ak, &gk) in a.iter().zip(g) {
                prefix += ak;
                acc += ln_binomial(prefix, ak);
                if gk > 1 {
                    acc += ak as f64 * (gk as f64).ln();
                }
            }
            acc
        }
        Regime::Perfect => a
            .iter()
            .zip(g)
            .map(|(&ak, &gk)| ln_binomial(ak + gk - 1, ak))
            .sum(),
    };
    Ok(value)
}

/// `ln C(n, k)`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    assert!(k <= n, "ln_binomial({n}, {k})");
    let k = k.min(n - k);
    if k == 0 {
        return 0.0;
    }
    if k <= LN_BINOMIAL_DIRECT_LIMIT {
        let base = n - k;
        (1..=k).map(|i| ((base + i) as f64 / i as f64).ln()).sum()
    } else {
        ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
    }
}

/// Natural log of an arbitrary-precision integer (`-inf` for zero).
pub fn ln_biguint(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    let shift = bits.saturating_sub(64);
    let top = (x >> shift).to_u64().expect("top 64 bits fit") as f64;
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// `x ln x` with the continuous extension `0 ln 0 = 0`.
fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Stirling-approximate `ln Omega` of an integer order.
pub fn stirling_log_multiplicity(
    order: &EconomicOrder,
    grid: &RevenueGrid,
    regime: Regime,
) -> Result<f64> {
    order.check_len(grid)?;
    stirling_entropy(&order.as_f64(), grid, regime)
}

/// Stirling form of `ln Omega` on a real-valued occupancy.
///
/// Perfect competition:
/// `sum (a+g-1) ln(a+g-1) - a ln a - (g-1) ln(g-1)`.
/// Monopolistic competition:
/// `ln N! + sum a ln g - sum a ln a + sum a`, with `ln N!` kept exact
/// (`ln Gamma(N + 1)`, `N = sum a`).
pub fn stirling_entropy(occupancy: &[f64], grid: &RevenueGrid, regime: Regime) -> Result<f64> {
    if occupancy.len() != grid.len() {
        return Err(Error::LengthMismatch { expected: grid.len(), found: occupancy.len() });
    }
    if let Some(k) = occupancy.iter().position(|&a| !(a >= 0.0 && a.is_finite())) {
        return Err(Error::Domain(format!(
            "occupancy of level {} is {}, must be finite and non-negative",
            k + 1,
            occupancy[k]
        )));
    }
    let g = grid.degeneracies();
    let value = match regime {
        Regime::Perfect => occupancy
            .iter()
            .zip(g)
            .map(|(&a, &gk)| {
                let gm1 = gk as f64 - 1.0;
                xlnx(a + gm1) - xlnx(a) - xlnx(gm1)
            })
            .sum(),
        Regime::Monopolistic => {
            let n: f64 = occupancy.iter().sum();
            let mut acc = ln_gamma(n + 1.0);
            for (&a, &gk) in occupancy.iter().zip(g) {
                acc += a * (gk as f64).ln() - xlnx(a) + a;
            }
            acc
        }
    };
    Ok(value)
}
