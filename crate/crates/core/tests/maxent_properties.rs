use econorder::macrolink::{log_w_gradient, macro_from_multipliers, multipliers_from_macro, occupancy_from_macro};
use econorder::{occupancy, solve_multipliers, EconomyConfig, Regime, RevenueGrid, SolverOptions};
use proptest::prelude::*;

fn regime() -> impl Strategy<Value = Regime> {
    prop_oneof![Just(Regime::Monopolistic), Just(Regime::Perfect)]
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Interior economy: 2 to 6 levels, `g_k <= 100`, `10 <= N <= 1000`, and a
/// mean revenue strictly inside the grid.
fn interior_economy() -> impl Strategy<Value = (RevenueGrid, u64, u64)> {
    (2..=6usize)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(1..=5u64, n),
                prop::collection::vec(1..=100u64, n),
                10..=1000u64,
                0.05..0.95f64,
            )
        })
        .prop_map(|(steps, g, n_firms, t)| {
            let levels: Vec<u64> = steps
                .iter()
                .scan(0, |acc, s| {
                    *acc += s;
                    Some(*acc)
                })
                .collect();
            let lo = n_firms * levels[0];
            let hi = n_firms * levels[levels.len() - 1];
            let pi = (lo + 1 + ((hi - lo - 2) as f64 * t) as u64).min(hi - 1);
            (RevenueGrid::new(levels, g).unwrap(), n_firms, pi)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn solution_meets_both_constraints((grid, n, pi) in interior_economy(), regime in regime()) {
        let config = EconomyConfig::new(n, pi, regime).unwrap();
        let s = solve_multipliers(&grid, &config, SolverOptions::default()).unwrap();
        prop_assert!(s.converged);
        prop_assert!(s.occupancy.iter().all(|&a| a >= 0.0));
        prop_assert!(s.residual_n.abs() / n as f64 <= 1e-8, "{}", s.residual_n);
        prop_assert!(s.residual_pi.abs() / pi as f64 <= 1e-8, "{}", s.residual_pi);
    }

    #[test]
    fn monopolistic_log_occupancy_is_linear_in_revenue((grid, n, pi) in interior_economy()) {
        let config = EconomyConfig::new(n, pi, Regime::Monopolistic).unwrap();
        let s = solve_multipliers(&grid, &config, SolverOptions::default()).unwrap();
        let x = grid.money_levels();
        let y: Vec<f64> =
            s.occupancy.iter().zip(grid.degeneracies()).map(|(&a, &g)| (a / g as f64).ln()).collect();
        // Least-squares line through (eps_k, ln(a_k / g_k)).
        let m = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let slope = sxy / sxx;
        let scale = y.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        for (a, b) in x.iter().zip(&y) {
            let fitted = my + slope * (a - mx);
            prop_assert!((fitted - b).abs() <= 1e-9 * scale, "{} vs {}", fitted, b);
        }
        prop_assert!(rel(-slope, s.beta) <= 1e-8);
    }

    #[test]
    fn money_scale_divides_beta((grid, n, pi) in interior_economy(), regime in regime(), c in prop::sample::select(vec![2u64, 10])) {
        let base = solve_multipliers(&grid, &EconomyConfig::new(n, pi, regime).unwrap(), SolverOptions::default()).unwrap();
        let scaled = solve_multipliers(
            &grid.scaled(c).unwrap(),
            &EconomyConfig::new(n, pi * c, regime).unwrap(),
            SolverOptions::default(),
        )
        .unwrap();
        prop_assert!((scaled.alpha - base.alpha).abs() <= 1e-7 * base.alpha.abs().max(1.0), "{} vs {}", scaled.alpha, base.alpha);
        prop_assert!(rel(scaled.beta * c as f64, base.beta) <= 1e-7);
        for (a, b) in scaled.occupancy.iter().zip(&base.occupancy) {
            prop_assert!((a - b).abs() <= 1e-7 * n as f64);
        }
    }

    #[test]
    fn bose_einstein_dominates_boltzmann(
        levels in prop::collection::btree_set(1..200u64, 1..8),
        g in 1..50u64,
        beta in 0.01..3.0f64,
        shift in 1e-3..5.0f64,
    ) {
        let levels: Vec<u64> = levels.into_iter().collect();
        let grid = RevenueGrid::new(levels.clone(), vec![g; levels.len()]).unwrap();
        // Every exponent alpha + beta eps_k is at least `shift`.
        let alpha = shift - beta * levels[0] as f64;
        let be = occupancy(alpha, beta, &grid, Regime::Perfect).unwrap();
        let mb = occupancy(alpha, beta, &grid, Regime::Monopolistic).unwrap();
        // Far in the tail the two agree to the last ulp.
        for (p, m) in be.iter().zip(&mb) {
            prop_assert!(*p >= m * (1.0 - 4.0 * f64::EPSILON), "{} < {}", p, m);
        }
    }

    #[test]
    fn macro_mapping_round_trips(alpha in -20.0..20.0f64, beta in 1e-3..50.0f64, lambda in 1e-2..1e3f64) {
        let params = macro_from_multipliers(alpha, beta, lambda).unwrap();
        let (a, b) = multipliers_from_macro(&params).unwrap();
        prop_assert!((a - alpha).abs() <= 1e-12 * alpha.abs().max(1.0));
        prop_assert!(rel(b, beta) <= 1e-12);
    }

    #[test]
    fn macro_occupancy_matches_multiplier_occupancy(
        levels in prop::collection::btree_set(1..100u64, 1..8),
        g in 1..20u64,
        beta in 0.01..2.0f64,
        shift in 1e-2..5.0f64,
        lambda in 0.1..100.0f64,
        regime in regime(),
    ) {
        let levels: Vec<u64> = levels.into_iter().collect();
        let grid = RevenueGrid::new(levels.clone(), vec![g; levels.len()]).unwrap();
        let alpha = shift - beta * levels[0] as f64;
        let direct = occupancy(alpha, beta, &grid, regime).unwrap();
        let params = macro_from_multipliers(alpha, beta, lambda).unwrap();
        let mapped = occupancy_from_macro(&params, &grid, regime).unwrap();
        for (a, b) in mapped.iter().zip(&direct) {
            prop_assert!(rel(*a, *b) <= 1e-10, "{} vs {}", a, b);
        }
    }

    #[test]
    fn log_w_gradient_recovers_constraints((grid, n, pi) in interior_economy(), regime in regime()) {
        let s = solve_multipliers(&grid, &EconomyConfig::new(n, pi, regime).unwrap(), SolverOptions::default()).unwrap();
        let [dn, dpi] = log_w_gradient(s.alpha, s.beta, &grid, regime).unwrap();
        prop_assert!(rel(dn, n as f64) <= 1e-8, "{} vs {}", dn, n);
        prop_assert!(rel(dpi, pi as f64 * grid.quantum()) <= 1e-8, "{} vs {}", dpi, pi);
    }
}
