use econorder::macrolink::technology;
use econorder::enumerate::{enumerate_outcomes, outcome_group_sizes, total_probability};
use econorder::{
    catalog, enumerate_orders, log_multiplicity, multiplicity, spontaneous_order_exact, validate_order,
    EconomicOrder, EconomyConfig, OutcomeSampler, Regime, RevenueGrid, SamplerMode, SamplerOptions,
};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use proptest::prelude::*;

fn regime() -> impl Strategy<Value = Regime> {
    prop_oneof![Just(Regime::Monopolistic), Just(Regime::Perfect)]
}

/// Occupancy and degeneracy pairs for one order.
fn order_and_degeneracies(max_levels: usize, max_a: u64, max_g: u64) -> impl Strategy<Value = Vec<(u64, u64)>> {
    prop::collection::vec((0..=max_a, 1..=max_g), 1..=max_levels)
}

fn grid_for(g: &[u64]) -> RevenueGrid {
    RevenueGrid::new((1..=g.len() as u64).collect(), g.to_vec()).unwrap()
}

/// Desk-scale economy: `n <= 4` levels, `g_k <= 2`, `N <= 5`, constrained to
/// the revenue of some order or unconstrained.
fn small_economy() -> impl Strategy<Value = (RevenueGrid, EconomyConfig)> {
    (1..=4usize, regime())
        .prop_flat_map(|(n, regime)| {
            (
                prop::collection::vec(1..=3u64, n),
                prop::collection::vec(1..=2u64, n),
                prop::collection::vec(0..n, 1..=5),
                any::<bool>(),
                Just(regime),
            )
        })
        .prop_map(|(steps, g, positions, constrained, regime)| {
            let levels: Vec<u64> = steps
                .iter()
                .scan(0, |acc, s| {
                    *acc += s;
                    Some(*acc)
                })
                .collect();
            let grid = RevenueGrid::new(levels.clone(), g).unwrap();
            let n_firms = positions.len() as u64;
            let config = if constrained {
                EconomyConfig::new(n_firms, positions.iter().map(|&k| levels[k]).sum(), regime).unwrap()
            } else {
                EconomyConfig::unconstrained(n_firms, regime).unwrap()
            };
            (grid, config)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn perfect_multiplicity_is_permutation_symmetric(
        pairs in order_and_degeneracies(5, 20, 6),
        seed in any::<u64>(),
    ) {
        let mut shuffled = pairs.clone();
        // Fisher-Yates driven by the generated seed.
        let mut state = seed;
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            shuffled.swap(i, j);
        }
        let omega = |p: &[(u64, u64)]| {
            let order = EconomicOrder::new(p.iter().map(|x| x.0).collect());
            let g: Vec<u64> = p.iter().map(|x| x.1).collect();
            multiplicity(&order, &grid_for(&g), Regime::Perfect).unwrap()
        };
        prop_assert_eq!(omega(&pairs), omega(&shuffled));
    }

    #[test]
    fn more_industries_never_lower_multiplicity(
        pairs in order_and_degeneracies(5, 12, 5),
        k in any::<prop::sample::Index>(),
        extra in 1..=4u64,
        regime in regime(),
    ) {
        let order = EconomicOrder::new(pairs.iter().map(|x| x.0).collect());
        let g: Vec<u64> = pairs.iter().map(|x| x.1).collect();
        let mut bigger = g.clone();
        let k = k.index(g.len());
        bigger[k] += extra;
        let before = multiplicity(&order, &grid_for(&g), regime).unwrap();
        let after = multiplicity(&order, &grid_for(&bigger), regime).unwrap();
        prop_assert!(after >= before);
    }

    #[test]
    fn money_scale_leaves_orders_unchanged((grid, config) in small_economy(), c in 2..=7u64) {
        let scaled_grid = grid.scaled(c).unwrap();
        let scaled = match config.total_revenue {
            Some(pi) => EconomyConfig::new(config.n_firms, pi * c, config.regime).unwrap(),
            None => config.clone(),
        };
        // Every composition of N over the grid, feasible or not.
        let all = enumerate_orders(&grid, &EconomyConfig::unconstrained(config.n_firms, config.regime).unwrap());
        for order in &all {
            let a = validate_order(order, &grid, &config).unwrap();
            let b = validate_order(order, &scaled_grid, &scaled).unwrap();
            prop_assert_eq!(a.feasible, b.feasible);
            prop_assert_eq!(
                multiplicity(order, &grid, config.regime).unwrap(),
                multiplicity(order, &scaled_grid, config.regime).unwrap()
            );
        }
        let p = catalog(&grid, &config).unwrap();
        let q = catalog(&scaled_grid, &scaled).unwrap();
        prop_assert_eq!(p, q);
    }

    #[test]
    fn log_multiplicity_matches_exact_count(pairs in order_and_degeneracies(6, 60, 40), regime in regime()) {
        let order = EconomicOrder::new(pairs.iter().map(|x| x.0).collect());
        let g: Vec<u64> = pairs.iter().map(|x| x.1).collect();
        let grid = grid_for(&g);
        let omega = multiplicity(&order, &grid, regime).unwrap();
        prop_assume!(omega < (BigUint::one() << 200u32));
        let exact = omega.to_f64().unwrap();
        let approx = log_multiplicity(&order, &grid, regime).unwrap().exp();
        prop_assert!((approx / exact - 1.0).abs() <= 1e-9, "{} vs {}", approx, exact);
    }

    #[test]
    fn formula_matches_enumerated_groups((grid, config) in small_economy()) {
        let sizes = outcome_group_sizes(&grid, &config, 10_000_000).unwrap();
        let orders = enumerate_orders(&grid, &config);
        prop_assert_eq!(sizes.len(), orders.len());
        for order in &orders {
            let omega = multiplicity(order, &grid, config.regime).unwrap();
            prop_assert_eq!(omega, BigUint::from(sizes[order]));
        }
    }

    #[test]
    fn catalog_sums_to_one_exactly((grid, config) in small_economy()) {
        let cat = catalog(&grid, &config).unwrap();
        prop_assert_eq!(total_probability(&cat), BigRational::one());
    }

    #[test]
    fn argmax_matches_largest_group((grid, config) in small_economy()) {
        let groups = enumerate_outcomes(&grid, &config, 10_000_000).unwrap();
        let largest = groups.iter().map(|g| g.outcomes.len()).max().unwrap();
        let mut tied: Vec<EconomicOrder> =
            groups.iter().filter(|g| g.outcomes.len() == largest).map(|g| g.order.clone()).collect();
        tied.sort();
        let top = spontaneous_order_exact(&catalog(&grid, &config).unwrap()).unwrap();
        prop_assert_eq!(&top.order, &tied[0]);
        prop_assert_eq!(top.ties, tied);
    }

    #[test]
    fn technology_peaks_at_the_spontaneous_order((grid, config) in small_economy(), lambda in 0.1..50.0f64) {
        let cat = catalog(&grid, &config).unwrap();
        let top = spontaneous_order_exact(&cat).unwrap();
        let t_top = technology(log_multiplicity(&top.order, &grid, config.regime).unwrap(), lambda).unwrap();
        for e in &cat.entries {
            let t = technology(log_multiplicity(&e.order, &grid, config.regime).unwrap(), lambda).unwrap();
            prop_assert!(t <= t_top + 1e-12 * t_top.abs().max(1.0));
        }
    }

    #[test]
    fn sampler_is_deterministic_per_seed(
        (grid, config) in small_economy(),
        seed in any::<u64>(),
        markov in any::<bool>(),
    ) {
        let mode = if markov { SamplerMode::Markov } else { SamplerMode::Exact };
        let options = SamplerOptions { mode, seed, burn_in: 50, thinning: 3, ..SamplerOptions::default() };
        let draw = || OutcomeSampler::new(&grid, &config, options).unwrap().take(200).collect::<Vec<_>>();
        let first = draw();
        prop_assert_eq!(first.len(), 200);
        prop_assert_eq!(first, draw());
    }
}
