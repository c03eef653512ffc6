//! Fixed economies shared by the benchmarks.

use econorder::{EconomyConfig, Regime, RevenueGrid};

/// Three levels, 64 industries each, 32 firms.
pub fn desk(regime: Regime) -> (RevenueGrid, EconomyConfig) {
    let grid = RevenueGrid::new(vec![1, 2, 3], vec![64; 3]).unwrap();
    (grid, EconomyConfig::new(32, 58, regime).unwrap())
}

/// Small enough that every outcome can be listed.
pub fn tiny(regime: Regime) -> (RevenueGrid, EconomyConfig) {
    let grid = RevenueGrid::new(vec![1, 2, 3, 4], vec![2; 4]).unwrap();
    (grid, EconomyConfig::new(5, 12, regime).unwrap())
}

/// Ten levels, 50 industries each, 1000 firms.
pub fn ten_level(regime: Regime) -> (RevenueGrid, EconomyConfig) {
    let grid = RevenueGrid::new((1..=10).collect(), vec![50; 10]).unwrap();
    (grid, EconomyConfig::new(1_000, 4_000, regime).unwrap())
}
