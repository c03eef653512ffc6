//! Spontaneous economic orders: exact counting of equilibrium outcomes,
//! desk-scale enumeration and sampling, the maximum-multiplicity occupancy
//! solver, the macro parameter mapping, and income-distribution fitting.

pub mod checks;
pub mod counting;
pub mod economy;
pub mod empirics;
pub mod enumerate;
pub mod error;
pub mod macrolink;
pub mod maxent;
pub mod sampler;
pub mod stats;

pub use counting::{freedom_degree, log_multiplicity, multiplicity, stirling_entropy, stirling_log_multiplicity};
pub use economy::{
    shares_to_revenues, validate_order, EconomicOrder, EconomyConfig, Money, Regime, RevenueGrid,
    ShareVector, ValidationReport,
};
pub use enumerate::{
    catalog, enumerate_orders, enumerate_outcomes, spontaneous_order_exact, Assignment, MicroOutcome,
    OrderCatalog, Position, SpontaneousOrder,
};
pub use error::{Error, Result};
pub use sampler::{empirical_frequencies, sample_outcomes, OutcomeSampler, SamplerMode, SamplerOptions};
pub use maxent::{
    detect_condensation, entropy_of, occupancy, solve_multipliers, CondensationReport, CondensationThresholds,
    MultiplierSolution, SolverOptions,
};
pub use macrolink::{MacroParams, MacroReport};
pub use empirics::{FitResult, SampleSet};
