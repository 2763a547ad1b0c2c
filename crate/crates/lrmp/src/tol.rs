//! Centralized numerical tolerances.
//!
//! Every threshold used by the library and its test suites lives here, so a
//! verdict can always be traced to one named constant. No ad-hoc magic
//! numbers in checkers or solvers.

/// Stationarity residual: `max |pi Q|` must stay below this times the
/// largest rate in the generator.
pub const STATIONARY_RESIDUAL: f64 = 1e-10;

/// Maximum per-configuration log-residual for the product-form fit.
pub const PRODUCT_FIT: f64 = 1e-8;

/// Probability vectors must sum to 1 within this.
pub const NORMALIZATION: f64 = 1e-12;

/// Relative tolerance for rate-condition checks.
pub const CONDITION_REL: f64 = 1e-9;

/// Absolute floor under the relative condition tolerance, for entries of
/// mixed magnitude.
pub const CONDITION_ABS_FLOOR: f64 = 1e-12;

/// Absolute tolerance for the circular-sum difference decomposition.
pub const CIRCULAR_DECOMPOSE: f64 = 1e-10;

/// Absolute bound for the b/c consistency sum.
pub const CONSISTENCY_SUM: f64 = 1e-12;

/// Absolute tolerance on detailed/pairwise balance current comparisons.
pub const BALANCE_CHECK: f64 = 1e-10;

/// Max absolute difference when two distributions must coincide
/// (closed form vs solver, q sweeps, translation covariance).
pub const DISTRIBUTION_MATCH: f64 = 1e-10;

/// Relative tolerance for scalar cross-checks (edge currents, rate
/// round-trips).
pub const RELATIVE_MATCH: f64 = 1e-9;

/// Max absolute error for site marginals against brute force.
pub const MARGINAL_ABS: f64 = 1e-12;

/// All ring edges must carry equal stationary current within this.
pub const EDGE_EQUALITY_ABS: f64 = 1e-12;

/// Relative error allowed between an exact stationary distribution and the
/// explicit one-point product distribution.
pub const ONE_POINT_REL: f64 = 1e-8;

/// Total-variation bound for the Monte Carlo acceptance run.
pub const TV_BOUND: f64 = 0.01;

/// Default cap on the state-space size accepted by the dense solver.
pub const DEFAULT_CAPACITY: usize = 20_000;

/// Relative closeness with an absolute floor.
pub fn rel_close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    let diff = (a - b).abs();
    diff <= floor || diff <= rel * a.abs().max(b.abs())
}

/// Relative closeness under the standard condition tolerances.
pub fn condition_close(a: f64, b: f64) -> bool {
    rel_close(a, b, CONDITION_REL, CONDITION_ABS_FLOOR)
}
