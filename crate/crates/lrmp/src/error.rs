//! Shared error type for the crate.

use thiserror::Error;

/// Everything that can go wrong across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Lattices need at least one site.
    #[error("invalid lattice: L must be at least 1")]
    InvalidLattice,

    /// State space too large to index with the machine word.
    #[error("state space overflow: |Omega_{{{l},{n}}}| exceeds addressable size")]
    StateSpaceOverflow { l: usize, n: usize },

    /// A particle cannot depart from an empty site.
    #[error("empty departure: site {site} holds no particle")]
    EmptyDeparture { site: usize },

    /// Moves must change the site.
    #[error("self move: departure and arrival are both site {site}")]
    SelfMove { site: usize },

    /// Compression of the empty configuration is undefined.
    #[error("empty configuration: compression requires at least one particle")]
    EmptyConfiguration,

    /// `compress_with_empty` needs the last site empty and at least one other empty site.
    #[error("precondition violation: {0}")]
    Precondition(String),

    /// Site index outside 1..=L.
    #[error("site {site} out of range 1..={l}")]
    SiteOutOfRange { site: usize, l: usize },

    /// Vector lengths do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Rate table consulted outside its tabulated range.
    #[error("rate table overrun: u({m},{n}) requested but table covers 0..={n_max}")]
    RateTableOverrun { m: usize, n: usize, n_max: usize },

    /// Malformed rate table (negative entries, u(0,.) != 0, non-square...).
    #[error("invalid rate table: {0}")]
    InvalidRateTable(String),

    /// The transition digraph is not strongly connected.
    #[error("reducible generator: transition digraph has {components} strongly connected components")]
    Reducible { components: usize },

    /// State space larger than the configured solver cap.
    #[error("capacity exceeded: state space of size {size} exceeds cap {cap}")]
    Capacity { size: usize, cap: usize },

    /// The linear solve did not reach the required residual.
    #[error("solve failed: {0}")]
    SolveFailed(String),

    /// Inputs outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An operation that requires q = 0 was called on a partially asymmetric spec.
    #[error("wrong variant: operation requires q = 0 but q = {q}")]
    WrongVariant { q: f64 },

    /// A constructor/table pair failed its prerequisite condition check.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Rings with one site have no edge.
    #[error("no edge: a single-site ring has no edges")]
    NoEdge,
}

pub type Result<T> = std::result::Result<T, Error>;
