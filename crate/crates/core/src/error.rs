use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point ({x}, {y}) is outside the chart domain")]
    Domain { x: f64, y: f64 },

    #[error("element is not hyperbolic: |trace| = {trace}")]
    NotHyperbolic { trace: f64 },

    #[error("enumeration budget exceeded: {needed} words needed, budget is {budget}")]
    Resource { needed: u128, budget: u128 },

    #[error("trajectory left the domain at ({x}, {y}) after arclength {s}")]
    Escape { x: f64, y: f64, s: f64 },

    #[error("no convergence after {iters} iterations, residual {residual:e}")]
    Convergence { iters: usize, residual: f64 },

    #[error("model violation: {0}")]
    Model(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("incomplete catalog: {0}")]
    IncompleteCatalog(String),

    #[error("cluster at {ell} is not isolated: neighbour at distance {gap:e}")]
    Isolation { ell: f64, gap: f64 },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("mode cutoff {cutoff} exceeds the limit {limit}")]
    Truncation { cutoff: usize, limit: usize },

    #[error("parse error at offset {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("finite-difference backend supports derivative order <= {max}, requested {requested}")]
    DerivativeOrder { requested: usize, max: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
