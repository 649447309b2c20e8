use thiserror::Error;

/// Errors produced by the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid context: {0}")]
    InvalidContext(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("type {theta} cannot observe this signal (zero mass)")]
    ZeroMass { theta: usize },
    #[error("prior has zero mass on a support coordinate")]
    DegeneratePrior,
    #[error("complexity limit exceeded: {what} ({count} > {limit})")]
    ComplexityLimit {
        what: &'static str,
        count: usize,
        limit: usize,
    },
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    #[error("joint distribution has numeric rank {rank} < {types} types")]
    RankDeficient { rank: usize, types: usize },
    #[error("menu constraints are tight; apply make_strict first")]
    SlackRequired,
    #[error("transformation requires independent signals")]
    RequiresIndependence,
    #[error("no decision recorded for node {node} (type {theta})")]
    MissingDecision { node: usize, theta: usize },
    #[error("invalid protocol tree: {0}")]
    InvalidTree(String),
    #[error("perturbed distribution leaves the simplex at t = {t}")]
    InvalidPerturbation { t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
