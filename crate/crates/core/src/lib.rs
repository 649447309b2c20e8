//! Revenue-optimal mechanisms for selling information to a buyer with
//! private type, and exact evaluation of interactive buyer–seller protocols.

pub mod context;
pub mod error;
pub mod fixtures;
pub mod gap;
pub mod geometry;
pub mod linalg;
pub mod lp;
pub mod mechanisms;
pub mod protocol;

pub use context::{
    validate_context, BeliefTransform, Context, ContextData, Frame, Valuation, Violation,
};
pub use error::{Error, Result};
pub use gap::{gap_experiment, GapRow};
pub use geometry::{interesting_posteriors, Correlation, PosteriorSet, Provenance};
pub use lp::{build_dual, LinearProgram, LpSolution};
pub use mechanisms::{
    revenue_report, verify_menu, Contract, Menu, MenuKind, MenuReport, RevenueReport, Signal,
};
pub use protocol::{
    best_response, evaluate, BuyerStrategy, Decision, EvaluationResult, Mode, ProtocolTree,
    TreeBuilder,
};
