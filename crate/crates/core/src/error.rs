use thiserror::Error;

/// Errors raised by model evaluation, scaling construction and the optimizer drivers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("missing path gain from node {from} to node {to}")]
    MissingGain { from: usize, to: usize },
    #[error("invalid session {session}: {reason}")]
    InvalidSession { session: usize, reason: String },
    #[error("state does not match the model: {0}")]
    StateShape(String),
    #[error("routing cycle in session {session}: {cycle:?}")]
    RoutingCycle { session: usize, cycle: Vec<usize> },
    #[error("allowed neighbor set is empty at node {node} for session {session}")]
    EmptyAllowedSet { node: usize, session: usize },
    #[error("projection has no free coordinate")]
    EmptyFreeSet,
    #[error("message scope {k} exceeds the {max} other nodes")]
    ScopeTooLarge { k: usize, max: usize },
    #[error("curvature of {0} is unbounded on the requested sublevel set")]
    UnboundedCurvature(&'static str),
    #[error("degenerate scaling bound: {0}")]
    DegenerateBound(String),
    #[error("power control requires a log-SINR capacity model")]
    CapacityModelMismatch,
    #[error("initial state has infinite cost")]
    InitialInfeasible,
    #[error("descent guard exhausted at iteration {iteration} ({block})")]
    DescentGuardExhausted { iteration: usize, block: &'static str },
    #[error("no path from node {from} to node {to}")]
    NoPath { from: usize, to: usize },
    #[error("could not generate a strongly connected instance after {attempts} attempts")]
    ConnectivityFailure { attempts: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
