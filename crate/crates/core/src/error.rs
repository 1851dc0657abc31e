use thiserror::Error;

/// Errors produced by the analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid cycle: {0}")]
    InvalidCycle(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cycle is not admissible (rank {rank}, {nonzero_dft_columns} nonzero DFT columns)")]
    NotAdmissible { rank: usize, nonzero_dft_columns: usize },
    #[error("state enumeration refused: N = {n} exceeds the bound {max}")]
    EnumerationRefused { n: usize, max: usize },
    #[error("time step {dt} does not divide the delay {tau}")]
    InvalidStep { dt: f64, tau: f64 },
    #[error("integration diverged at t = {t}")]
    IntegrationDiverged { t: f64 },
    #[error("boundary curve undefined: {0}")]
    UndefinedCurve(String),
    #[error("envelope bounds unavailable for neuron {neuron}")]
    BoundsUnavailable { neuron: usize },
    #[error("only the trivial equilibrium exists (beta = {beta} <= 1)")]
    OnlyTrivialRoot { beta: f64 },
    #[error("capability bound exceeded: {0}")]
    CapabilityExceeded(String),
}

pub type Result<T> = std::result::Result<T, Error>;
