use thiserror::Error;

/// Failure to read a network case file.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CaseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("duplicate bus id {0}")]
    DuplicateBus(u32),
    #[error("{what} references unknown bus {bus}")]
    DanglingBus { what: &'static str, bus: u32 },
    #[error("case has no slack bus")]
    NoSlack,
    #[error("case has {0} slack buses, expected exactly one")]
    MultipleSlack(usize),
    #[error("invalid case data: {0}")]
    Invalid(String),
}

/// Failure to read or validate a scenario configuration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("scenario syntax: {0}")]
    Syntax(String),
    #[error("missing required field `{0}`")]
    Missing(&'static str),
    #[error("{what} references bus {bus}, which is not in the case")]
    UnknownBus { what: &'static str, bus: u32 },
    #[error("invalid `{field}`: {msg}")]
    Invalid { field: String, msg: String },
}

impl ScenarioError {
    pub(crate) fn invalid(field: impl Into<String>, msg: impl Into<String>) -> Self {
        ScenarioError::Invalid {
            field: field.into(),
            msg: msg.into(),
        }
    }
}

/// Newton iteration on the algebraic network equations did not converge.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PowerFlowError {
    #[error("power flow did not converge after {iterations} iterations (max mismatch {mismatch:.3e} pu)")]
    NonConvergence { iterations: usize, mismatch: f64 },
    #[error("power flow Jacobian is singular")]
    SingularJacobian,
    #[error("power flow diverged to a non-physical state (max mismatch {mismatch:.3e} pu)")]
    Diverged { mismatch: f64 },
}

impl PowerFlowError {
    /// Final mismatch norm carried by the diagnostic, if any.
    pub fn mismatch(&self) -> Option<f64> {
        match self {
            PowerFlowError::NonConvergence { mismatch, .. } | PowerFlowError::Diverged { mismatch } => {
                Some(*mismatch)
            }
            PowerFlowError::SingularJacobian => None,
        }
    }
}

/// Errors that abort a simulation before any dynamics are integrated.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("base case is infeasible: {0}")]
    InfeasibleBaseCase(#[source] PowerFlowError),
    #[error("scenario: {0}")]
    Scenario(#[from] ScenarioError),
}

/// Errors from aggregating Monte Carlo samples.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("no uncensored samples to aggregate")]
    AllCensored,
    #[error("need at least {needed} uncensored samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("confidence must lie in (0, 1), got {0}")]
    BadConfidence(f64),
}
