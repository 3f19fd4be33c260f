use std::fmt;

/// State of an ODE integration at the moment it was abandoned.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationState {
    pub s: f64,
    pub sigma: f64,
    pub sigma_p: f64,
    pub step: f64,
}

impl fmt::Display for IntegrationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "s = {:e}, sigma = {:e}, sigma' = {:e}, step = {:e}",
            self.s, self.sigma, self.sigma_p, self.step
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration failed ({reason}) at {state}")]
    Integration { reason: String, state: IntegrationState },

    #[error("asymptotic fit failed: {0}")]
    Fit(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("point outside covered range: {0}")]
    Range(String),

    #[error("nonlinear solver failed after {iterations} iterations: {reason}")]
    Solver {
        reason: String,
        iterations: usize,
        residual_history: Vec<f64>,
        /// Last iterate on the full cell array, for post-mortem inspection.
        iterate: Vec<f64>,
    },

    #[error("graph condition violated: {0}")]
    GraphCondition(String),

    #[error("level-set sampling failed: {0}")]
    Sampling(String),

    #[error("path integrals disagree by {discrepancy:e} (holomorphy violated)")]
    Holomorphy { discrepancy: f64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
