use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config parse error at `{path}`: {message}")]
    ConfigParse { path: String, message: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("infeasible action at t={t}: {reason}")]
    Infeasible { t: usize, reason: String },

    #[error("value function error: {0}")]
    Value(String),

    #[error("concavity violated at t={t}: slope increase {violation:.3e} exceeds tolerance")]
    Concavity { t: usize, violation: f64 },

    #[error("shadow price bracket [{lo}, {hi}] does not contain a root for load target {target}")]
    Bracket { lo: f64, hi: f64, target: f64 },

    #[error("oracle solver failed: {status} (residual {residual:.3e})")]
    Solver { status: String, residual: f64 },

    #[error("brute-force table needs {cells} cells, budget is {budget}")]
    CellBudget { cells: usize, budget: usize },

    #[error("policy `{policy}` failed in episode {episode}, t={t}: {reason}")]
    Episode { policy: String, episode: usize, t: usize, reason: String },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("i/o error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on `{path}`: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
