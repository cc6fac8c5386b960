use thiserror::Error;

/// Errors raised by the synthesis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("integration diverged: non-finite state at t = {time}")]
    IntegrationDiverged { time: f64 },

    #[error("period undetected: found {maxima} local maxima, need at least 3")]
    PeriodUndetected { maxima: usize },

    #[error("sampling starved after {attempts} draws; most rejections from filter `{filter}`")]
    SamplingStarved { attempts: usize, filter: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("rank-deficient normal matrix (pivot {pivot} at column {column}); retry with ridge > 0")]
    RankDeficient { column: usize, pivot: f64 },

    #[error("matrix is not positive definite (pivot {pivot} at column {column}){hint}")]
    NotPositiveDefinite {
        column: usize,
        pivot: f64,
        hint: &'static str,
    },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {residual})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("inadmissible filter rate lambda = {lambda}: clashes with lattice node (m = {m}, n = {n}), mu = {mu}")]
    InvalidLambda { lambda: f64, m: usize, n: i64, mu: f64 },

    #[error("degenerate eigenfunction: rms |phi| = {rms} on the data")]
    DegenerateEigenfunction { rms: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
