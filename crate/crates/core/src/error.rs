use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    /// An iterative scheme exhausted its budget before meeting its tolerance.
    #[error("{op} did not converge: {detail}")]
    NonConvergence { op: &'static str, detail: String },

    /// An integrated geodesic left the representable part of the parameter chart.
    #[error("geodesic left the chart at alpha = {alpha:e}, beta = {beta:e} (t = {t})")]
    BoundaryEscape { alpha: f64, beta: f64, t: f64 },

    /// A moment sequence is on (or numerically indistinguishable from) the
    /// boundary of the moment space.
    #[error("moment sequence is not interior: {detail}")]
    Boundary { detail: String },

    /// A Hankel determinant index exceeds the available moments.
    #[error("index {index} out of range for a sequence of length {len}")]
    Index { index: usize, len: usize },
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain { op, detail: detail.into() }
    }

    pub(crate) fn no_convergence(op: &'static str, detail: impl Into<String>) -> Self {
        Error::NonConvergence { op, detail: detail.into() }
    }

    pub(crate) fn boundary(detail: impl Into<String>) -> Self {
        Error::Boundary { detail: detail.into() }
    }

    /// True for failures of a numerical scheme (as opposed to invalid input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonConvergence { .. } | Error::BoundaryEscape { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
