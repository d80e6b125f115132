use thiserror::Error;

use crate::forms::AxisPlane;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{vertices} vertices cannot resolve frequency {frequency} (need at least {required})")]
    Resolution {
        vertices: usize,
        frequency: u32,
        required: usize,
    },

    #[error("constraint jacobian is rank deficient on planes {}", plane_list(.planes))]
    Degenerate { planes: Vec<AxisPlane> },

    #[error(
        "constraint projection stalled after {iterations} iterations (violation {violation:e}, tolerance {tol:e})"
    )]
    ProjectionFailed {
        iterations: usize,
        violation: f64,
        tol: f64,
    },

    #[error("curve is not first-order stationary: residual {residual:e} exceeds {limit:e}")]
    NotStationary { residual: f64, limit: f64 },

    #[error("numerical breakdown: {0}")]
    Numerical(String),
}

fn plane_list(planes: &[AxisPlane]) -> String {
    planes
        .iter()
        .map(|p| format!("({p})"))
        .collect::<Vec<_>>()
        .join(" ")
}

impl Error {
    /// Errors caused by the caller's data rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::InvalidInput(_)
                | Error::Resolution { .. }
                | Error::NotStationary { .. }
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
