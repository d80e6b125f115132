use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::curves::DiscreteCurve;
use crate::error::{Error, Result};
use crate::forms::{AxisPlane, ConstantTwoForm};
use crate::linalg::least_squares;

use super::{length_gradient, plane_volume_gradient};

/// Result of fitting the weak stationarity equation
/// `∇length = Σ_I Ω_I ∇V_I` by least squares.
#[derive(Debug, Clone, Serialize)]
pub struct StationarityFit {
    pub form: ConstantTwoForm,
    /// `‖∇length - Σ Ω_I ∇V_I‖ / ‖∇length‖`.
    pub residual: f64,
    /// The plane gradients were linearly dependent; `form` is the
    /// minimum-norm solution.
    pub degenerate: bool,
}

/// Fits the multiplier form over `planes` (all axis planes when `None`).
///
/// A vanishing residual certifies that the curve is stationary for
/// prescribed multi-volume on those planes, with `form` the Lagrange
/// multiplier 2-form.
pub fn stationarity_fit(
    curve: &DiscreteCurve,
    planes: Option<&[AxisPlane]>,
) -> Result<StationarityFit> {
    let n = curve.dim();
    let planes: Vec<AxisPlane> = match planes {
        Some(ps) => ps.to_vec(),
        None => AxisPlane::all(n),
    };
    if let Some(p) = planes.iter().find(|p| p.j() >= n) {
        return Err(Error::invalid(format!("plane {p} is outside R^{n}")));
    }
    let grad = length_gradient(curve).to_vector();
    let columns: Vec<DVector<f64>> = planes
        .iter()
        .map(|&p| plane_volume_gradient(curve, p).to_vector())
        .collect();
    let a = if columns.is_empty() {
        DMatrix::zeros(grad.len(), 0)
    } else {
        DMatrix::from_columns(&columns)
    };
    let ls = least_squares(&a, &grad, 1e-7);
    let resid = &grad - &a * &ls.x;
    let mut form = ConstantTwoForm::zero(n);
    for (p, c) in planes.iter().zip(ls.x.iter()) {
        form.set(*p, *c)?;
    }
    Ok(StationarityFit {
        form,
        residual: resid.norm() / grad.norm(),
        degenerate: ls.rank < planes.len(),
    })
}
