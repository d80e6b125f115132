use serde::{Deserialize, Serialize};

use crate::curves::DiscreteCurve;
use crate::error::{Error, Result};

use super::{length, multi_volume};

/// Two-sided bound on the least spanning area `v(S)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeBracket {
    pub lower: f64,
    pub upper: f64,
}

impl VolumeBracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Brackets the least area of a surface spanning the curve.
///
/// Lower bound: projection to a 2-plane does not increase area, so every
/// projected signed area bounds `v(S)` from below. Candidates are the axis
/// planes, the plane of the two leading principal axes of the vertex cloud,
/// and the optimal plane, whose projected area is the largest singular
/// value of the multi-volume bivector.
///
/// Upper bound: the cone over the polygon from an apex, minimized over the
/// vertex centroid and every vertex.
pub fn spanning_volume_bracket(curve: &DiscreteCurve) -> VolumeBracket {
    let n = curve.dim();
    let mv = multi_volume(curve);
    let mut lower = mv.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
    if n >= 2 {
        let b = mv.to_skew_matrix();
        let (e1, e2) = principal_pair(curve);
        lower = lower.max((e1.transpose() * &b * &e2)[(0, 0)].abs());
        lower = lower.max(b.singular_values().iter().cloned().fold(0.0, f64::max));
    }

    let mut upper = cone_area(curve, &curve.centroid());
    for k in 0..curve.num_vertices() {
        upper = upper.min(cone_area(curve, curve.vertex(k)));
    }
    // For planar convex curves both bounds are the same number computed two
    // ways; don't let roundoff invert the bracket.
    VolumeBracket {
        lower,
        upper: upper.max(lower),
    }
}

fn principal_pair(curve: &DiscreteCurve) -> (nalgebra::DVector<f64>, nalgebra::DVector<f64>) {
    let n = curve.dim();
    let c = curve.centroid();
    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
    for p in curve.points() {
        let d = nalgebra::DVector::from_iterator(n, p.iter().zip(&c).map(|(a, b)| a - b));
        m += &d * d.transpose();
    }
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    (
        eig.eigenvectors.column(order[0]).into_owned(),
        eig.eigenvectors.column(order[1]).into_owned(),
    )
}

/// `Σ_k ½ |(x_k - p) ∧ (x_{k+1} - p)|`.
fn cone_area(curve: &DiscreteCurve, apex: &[f64]) -> f64 {
    let count = curve.num_vertices();
    let rel = |k: usize| -> Vec<f64> {
        curve
            .vertex(k)
            .iter()
            .zip(apex)
            .map(|(x, p)| x - p)
            .collect()
    };
    let mut area = 0.0;
    let mut a = rel(0);
    for k in 0..count {
        let b = rel((k + 1) % count);
        // Sum of squared 2x2 minors; avoids the cancellation in |a|²|b|² - (a·b)².
        let mut wedge = 0.0;
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                let m = a[i] * b[j] - a[j] * b[i];
                wedge += m * m;
            }
        }
        area += 0.5 * wedge.sqrt();
        a = b;
    }
    area
}

/// `H₀ = length / (2 v)`: the mean curvature a curve of this length would
/// need to be stationary for spanning volume `v`.
pub fn h_zero(curve: &DiscreteCurve, volume: f64) -> Result<f64> {
    if !(volume.is_finite() && volume > 0.0) {
        return Err(Error::invalid(format!(
            "volume must be positive, got {volume}"
        )));
    }
    Ok(length(curve) / (2.0 * volume))
}

/// `H₀` over a bracket: `(L / 2·upper, L / 2·lower)`.
pub fn h_zero_range(curve: &DiscreteCurve, bracket: &VolumeBracket) -> Result<(f64, f64)> {
    Ok((h_zero(curve, bracket.upper)?, h_zero(curve, bracket.lower)?))
}
