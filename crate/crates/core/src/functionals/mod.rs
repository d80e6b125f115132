//! Length, the three enclosed-volume notions, and their first variations.
//!
//! Multi-volume `V_ij` is the signed area of the projection to the `(i, j)`
//! axis plane, computed with the shoelace sum. For a constant 2-form `Ω`,
//! the Ω-volume is `Σ Ω_I V_I`: the canonical primitive
//! `ω_I = ½(x_i dx_j - x_j dx_i)` integrated around the closed polygon.

mod bracket;
mod stationarity;

use std::collections::BTreeMap;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::ser::SerializeMap;
use serde::Serialize;

use crate::curves::{norm, DiscreteCurve, VertexField};
use crate::error::{Error, Result};
use crate::forms::{AxisPlane, ConstantTwoForm};

pub use bracket::{h_zero, h_zero_range, spanning_volume_bracket, VolumeBracket};
pub use stationarity::{stationarity_fit, StationarityFit};

pub fn length(curve: &DiscreteCurve) -> f64 {
    curve.edge_lengths().iter().sum()
}

/// Exact gradient of [`length`] in the vertex coordinates:
/// `u_{k-1} - u_k` with `u_k` the unit direction of edge `k`.
pub fn length_gradient(curve: &DiscreteCurve) -> VertexField {
    let n = curve.dim();
    let count = curve.num_vertices();
    let units: Vec<Vec<f64>> = (0..count)
        .map(|k| {
            let e = curve.edge(k);
            let l = norm(&e);
            e.into_iter().map(|x| x / l).collect()
        })
        .collect();
    let mut grad = VertexField::zeros(n, count);
    for k in 0..count {
        let prev = &units[(k + count - 1) % count];
        let next = &units[k];
        for (d, g) in grad.get_mut(k).iter_mut().enumerate() {
            *g = prev[d] - next[d];
        }
    }
    grad
}

/// Signed areas of the projections to every axis plane (`i < j`).
#[derive(Debug, Clone, PartialEq)]
pub struct MultiVolume {
    n: usize,
    values: BTreeMap<AxisPlane, f64>,
}

impl MultiVolume {
    pub fn from_map(n: usize, values: BTreeMap<AxisPlane, f64>) -> Result<Self> {
        if values.values().any(|v| !v.is_finite()) {
            return Err(Error::invalid("multi-volume entries must be finite"));
        }
        if let Some(p) = values.keys().find(|p| p.j() >= n) {
            return Err(Error::invalid(format!("plane {p} is outside R^{n}")));
        }
        let mut full: BTreeMap<AxisPlane, f64> =
            AxisPlane::all(n).into_iter().map(|p| (p, 0.0)).collect();
        full.extend(values);
        Ok(MultiVolume { n, values: full })
    }

    /// Parses the JSON map form `{"i,j": value}`.
    pub fn from_json_map(n: usize, map: &BTreeMap<String, f64>) -> Result<Self> {
        let values = map
            .iter()
            .map(|(k, v)| Ok((AxisPlane::parse_key(k, n)?, *v)))
            .collect::<Result<_>>()?;
        MultiVolume::from_map(n, values)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, plane: AxisPlane) -> f64 {
        self.values.get(&plane).copied().unwrap_or(0.0)
    }

    /// Antisymmetric accessor: `V_ji = -V_ij`, `V_ii = 0`.
    pub fn signed(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => AxisPlane::new(i, j, self.n)
                .map(|p| self.get(p))
                .unwrap_or(0.0),
            std::cmp::Ordering::Greater => -self.signed(j, i),
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (AxisPlane, f64)> + '_ {
        self.values.iter().map(|(p, v)| (*p, *v))
    }

    /// The bivector as a skew matrix `B[i][j] = V_ij`.
    pub fn to_skew_matrix(&self) -> nalgebra::DMatrix<f64> {
        let mut b = nalgebra::DMatrix::zeros(self.n, self.n);
        for (p, v) in self.iter() {
            b[(p.i(), p.j())] = v;
            b[(p.j(), p.i())] = -v;
        }
        b
    }
}

impl Serialize for MultiVolume {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.values.len()))?;
        for (p, v) in &self.values {
            map.serialize_entry(&p.to_string(), v)?;
        }
        map.end()
    }
}

/// `½ Σ_k (a_k b_{k+1} - b_k a_{k+1})` over strided coordinate columns.
pub(crate) fn shoelace(coords: &[f64], n: usize, i: usize, j: usize) -> f64 {
    let count = coords.len() / n;
    let mut acc = 0.0;
    for k in 0..count {
        let p = &coords[k * n..(k + 1) * n];
        let q = &coords[((k + 1) % count) * n..((k + 1) % count + 1) * n];
        acc += p[i] * q[j] - p[j] * q[i];
    }
    0.5 * acc
}

pub fn multi_volume(curve: &DiscreteCurve) -> MultiVolume {
    let n = curve.dim();
    let values = AxisPlane::all(n)
        .into_iter()
        .map(|p| (p, shoelace(curve.coords(), n, p.i(), p.j())))
        .collect();
    MultiVolume { n, values }
}

pub fn plane_volume(curve: &DiscreteCurve, plane: AxisPlane) -> f64 {
    shoelace(curve.coords(), curve.dim(), plane.i(), plane.j())
}

/// Multi-volume of the trigonometric interpolant through the vertices,
/// taking vertex `k` as the sample at `s = 2πk/N`. The enclosed-area
/// integral `½∮(x_i x_j' - x_j x_i') ds` is evaluated with spectral
/// derivatives and the periodic trapezoid rule, which is exact whenever the
/// underlying curve is a trigonometric polynomial of degree below `N/2`.
pub fn spectral_multi_volume(curve: &DiscreteCurve) -> MultiVolume {
    let n = curve.dim();
    let count = curve.num_vertices();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(count);
    let ifft = planner.plan_fft_inverse(count);
    let mut derivs = vec![vec![0.0; count]; n];
    for (d, out) in derivs.iter_mut().enumerate() {
        let mut buf: Vec<Complex<f64>> = (0..count)
            .map(|k| Complex::new(curve.vertex(k)[d], 0.0))
            .collect();
        fft.process(&mut buf);
        for (k, c) in buf.iter_mut().enumerate() {
            let freq = if 2 * k < count {
                k as f64
            } else if 2 * k == count {
                0.0
            } else {
                k as f64 - count as f64
            };
            *c *= Complex::new(0.0, freq);
        }
        ifft.process(&mut buf);
        for (o, c) in out.iter_mut().zip(&buf) {
            *o = c.re / count as f64;
        }
    }
    let h = std::f64::consts::PI / count as f64;
    let values = AxisPlane::all(n)
        .into_iter()
        .map(|p| {
            let (i, j) = (p.i(), p.j());
            let sum: f64 = (0..count)
                .map(|k| {
                    let x = curve.vertex(k);
                    x[i] * derivs[j][k] - x[j] * derivs[i][k]
                })
                .sum();
            (p, h * sum)
        })
        .collect();
    MultiVolume { n, values }
}

/// Gradient of `V_ij` in the vertex coordinates:
/// `∂V/∂x_i^k = ½(x_j^{k+1} - x_j^{k-1})`, `∂V/∂x_j^k = -½(x_i^{k+1} - x_i^{k-1})`.
pub fn plane_volume_gradient(curve: &DiscreteCurve, plane: AxisPlane) -> VertexField {
    let n = curve.dim();
    let count = curve.num_vertices();
    let (i, j) = (plane.i(), plane.j());
    let mut g = VertexField::zeros(n, count);
    for k in 0..count {
        let next = curve.vertex((k + 1) % count);
        let prev = curve.vertex((k + count - 1) % count);
        let gk = g.get_mut(k);
        gk[i] = 0.5 * (next[j] - prev[j]);
        gk[j] = -0.5 * (next[i] - prev[i]);
    }
    g
}

pub fn multi_volume_jacobian(curve: &DiscreteCurve) -> BTreeMap<AxisPlane, VertexField> {
    AxisPlane::all(curve.dim())
        .into_iter()
        .map(|p| (p, plane_volume_gradient(curve, p)))
        .collect()
}

pub fn omega_volume(curve: &DiscreteCurve, form: &ConstantTwoForm) -> Result<f64> {
    if form.dim() != curve.dim() {
        return Err(Error::DimensionMismatch {
            expected: curve.dim(),
            found: form.dim(),
        });
    }
    Ok(form
        .support()
        .map(|(p, c)| c * plane_volume(curve, p))
        .sum())
}

/// Gradient of the Ω-volume: `Σ Ω_I ∇V_I`.
pub fn omega_volume_gradient(curve: &DiscreteCurve, form: &ConstantTwoForm) -> Result<VertexField> {
    if form.dim() != curve.dim() {
        return Err(Error::DimensionMismatch {
            expected: curve.dim(),
            found: form.dim(),
        });
    }
    let mut acc = VertexField::zeros(curve.dim(), curve.num_vertices());
    for (p, c) in form.support() {
        let g = plane_volume_gradient(curve, p);
        for (a, b) in acc.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *a += c * b;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests;
