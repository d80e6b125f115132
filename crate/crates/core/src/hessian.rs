//! Hessians of length and of the Lagrangian `length - Σ λ_r c_r` in the flat
//! vertex coordinates (index `k·n + d`).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::constraints::ConstraintSet;
use crate::curves::{norm, DiscreteCurve, VertexField};
use crate::error::{Error, Result};
use crate::functionals::{length_gradient, multi_volume};
use crate::linalg::least_squares;

/// Exact Hessian of polygon length: each edge contributes the block
/// `(I - u uᵀ) / ℓ` with sign pattern `[+ -; - +]` on its two endpoints.
pub fn length_hessian(curve: &DiscreteCurve) -> DMatrix<f64> {
    let n = curve.dim();
    let count = curve.num_vertices();
    let mut h = DMatrix::zeros(n * count, n * count);
    for k in 0..count {
        let e = curve.edge(k);
        let l = norm(&e);
        let u: Vec<f64> = e.iter().map(|x| x / l).collect();
        let (a, b) = (k * n, ((k + 1) % count) * n);
        for p in 0..n {
            for q in 0..n {
                let block = (if p == q { 1.0 } else { 0.0 } - u[p] * u[q]) / l;
                h[(a + p, a + q)] += block;
                h[(b + p, b + q)] += block;
                h[(a + p, b + q)] -= block;
                h[(b + p, a + q)] -= block;
            }
        }
    }
    h
}

/// `∇length - Σ λ_r ∇c_r`.
pub fn lagrangian_gradient(
    curve: &DiscreteCurve,
    cs: &ConstraintSet,
    multipliers: &[f64],
) -> VertexField {
    let mut g = length_gradient(curve);
    for (grad, lambda) in cs.gradients(curve).iter().zip(multipliers) {
        for (a, b) in g.as_mut_slice().iter_mut().zip(grad.as_slice()) {
            *a -= lambda * b;
        }
    }
    g
}

pub fn analytic_lagrangian_hessian(
    curve: &DiscreteCurve,
    cs: &ConstraintSet,
    multipliers: &[f64],
) -> DMatrix<f64> {
    let mut h = length_hessian(curve);
    let neg: Vec<f64> = multipliers.iter().map(|m| -m).collect();
    cs.add_hessian(&neg, curve.dim(), curve.num_vertices(), &mut h);
    h
}

/// Finite-difference Hessian after symmetrization, with the relative
/// asymmetry `‖H - Hᵀ‖_F / ‖H‖_F` measured before it.
#[derive(Debug, Clone)]
pub struct FdHessian {
    pub matrix: DMatrix<f64>,
    pub asymmetry: f64,
    pub step: f64,
}

/// Largest relative asymmetry accepted before symmetrizing.
pub const MAX_ASYMMETRY: f64 = 1e-4;

/// Central differences of the exact Lagrangian gradient, one column per
/// coordinate, with step `rel_step · mean edge length`.
pub fn fd_lagrangian_hessian(
    curve: &DiscreteCurve,
    cs: &ConstraintSet,
    multipliers: &[f64],
    rel_step: f64,
) -> Result<FdHessian> {
    let n = curve.dim();
    let dim = curve.coords().len();
    let h = rel_step * curve.mean_edge_length();
    let columns: Vec<Vec<f64>> = (0..dim)
        .into_par_iter()
        .map(|col| -> Result<Vec<f64>> {
            let mut field = VertexField::zeros(n, curve.num_vertices());
            field.as_mut_slice()[col] = 1.0;
            let plus = lagrangian_gradient(&curve.displaced(&field, h)?, cs, multipliers);
            let minus = lagrangian_gradient(&curve.displaced(&field, -h)?, cs, multipliers);
            Ok(plus
                .as_slice()
                .iter()
                .zip(minus.as_slice())
                .map(|(p, m)| (p - m) / (2.0 * h))
                .collect())
        })
        .collect::<Result<_>>()?;
    let raw = DMatrix::from_fn(dim, dim, |r, c| columns[c][r]);
    let scale = raw.norm();
    let asymmetry = if scale > 0.0 {
        (&raw - raw.transpose()).norm() / scale
    } else {
        0.0
    };
    if !asymmetry.is_finite() || asymmetry > MAX_ASYMMETRY {
        return Err(Error::Numerical(format!(
            "finite-difference Hessian asymmetry {asymmetry:.3e} exceeds {MAX_ASYMMETRY:e}"
        )));
    }
    let matrix = (&raw + raw.transpose()) * 0.5;
    Ok(FdHessian {
        matrix,
        asymmetry,
        step: h,
    })
}

/// Exact symmetries of a constrained configuration, as vertex fields:
/// the `n` translations, and the rotations whose generators commute with
/// the curve's multi-volume bivector (these leave every `V_I`, hence every
/// constraint of either kind, unchanged along the whole orbit).
#[derive(Debug, Clone)]
pub struct Symmetries {
    pub translations: Vec<DVector<f64>>,
    pub rotations: Vec<DVector<f64>>,
}

impl Symmetries {
    pub fn all(&self) -> Vec<DVector<f64>> {
        self.translations
            .iter()
            .chain(&self.rotations)
            .cloned()
            .collect()
    }
}

pub fn symmetry_fields(curve: &DiscreteCurve) -> Symmetries {
    let n = curve.dim();
    let count = curve.num_vertices();
    let translations = (0..n)
        .map(|d| DVector::from_fn(n * count, |r, _| if r % n == d { 1.0 } else { 0.0 }))
        .collect();

    let b = multi_volume(curve).to_skew_matrix();
    let generators: Vec<DMatrix<f64>> = (0..n)
        .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
        .map(|(p, q)| {
            let mut a = DMatrix::zeros(n, n);
            a[(p, q)] = 1.0;
            a[(q, p)] = -1.0;
            a
        })
        .collect();
    let columns: Vec<DVector<f64>> = generators
        .iter()
        .map(|a| {
            let c = a * &b - &b * a;
            DVector::from_column_slice(c.as_slice())
        })
        .collect();
    let commutator = DMatrix::from_columns(&columns);
    let ls = least_squares(&commutator, &DVector::zeros(n * n), 1e-6);
    let centroid = DVector::from_column_slice(&curve.centroid());
    let rotations = ls
        .null_space
        .iter()
        .map(|coef| {
            let mut a = DMatrix::zeros(n, n);
            for (g, w) in generators.iter().zip(coef.iter()) {
                a += g * *w;
            }
            let mut field = DVector::zeros(n * count);
            for k in 0..count {
                let x = DVector::from_column_slice(curve.vertex(k)) - &centroid;
                field.rows_mut(k * n, n).copy_from(&(&a * x));
            }
            field
        })
        .collect();
    Symmetries {
        translations,
        rotations,
    }
}
