//! Second variation of length under volume constraints.
//!
//! The stability operator is the Hessian of the Lagrangian
//! `length - Σ λ_r c_r` at the fitted multipliers, restricted to the kernel
//! of the constraint Jacobian with the exact symmetries (translations and
//! bivector-preserving rotations) removed. A negative eigenvalue is a
//! direction preserving the constraints to first order along which length
//! drops to second order.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::curves::{dot, norm, DiscreteCurve, VertexField};
use crate::error::{Error, Result};
use crate::functionals::length;
use crate::hessian::{analytic_lagrangian_hessian, fd_lagrangian_hessian, symmetry_fields};
use crate::linalg::Complement;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianMethod {
    /// Central differences of the exact Lagrangian gradient.
    FiniteDifference,
    /// Closed-form length and shoelace Hessians.
    Analytic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Stationarity precondition is `residual ≤ 10·tol_g`.
    pub tol_g: f64,
    /// Finite-difference step relative to the mean edge length.
    pub rel_step: f64,
    pub method: HessianMethod,
    /// Marginal band is `|λ_min| ≤ marginal_rel · ‖H‖`.
    pub marginal_rel: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            tol_g: 1e-4,
            rel_step: 1e-5,
            method: HessianMethod::FiniteDifference,
            marginal_rel: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal { tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DeflatedModes {
    pub constraints: usize,
    pub translations: usize,
    pub rotations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    pub verdict: Verdict,
    pub deflated_mode_counts: DeflatedModes,
    /// Eigenvalues whose modes slide vertices along the curve; included in
    /// `eigenvalues` and reported here for reference.
    pub tangential_eigenvalues: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub stationarity_residual: f64,
    pub hessian_asymmetry: f64,
    /// Largest absolute eigenvalue of the projected operator.
    pub operator_norm: f64,
}

/// Largest angle to the local tangent for a vertex to count as sliding.
const TANGENTIAL_ANGLE_DEG: f64 = 10.0;
/// Fraction of vertices that must slide for a mode to count as tangential.
const TANGENTIAL_FRACTION: f64 = 0.9;

fn check_stationary(
    curve: &DiscreteCurve,
    cs: &ConstraintSet,
    tol_g: f64,
) -> Result<(Vec<f64>, f64)> {
    cs.validate(curve.dim())?;
    let fit = cs.fit_multipliers(curve);
    let limit = 10.0 * tol_g;
    if fit.residual.is_nan() || fit.residual > limit {
        return Err(Error::NotStationary {
            residual: fit.residual,
            limit,
        });
    }
    Ok((fit.multipliers, fit.residual))
}

pub fn constrained_hessian_spectrum(
    curve: &DiscreteCurve,
    cs: &ConstraintSet,
    config: &SpectrumConfig,
) -> Result<SpectrumReport> {
    let (multipliers, residual) = check_stationary(curve, cs, config.tol_g)?;
    let (h, asymmetry) = match config.method {
        HessianMethod::FiniteDifference => {
            let fd = fd_lagrangian_hessian(curve, cs, &multipliers, config.rel_step)?;
            (fd.matrix, fd.asymmetry)
        }
        HessianMethod::Analytic => (analytic_lagrangian_hessian(curve, cs, &multipliers), 0.0),
    };

    let rows: Vec<DVector<f64>> = cs.gradients(curve).iter().map(|g| g.to_vector()).collect();
    let sym = symmetry_fields(curve);
    let dim = h.nrows();
    let only_rows = Complement::new(dim, &rows, 1e-8);
    let mut fixed = rows.clone();
    fixed.extend(sym.translations.iter().cloned());
    let with_translations = Complement::new(dim, &fixed, 1e-8);
    fixed.extend(sym.rotations.iter().cloned());
    let z = Complement::new(dim, &fixed, 1e-8);
    let deflated = DeflatedModes {
        constraints: only_rows.removed(),
        translations: with_translations.removed() - only_rows.removed(),
        rotations: z.removed() - with_translations.removed(),
    };
    if deflated.constraints < rows.len() {
        return Err(Error::Degenerate {
            planes: (0..cs.len()).flat_map(|r| cs.row_planes(r)).collect(),
        });
    }

    let reduced = z.reduce(&h);
    let eig = reduced.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue".into()));
    }
    let min_eigenvalue = eigenvalues.first().copied().unwrap_or(f64::INFINITY);
    let operator_norm = eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let tol = config.marginal_rel * operator_norm;
    let verdict = if min_eigenvalue > tol {
        Verdict::Stable
    } else if min_eigenvalue < -tol {
        Verdict::Unstable
    } else {
        Verdict::Marginal { tol }
    };

    let tangents = vertex_tangents(curve);
    let tangential_eigenvalues = order
        .iter()
        .filter(|&&k| {
            let mode = z.expand(&eig.eigenvectors.column(k).into_owned());
            is_tangential(&mode, &tangents, curve.dim())
        })
        .map(|&k| eig.eigenvalues[k])
        .collect();

    Ok(SpectrumReport {
        eigenvalues,
        min_eigenvalue,
        verdict,
        deflated_mode_counts: deflated,
        tangential_eigenvalues,
        multipliers,
        stationarity_residual: residual,
        hessian_asymmetry: asymmetry,
        operator_norm,
    })
}

/// Unit central-difference tangents `(x_{k+1} - x_{k-1}) / |…|`.
fn vertex_tangents(curve: &DiscreteCurve) -> Vec<Vec<f64>> {
    let count = curve.num_vertices();
    (0..count)
        .map(|k| {
            let next = curve.vertex((k + 1) % count);
            let prev = curve.vertex((k + count - 1) % count);
            let d: Vec<f64> = next.iter().zip(prev).map(|(a, b)| a - b).collect();
            let l = norm(&d);
            d.into_iter().map(|x| x / l).collect()
        })
        .collect()
}

fn is_tangential(mode: &DVector<f64>, tangents: &[Vec<f64>], n: usize) -> bool {
    let cos_max = TANGENTIAL_ANGLE_DEG.to_radians().cos();
    let aligned = tangents
        .iter()
        .enumerate()
        .filter(|(k, t)| {
            let v = &mode.as_slice()[k * n..(k + 1) * n];
            dot(v, t).abs() >= cos_max * norm(v)
        })
        .count();
    aligned as f64 >= TANGENTIAL_FRACTION * tangents.len() as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectionalVariation {
    /// `dc_r/dt` at `t = 0`, one per constraint row.
    pub first_order: Vec<f64>,
    /// `d²/dt² length(x + t v)` at `t = 0`.
    pub d2_length: f64,
    /// `d²/dt² [length - Σ λ_r c_r](x + t v)`: the constrained second
    /// variation when `v` preserves the constraints to first order.
    pub d2_length_constrained: f64,
    pub multipliers: Vec<f64>,
}

/// Step of the central second difference along the field.
const D2_STEP: f64 = 1e-4;

/// Second variation along the straight line `x + t v`.
///
/// Length is convex in the vertex positions, so `d2_length ≥ 0` for every
/// field; instability shows up only in `d2_length_constrained`, where the
/// multiplier-weighted curvature of the constraint set enters.
pub fn directional_second_variation(
    curve: &DiscreteCurve,
    field: &VertexField,
    cs: &ConstraintSet,
    tol_g: f64,
) -> Result<DirectionalVariation> {
    curve.check_field(field)?;
    let (multipliers, _) = check_stationary(curve, cs, tol_g)?;
    let first_order = cs.gradients(curve).iter().map(|g| g.dot(field)).collect();
    let l0 = length(curve);
    let second = |t: f64| -> Result<f64> {
        Ok(
            (length(&curve.displaced(field, t)?) - 2.0 * l0 + length(&curve.displaced(field, -t)?))
                / (t * t),
        )
    };
    let coarse = second(D2_STEP)?;
    let fine = second(0.5 * D2_STEP)?;
    let d2_length = (4.0 * fine - coarse) / 3.0;
    let d2_constraints = cs.second_derivatives(field);
    let d2_length_constrained = d2_length
        - multipliers
            .iter()
            .zip(&d2_constraints)
            .map(|(l, c)| l * c)
            .sum::<f64>();
    Ok(DirectionalVariation {
        first_order,
        d2_length,
        d2_length_constrained,
        multipliers,
    })
}

/// The loop-transfer field on the double curve: `φ(s)·(0, 0, cos 2s, sin 2s)`
/// with `φ = tanh(sin s / δ)`, a smoothed `+1` on `[0, π)` and `-1` on
/// `[π, 2π)`. It grows one lobe of the doubly covered circle and shrinks the
/// other, so the `(2,3)` area is unchanged to first order.
pub fn loop_transfer_field(vertices: usize, delta: f64) -> VertexField {
    let mut v = VertexField::zeros(4, vertices);
    for k in 0..vertices {
        let s = std::f64::consts::TAU * k as f64 / vertices as f64;
        let phi = (s.sin() / delta).tanh();
        let vk = v.get_mut(k);
        vk[2] = phi * (2.0 * s).cos();
        vk[3] = phi * (2.0 * s).sin();
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{random_perturbation, sample_fourier, FourierCurve};
    use crate::forms::{AxisPlane, ConstantTwoForm, FormEntry};

    fn circle(samples: usize) -> DiscreteCurve {
        sample_fourier(
            &FourierCurve::circle(2, vec![0.0, 0.0], 1.0).unwrap(),
            samples,
        )
        .unwrap()
    }

    fn double(samples: usize) -> DiscreteCurve {
        sample_fourier(&FourierCurve::double_curve(), samples).unwrap()
    }

    fn omega_constraint(c: &DiscreteCurve) -> ConstraintSet {
        let s = 5f64.sqrt();
        let form = ConstantTwoForm::from_entries(
            4,
            &[
                FormEntry {
                    i: 0,
                    j: 1,
                    coeff: 1.0 / s,
                },
                FormEntry {
                    i: 2,
                    j: 3,
                    coeff: 2.0 / s,
                },
            ],
        )
        .unwrap();
        let target = crate::functionals::omega_volume(c, &form).unwrap();
        ConstraintSet::omega_volume(form, target).unwrap()
    }

    #[test]
    fn circle_is_stable() {
        let c = circle(64);
        let cs = ConstraintSet::all_planes_of(&c);
        let r = constrained_hessian_spectrum(&c, &cs, &SpectrumConfig::default()).unwrap();
        assert!(r.min_eigenvalue > 0.0, "{}", r.min_eigenvalue);
        assert_eq!(
            r.deflated_mode_counts,
            DeflatedModes {
                constraints: 1,
                translations: 2,
                rotations: 1
            }
        );
        assert_eq!(r.eigenvalues.len(), 128 - 4);
        assert!(r.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        assert!(r.hessian_asymmetry < 1e-6);
    }

    #[test]
    fn double_curve_is_unstable_both_ways() {
        let c = double(64);
        let multi = constrained_hessian_spectrum(
            &c,
            &ConstraintSet::all_planes_of(&c),
            &SpectrumConfig::default(),
        )
        .unwrap();
        assert!(multi.min_eigenvalue < 0.0);
        assert_eq!(multi.verdict, Verdict::Unstable);
        let omega =
            constrained_hessian_spectrum(&c, &omega_constraint(&c), &SpectrumConfig::default())
                .unwrap();
        assert!(omega.min_eigenvalue < 0.0);
        assert_eq!(omega.deflated_mode_counts.rotations, 2);
    }

    #[test]
    fn fd_and_analytic_spectra_agree() {
        let c = double(32);
        let cs = ConstraintSet::all_planes_of(&c);
        let fd = constrained_hessian_spectrum(&c, &cs, &SpectrumConfig::default()).unwrap();
        let exact = constrained_hessian_spectrum(
            &c,
            &cs,
            &SpectrumConfig {
                method: HessianMethod::Analytic,
                ..SpectrumConfig::default()
            },
        )
        .unwrap();
        for (a, b) in fd.eigenvalues.iter().zip(&exact.eigenvalues) {
            assert!((a - b).abs() < 1e-6 * exact.operator_norm);
        }
    }

    #[test]
    fn non_stationary_curve_is_rejected() {
        let c = random_perturbation(&circle(64), 0.05, 3).unwrap();
        let cs = ConstraintSet::all_planes_of(&c);
        assert!(matches!(
            constrained_hessian_spectrum(&c, &cs, &SpectrumConfig::default()),
            Err(Error::NotStationary { .. })
        ));
    }

    #[test]
    fn loop_transfer_lowers_constrained_second_variation() {
        let c = double(256);
        let cs = ConstraintSet::all_planes_of(&c);
        let v = loop_transfer_field(256, 0.3);
        let dv = directional_second_variation(&c, &v, &cs, 1e-4).unwrap();
        let p23 = cs.row_planes(5)[0];
        assert_eq!(p23, AxisPlane::new(2, 3, 4).unwrap());
        // Only the lobe-carrying planes are preserved; the field does tilt
        // the (0,2) and (1,3) projections.
        assert!(
            dv.first_order[0].abs() < 1e-12 && dv.first_order[5].abs() < 1e-10,
            "{:?}",
            dv.first_order
        );
        assert!(dv.d2_length > 0.0);
        assert!(
            dv.d2_length_constrained < 0.0,
            "{}",
            dv.d2_length_constrained
        );
    }

    #[test]
    fn translation_field_is_neutral() {
        let c = double(64);
        let cs = ConstraintSet::all_planes_of(&c);
        let v = VertexField::constant(&[0.3, -0.2, 0.5, 0.1], 64);
        let dv = directional_second_variation(&c, &v, &cs, 1e-4).unwrap();
        assert!(dv.first_order.iter().all(|d| d.abs() < 1e-12));
        assert!(dv.d2_length.abs() < 1e-4);
        assert!(dv.d2_length_constrained.abs() < 1e-4);
    }

    #[test]
    fn normal_field_on_circle_is_positive() {
        // cos 2s radial bump: zero first-order area change.
        let c = circle(256);
        let mut v = VertexField::zeros(2, 256);
        for k in 0..256 {
            let s = std::f64::consts::TAU * k as f64 / 256.0;
            let a = (2.0 * s).cos();
            v.get_mut(k).copy_from_slice(&[a * s.cos(), a * s.sin()]);
        }
        let cs = ConstraintSet::all_planes_of(&c);
        let dv = directional_second_variation(&c, &v, &cs, 1e-4).unwrap();
        assert!(dv.first_order[0].abs() < 1e-10);
        assert!(dv.d2_length_constrained > 0.0);
        assert!(dv.d2_length > 0.0);
    }
}
