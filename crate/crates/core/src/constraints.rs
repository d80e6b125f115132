//! Volume constraints: prescribed signed areas on a set of axis planes, or a
//! prescribed Ω-volume for one constant 2-form.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::curves::{DiscreteCurve, VertexField};
use crate::error::{Error, Result};
use crate::forms::{AxisPlane, ConstantTwoForm, FormEntry};
use crate::functionals::{
    length_gradient, omega_volume, plane_volume, plane_volume_gradient, shoelace,
};
use crate::linalg::least_squares;

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintSet {
    MultiVolume(Vec<(AxisPlane, f64)>),
    OmegaVolume { form: ConstantTwoForm, target: f64 },
}

impl ConstraintSet {
    pub fn multi_volume(n: usize, targets: &[(AxisPlane, f64)]) -> Result<Self> {
        let cs = ConstraintSet::MultiVolume(targets.to_vec());
        cs.validate(n)?;
        Ok(cs)
    }

    pub fn omega_volume(form: ConstantTwoForm, target: f64) -> Result<Self> {
        let n = form.dim();
        let cs = ConstraintSet::OmegaVolume { form, target };
        cs.validate(n)?;
        Ok(cs)
    }

    /// Fixes every axis-plane area at its current value on `curve`.
    pub fn all_planes_of(curve: &DiscreteCurve) -> Self {
        let targets = AxisPlane::all(curve.dim())
            .into_iter()
            .map(|p| (p, plane_volume(curve, p)))
            .collect();
        ConstraintSet::MultiVolume(targets)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            ConstraintSet::MultiVolume(targets) => {
                if targets.is_empty() {
                    return Err(Error::invalid("at least one constraint is required"));
                }
                for (k, (p, t)) in targets.iter().enumerate() {
                    if p.j() >= n {
                        return Err(Error::invalid(format!("plane {p} is outside R^{n}")));
                    }
                    if !t.is_finite() {
                        return Err(Error::invalid(format!("target on plane {p} is not finite")));
                    }
                    if targets[..k].iter().any(|(q, _)| q == p) {
                        return Err(Error::invalid(format!("plane {p} is constrained twice")));
                    }
                }
            }
            ConstraintSet::OmegaVolume { form, target } => {
                if form.dim() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: form.dim(),
                    });
                }
                if !target.is_finite() {
                    return Err(Error::invalid("Ω-volume target is not finite"));
                }
                if form.support().all(|(_, c)| c == 0.0) {
                    return Err(Error::invalid("Ω-volume constraint needs a nonzero form"));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        match self {
            ConstraintSet::MultiVolume(t) => t.len(),
            ConstraintSet::OmegaVolume { .. } => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn targets(&self) -> Vec<f64> {
        match self {
            ConstraintSet::MultiVolume(t) => t.iter().map(|(_, v)| *v).collect(),
            ConstraintSet::OmegaVolume { target, .. } => vec![*target],
        }
    }

    /// Planes touched by constraint row `row`.
    pub fn row_planes(&self, row: usize) -> Vec<AxisPlane> {
        match self {
            ConstraintSet::MultiVolume(t) => vec![t[row].0],
            ConstraintSet::OmegaVolume { form, .. } => form
                .support()
                .filter(|(_, c)| *c != 0.0)
                .map(|(p, _)| p)
                .collect(),
        }
    }

    pub fn values(&self, curve: &DiscreteCurve) -> Vec<f64> {
        match self {
            ConstraintSet::MultiVolume(t) => {
                t.iter().map(|(p, _)| plane_volume(curve, *p)).collect()
            }
            ConstraintSet::OmegaVolume { form, .. } => {
                vec![omega_volume(curve, form).expect("dimension checked at validation")]
            }
        }
    }

    /// `value - target` per row.
    pub fn residuals(&self, curve: &DiscreteCurve) -> Vec<f64> {
        self.values(curve)
            .into_iter()
            .zip(self.targets())
            .map(|(v, t)| v - t)
            .collect()
    }

    pub fn violation(&self, curve: &DiscreteCurve) -> f64 {
        self.residuals(curve)
            .iter()
            .map(|r| r.abs())
            .fold(0.0, f64::max)
    }

    /// One gradient field per constraint row.
    pub fn gradients(&self, curve: &DiscreteCurve) -> Vec<VertexField> {
        match self {
            ConstraintSet::MultiVolume(t) => t
                .iter()
                .map(|(p, _)| plane_volume_gradient(curve, *p))
                .collect(),
            ConstraintSet::OmegaVolume { form, .. } => {
                let mut acc = VertexField::zeros(curve.dim(), curve.num_vertices());
                for (p, c) in form.support() {
                    let g = plane_volume_gradient(curve, p);
                    for (a, b) in acc.as_mut_slice().iter_mut().zip(g.as_slice()) {
                        *a += c * b;
                    }
                }
                vec![acc]
            }
        }
    }

    /// Second derivative of each row along the straight line `x + t v`.
    /// The constraints are quadratic, so this is exact: `2 V_I(v)`.
    pub fn second_derivatives(&self, field: &VertexField) -> Vec<f64> {
        let n = field.dim();
        let v = field.as_slice();
        match self {
            ConstraintSet::MultiVolume(t) => t
                .iter()
                .map(|(p, _)| 2.0 * shoelace(v, n, p.i(), p.j()))
                .collect(),
            ConstraintSet::OmegaVolume { form, .. } => {
                vec![form
                    .support()
                    .map(|(p, c)| 2.0 * c * shoelace(v, n, p.i(), p.j()))
                    .sum()]
            }
        }
    }

    /// Adds `Σ_r weights[r] · ∇²c_r` into `h` (dimension `N·n`). The Hessians
    /// are constant: `∂²V_ij / ∂x_i^k ∂x_j^{k+1} = ½`, `∂²V_ij / ∂x_j^k ∂x_i^{k+1} = -½`.
    pub fn add_hessian(&self, weights: &[f64], n: usize, count: usize, h: &mut DMatrix<f64>) {
        let mut add_plane = |p: AxisPlane, w: f64| {
            for k in 0..count {
                let a = k * n;
                let b = ((k + 1) % count) * n;
                let (i, j) = (p.i(), p.j());
                h[(a + i, b + j)] += 0.5 * w;
                h[(b + j, a + i)] += 0.5 * w;
                h[(a + j, b + i)] -= 0.5 * w;
                h[(b + i, a + j)] -= 0.5 * w;
            }
        };
        match self {
            ConstraintSet::MultiVolume(t) => {
                for ((p, _), w) in t.iter().zip(weights) {
                    add_plane(*p, *w);
                }
            }
            ConstraintSet::OmegaVolume { form, .. } => {
                for (p, c) in form.support() {
                    add_plane(p, c * weights[0]);
                }
            }
        }
    }

    /// Assembles row multipliers into the Lagrange multiplier 2-form.
    pub fn multiplier_form(&self, n: usize, multipliers: &[f64]) -> ConstantTwoForm {
        match self {
            ConstraintSet::MultiVolume(t) => {
                let mut form = ConstantTwoForm::zero(n);
                for ((p, _), m) in t.iter().zip(multipliers) {
                    form.set(*p, *m).expect("plane validated");
                }
                form
            }
            ConstraintSet::OmegaVolume { form, .. } => form.scaled(multipliers[0]),
        }
    }

    /// Least-squares multipliers for `∇length ≈ Σ λ_r ∇c_r`.
    pub fn fit_multipliers(&self, curve: &DiscreteCurve) -> MultiplierFit {
        let grad = length_gradient(curve).to_vector();
        let columns: Vec<DVector<f64>> = self
            .gradients(curve)
            .iter()
            .map(|g| g.to_vector())
            .collect();
        let a = DMatrix::from_columns(&columns);
        let ls = least_squares(&a, &grad, 1e-7);
        let resid = &grad - &a * &ls.x;
        MultiplierFit {
            multipliers: ls.x.iter().copied().collect(),
            residual: resid.norm() / grad.norm(),
            rank: ls.rank,
        }
    }

    /// Multiplies every target by `factor`.
    pub fn with_scaled_targets(&self, factor: f64) -> Self {
        match self {
            ConstraintSet::MultiVolume(t) => {
                ConstraintSet::MultiVolume(t.iter().map(|(p, v)| (*p, v * factor)).collect())
            }
            ConstraintSet::OmegaVolume { form, target } => ConstraintSet::OmegaVolume {
                form: form.clone(),
                target: target * factor,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultiplierFit {
    pub multipliers: Vec<f64>,
    /// `‖∇length - Σ λ_r ∇c_r‖ / ‖∇length‖`.
    pub residual: f64,
    pub rank: usize,
}

/// File format: `{"multi_volume": [{"i", "j", "target"}]}` or
/// `{"omega_volume": {"form": [{"i", "j", "coeff"}], "target"}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintSpec {
    MultiVolume(Vec<PlaneTarget>),
    OmegaVolume { form: Vec<FormEntry>, target: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlaneTarget {
    pub i: usize,
    pub j: usize,
    pub target: f64,
}

impl ConstraintSpec {
    pub fn build(&self, n: usize) -> Result<ConstraintSet> {
        match self {
            ConstraintSpec::MultiVolume(rows) => {
                let targets = rows
                    .iter()
                    .map(|r| Ok((AxisPlane::new(r.i, r.j, n)?, r.target)))
                    .collect::<Result<Vec<_>>>()?;
                ConstraintSet::multi_volume(n, &targets)
            }
            ConstraintSpec::OmegaVolume { form, target } => {
                ConstraintSet::omega_volume(ConstantTwoForm::from_entries(n, form)?, *target)
            }
        }
    }

    pub fn from_set(cs: &ConstraintSet) -> Self {
        match cs {
            ConstraintSet::MultiVolume(t) => ConstraintSpec::MultiVolume(
                t.iter()
                    .map(|(p, v)| PlaneTarget {
                        i: p.i(),
                        j: p.j(),
                        target: *v,
                    })
                    .collect(),
            ),
            ConstraintSet::OmegaVolume { form, target } => ConstraintSpec::OmegaVolume {
                form: form.to_entries(),
                target: *target,
            },
        }
    }
}
