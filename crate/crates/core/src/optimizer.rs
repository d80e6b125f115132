//! Length minimization under volume constraints.
//!
//! Projected gradient descent with Armijo backtracking and Newton
//! re-projection onto the constraint set. Once the projected gradient is
//! small the direction switches to a Newton step on the reduced KKT system,
//! since plain descent crawls along the nearly flat reparametrization modes
//! of a polygon.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::curves::{DiscreteCurve, VertexField};
use crate::error::{Error, Result};
use crate::forms::{AxisPlane, ConstantTwoForm};
use crate::functionals::{length, length_gradient};
use crate::hessian::{analytic_lagrangian_hessian, symmetry_fields};
use crate::linalg::Complement;

const PROJECTION_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Largest accepted constraint violation.
    pub tol_c: f64,
    /// Largest accepted `‖P∇length‖ / ‖∇length‖`.
    pub tol_g: f64,
    pub max_iter: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    /// First trial step; `1/N` when absent.
    pub initial_step: Option<f64>,
    /// Residual below which Newton steps are tried.
    pub newton_switch: f64,
    /// Seed for random starts built by callers.
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            tol_c: 1e-8,
            tol_g: 1e-4,
            max_iter: 20000,
            armijo_c: 1e-4,
            backtrack: 0.5,
            initial_step: None,
            newton_switch: 1e-2,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        positive("tol_c", self.tol_c)?;
        positive("tol_g", self.tol_g)?;
        positive("armijo_c", self.armijo_c)?;
        positive("newton_switch", self.newton_switch)?;
        if let Some(s) = self.initial_step {
            positive("initial_step", s)?;
        }
        if !(self.armijo_c < 1.0 && self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::invalid("armijo_c and backtrack must lie in (0, 1)"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub length: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizationReport {
    pub final_curve: DiscreteCurve,
    pub length: f64,
    pub multipliers: ConstantTwoForm,
    /// Multiplier per constraint row, in constraint order.
    pub constraint_multipliers: Vec<f64>,
    pub constraint_violation: f64,
    pub relative_length_gradient_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub newton_steps: usize,
    pub trace: Vec<TraceEntry>,
}

impl OptimizationReport {
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Numerical(format!("trace write failed: {e}"));
        w.write_record(["iteration", "length", "violation"])
            .map_err(io)?;
        for (k, t) in self.trace.iter().enumerate() {
            w.write_record([k.to_string(), t.length.to_string(), t.violation.to_string()])
                .map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::Numerical(format!("trace write failed: {e}")))?;
        Ok(())
    }
}

/// Constraint rows of the Jacobian with the Gram solve used for both the
/// minimum-norm correction and the multiplier estimate.
struct Linearization {
    rows: Vec<DVector<f64>>,
    gram_inv: DMatrix<f64>,
}

impl Linearization {
    fn new(curve: &DiscreteCurve, cs: &ConstraintSet) -> Result<Self> {
        let rows: Vec<DVector<f64>> = cs.gradients(curve).iter().map(|g| g.to_vector()).collect();
        let m = rows.len();
        let gram = DMatrix::from_fn(m, m, |a, b| rows[a].dot(&rows[b]));
        let eig = gram.clone().symmetric_eigen();
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        // Squared singular values; 1e-7 relative in σ.
        let cutoff = top * 1e-14;
        let mut deficient: Vec<AxisPlane> = vec![];
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            if top == 0.0 || lambda <= cutoff {
                let v = eig.eigenvectors.column(k);
                for (r, w) in v.iter().enumerate() {
                    if w.abs() > 0.1 {
                        for p in cs.row_planes(r) {
                            if !deficient.contains(&p) {
                                deficient.push(p);
                            }
                        }
                    }
                }
            }
        }
        if !deficient.is_empty() {
            deficient.sort();
            return Err(Error::Degenerate { planes: deficient });
        }
        let gram_inv = gram
            .cholesky()
            .ok_or_else(|| {
                Error::Numerical("constraint Gram matrix is not positive definite".into())
            })?
            .inverse();
        Ok(Linearization { rows, gram_inv })
    }

    /// `Jᵀ (J Jᵀ)⁻¹ r`.
    fn min_norm(&self, r: &DVector<f64>) -> DVector<f64> {
        let mu = &self.gram_inv * r;
        let mut out = DVector::zeros(self.rows[0].len());
        for (row, w) in self.rows.iter().zip(mu.iter()) {
            out.axpy(*w, row, 1.0);
        }
        out
    }

    /// `(J Jᵀ)⁻¹ J g`.
    fn multipliers(&self, g: &DVector<f64>) -> DVector<f64> {
        let jg = DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.dot(g)));
        &self.gram_inv * jg
    }
}

fn apply(curve: &DiscreteCurve, delta: &DVector<f64>, t: f64) -> Result<DiscreteCurve> {
    let field = VertexField::from_flat(curve.dim(), delta.iter().copied().collect())?;
    curve.displaced(&field, t)
}

/// Newton iterations on the constraint equations, each step the
/// minimum-norm correction in the row space of the Jacobian.
pub fn project_to_constraints(
    curve: &DiscreteCurve,
    cs: &ConstraintSet,
    tol: f64,
) -> Result<DiscreteCurve> {
    cs.validate(curve.dim())?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mut x = curve.clone();
    let mut violation = cs.violation(&x);
    for _ in 0..PROJECTION_ITERATIONS {
        if violation <= tol {
            return Ok(x);
        }
        let lin = Linearization::new(&x, cs)?;
        let r = DVector::from_vec(cs.residuals(&x));
        x = apply(&x, &lin.min_norm(&r), -1.0)?;
        violation = cs.violation(&x);
        if !violation.is_finite() {
            break;
        }
    }
    if violation <= tol {
        return Ok(x);
    }
    Err(Error::ProjectionFailed {
        iterations: PROJECTION_ITERATIONS,
        violation,
        tol,
    })
}

struct Probe {
    grad: DVector<f64>,
    projected: DVector<f64>,
    multipliers: DVector<f64>,
    residual: f64,
}

fn probe(curve: &DiscreteCurve, cs: &ConstraintSet) -> Result<(Probe, Linearization)> {
    let lin = Linearization::new(curve, cs)?;
    let grad = length_gradient(curve).to_vector();
    let multipliers = lin.multipliers(&grad);
    let mut projected = grad.clone();
    for (row, w) in lin.rows.iter().zip(multipliers.iter()) {
        projected.axpy(-*w, row, 1.0);
    }
    let residual = projected.norm() / grad.norm();
    Ok((
        Probe {
            grad,
            projected,
            multipliers,
            residual,
        },
        lin,
    ))
}

/// Diagonal shifts, relative to the largest diagonal entry, tried in turn
/// when the reduced Hessian is not positive definite.
const NEWTON_SHIFTS: [f64; 4] = [0.0, 1e-5, 1e-4, 1e-3];

/// Newton direction on the tangent space of the constraints, with exact
/// symmetries removed. A small diagonal shift is allowed, which bends the
/// step toward the gradient where tangential spacing is still uneven and the
/// reduced Hessian is slightly indefinite. `None` when no shift helps.
fn newton_direction(
    curve: &DiscreteCurve,
    cs: &ConstraintSet,
    lin: &Linearization,
    p: &Probe,
) -> Option<DVector<f64>> {
    let mut fixed = lin.rows.clone();
    fixed.extend(symmetry_fields(curve).all());
    let z = Complement::new(p.grad.len(), &fixed, 1e-8);
    let lambda: Vec<f64> = p.multipliers.iter().copied().collect();
    let h = analytic_lagrangian_hessian(curve, cs, &lambda);
    let reduced = z.reduce(&h);
    let rhs = z.restrict(&p.grad);
    let scale = reduced.diagonal().amax();
    for shift in NEWTON_SHIFTS {
        let mut m = reduced.clone();
        for k in 0..m.nrows() {
            m[(k, k)] += shift * scale;
        }
        if let Some(chol) = m.cholesky() {
            return Some(-z.expand(&chol.solve(&rhs)));
        }
    }
    None
}

/// Longest run of iterations without a Newton attempt after failures.
const MAX_NEWTON_BACKOFF: usize = 256;

/// Minimizes length over curves satisfying `cs`, starting from `c0`.
pub fn minimize_length(
    c0: &DiscreteCurve,
    cs: &ConstraintSet,
    config: &OptimizerConfig,
) -> Result<OptimizationReport> {
    config.validate()?;
    cs.validate(c0.dim())?;
    let mut x = project_to_constraints(c0, cs, config.tol_c)?;
    let mut step = config
        .initial_step
        .unwrap_or(1.0 / c0.num_vertices() as f64);
    let mut trace = vec![];
    let mut converged = false;
    let mut iterations = 0;
    let mut newton_steps = 0;
    // Away from a nondegenerate minimum the reduced Hessian is indefinite;
    // back off exponentially instead of factoring it every iteration.
    let mut next_newton = 0;
    let mut backoff = 1;
    let mut len = length(&x);

    loop {
        let (p, lin) = probe(&x, cs)?;
        let violation = cs.violation(&x);
        trace.push(TraceEntry {
            length: len,
            violation,
        });
        if p.residual <= config.tol_g && violation <= config.tol_c {
            converged = true;
            break;
        }
        if iterations >= config.max_iter {
            break;
        }
        iterations += 1;

        let newton = if p.residual < config.newton_switch && iterations >= next_newton {
            let d = newton_direction(&x, cs, &lin, &p).filter(|d| d.dot(&p.grad) < 0.0);
            if d.is_some() {
                backoff = 1;
            } else {
                next_newton = iterations + backoff;
                backoff = (2 * backoff).min(MAX_NEWTON_BACKOFF);
            }
            d
        } else {
            None
        };
        let is_newton = newton.is_some();
        let (dir, mut t) = match newton {
            Some(d) => (d, 1.0),
            None => (-&p.projected, step),
        };
        let slope = p.grad.dot(&dir);
        // Projection moves length by O(tol_c); admit that much plus roundoff.
        let slack = 10.0 * config.tol_c * p.grad.norm() + 1e-14 * len;
        let mut accepted = None;
        while t > 1e-14 {
            let trial =
                apply(&x, &dir, t).and_then(|c| project_to_constraints(&c, cs, config.tol_c));
            match trial {
                Ok(c) => {
                    let l = length(&c);
                    if l <= len + config.armijo_c * t * slope + slack {
                        accepted = Some((c, l));
                        break;
                    }
                }
                Err(e @ Error::Degenerate { .. }) => return Err(e),
                Err(_) => {}
            }
            t *= config.backtrack;
        }
        let Some((c, l)) = accepted else {
            break;
        };
        if is_newton {
            newton_steps += 1;
        } else {
            step = 2.0 * t;
        }
        x = c;
        len = l;
    }

    let (p, _) = probe(&x, cs)?;
    let constraint_multipliers: Vec<f64> = p.multipliers.iter().copied().collect();
    Ok(OptimizationReport {
        multipliers: cs.multiplier_form(x.dim(), &constraint_multipliers),
        constraint_multipliers,
        constraint_violation: cs.violation(&x),
        relative_length_gradient_residual: p.residual,
        length: len,
        final_curve: x,
        iterations,
        converged,
        newton_steps,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{PI, TAU};

    use super::*;
    use crate::curves::{random_star, sample_fourier, FourierCurve};
    use crate::functionals::stationarity_fit;

    fn unit_circle(samples: usize) -> DiscreteCurve {
        sample_fourier(
            &FourierCurve::circle(2, vec![0.0, 0.0], 1.0).unwrap(),
            samples,
        )
        .unwrap()
    }

    fn area_target(n: usize, value: f64) -> ConstraintSet {
        ConstraintSet::multi_volume(n, &[(AxisPlane::new(0, 1, n).unwrap(), value)]).unwrap()
    }

    #[test]
    fn projection_rescales_circle() {
        let c = unit_circle(64).scaled(1.01).unwrap();
        let target = 32.0 * (TAU / 64.0).sin();
        let cs = area_target(2, target);
        let p = project_to_constraints(&c, &cs, 1e-12).unwrap();
        assert!(cs.violation(&p) <= 1e-12);
        for k in 0..64 {
            let r = p.vertex(k).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((r - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn projection_fixed_point() {
        let c = unit_circle(32);
        let cs = ConstraintSet::all_planes_of(&c);
        assert_eq!(project_to_constraints(&c, &cs, 1e-10).unwrap(), c);
    }

    #[test]
    fn projection_reports_degenerate_planes() {
        let c = sample_fourier(
            &FourierCurve::new(
                4,
                vec![0.0; 4],
                vec![crate::curves::FourierTerm {
                    w: 1,
                    a: 1.0,
                    plane: [2, 3],
                }],
            )
            .unwrap(),
            32,
        )
        .unwrap();
        let cs = area_target(4, PI);
        match project_to_constraints(&c, &cs, 1e-10) {
            Err(Error::Degenerate { planes }) => {
                assert_eq!(planes, vec![AxisPlane::new(0, 1, 4).unwrap()])
            }
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn star_converges_to_circle() {
        let c0 = random_star(64, 0.5, 1.5, 11).unwrap();
        let cs = area_target(2, PI);
        let report = minimize_length(&c0, &cs, &OptimizerConfig::default()).unwrap();
        assert!(
            report.converged,
            "residual {}",
            report.relative_length_gradient_residual
        );
        assert!(report.constraint_violation <= 1e-8);
        assert!((report.length - TAU).abs() / TAU < 0.01);
        assert!((report.constraint_multipliers[0] - 1.0).abs() < 0.05);
        let fit = stationarity_fit(
            &report.final_curve,
            Some(&[AxisPlane::new(0, 1, 2).unwrap()]),
        )
        .unwrap();
        assert!(
            (fit.form.coeff(AxisPlane::new(0, 1, 2).unwrap()) - report.constraint_multipliers[0])
                .abs()
                < 2e-4
        );
        for w in report.trace.windows(2) {
            assert!(w[1].length <= w[0].length + 10.0 * 1e-8);
        }
    }

    #[test]
    fn optimal_start_stops_immediately() {
        let c = unit_circle(128);
        let cs = ConstraintSet::all_planes_of(&c);
        let report = minimize_length(&c, &cs, &OptimizerConfig::default()).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 0);
        assert_eq!(report.length, length(&c));
    }

    #[test]
    fn max_iter_exhaustion_is_reported() {
        let c0 = random_star(64, 0.5, 1.5, 3).unwrap();
        let cs = area_target(2, PI);
        let config = OptimizerConfig {
            max_iter: 3,
            ..OptimizerConfig::default()
        };
        let report = minimize_length(&c0, &cs, &config).unwrap();
        assert!(!report.converged);
        assert_eq!(report.iterations, 3);
        assert_eq!(report.trace.len(), 4);
        let mut buf = vec![];
        report.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iteration,length,violation\n"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn config_rejects_bad_values() {
        let bad = OptimizerConfig {
            backtrack: 1.5,
            ..OptimizerConfig::default()
        };
        assert!(bad.validate().is_err());
        let parsed: OptimizerConfig = serde_json::from_str(r#"{"tol_g": 1e-5}"#).unwrap();
        assert_eq!(parsed.tol_g, 1e-5);
        assert_eq!(parsed.max_iter, 20000);
        assert!(serde_json::from_str::<OptimizerConfig>(r#"{"tolg": 1}"#).is_err());
    }
}
