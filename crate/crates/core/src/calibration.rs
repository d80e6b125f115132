//! Sampled calibration certificates for closed curves.
//!
//! A 1-form `ω` with `dω` constant, `|ω| ≤ 1` on a region and `ω(T) = 1`
//! along a curve `c` shows that any competitor `c'` in the region with the
//! same ω-volume satisfies `|c| = ∮_c ω = ∮_{c'} ω ≤ |c'|`. Here the
//! comass bound is only checked on a grid, so a passing result is a sampled
//! certificate, not a proof. The region-restricted reading (competitors
//! confined to the region) is this crate's interpretation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::{norm, DiscreteCurve};
use crate::error::{Error, Result};
use crate::forms::{AxisPlane, ConstantTwoForm};

pub const MAX_DEGREE: u32 = 4;
pub const DEFAULT_SAMPLES: usize = 101;

/// Polynomial in `n` variables, keyed by exponent vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    n: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn zero(n: usize) -> Self {
        Polynomial {
            n,
            terms: BTreeMap::new(),
        }
    }

    fn add_term(&mut self, exponents: Vec<u32>, coeff: f64) {
        let c = self.terms.entry(exponents).or_insert(0.0);
        *c += coeff;
        if *c == 0.0 {
            self.terms.retain(|_, c| *c != 0.0);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), *c))
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Zero or a nonzero constant.
    pub fn is_constant(&self) -> bool {
        self.degree().is_none_or(|d| d == 0)
    }

    pub fn constant_term(&self) -> f64 {
        self.terms.get(&vec![0; self.n]).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                c * e
                    .iter()
                    .zip(x)
                    .map(|(&p, &xi)| xi.powi(p as i32))
                    .product::<f64>()
            })
            .sum()
    }

    pub fn derivative(&self, var: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.n);
        for (e, c) in &self.terms {
            if e[var] > 0 {
                let mut d = e.clone();
                d[var] -= 1;
                out.add_term(d, c * e[var] as f64);
            }
        }
        out
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), -c);
        }
        out
    }
}

/// One monomial of the file format: `coeff · Π x_d^{exponents[d]}` in the
/// `dx_component` slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub component: usize,
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

/// `ω = Σ_i p_i(x) dx_i`, each `p_i` of total degree at most 4.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialOneForm {
    components: Vec<Polynomial>,
}

impl PolynomialOneForm {
    pub fn from_monomials(n: usize, monomials: &[Monomial]) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        let mut components = vec![Polynomial::zero(n); n];
        for m in monomials {
            if m.component >= n {
                return Err(Error::invalid(format!(
                    "component {} is outside R^{n}",
                    m.component
                )));
            }
            if m.exponents.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: m.exponents.len(),
                });
            }
            let degree: u32 = m.exponents.iter().sum();
            if degree > MAX_DEGREE {
                return Err(Error::invalid(format!(
                    "monomial degree {degree} exceeds {MAX_DEGREE}"
                )));
            }
            if !m.coeff.is_finite() {
                return Err(Error::invalid("monomial coefficient is not finite"));
            }
            components[m.component].add_term(m.exponents.clone(), m.coeff);
        }
        Ok(PolynomialOneForm { components })
    }

    /// `scale · ½ Σ_I Ω_I (x_i dx_j - x_j dx_i)`, whose exterior derivative
    /// is `scale · Ω`.
    pub fn canonical_primitive(form: &ConstantTwoForm, scale: f64) -> Self {
        let n = form.dim();
        let mut components = vec![Polynomial::zero(n); n];
        for (p, c) in form.support() {
            let unit = |d: usize| {
                let mut e = vec![0; n];
                e[d] = 1;
                e
            };
            components[p.j()].add_term(unit(p.i()), 0.5 * scale * c);
            components[p.i()].add_term(unit(p.j()), -0.5 * scale * c);
        }
        PolynomialOneForm { components }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> &Polynomial {
        &self.components[i]
    }

    pub fn to_monomials(&self) -> Vec<Monomial> {
        self.components
            .iter()
            .enumerate()
            .flat_map(|(i, p)| {
                p.terms().map(move |(e, c)| Monomial {
                    component: i,
                    exponents: e.to_vec(),
                    coeff: c,
                })
            })
            .collect()
    }

    /// The covector `(p_0(x), …, p_{n-1}(x))`.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|p| p.eval(x)).collect()
    }

    /// `ω_x(v)`.
    pub fn apply(&self, x: &[f64], v: &[f64]) -> f64 {
        self.components
            .iter()
            .zip(v)
            .map(|(p, vi)| p.eval(x) * vi)
            .sum()
    }
}

impl Serialize for PolynomialOneForm {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        self.to_monomials().serialize(serializer)
    }
}

/// `dω = Σ_{i<j} (∂p_j/∂x_i - ∂p_i/∂x_j) dx_i ∧ dx_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExteriorDerivative {
    /// Nonzero components only.
    pub components: BTreeMap<AxisPlane, Polynomial>,
    pub constant: bool,
}

impl ExteriorDerivative {
    /// The constant 2-form, when `dω` is constant.
    pub fn constant_form(&self, n: usize) -> Option<ConstantTwoForm> {
        if !self.constant {
            return None;
        }
        let mut form = ConstantTwoForm::zero(n);
        for (p, poly) in &self.components {
            form.set(*p, poly.constant_term()).ok()?;
        }
        Some(form)
    }
}

pub fn exterior_derivative(omega: &PolynomialOneForm) -> ExteriorDerivative {
    let n = omega.dim();
    let mut components = BTreeMap::new();
    for p in AxisPlane::all(n) {
        let c = omega.components[p.j()]
            .derivative(p.i())
            .sub(&omega.components[p.i()].derivative(p.j()));
        if !c.is_zero() {
            components.insert(p, c);
        }
    }
    let constant = components.values().all(Polynomial::is_constant);
    ExteriorDerivative {
        components,
        constant,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ball {
    pub radius: f64,
}

/// Axis-aligned box, optionally intersected with the ball of `radius`
/// about the box center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ball: Option<Ball>,
}

/// Slack on the membership test for vertices lying on the boundary.
const BOUNDARY_SLACK: f64 = 1e-9;

impl Region {
    pub fn cube(n: usize, half_width: f64) -> Self {
        Region {
            lower: vec![-half_width; n],
            upper: vec![half_width; n],
            ball: None,
        }
    }

    pub fn with_ball(mut self, radius: f64) -> Self {
        self.ball = Some(Ball { radius });
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() || self.lower.is_empty() {
            return Err(Error::invalid(
                "region bounds must have equal positive length",
            ));
        }
        if self
            .lower
            .iter()
            .zip(&self.upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u))
        {
            return Err(Error::invalid(
                "region needs finite bounds with lower < upper",
            ));
        }
        if let Some(b) = self.ball {
            if !(b.radius.is_finite() && b.radius > 0.0) {
                return Err(Error::invalid("ball radius must be positive"));
            }
        }
        Ok(())
    }

    fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    fn contains_with(&self, x: &[f64], slack: f64) -> bool {
        let in_box = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(xi, (l, u))| *xi >= l - slack && *xi <= u + slack);
        in_box
            && self.ball.is_none_or(|b| {
                let r2: f64 = x
                    .iter()
                    .zip(self.center())
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum();
                r2.sqrt() <= b.radius * (1.0 + slack)
            })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_with(x, 0.0)
    }
}

/// Where `ω(T)` is sampled along the polygon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TangentSampling {
    /// At each vertex, against the central-difference tangent.
    #[default]
    Vertices,
    /// At each edge midpoint, against the unit edge direction.
    EdgeMidpoints,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub kind: &'static str,
    pub form: PolynomialOneForm,
    pub region: Region,
    pub curve: DiscreteCurve,
    /// `1 - max sampled |ω|`.
    pub comass_margin: f64,
    pub max_sampled_norm: f64,
    /// `max |1 - ω(T)|` under `tangent_sampling`.
    pub tangency_defect: f64,
    pub tangent_sampling: TangentSampling,
    pub vertex_tangency_defect: f64,
    pub edge_midpoint_tangency_defect: f64,
    pub d_omega_constant: bool,
    pub samples_per_axis: usize,
    pub grid_points_in_region: usize,
    pub tol: f64,
    pub valid: bool,
}

/// Samples `|ω|` on a regular grid of the region and at the curve's
/// vertices, and `ω(T)` along the curve.
pub fn verify_certificate(
    omega: &PolynomialOneForm,
    region: &Region,
    curve: &DiscreteCurve,
    samples: usize,
    tol: f64,
    sampling: TangentSampling,
) -> Result<Certificate> {
    region.validate()?;
    let n = curve.dim();
    if omega.dim() != n || region.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if omega.dim() != n {
                omega.dim()
            } else {
                region.dim()
            },
        });
    }
    if samples < 2 {
        return Err(Error::invalid("need at least 2 samples per axis"));
    }
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::invalid("tolerance must be non-negative"));
    }
    let total = (samples as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > 1 << 28 {
        return Err(Error::invalid(format!(
            "{samples}^{n} grid points is too many"
        )));
    }
    if let Some(k) =
        (0..curve.num_vertices()).find(|&k| !region.contains_with(curve.vertex(k), BOUNDARY_SLACK))
    {
        return Err(Error::invalid(format!(
            "curve vertex {k} lies outside the region"
        )));
    }

    let total = total as usize;
    let (grid_max, inside) = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut x = vec![0.0; n];
            for (d, xd) in x.iter_mut().enumerate() {
                let t = (idx % samples) as f64 / (samples - 1) as f64;
                idx /= samples;
                *xd = region.lower[d] + t * (region.upper[d] - region.lower[d]);
            }
            if region.contains(&x) {
                (norm(&omega.eval(&x)), 1usize)
            } else {
                (0.0, 0)
            }
        })
        .reduce(|| (0.0, 0), |a, b| (a.0.max(b.0), a.1 + b.1));
    let vertex_max = (0..curve.num_vertices())
        .map(|k| norm(&omega.eval(curve.vertex(k))))
        .fold(0.0, f64::max);
    let max_sampled_norm = grid_max.max(vertex_max);

    let count = curve.num_vertices();
    let vertex_defect = (0..count)
        .map(|k| {
            let next = curve.vertex((k + 1) % count);
            let prev = curve.vertex((k + count - 1) % count);
            let d: Vec<f64> = next.iter().zip(prev).map(|(a, b)| a - b).collect();
            let l = norm(&d);
            let t: Vec<f64> = d.iter().map(|x| x / l).collect();
            (1.0 - omega.apply(curve.vertex(k), &t)).abs()
        })
        .fold(0.0, f64::max);
    let midpoint_defect = (0..count)
        .map(|k| {
            let a = curve.vertex(k);
            let e = curve.edge(k);
            let l = norm(&e);
            let mid: Vec<f64> = a.iter().zip(&e).map(|(x, d)| x + 0.5 * d).collect();
            let t: Vec<f64> = e.iter().map(|x| x / l).collect();
            (1.0 - omega.apply(&mid, &t)).abs()
        })
        .fold(0.0, f64::max);
    let tangency_defect = match sampling {
        TangentSampling::Vertices => vertex_defect,
        TangentSampling::EdgeMidpoints => midpoint_defect,
    };
    let comass_margin = 1.0 - max_sampled_norm;
    Ok(Certificate {
        kind: "sampled certificate",
        form: omega.clone(),
        region: region.clone(),
        curve: curve.clone(),
        comass_margin,
        max_sampled_norm,
        tangency_defect,
        tangent_sampling: sampling,
        vertex_tangency_defect: vertex_defect,
        edge_midpoint_tangency_defect: midpoint_defect,
        d_omega_constant: exterior_derivative(omega).constant,
        samples_per_axis: samples,
        grid_points_in_region: inside,
        tol,
        valid: comass_margin >= -tol && tangency_defect <= tol,
    })
}

/// `∮ ω` over the polygon, three-point Gauss-Legendre per edge (exact for
/// the degree bound, since `ω` restricted to a segment is a polynomial of
/// degree ≤ 4 in the parameter).
pub fn line_integral(omega: &PolynomialOneForm, curve: &DiscreteCurve) -> Result<f64> {
    if omega.dim() != curve.dim() {
        return Err(Error::DimensionMismatch {
            expected: curve.dim(),
            found: omega.dim(),
        });
    }
    let r = (0.6f64).sqrt();
    let nodes = [
        (0.5 * (1.0 - r), 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.5 * (1.0 + r), 5.0 / 18.0),
    ];
    let mut total = 0.0;
    for k in 0..curve.num_vertices() {
        let a = curve.vertex(k);
        let e = curve.edge(k);
        for (t, w) in nodes {
            let x: Vec<f64> = a.iter().zip(&e).map(|(p, d)| p + t * d).collect();
            total += w * omega.apply(&x, &e);
        }
    }
    Ok(total)
}
