//! Constant exterior 2-forms on R^n.
//!
//! A [`ConstantTwoForm`] is stored sparsely as coefficients on axis planes
//! `dx_i ∧ dx_j` with `i < j`; planes that are absent carry coefficient 0.
//! Equivalently the form is the skew matrix `A` with `A[i][j] = Ω_ij`,
//! `A[j][i] = -Ω_ij`, and `Ω(u ∧ v) = uᵀ A v`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The coordinate plane spanned by axes `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AxisPlane {
    i: usize,
    j: usize,
}

impl AxisPlane {
    pub fn new(i: usize, j: usize, n: usize) -> Result<Self> {
        if i >= j || j >= n {
            return Err(Error::invalid(format!(
                "axis plane ({i},{j}) requires 0 <= i < j < {n}"
            )));
        }
        Ok(AxisPlane { i, j })
    }

    pub fn i(&self) -> usize {
        self.i
    }

    pub fn j(&self) -> usize {
        self.j
    }

    /// All `n(n-1)/2` planes of R^n in lexicographic order.
    pub fn all(n: usize) -> Vec<AxisPlane> {
        let mut planes = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                planes.push(AxisPlane { i, j });
            }
        }
        planes
    }

    /// Parses the `"i,j"` key used in JSON maps.
    pub fn parse_key(key: &str, n: usize) -> Result<Self> {
        let (a, b) = key.split_once(',').ok_or_else(|| {
            Error::invalid(format!("plane key {key:?} is not of the form \"i,j\""))
        })?;
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("plane key {key:?} has a non-integer axis")))
        };
        AxisPlane::new(parse(a)?, parse(b)?, n)
    }
}

impl fmt::Display for AxisPlane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.i, self.j)
    }
}

/// One `{i, j, coeff}` entry of the form literal file format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormEntry {
    pub i: usize,
    pub j: usize,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantTwoForm {
    n: usize,
    coeffs: BTreeMap<AxisPlane, f64>,
}

/// Serializes as the entry list `[{i, j, coeff}]`.
impl Serialize for ConstantTwoForm {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        self.to_entries().serialize(serializer)
    }
}

impl ConstantTwoForm {
    pub fn zero(n: usize) -> Self {
        ConstantTwoForm {
            n,
            coeffs: BTreeMap::new(),
        }
    }

    /// The unit axis form `dx_i ∧ dx_j`.
    pub fn axis(i: usize, j: usize, n: usize) -> Result<Self> {
        let mut form = ConstantTwoForm::zero(n);
        form.set(AxisPlane::new(i, j, n)?, 1.0)?;
        Ok(form)
    }

    /// Builds a form from `(i, j, coeff)` triples. An entry with `i > j` is
    /// folded onto plane `(j, i)` with negated coefficient; repeated planes
    /// are summed.
    pub fn from_entries(n: usize, entries: &[FormEntry]) -> Result<Self> {
        let mut form = ConstantTwoForm::zero(n);
        for e in entries {
            if !e.coeff.is_finite() {
                return Err(Error::invalid(format!(
                    "form coefficient on ({},{}) is not finite",
                    e.i, e.j
                )));
            }
            let (plane, sign) = if e.i < e.j {
                (AxisPlane::new(e.i, e.j, n)?, 1.0)
            } else {
                (AxisPlane::new(e.j, e.i, n)?, -1.0)
            };
            let c = form.coeff(plane) + sign * e.coeff;
            form.set(plane, c)?;
        }
        Ok(form)
    }

    pub fn to_entries(&self) -> Vec<FormEntry> {
        self.coeffs
            .iter()
            .map(|(p, &c)| FormEntry {
                i: p.i,
                j: p.j,
                coeff: c,
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn coeff(&self, plane: AxisPlane) -> f64 {
        self.coeffs.get(&plane).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, plane: AxisPlane, coeff: f64) -> Result<()> {
        if plane.j >= self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: plane.j + 1,
            });
        }
        if !coeff.is_finite() {
            return Err(Error::invalid("form coefficient is not finite"));
        }
        self.coeffs.insert(plane, coeff);
        Ok(())
    }

    /// Planes with an explicitly stored coefficient.
    pub fn support(&self) -> impl Iterator<Item = (AxisPlane, f64)> + '_ {
        self.coeffs.iter().map(|(p, &c)| (*p, c))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ConstantTwoForm {
            n: self.n,
            coeffs: self.coeffs.iter().map(|(p, c)| (*p, c * factor)).collect(),
        }
    }

    pub fn to_skew_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for (p, &c) in &self.coeffs {
            a[(p.i, p.j)] = c;
            a[(p.j, p.i)] = -c;
        }
        a
    }

    /// Reads the upper triangle of `a`; the lower triangle is ignored.
    pub fn from_skew_matrix(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::invalid("skew matrix must be square"));
        }
        let n = a.nrows();
        let mut form = ConstantTwoForm::zero(n);
        for p in AxisPlane::all(n) {
            let c = a[(p.i, p.j)];
            if c != 0.0 {
                form.set(p, c)?;
            }
        }
        Ok(form)
    }

    /// Pushes the form forward by the orthogonal map `r` (`A ↦ R A Rᵀ`).
    pub fn rotated(&self, r: &DMatrix<f64>) -> Result<Self> {
        if r.nrows() != self.n || r.ncols() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: r.nrows(),
            });
        }
        ConstantTwoForm::from_skew_matrix(&(r * self.to_skew_matrix() * r.transpose()))
    }

    /// `Ω(u ∧ v)`.
    pub fn evaluate(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        self.check_len(u.len())?;
        self.check_len(v.len())?;
        Ok(self
            .coeffs
            .iter()
            .map(|(p, c)| c * (u[p.i] * v[p.j] - u[p.j] * v[p.i]))
            .sum())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: len,
            });
        }
        Ok(())
    }
}

/// The covector `v ↦ Ω(T ∧ v)`.
pub fn interior_product(form: &ConstantTwoForm, tangent: &[f64]) -> Result<Vec<f64>> {
    form.check_len(tangent.len())?;
    let mut out = vec![0.0; form.n];
    for (p, &c) in &form.coeffs {
        out[p.j] += c * tangent[p.i];
        out[p.i] -= c * tangent[p.j];
    }
    Ok(out)
}

/// Maximum of `Ω(u ∧ v)` over orthonormal pairs: the largest singular value
/// of the skew coefficient matrix.
pub fn comass(form: &ConstantTwoForm) -> f64 {
    if form.coeffs.values().all(|&c| c == 0.0) || form.n < 2 {
        return 0.0;
    }
    form.to_skew_matrix()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}
