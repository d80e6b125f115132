//! Closed curves: polygons in R^n and finite trigonometric (Fourier-form)
//! curves `C(s) = a0 + Σ a_j (cos(w_j s) e_p + sin(w_j s) e_q)`.

use std::f64::consts::TAU;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed polygon. Vertex `N-1` connects back to vertex 0.
///
/// Coordinates are stored flat, vertex-major: `coords[k * n + d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCurve {
    n: usize,
    coords: Vec<f64>,
}

impl DiscreteCurve {
    pub fn new(n: usize, coords: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("ambient dimension must be positive"));
        }
        if !coords.len().is_multiple_of(n) {
            return Err(Error::invalid(format!(
                "{} coordinates do not split into points of R^{n}",
                coords.len()
            )));
        }
        let count = coords.len() / n;
        if count < 3 {
            return Err(Error::invalid(format!(
                "a closed curve needs at least 3 vertices, got {count}"
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("curve has a non-finite coordinate"));
        }
        let curve = DiscreteCurve { n, coords };
        for k in 0..count {
            if curve.vertex(k) == curve.vertex((k + 1) % count) {
                return Err(Error::invalid(format!(
                    "zero-length edge between vertices {k} and {}",
                    (k + 1) % count
                )));
            }
        }
        Ok(curve)
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let n = points.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = points.iter().find(|p| p.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        DiscreteCurve::new(n, points.concat())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len() / self.n
    }

    pub fn vertex(&self, k: usize) -> &[f64] {
        &self.coords[k * self.n..(k + 1) * self.n]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coords)
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.coords.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// `x_{k+1} - x_k`, indices modulo N.
    pub fn edge(&self, k: usize) -> Vec<f64> {
        let next = (k + 1) % self.num_vertices();
        self.vertex(next)
            .iter()
            .zip(self.vertex(k))
            .map(|(b, a)| b - a)
            .collect()
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        (0..self.num_vertices())
            .map(|k| norm(&self.edge(k)))
            .collect()
    }

    pub fn mean_edge_length(&self) -> f64 {
        self.edge_lengths().iter().sum::<f64>() / self.num_vertices() as f64
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n];
        for p in self.coords.chunks(self.n) {
            for (ci, pi) in c.iter_mut().zip(p) {
                *ci += pi;
            }
        }
        let count = self.num_vertices() as f64;
        c.iter_mut().for_each(|ci| *ci /= count);
        c
    }

    pub fn translated(&self, offset: &[f64]) -> Result<Self> {
        self.check_point(offset)?;
        let coords = self
            .coords
            .chunks(self.n)
            .flat_map(|p| p.iter().zip(offset).map(|(a, b)| a + b))
            .collect();
        DiscreteCurve::new(self.n, coords)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        DiscreteCurve::new(self.n, self.coords.iter().map(|c| c * factor).collect())
    }

    /// Applies the linear map `m` (n×n, row-major rows) to every vertex.
    pub fn transformed(&self, m: &nalgebra::DMatrix<f64>) -> Result<Self> {
        if m.nrows() != self.n || m.ncols() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: m.nrows(),
            });
        }
        let mut coords = Vec::with_capacity(self.coords.len());
        for p in self.coords.chunks(self.n) {
            let y = m * DVector::from_column_slice(p);
            coords.extend(y.iter());
        }
        DiscreteCurve::new(self.n, coords)
    }

    /// Same point set traversed the other way round.
    pub fn reversed(&self) -> Self {
        let coords = self
            .coords
            .chunks(self.n)
            .rev()
            .flatten()
            .copied()
            .collect();
        DiscreteCurve { n: self.n, coords }
    }

    /// `self + t·field`, vertexwise.
    pub fn displaced(&self, field: &VertexField, t: f64) -> Result<Self> {
        self.check_field(field)?;
        let coords = self
            .coords
            .iter()
            .zip(&field.values)
            .map(|(x, v)| x + t * v)
            .collect();
        DiscreteCurve::new(self.n, coords)
    }

    pub(crate) fn check_field(&self, field: &VertexField) -> Result<()> {
        if field.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: field.n,
            });
        }
        if field.values.len() != self.coords.len() {
            return Err(Error::DimensionMismatch {
                expected: self.num_vertices(),
                found: field.len(),
            });
        }
        Ok(())
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: p.len(),
            });
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct CurveFile {
    n: usize,
    vertices: Vec<Vec<f64>>,
}

impl Serialize for DiscreteCurve {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        CurveFile {
            n: self.n,
            vertices: self.points(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DiscreteCurve {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let file = CurveFile::deserialize(deserializer)?;
        if let Some(bad) = file.vertices.iter().find(|p| p.len() != file.n) {
            return Err(serde::de::Error::custom(format!(
                "vertex has {} coordinates, expected {}",
                bad.len(),
                file.n
            )));
        }
        DiscreteCurve::new(file.n, file.vertices.concat()).map_err(serde::de::Error::custom)
    }
}

/// One vector per vertex: variation fields, gradients, per-edge tangents.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexField {
    n: usize,
    values: Vec<f64>,
}

impl VertexField {
    pub fn zeros(n: usize, count: usize) -> Self {
        VertexField {
            n,
            values: vec![0.0; n * count],
        }
    }

    pub fn from_flat(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || !values.len().is_multiple_of(n) {
            return Err(Error::invalid(
                "field length is not a multiple of the dimension",
            ));
        }
        Ok(VertexField { n, values })
    }

    /// A field with the same value at every vertex.
    pub fn constant(value: &[f64], count: usize) -> Self {
        VertexField {
            n: value.len(),
            values: value.repeat(count),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, k: usize) -> &[f64] {
        &self.values[k * self.n..(k + 1) * self.n]
    }

    pub fn get_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.n..(k + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }

    pub fn dot(&self, other: &VertexField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// Unit direction of each edge; entry `k` is the edge from vertex `k` to `k+1`.
pub fn edge_tangents(curve: &DiscreteCurve) -> VertexField {
    let n = curve.dim();
    let mut values = Vec::with_capacity(curve.coords.len());
    for k in 0..curve.num_vertices() {
        let e = curve.edge(k);
        let len = norm(&e);
        values.extend(e.iter().map(|x| x / len));
    }
    VertexField { n, values }
}

/// One rotating term `a (cos(w s) e_p + sin(w s) e_q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierTerm {
    pub w: u32,
    pub a: f64,
    pub plane: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourierCurve {
    n: usize,
    a0: Vec<f64>,
    terms: Vec<FourierTerm>,
}

#[derive(Deserialize)]
struct FourierFile {
    n: usize,
    a0: Vec<f64>,
    terms: Vec<FourierTerm>,
}

impl<'de> Deserialize<'de> for FourierCurve {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let f = FourierFile::deserialize(deserializer)?;
        FourierCurve::new(f.n, f.a0, f.terms).map_err(serde::de::Error::custom)
    }
}

impl FourierCurve {
    pub fn new(n: usize, a0: Vec<f64>, terms: Vec<FourierTerm>) -> Result<Self> {
        if a0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: a0.len(),
            });
        }
        if a0.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("a0 has a non-finite coordinate"));
        }
        if terms.is_empty() {
            return Err(Error::invalid("a Fourier curve needs at least one term"));
        }
        let mut used = vec![false; n];
        let mut prev_w = 0;
        for t in &terms {
            if t.w <= prev_w {
                return Err(Error::invalid(
                    "frequencies must be positive and strictly increasing",
                ));
            }
            prev_w = t.w;
            if !(t.a.is_finite() && t.a > 0.0) {
                return Err(Error::invalid("amplitudes must be positive and finite"));
            }
            let [p, q] = t.plane;
            if p == q || p >= n || q >= n {
                return Err(Error::invalid(format!(
                    "term plane [{p}, {q}] is not a pair of distinct axes of R^{n}"
                )));
            }
            if used[p] || used[q] {
                return Err(Error::invalid("term planes must be disjoint"));
            }
            used[p] = true;
            used[q] = true;
        }
        Ok(FourierCurve { n, a0, terms })
    }

    /// Unit circle in the `(0, 1)` plane of R^n.
    pub fn circle(n: usize, center: Vec<f64>, radius: f64) -> Result<Self> {
        FourierCurve::new(
            n,
            center,
            vec![FourierTerm {
                w: 1,
                a: radius,
                plane: [0, 1],
            }],
        )
    }

    /// `(e^{is}, e^{2is})` in C² = R⁴.
    pub fn double_curve() -> Self {
        FourierCurve::new(
            4,
            vec![0.0; 4],
            vec![
                FourierTerm {
                    w: 1,
                    a: 1.0,
                    plane: [0, 1],
                },
                FourierTerm {
                    w: 2,
                    a: 1.0,
                    plane: [2, 3],
                },
            ],
        )
        .expect("double curve is a valid Fourier curve")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn a0(&self) -> &[f64] {
        &self.a0
    }

    pub fn terms(&self) -> &[FourierTerm] {
        &self.terms
    }

    pub fn max_frequency(&self) -> u32 {
        self.terms.iter().map(|t| t.w).max().unwrap_or(0)
    }

    /// `d^order C / ds^order` at `s` (order 0 is the point itself).
    pub fn derivative(&self, s: f64, order: u32) -> Vec<f64> {
        let mut out = if order == 0 {
            self.a0.clone()
        } else {
            vec![0.0; self.n]
        };
        for t in &self.terms {
            let w = t.w as f64;
            let ws = w * s;
            // Derivatives of (cos, sin) cycle with period 4.
            let (c, sn) = match order % 4 {
                0 => (ws.cos(), ws.sin()),
                1 => (-ws.sin(), ws.cos()),
                2 => (-ws.cos(), -ws.sin()),
                _ => (ws.sin(), -ws.cos()),
            };
            let scale = t.a * w.powi(order as i32);
            out[t.plane[0]] += scale * c;
            out[t.plane[1]] += scale * sn;
        }
        out
    }

    pub fn point(&self, s: f64) -> Vec<f64> {
        self.derivative(s, 0)
    }

    pub fn tangent(&self, s: f64) -> Vec<f64> {
        let d = self.derivative(s, 1);
        let len = norm(&d);
        d.iter().map(|x| x / len).collect()
    }
}

/// Samples `C(2πk/N)`, `k = 0..N`.
///
/// Requires `N >= 3` and `N >= 4·w_max`.
pub fn sample_fourier(curve: &FourierCurve, vertices: usize) -> Result<DiscreteCurve> {
    let required = (4 * curve.max_frequency() as usize).max(3);
    if vertices < required {
        return Err(Error::Resolution {
            vertices,
            frequency: curve.max_frequency(),
            required,
        });
    }
    let coords = (0..vertices)
        .flat_map(|k| curve.point(TAU * k as f64 / vertices as f64))
        .collect();
    DiscreteCurve::new(curve.n, coords)
}

/// Curvature vector `κ(s)`: the normal part of `C''` divided by `|C'|²`.
pub fn analytic_curvature(curve: &FourierCurve, s: f64) -> Vec<f64> {
    let d1 = curve.derivative(s, 1);
    let d2 = curve.derivative(s, 2);
    let speed2 = dot(&d1, &d1);
    let along = dot(&d1, &d2) / speed2;
    d2.iter()
        .zip(&d1)
        .map(|(a, t)| (a - along * t) / speed2)
        .collect()
}

/// Unit circle in the `(0, 1)` plane of R^2 with vertex radii drawn
/// uniformly from `[r_min, r_max]` at equally spaced angles.
pub fn random_star(vertices: usize, r_min: f64, r_max: f64, seed: u64) -> Result<DiscreteCurve> {
    if !(0.0 < r_min && r_min <= r_max) {
        return Err(Error::invalid("star radii must satisfy 0 < r_min <= r_max"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = (0..vertices)
        .flat_map(|k| {
            let theta = TAU * k as f64 / vertices as f64;
            let r = rng.random_range(r_min..=r_max);
            [r * theta.cos(), r * theta.sin()]
        })
        .collect();
    DiscreteCurve::new(2, coords)
}

/// Adds an i.i.d. uniform `[-magnitude, magnitude]` displacement to every
/// coordinate.
pub fn random_perturbation(
    curve: &DiscreteCurve,
    magnitude: f64,
    seed: u64,
) -> Result<DiscreteCurve> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = curve
        .coords
        .iter()
        .map(|x| x + magnitude * rng.random_range(-1.0..=1.0))
        .collect();
    DiscreteCurve::new(curve.n, coords)
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
