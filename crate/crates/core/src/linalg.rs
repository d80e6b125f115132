//! Small dense linear-algebra helpers shared by the fitting, projection and
//! second-variation code.

use nalgebra::{DMatrix, DVector};

/// Minimum-norm least-squares solution of `A x ≈ b`.
#[derive(Debug, Clone)]
pub(crate) struct LeastSquares {
    pub x: DVector<f64>,
    pub rank: usize,
    /// Right singular vectors spanning the numerical null space of `A`.
    pub null_space: Vec<DVector<f64>>,
}

/// Singular values below `rel_tol · σ_max` count as zero.
pub(crate) fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> LeastSquares {
    let p = a.ncols();
    if p == 0 {
        return LeastSquares {
            x: DVector::zeros(0),
            rank: 0,
            null_space: vec![],
        };
    }
    // Normal equations keep the SVD at p×p; p is the number of constraint
    // planes, never the vertex count.
    let gram = a.transpose() * a;
    let rhs = a.transpose() * b;
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    // Eigenvalues of the Gram matrix are squared singular values.
    let cutoff = top * rel_tol * rel_tol;
    let mut x = DVector::zeros(p);
    let mut rank = 0;
    let mut null_space = vec![];
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        if top > 0.0 && lambda > cutoff {
            rank += 1;
            x += v * (v.dot(&rhs) / lambda);
        } else {
            null_space.push(v.into_owned());
        }
    }
    LeastSquares {
        x,
        rank,
        null_space,
    }
}

/// Orthonormal basis of the orthogonal complement of a set of vectors,
/// held implicitly as Householder reflectors `Q = P_1 ⋯ P_k`. The basis is
/// the trailing `m - k` columns of `Q`.
#[derive(Debug, Clone)]
pub(crate) struct Complement {
    m: usize,
    reflectors: Vec<(DVector<f64>, f64)>,
}

impl Complement {
    /// Columns whose component outside the span of the earlier ones is below
    /// `rel_tol` of their norm are dropped as dependent.
    pub fn new(m: usize, columns: &[DVector<f64>], rel_tol: f64) -> Self {
        let mut comp = Complement {
            m,
            reflectors: Vec::new(),
        };
        for col in columns {
            let norm0 = col.norm();
            if norm0 == 0.0 {
                continue;
            }
            let mut a = col.clone();
            for r in &comp.reflectors {
                apply_reflector(r, &mut a);
            }
            let k = comp.reflectors.len();
            if k >= m {
                break;
            }
            let tail = a.rows(k, m - k);
            let tail_norm = tail.norm();
            if tail_norm <= rel_tol * norm0 {
                continue;
            }
            let alpha = if tail[0] >= 0.0 {
                -tail_norm
            } else {
                tail_norm
            };
            let mut v = DVector::zeros(m);
            v.rows_mut(k, m - k).copy_from(&tail);
            v[k] -= alpha;
            let vnorm2 = v.norm_squared();
            comp.reflectors.push((v, 2.0 / vnorm2));
        }
        comp
    }

    /// Number of independent vectors removed.
    pub fn removed(&self) -> usize {
        self.reflectors.len()
    }

    pub fn dim(&self) -> usize {
        self.m - self.reflectors.len()
    }

    /// `Zᵀ g`.
    pub fn restrict(&self, g: &DVector<f64>) -> DVector<f64> {
        let mut y = g.clone();
        for r in &self.reflectors {
            apply_reflector(r, &mut y);
        }
        y.rows(self.removed(), self.dim()).into_owned()
    }

    /// `Z y`.
    pub fn expand(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(self.m);
        x.rows_mut(self.removed(), self.dim()).copy_from(y);
        for r in self.reflectors.iter().rev() {
            apply_reflector(r, &mut x);
        }
        x
    }

    /// `Zᵀ H Z` for symmetric `H`.
    pub fn reduce(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        let mut a = h.clone();
        for (v, beta) in &self.reflectors {
            // a ← P a P with P = I - β v vᵀ
            let w = a.transpose() * v;
            a.ger(-beta, v, &w, 1.0);
            let u = &a * v;
            a.ger(-beta, &u, v, 1.0);
        }
        let k = self.removed();
        a.view((k, k), (self.dim(), self.dim())).into_owned()
    }
}

fn apply_reflector((v, beta): &(DVector<f64>, f64), x: &mut DVector<f64>) {
    let s = beta * v.dot(x);
    x.axpy(-s, v, 1.0);
}
