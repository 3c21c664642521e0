//! Dense and sparse helpers shared by the physics modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted ascending.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let sym = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sym.eigenvalues[a].total_cmp(&sym.eigenvalues[b]));
    let values = order.iter().map(|&k| sym.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &sym.eigenvectors.column(k));
    }
    (values, vectors)
}

/// `exp(factor * H)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMatrix, factor: C64) -> CMatrix {
    let (vals, vecs) = eigh(h);
    let phases = CVector::from_iterator(vals.len(), vals.iter().map(|&v| (factor * v).exp()));
    let scaled = CMatrix::from_fn(h.nrows(), h.ncols(), |r, c| vecs[(r, c)] * phases[c]);
    scaled * vecs.adjoint()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Frobenius projection of a Hermitian matrix onto unit-trace PSD matrices
/// (eigenvalue projection onto the probability simplex).
pub fn project_to_density(m: &CMatrix) -> CMatrix {
    let herm = (m + m.adjoint()).scale(0.5);
    let (vals, vecs) = eigh(&herm);
    let clipped = simplex_projection(&vals);
    let n = vals.len();
    let scaled = CMatrix::from_fn(n, n, |r, c| vecs[(r, c)] * clipped[c]);
    scaled * vecs.adjoint()
}

/// Euclidean projection of `v` onto `{x >= 0, sum x = 1}`.
pub fn simplex_projection(v: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumulative += uk;
        let t = (cumulative - 1.0) / (k as f64 + 1.0);
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Row-compressed sparse complex matrix used on the integrator hot paths.
#[derive(Debug, Clone)]
pub struct SparseOp {
    dim: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseOp {
    pub fn from_dense(m: &CMatrix) -> Self {
        let dim = m.nrows();
        let mut row_start = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for r in 0..dim {
            row_start.push(cols.len());
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v.norm() > 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
        }
        row_start.push(cols.len());
        SparseOp { dim, row_start, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_start[r]..self.row_start[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    /// `out += scale * self * x`.
    pub fn mul_vec_acc(&self, scale: C64, x: &[C64], out: &mut [C64]) {
        for r in 0..self.dim {
            let mut acc = ZERO;
            for k in self.row_start[r]..self.row_start[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            out[r] += scale * acc;
        }
    }

    /// `out += scale * self * rho` for row-major `rho`.
    pub fn left_mul_acc(&self, scale: C64, rho: &[C64], out: &mut [C64]) {
        let d = self.dim;
        for (r, c, v) in self.entries() {
            let s = scale * v;
            let (dst, src) = (&mut out[r * d..(r + 1) * d], &rho[c * d..(c + 1) * d]);
            for (o, x) in dst.iter_mut().zip(src) {
                *o += s * x;
            }
        }
    }

    /// `out += scale * rho * self^dagger` for row-major `rho`.
    pub fn right_mul_adjoint_acc(&self, scale: C64, rho: &[C64], out: &mut [C64]) {
        // (rho A^dag)_{ij} = sum_k rho_{ik} conj(A_{jk})
        let d = self.dim;
        for (j, k, v) in self.entries() {
            let s = scale * v.conj();
            for i in 0..d {
                out[i * d + j] += s * rho[i * d + k];
            }
        }
    }

    /// `out += scale * self * rho * self^dagger` for row-major `rho`.
    pub fn sandwich_acc(&self, scale: C64, rho: &[C64], out: &mut [C64]) {
        let d = self.dim;
        for (i, k, a) in self.entries() {
            for (j, l, b) in self.entries() {
                out[i * d + j] += scale * a * rho[k * d + l] * b.conj();
            }
        }
    }
}

/// Row-major flattening of a square matrix.
pub fn to_row_major(m: &CMatrix) -> Vec<C64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(d * d);
    for r in 0..d {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}

pub fn from_row_major(d: usize, v: &[C64]) -> CMatrix {
    CMatrix::from_fn(d, d, |r, c| v[r * d + c])
}
