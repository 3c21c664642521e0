//! Wigner functions, the joint transmon-KPO parity measurement, the
//! effective-decay surrogate for loss during that measurement, and
//! density-matrix reconstruction from Wigner samples.
//!
//! Convention: `W(alpha) = (2/pi) Tr[D(alpha)^dagger rho D(alpha) Pi]`, so the
//! vacuum peaks at `2/pi`.

use std::f64::consts::{FRAC_2_PI, PI};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{KpoError, Result};
use crate::fock::{annihilation, displacement, tail_population, DensityMatrix, OperatorMatrix, TAIL_LIMIT};
use crate::linalg::{self, project_to_density, CMatrix, SparseOp, C64, I, ONE, ZERO};
use crate::ode::{integrate, OdeOptions};

/// Largest padded working dimension for displacements.
pub const MAX_WORKING_DIM: usize = 200;
const UNITARITY_LIMIT: f64 = 1e-6;

/// Sampled Wigner function; `values[(i, j)]` is `W(xs[i] + i ys[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: DMatrix<f64>,
}

impl WignerGrid {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != xs.len() {
            return Err(KpoError::DimensionMismatch { expected: xs.len(), got: values.nrows() });
        }
        if values.ncols() != ys.len() {
            return Err(KpoError::DimensionMismatch { expected: ys.len(), got: values.ncols() });
        }
        Ok(WignerGrid { xs, ys, values })
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[(ix, iy)]
    }

    /// Trapezoid integral over the grid.
    pub fn integral(&self) -> f64 {
        let wx = trapezoid_weights(&self.xs);
        let wy = trapezoid_weights(&self.ys);
        let mut acc = 0.0;
        for (i, a) in wx.iter().enumerate() {
            for (j, b) in wy.iter().enumerate() {
                acc += a * b * self.values[(i, j)];
            }
        }
        acc
    }

    /// Copy scaled by `pi/2` (parity units; vacuum peak 1).
    pub fn to_parity_units(&self) -> WignerGrid {
        WignerGrid { xs: self.xs.clone(), ys: self.ys.clone(), values: self.values.scale(PI / 2.0) }
    }

    pub fn sample_count(&self) -> usize {
        self.xs.len() * self.ys.len()
    }

    /// Copy with independent Gaussian noise of standard deviation `sigma`
    /// added to every value; `seed` fixes the noise stream.
    pub fn with_gaussian_noise(&self, sigma: f64, seed: u64) -> Result<WignerGrid> {
        let normal = Normal::new(0.0, sigma).map_err(|_| KpoError::param("sigma", "must be finite and non-negative"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        // Column-major order of the value matrix fixes the draw sequence.
        out.values.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
        Ok(out)
    }
}

/// `n` evenly spaced points on `[-extent, extent]`.
pub fn symmetric_axis(extent: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|k| -extent + 2.0 * extent * k as f64 / (n - 1) as f64).collect()
}

fn trapezoid_weights(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    let mut w = vec![0.0; n];
    for k in 1..n {
        let h = 0.5 * (axis[k] - axis[k - 1]).abs();
        w[k - 1] += h;
        w[k] += h;
    }
    w
}

fn check_axes(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.is_empty() || ys.is_empty() {
        return Err(KpoError::param("grid", "axes must be non-empty"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(KpoError::param("grid", "axes must be finite"));
    }
    Ok(())
}

/// Tail population of `D(alpha)^dagger rho D(alpha)` in the padded space.
fn displaced_tail(rho: &CMatrix, alpha: C64) -> Result<f64> {
    let dim = rho.nrows();
    let d = displacement(dim, alpha)?;
    if d.unitarity_defect > UNITARITY_LIMIT {
        return Err(KpoError::EnlargeDimension { dim, alpha: alpha.norm(), defect: d.unitarity_defect });
    }
    let u = d.op.elements();
    let shifted = DensityMatrix::from_raw(u.adjoint() * rho * u);
    Ok(tail_population(&shifted))
}

/// Smallest padded dimension in which displacing `rho` by every point of
/// `alphas` keeps the top-level tail below [`TAIL_LIMIT`].
fn working_dim(rho: &DensityMatrix, alphas: &[C64]) -> Result<usize> {
    let max_alpha = alphas.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut dim = (rho.dim() + 6).max((max_alpha + 3.0).powi(2).ceil() as usize).min(MAX_WORKING_DIM);
    loop {
        let padded = rho.embed(dim)?;
        let mut worst = 0.0_f64;
        for &a in alphas {
            worst = worst.max(displaced_tail(padded.elements(), a)?);
        }
        if worst <= TAIL_LIMIT {
            return Ok(dim);
        }
        if dim >= MAX_WORKING_DIM {
            return Err(KpoError::EnlargeDimension { dim, alpha: max_alpha, defect: worst });
        }
        dim = ((dim as f64 * 1.25).ceil() as usize).min(MAX_WORKING_DIM);
    }
}

/// `<m| D(beta) |n>` for `m, n < dim`, exact in the untruncated space:
/// `sqrt(n!/m!) beta^(m-n) e^(-|beta|^2/2) L_n^(m-n)(|beta|^2)` for `m >= n`,
/// and the adjoint relation for `m < n`.
fn displacement_elements(dim: usize, beta: C64) -> CMatrix {
    let x = beta.norm_sqr();
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..dim).scan(0.0, |acc, k| {
            *acc += (k as f64).ln();
            Some(*acc)
        }))
        .collect();
    let (r, phase) = (beta.norm(), if beta.norm() > 0.0 { beta / beta.norm() } else { ONE });
    let mut d = CMatrix::zeros(dim, dim);
    for k in 0..dim {
        // L_j^(k)(x) for j = 0..dim-k by the three-term recurrence.
        let mut lag = vec![1.0; dim - k];
        if dim - k > 1 {
            lag[1] = 1.0 + k as f64 - x;
        }
        for j in 1..dim - k - 1 {
            let jf = j as f64;
            lag[j + 1] = ((2.0 * jf + 1.0 + k as f64 - x) * lag[j] - (jf + k as f64) * lag[j - 1]) / (jf + 1.0);
        }
        let rot = phase.powi(k as i32);
        for (j, &l) in lag.iter().enumerate() {
            let (n, m) = (j, j + k);
            let ln_mag = 0.5 * (ln_fact[n] - ln_fact[m]) - 0.5 * x + if k > 0 { k as f64 * r.ln() } else { 0.0 };
            let mag = ln_mag.exp() * l;
            d[(m, n)] = rot * mag;
            if k > 0 {
                // <n|D|m> = conj(<m|D(-beta)|n>)
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                d[(n, m)] = rot.conj() * (sign * mag);
            }
        }
    }
    d
}

/// `(2/pi) D(alpha) Pi D(alpha)^dagger = (2/pi) D(2 alpha) Pi` on the first `dim` levels.
fn measurement_operator(dim: usize, alpha: C64) -> CMatrix {
    let mut m = displacement_elements(dim, alpha * 2.0);
    for (n, mut col) in m.column_iter_mut().enumerate() {
        col *= C64::from(if n % 2 == 0 { FRAC_2_PI } else { -FRAC_2_PI });
    }
    m
}

/// Wigner function of `rho` on the grid `xs x ys`.
///
/// Displaced-parity matrix elements are evaluated in closed form, so no
/// padding of the state is involved and the result is exact up to rounding.
pub fn wigner(rho: &DensityMatrix, xs: &[f64], ys: &[f64]) -> Result<WignerGrid> {
    check_axes(xs, ys)?;
    rho.validate()?;
    let r = rho.elements();
    let rows: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| {
            ys.iter()
                .map(|&y| {
                    let w = trace_product(r, &measurement_operator(rho.dim(), C64::new(x, y)));
                    if w.im.abs() > 1e-9 {
                        return Err(KpoError::IntegratorAccuracy(format!("Wigner value has imaginary part {:.3e}", w.im)));
                    }
                    Ok(w.re)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let values = DMatrix::from_fn(xs.len(), ys.len(), |i, j| rows[i][j]);
    Ok(WignerGrid { xs: xs.to_vec(), ys: ys.to_vec(), values })
}

/// `Tr(a b)`.
fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Ramsey parity measurement through a dispersively coupled transmon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParityMeasurementSpec {
    /// Cross-Kerr `chi`, rad/s.
    pub chi: f64,
    /// KPO lifetime during the measurement, s (infinite for no loss).
    pub t1_kpo: f64,
    /// Free-evolution window, s.
    pub ramsey_duration: f64,
    /// Adds the free Kerr term `-(K/2) a^dagger^2 a^2` during the window.
    pub include_kerr: bool,
    /// Kerr used when `include_kerr` is set, rad/s.
    pub kerr: f64,
}

impl ParityMeasurementSpec {
    /// Window `pi / chi`, no Kerr.
    pub fn new(chi: f64, t1_kpo: f64) -> Result<Self> {
        let spec = ParityMeasurementSpec { chi, t1_kpo, ramsey_duration: PI / chi, include_kerr: false, kerr: 0.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_kerr(mut self, kerr: f64) -> Self {
        self.include_kerr = true;
        self.kerr = kerr;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi > 0.0 && self.chi.is_finite()) {
            return Err(KpoError::param("chi", "must be positive"));
        }
        if !(self.ramsey_duration > 0.0 && self.ramsey_duration.is_finite()) {
            return Err(KpoError::param("ramsey_duration", "must be positive"));
        }
        if !(self.t1_kpo > 0.0) {
            return Err(KpoError::param("t1_kpo", "must be positive (infinite for no loss)"));
        }
        if self.include_kerr && !self.kerr.is_finite() {
            return Err(KpoError::param("kerr", "must be finite"));
        }
        Ok(())
    }
}

/// Master-equation evolution of a dense state for time `t` under the
/// time-independent `h` (rad/s) and jump operators `jumps`.
fn lindblad_constant(h: &CMatrix, jumps: &[CMatrix], rho0: &CMatrix, t: f64) -> Result<CMatrix> {
    let dim = rho0.nrows();
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let mut h_eff = h.clone();
    for l in jumps {
        h_eff -= l.adjoint() * l * (I * 0.5);
    }
    let h_eff = SparseOp::from_dense(&h_eff);
    let jumps: Vec<SparseOp> = jumps.iter().map(SparseOp::from_dense).collect();
    let rhs = |_t: f64, y: &[C64], dy: &mut [C64]| {
        dy.fill(ZERO);
        h_eff.left_mul_acc(-I, y, dy);
        h_eff.right_mul_adjoint_acc(I, y, dy);
        for l in &jumps {
            l.sandwich_acc(ONE, y, dy);
        }
    };
    let opts = OdeOptions { rtol: 1e-10, atol: 1e-12, ..OdeOptions::default() };
    let (y, _) = integrate(rhs, 0.0, linalg::to_row_major(rho0), &[t], &opts, |_, _, _| Ok(()))?;
    Ok(linalg::from_row_major(dim, &y))
}

/// Ramsey parity of `rho` displaced by `-alpha`, simulated on the joint
/// transmon x KPO space: transmon in `(|g> + |e>)/sqrt 2`, evolution under
/// `chi |e><e| x n` (plus free Kerr if requested) with KPO loss, closing
/// `pi/2` pulse, and `<sigma_z>` as the parity estimate.
///
/// Without loss and with the window `pi/chi` this is `(pi/2) W(alpha)`.
pub fn parity_oracle(rho: &DensityMatrix, alpha: C64, spec: &ParityMeasurementSpec) -> Result<f64> {
    spec.validate()?;
    rho.validate()?;
    let dim = working_dim(rho, &[alpha])?;
    let padded = rho.embed(dim)?;
    let d = displacement(dim, alpha)?;
    let u = d.op.elements();
    let shifted = u.adjoint() * padded.elements() * u;

    let joint = 2 * dim;
    let a = annihilation(dim)?;
    let n_op = a.elements().adjoint() * a.elements();
    let kerr_op = if spec.include_kerr {
        let a2 = a.elements() * a.elements();
        a2.adjoint() * a2 * C64::from(-spec.kerr / 2.0)
    } else {
        CMatrix::zeros(dim, dim)
    };
    let mut h = CMatrix::zeros(joint, joint);
    h.view_mut((0, 0), (dim, dim)).copy_from(&kerr_op);
    h.view_mut((dim, dim), (dim, dim)).copy_from(&(&kerr_op + n_op * C64::from(spec.chi)));
    let mut jumps = Vec::new();
    if spec.t1_kpo.is_finite() {
        let mut l = CMatrix::zeros(joint, joint);
        let scaled = a.elements() * C64::from((1.0 / spec.t1_kpo).sqrt());
        l.view_mut((0, 0), (dim, dim)).copy_from(&scaled);
        l.view_mut((dim, dim), (dim, dim)).copy_from(&scaled);
        jumps.push(l);
    }
    // |+><+| x rho: every transmon block carries rho / 2.
    let mut rho0 = CMatrix::zeros(joint, joint);
    for (r, c) in [(0, 0), (0, dim), (dim, 0), (dim, dim)] {
        rho0.view_mut((r, c), (dim, dim)).copy_from(&(&shifted * C64::from(0.5)));
    }
    let rho_t = lindblad_constant(&h, &jumps, &rho0, spec.ramsey_duration)?;

    let tail = crate::fock::TAIL_LEVELS;
    let top: f64 = (dim - tail..dim).map(|n| rho_t[(n, n)].re + rho_t[(dim + n, dim + n)].re).sum();
    if top > TAIL_LIMIT {
        return Err(KpoError::Truncation { dim, tail: top, limit: TAIL_LIMIT });
    }
    // Reduced transmon state, then R_y(-pi/2) maps <sigma_x> onto <sigma_z>.
    let coherence: C64 = (0..dim).map(|n| rho_t[(n, dim + n)]).sum();
    Ok(2.0 * coherence.re)
}

/// Parity-oracle values along a set of points, evaluated in parallel.
pub fn parity_linecut(rho: &DensityMatrix, alphas: &[C64], spec: &ParityMeasurementSpec) -> Result<Vec<f64>> {
    alphas.par_iter().map(|&a| parity_oracle(rho, a, spec)).collect()
}

/// Amplitude damping with lifetime `t1eff` for time `t`; with a Hamiltonian
/// (rad/s) the full master equation is integrated, otherwise the exact Kraus
/// map is applied.
pub fn effective_decay(rho: &DensityMatrix, t: f64, t1eff: f64, hamiltonian: Option<&OperatorMatrix>) -> Result<DensityMatrix> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(KpoError::param("t", "must be non-negative and finite"));
    }
    if !(t1eff > 0.0) {
        return Err(KpoError::param("t1eff", "must be positive"));
    }
    let dim = rho.dim();
    if t == 0.0 {
        return Ok(rho.clone());
    }
    if let Some(h) = hamiltonian {
        if h.dim() != dim {
            return Err(KpoError::DimensionMismatch { expected: dim, got: h.dim() });
        }
        let jumps = if t1eff.is_finite() {
            vec![annihilation(dim)?.elements() * C64::from((1.0 / t1eff).sqrt())]
        } else {
            Vec::new()
        };
        let out = lindblad_constant(h.elements(), &jumps, rho.elements(), t)?;
        return Ok(DensityMatrix::from_raw((&out + out.adjoint()).scale(0.5)));
    }
    let keep = (-t / t1eff).exp();
    let lost = 1.0 - keep;
    let r = rho.elements();
    let mut out = CMatrix::zeros(dim, dim);
    // Kraus operators E_k |n> = sqrt(C(n, k) keep^(n-k) lost^k) |n - k>.
    let log_binom = |n: usize, k: usize| ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k);
    let amp = |n: usize, k: usize| -> f64 {
        if k > n {
            return 0.0;
        }
        if k == 0 {
            return keep.powf((n as f64) / 2.0);
        }
        if lost == 0.0 {
            return 0.0;
        }
        (0.5 * (log_binom(n, k) + (n - k) as f64 * keep.ln() + k as f64 * lost.ln())).exp()
    };
    for k in 0..dim {
        for m in k..dim {
            let am = amp(m, k);
            if am == 0.0 {
                continue;
            }
            for n in k..dim {
                let an = amp(n, k);
                if an != 0.0 {
                    out[(m - k, n - k)] += r[(m, n)] * (am * an);
                }
            }
        }
    }
    Ok(DensityMatrix::from_raw(out))
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

fn kerr_phases(dim: usize, angle: f64) -> Vec<C64> {
    (0..dim).map(|n| C64::from_polar(1.0, angle * (n * n.saturating_sub(1)) as f64)).collect()
}

fn conjugate_diagonal(rho: &DensityMatrix, phases: &[C64]) -> DensityMatrix {
    let r = rho.elements();
    let d = rho.dim();
    DensityMatrix::from_raw(CMatrix::from_fn(d, d, |m, n| phases[m] * r[(m, n)] * phases[n].conj()))
}

/// Free evolution under `-(K/2) a^dagger^2 a^2` for `duration`.
pub fn kerr_wind(rho: &DensityMatrix, duration: f64, kerr: f64) -> DensityMatrix {
    conjugate_diagonal(rho, &kerr_phases(rho.dim(), kerr / 2.0 * duration))
}

/// Inverse of [`kerr_wind`]: removes the Kerr rotation accumulated during a
/// measurement window.
pub fn kerr_unwind(rho: &DensityMatrix, duration: f64, kerr: f64) -> DensityMatrix {
    conjugate_diagonal(rho, &kerr_phases(rho.dim(), -kerr / 2.0 * duration))
}

/// Reconstructed state and fit diagnostics.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub rho: DensityMatrix,
    /// RMS difference between the data and the reconstructed Wigner values.
    pub residual: f64,
    pub iterations: usize,
}

/// Orthonormal Hermitian basis coordinates: diagonal entries, then for each
/// `i < j` the symmetric and antisymmetric combinations.
fn hermitian_coordinates(e: &CMatrix, dim: usize, out: &mut [f64]) {
    let s2 = std::f64::consts::SQRT_2;
    let mut k = 0;
    for i in 0..dim {
        out[k] = e[(i, i)].re;
        k += 1;
    }
    for i in 0..dim {
        for j in i + 1..dim {
            out[k] = s2 * e[(i, j)].re;
            out[k + 1] = -s2 * e[(i, j)].im;
            k += 2;
        }
    }
}

fn from_hermitian_coordinates(x: &DVector<f64>, dim: usize) -> CMatrix {
    let s2 = std::f64::consts::SQRT_2;
    let mut m = CMatrix::zeros(dim, dim);
    let mut k = 0;
    for i in 0..dim {
        m[(i, i)] = C64::new(x[k], 0.0);
        k += 1;
    }
    for i in 0..dim {
        for j in i + 1..dim {
            let z = C64::new(x[k], -x[k + 1]) / s2;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 2;
        }
    }
    m
}

fn to_hermitian_coordinates(m: &CMatrix) -> DVector<f64> {
    let dim = m.nrows();
    let mut v = vec![0.0; dim * dim];
    // Coordinates of rho use Tr(B_k rho); for the basis above this is the
    // same map as for measurement operators.
    hermitian_coordinates(m, dim, &mut v);
    DVector::from_vec(v)
}

/// Least-squares density matrix in dimension `dim` reproducing the sampled
/// Wigner values.
///
/// The unconstrained least-norm solution is projected onto density
/// matrices and then refined by accelerated projected gradient descent
/// (FISTA) on the constrained problem. Data that are identically zero carry
/// no information and return the maximally mixed state.
pub fn reconstruct(grid: &WignerGrid, dim: usize) -> Result<Reconstruction> {
    if dim < 2 {
        return Err(KpoError::InvalidDimension { dim, reason: "reconstruction needs dim >= 2".into() });
    }
    let unknowns = dim * dim;
    let samples = grid.sample_count();
    if samples < unknowns {
        return Err(KpoError::Underdetermined { samples, unknowns });
    }
    check_axes(&grid.xs, &grid.ys)?;
    if grid.values.iter().any(|v| !v.is_finite()) {
        return Err(KpoError::param("grid", "values must be finite"));
    }

    let design = design_matrix(grid, dim);
    let data = DVector::from_iterator(samples, (0..grid.xs.len()).flat_map(|i| (0..grid.ys.len()).map(move |j| (i, j))).map(|(i, j)| grid.values[(i, j)]));

    let gram = design.transpose() * &design;
    let rhs = design.transpose() * &data;
    let eig = gram.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let mut x_ls = DVector::zeros(unknowns);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > 1e-12 * lmax {
            let v = eig.eigenvectors.column(k);
            x_ls += v * (v.dot(&rhs) / lam);
        }
    }
    let mut rho = project_to_density(&from_hermitian_coordinates(&x_ls, dim));
    let mut iterations = 0;

    if data.iter().any(|&v| v != 0.0) {
        let step = 1.0 / lmax;
        let mut x = to_hermitian_coordinates(&rho);
        let mut z = x.clone();
        let mut t = 1.0_f64;
        let scale = rhs.norm().max(1e-300);
        let mut converged = false;
        for k in 1..=FISTA_MAX_ITERATIONS {
            iterations = k;
            let grad = &gram * &z - &rhs;
            let trial = &z - grad * step;
            let projected = project_to_density(&from_hermitian_coordinates(&trial, dim));
            let x_new = to_hermitian_coordinates(&projected);
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let change = (&x_new - &x).norm();
            z = &x_new + (&x_new - &x) * ((t - 1.0) / t_new);
            x = x_new;
            t = t_new;
            rho = projected;
            if change * lmax < FISTA_TOLERANCE * scale {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(KpoError::FitNonConvergence(format!("projected gradient did not settle in {FISTA_MAX_ITERATIONS} iterations")));
        }
    }

    let fitted = &design * to_hermitian_coordinates(&rho);
    let residual = ((fitted - &data).norm_squared() / samples as f64).sqrt();
    let rho = DensityMatrix::from_raw((&rho + rho.adjoint()).scale(0.5));
    Ok(Reconstruction { rho, residual, iterations })
}

const FISTA_MAX_ITERATIONS: usize = 20_000;
const FISTA_TOLERANCE: f64 = 1e-10;

/// Rows: grid points in `(x, y)` order; columns: Hermitian coordinates of the
/// measurement operator `(2/pi) D(alpha) Pi D(alpha)^dagger` restricted to
/// the first `dim` levels.
fn design_matrix(grid: &WignerGrid, dim: usize) -> DMatrix<f64> {
    let unknowns = dim * dim;
    let blocks: Vec<Vec<f64>> = grid
        .xs
        .par_iter()
        .map(|&x| {
            let mut rows = vec![0.0; grid.ys.len() * unknowns];
            for (j, &y) in grid.ys.iter().enumerate() {
                let e = measurement_operator(dim, C64::new(x, y));
                hermitian_coordinates(&e, dim, &mut rows[j * unknowns..(j + 1) * unknowns]);
            }
            rows
        })
        .collect();
    let flat: Vec<f64> = blocks.into_iter().flatten().collect();
    DMatrix::from_row_slice(grid.sample_count(), unknowns, &flat)
}
