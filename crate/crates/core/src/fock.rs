//! Truncated Fock-space states, operators and the basic measurement
//! machinery (expectation values, fidelities, displacements).

use std::f64::consts::PI;

use crate::error::{KpoError, Result};
use crate::linalg::{self, eigh, expm_hermitian, hermiticity_defect, max_abs, CMatrix, CVector, C64, I, ONE, ZERO};

/// Levels counted by [`tail_population`].
pub const TAIL_LEVELS: usize = 3;
/// Default guard on the tail population of evolved states.
pub const TAIL_LIMIT: f64 = 1e-6;

fn check_dim(dim: usize, min: usize) -> Result<()> {
    if dim < min {
        return Err(KpoError::InvalidDimension { dim, reason: format!("need dim >= {min}") });
    }
    Ok(())
}

/// Pure state in the truncated Fock basis; amplitude `n` multiplies `|n>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amplitudes: CVector,
}

impl Ket {
    /// Wraps `amplitudes` after checking the norm is one within 1e-10.
    pub fn from_amplitudes(amplitudes: CVector) -> Result<Self> {
        check_dim(amplitudes.len(), 2)?;
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(KpoError::InvalidState(format!("ket norm {norm} differs from 1")));
        }
        Ok(Ket { amplitudes })
    }

    /// Normalizes `amplitudes`.
    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        check_dim(amplitudes.len(), 2)?;
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(KpoError::InvalidState("cannot normalize a zero vector".into()));
        }
        Ok(Ket { amplitudes: amplitudes.unscale(norm) })
    }

    pub(crate) fn from_raw(amplitudes: CVector) -> Self {
        Ket { amplitudes }
    }

    pub fn fock(dim: usize, n: usize) -> Result<Self> {
        check_dim(dim, 2)?;
        if n >= dim {
            return Err(KpoError::InvalidDimension { dim, reason: format!("Fock level {n} outside truncation") });
        }
        let mut v = CVector::zeros(dim);
        v[n] = ONE;
        Ok(Ket { amplitudes: v })
    }

    pub fn vacuum(dim: usize) -> Result<Self> {
        Ket::fock(dim, 0)
    }

    /// Coherent state from its Fock series, renormalized inside the truncation.
    pub fn coherent(dim: usize, alpha: C64) -> Result<Self> {
        check_dim(dim, 2)?;
        let mut v = CVector::zeros(dim);
        let mut term = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
        for n in 0..dim {
            v[n] = term;
            term *= alpha / ((n + 1) as f64).sqrt();
        }
        Ket::normalized(v)
    }

    /// Equal-weight superposition of `components` coherent states at angles
    /// `2 pi k / components` (components = 2: even cat; 3: three-component cat).
    pub fn cat(dim: usize, alpha: C64, components: usize) -> Result<Self> {
        if components == 0 {
            return Err(KpoError::param("components", "must be positive"));
        }
        let mut v = CVector::zeros(dim);
        for k in 0..components {
            let phase = C64::from_polar(1.0, 2.0 * PI * k as f64 / components as f64);
            v += Ket::coherent(dim, alpha * phase)?.amplitudes;
        }
        Ket::normalized(v)
    }

    /// Normalized linear combination of kets.
    pub fn superpose(terms: &[(C64, &Ket)]) -> Result<Self> {
        let dim = terms.first().map(|(_, k)| k.dim()).ok_or_else(|| KpoError::param("terms", "empty"))?;
        let mut v = CVector::zeros(dim);
        for (c, k) in terms {
            if k.dim() != dim {
                return Err(KpoError::DimensionMismatch { expected: dim, got: k.dim() });
            }
            v += k.amplitudes.scale(1.0) * *c;
        }
        Ket::normalized(v)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn inner(&self, other: &Ket) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix { elements: &self.amplitudes * self.amplitudes.adjoint() }
    }

    /// Zero-pads into a larger truncation.
    pub fn embed(&self, dim: usize) -> Result<Ket> {
        if dim < self.dim() {
            return Err(KpoError::DimensionMismatch { expected: self.dim(), got: dim });
        }
        let mut v = CVector::zeros(dim);
        v.rows_mut(0, self.dim()).copy_from(&self.amplitudes);
        Ok(Ket { amplitudes: v })
    }
}

/// Density matrix in the truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    elements: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity (1e-10), unit trace (1e-8) and positivity (-1e-8).
    pub fn new(elements: CMatrix) -> Result<Self> {
        let rho = DensityMatrix { elements };
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_raw(elements: CMatrix) -> Self {
        DensityMatrix { elements }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.elements.nrows();
        if d != self.elements.ncols() {
            return Err(KpoError::InvalidState("matrix is not square".into()));
        }
        check_dim(d, 2)?;
        let herm = hermiticity_defect(&self.elements);
        if herm > 1e-10 {
            return Err(KpoError::InvalidState(format!("Hermiticity defect {herm:.3e}")));
        }
        let tr = linalg::trace(&self.elements);
        if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
            return Err(KpoError::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = self.min_eigenvalue();
        if min < -1e-8 {
            return Err(KpoError::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        check_dim(dim, 2)?;
        Ok(DensityMatrix { elements: CMatrix::identity(dim, dim).unscale(dim as f64) })
    }

    /// Truncated thermal state with Bose occupation `n_th`, renormalized.
    pub fn thermal(dim: usize, n_th: f64) -> Result<Self> {
        check_dim(dim, 2)?;
        if n_th < 0.0 {
            return Err(KpoError::param("n_th", "must be non-negative"));
        }
        let ratio = if n_th == 0.0 { 0.0 } else { n_th / (1.0 + n_th) };
        let weights: Vec<f64> = (0..dim).map(|n| ratio.powi(n as i32)).collect();
        let z: f64 = weights.iter().sum();
        let mut m = CMatrix::zeros(dim, dim);
        for (n, w) in weights.iter().enumerate() {
            m[(n, n)] = C64::new(w / z, 0.0);
        }
        Ok(DensityMatrix { elements: m })
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn elements(&self) -> &CMatrix {
        &self.elements
    }

    pub fn into_elements(self) -> CMatrix {
        self.elements
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.elements)
    }

    pub fn purity(&self) -> f64 {
        (&self.elements * &self.elements).trace().re
    }

    pub fn populations(&self) -> Vec<f64> {
        self.elements.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.elements + self.elements.adjoint()).scale(0.5);
        eigh(&herm).0.first().copied().unwrap_or(0.0)
    }

    /// `U rho U^dagger`.
    pub fn conjugate_by(&self, u: &OperatorMatrix) -> Result<DensityMatrix> {
        same_dim(self.dim(), u.dim())?;
        Ok(DensityMatrix { elements: &u.elements * &self.elements * u.elements.adjoint() })
    }

    /// Zero-pads into a larger truncation.
    pub fn embed(&self, dim: usize) -> Result<DensityMatrix> {
        if dim < self.dim() {
            return Err(KpoError::DimensionMismatch { expected: self.dim(), got: dim });
        }
        let mut m = CMatrix::zeros(dim, dim);
        m.view_mut((0, 0), (self.dim(), self.dim())).copy_from(&self.elements);
        Ok(DensityMatrix { elements: m })
    }

    /// Keeps the top-left `dim` block and renormalizes the trace.
    pub fn truncate(&self, dim: usize) -> Result<DensityMatrix> {
        check_dim(dim, 2)?;
        if dim > self.dim() {
            return Err(KpoError::DimensionMismatch { expected: self.dim(), got: dim });
        }
        let block = self.elements.view((0, 0), (dim, dim)).into_owned();
        let tr = linalg::trace(&block).re;
        Ok(DensityMatrix { elements: block.unscale(tr) })
    }

    /// Convex combination `sum w_k rho_k`.
    pub fn mixture(terms: &[(f64, &DensityMatrix)]) -> Result<DensityMatrix> {
        let dim = terms.first().map(|(_, r)| r.dim()).ok_or_else(|| KpoError::param("terms", "empty"))?;
        let mut m = CMatrix::zeros(dim, dim);
        for (w, r) in terms {
            same_dim(dim, r.dim())?;
            m += r.elements.scale(*w);
        }
        DensityMatrix::new(m)
    }

    /// Trace distance `||rho - sigma||_1 / 2`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        same_dim(self.dim(), other.dim())?;
        let diff = &self.elements - &other.elements;
        let herm = (&diff + diff.adjoint()).scale(0.5);
        Ok(eigh(&herm).0.iter().map(|v| v.abs()).sum::<f64>() / 2.0)
    }
}

/// Borrowed pure-or-mixed state.
#[derive(Debug, Clone, Copy)]
pub enum StateRef<'a> {
    Pure(&'a Ket),
    Mixed(&'a DensityMatrix),
}

impl StateRef<'_> {
    pub fn dim(&self) -> usize {
        match self {
            StateRef::Pure(k) => k.dim(),
            StateRef::Mixed(r) => r.dim(),
        }
    }
}

impl<'a> From<&'a Ket> for StateRef<'a> {
    fn from(k: &'a Ket) -> Self {
        StateRef::Pure(k)
    }
}

impl<'a> From<&'a DensityMatrix> for StateRef<'a> {
    fn from(r: &'a DensityMatrix) -> Self {
        StateRef::Mixed(r)
    }
}

/// Operator on the truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    elements: CMatrix,
    hermitian: bool,
}

impl OperatorMatrix {
    /// Wraps a matrix; `hermitian` is checked to 1e-10 when set.
    pub fn new(elements: CMatrix, hermitian: bool) -> Result<Self> {
        if elements.nrows() != elements.ncols() {
            return Err(KpoError::InvalidDimension { dim: elements.nrows(), reason: "operator must be square".into() });
        }
        if hermitian {
            let scale = max_abs(&elements).max(1.0);
            let defect = hermiticity_defect(&elements);
            if defect > 1e-10 * scale {
                return Err(KpoError::InvalidState(format!("operator flagged Hermitian has defect {defect:.3e}")));
            }
        }
        Ok(OperatorMatrix { elements, hermitian })
    }

    pub(crate) fn from_raw(elements: CMatrix, hermitian: bool) -> Self {
        OperatorMatrix { elements, hermitian }
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn elements(&self) -> &CMatrix {
        &self.elements
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        OperatorMatrix { elements: self.elements.adjoint(), hermitian: self.hermitian }
    }

    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim, 2)?;
        Ok(OperatorMatrix { elements: CMatrix::identity(dim, dim), hermitian: true })
    }

    pub fn apply(&self, ket: &Ket) -> Result<CVector> {
        same_dim(self.dim(), ket.dim())?;
        Ok(&self.elements * ket.amplitudes())
    }

    pub fn compose(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        same_dim(self.dim(), other.dim())?;
        Ok(OperatorMatrix { elements: &self.elements * &other.elements, hermitian: false })
    }

    pub fn scale(&self, factor: f64) -> OperatorMatrix {
        OperatorMatrix { elements: self.elements.scale(factor), hermitian: self.hermitian }
    }

    /// Frobenius norm of `[self, other]`.
    pub fn commutator_norm(&self, other: &OperatorMatrix) -> Result<f64> {
        same_dim(self.dim(), other.dim())?;
        let c = &self.elements * &other.elements - &other.elements * &self.elements;
        Ok(c.norm())
    }
}

fn same_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(KpoError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Ladder operator with `a[n-1, n] = sqrt(n)`.
pub fn annihilation(dim: usize) -> Result<OperatorMatrix> {
    check_dim(dim, 2)?;
    let mut m = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(OperatorMatrix { elements: m, hermitian: false })
}

pub fn creation(dim: usize) -> Result<OperatorMatrix> {
    Ok(annihilation(dim)?.adjoint())
}

pub fn number_operator(dim: usize) -> Result<OperatorMatrix> {
    diagonal_operator(dim, 2, |n| C64::new(n as f64, 0.0), true)
}

/// Photon-number parity `exp(i pi n)`.
pub fn parity(dim: usize) -> Result<OperatorMatrix> {
    diagonal_operator(dim, 2, |n| if n % 2 == 0 { ONE } else { -ONE }, true)
}

/// Generalized parity `exp(i 2 pi n / 3)`; generates the three-fold symmetry.
pub fn mod3_parity(dim: usize) -> Result<OperatorMatrix> {
    diagonal_operator(dim, 2, |n| C64::from_polar(1.0, 2.0 * PI * (n % 3) as f64 / 3.0), false)
}

/// Rotation `exp(i theta n)` of phase space.
pub fn rotation(dim: usize, theta: f64) -> Result<OperatorMatrix> {
    diagonal_operator(dim, 2, |n| C64::from_polar(1.0, theta * n as f64), false)
}

/// Diagonal projectors onto `n = s (mod 3)` for `s = 0, 1, 2`.
pub fn mod3_sector_projectors(dim: usize) -> Result<[OperatorMatrix; 3]> {
    check_dim(dim, 3)?;
    let proj = |s: usize| diagonal_operator(dim, 3, |n| if n % 3 == s { ONE } else { ZERO }, true);
    Ok([proj(0)?, proj(1)?, proj(2)?])
}

fn diagonal_operator(dim: usize, min: usize, f: impl Fn(usize) -> C64, hermitian: bool) -> Result<OperatorMatrix> {
    check_dim(dim, min)?;
    let mut m = CMatrix::zeros(dim, dim);
    for n in 0..dim {
        m[(n, n)] = f(n);
    }
    Ok(OperatorMatrix { elements: m, hermitian })
}

/// Displacement operator together with its unitarity defect.
#[derive(Debug, Clone)]
pub struct Displacement {
    pub op: OperatorMatrix,
    /// `max |D^dagger D - I|`.
    pub unitarity_defect: f64,
}

/// `exp(alpha a^dagger - alpha* a)` in the truncated space.
///
/// The exponent is anti-Hermitian, so it is evaluated through the spectral
/// decomposition of the Hermitian generator `-i (alpha a^dagger - alpha* a)`.
pub fn displacement(dim: usize, alpha: C64) -> Result<Displacement> {
    let a = annihilation(dim)?;
    let gen = a.elements.adjoint() * alpha - &a.elements * alpha.conj();
    let herm = gen * (-I);
    let d = expm_hermitian(&herm, I);
    let defect = max_abs(&(d.adjoint() * &d - CMatrix::identity(dim, dim)));
    Ok(Displacement { op: OperatorMatrix { elements: d, hermitian: false }, unitarity_defect: defect })
}

/// Population in the top [`TAIL_LEVELS`] Fock levels.
pub fn tail_population<'a>(state: impl Into<StateRef<'a>>) -> f64 {
    let pops = match state.into() {
        StateRef::Pure(k) => k.populations(),
        StateRef::Mixed(r) => r.populations(),
    };
    let start = pops.len().saturating_sub(TAIL_LEVELS);
    pops[start..].iter().sum()
}

pub fn check_tail<'a>(state: impl Into<StateRef<'a>>, limit: f64) -> Result<()> {
    let state = state.into();
    let tail = tail_population(state);
    if tail > limit {
        return Err(KpoError::Truncation { dim: state.dim(), tail, limit });
    }
    Ok(())
}

/// `<psi|O|psi>` or `Tr(O rho)`.
pub fn expectation<'a>(op: &OperatorMatrix, state: impl Into<StateRef<'a>>) -> Result<C64> {
    let state = state.into();
    same_dim(op.dim(), state.dim())?;
    let value = match state {
        StateRef::Pure(k) => k.amplitudes.dotc(&(&op.elements * &k.amplitudes)),
        StateRef::Mixed(r) => {
            // Tr(O rho) without forming the product.
            let mut acc = ZERO;
            for i in 0..op.dim() {
                for j in 0..op.dim() {
                    acc += op.elements[(i, j)] * r.elements[(j, i)];
                }
            }
            acc
        }
    };
    Ok(value)
}

/// Mean photon number.
pub fn mean_photon<'a>(state: impl Into<StateRef<'a>>) -> f64 {
    let pops = match state.into() {
        StateRef::Pure(k) => k.populations(),
        StateRef::Mixed(r) => r.populations(),
    };
    pops.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
}

/// `<psi|rho|psi>` for pure targets, Uhlmann fidelity for mixed targets.
pub fn fidelity<'a>(rho: &DensityMatrix, target: impl Into<StateRef<'a>>) -> Result<f64> {
    let target = target.into();
    same_dim(rho.dim(), target.dim())?;
    match target {
        StateRef::Pure(k) => Ok(pure_fidelity(rho, k).clamp(0.0, 1.0)),
        StateRef::Mixed(sigma) => {
            for (name, m) in [("rho", rho), ("target", sigma)] {
                let min = m.min_eigenvalue();
                if min < -1e-8 {
                    return Err(KpoError::InvalidState(format!("{name} has negative eigenvalue {min:.3e}")));
                }
            }
            let (vals, vecs) = eigh(&rho.elements);
            let d = rho.dim();
            let sqrt_rho = CMatrix::from_fn(d, d, |r, c| vecs[(r, c)] * vals[c].max(0.0).sqrt()) * vecs.adjoint();
            let inner = &sqrt_rho * &sigma.elements * &sqrt_rho;
            let inner = (&inner + inner.adjoint()).scale(0.5);
            let root_trace: f64 = eigh(&inner).0.iter().map(|v| v.max(0.0).sqrt()).sum();
            Ok((root_trace * root_trace).clamp(0.0, 1.0))
        }
    }
}

pub(crate) fn pure_fidelity(rho: &DensityMatrix, ket: &Ket) -> f64 {
    ket.amplitudes.dotc(&(&rho.elements * &ket.amplitudes)).re
}
