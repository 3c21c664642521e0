//! Steady states of the master equation with a constant pump.

use std::collections::HashMap;

use crate::error::{KpoError, Result};
use crate::fock::{mean_photon, DensityMatrix, TAIL_LIMIT};
use crate::linalg::{self, CMatrix, CVector, SparseOp, C64, I, ONE, ZERO};
use crate::model::{collapse_operators, DissipationSpec, HamiltonianParts, KpoParams, PumpSchedule};

use super::{evolve_lindblad, EvolveOptions, LindbladRhs};

/// Convergence threshold of the long-time method, per microsecond.
pub const LONG_TIME_DRIFT: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyMethod {
    /// Direct solve of the Liouvillian kernel.
    NullSpace,
    /// Integrate from the vacuum until the state settles.
    LongTime,
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    /// `||L(rho)||_F / rate scale`.
    pub residual: f64,
    pub method: SteadyMethod,
}

fn rate_scale(params: &KpoParams, spec: &DissipationSpec) -> f64 {
    let mut s = params.kerr.max(params.delta.abs()).max(params.pump.abs());
    if spec.t1.is_finite() {
        s = s.max(1.0 / spec.t1);
    }
    s
}

/// `||L(rho)||_F` divided by the largest rate in the problem.
pub fn liouvillian_residual(params: &KpoParams, spec: &DissipationSpec, rho: &DensityMatrix) -> Result<f64> {
    let dim = rho.dim();
    let rhs = LindbladRhs::new(params, &PumpSchedule::constant(params.pump, 0.0), spec, dim)?;
    let flat = linalg::to_row_major(rho.elements());
    let mut out = vec![ZERO; flat.len()];
    rhs.apply(0.0, &flat, &mut out);
    let norm = out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ok(norm / rate_scale(params, spec))
}

pub fn steady_state(params: &KpoParams, spec: &DissipationSpec, dim: usize, method: SteadyMethod) -> Result<SteadyState> {
    if collapse_operators(spec, dim)?.is_empty() {
        return Err(KpoError::NonUniqueSteadyState { kernel_dim: dim });
    }
    let rho = match method {
        SteadyMethod::NullSpace => null_space(params, spec, dim)?,
        SteadyMethod::LongTime => long_time(params, spec, dim)?,
    };
    let tail = crate::fock::tail_population(&rho);
    if tail > TAIL_LIMIT {
        return Err(KpoError::Truncation { dim, tail, limit: TAIL_LIMIT });
    }
    let residual = liouvillian_residual(params, spec, &rho)?;
    let limit = if method == SteadyMethod::NullSpace { 1e-8 } else { 1e-4 };
    if residual > limit {
        return Err(KpoError::SteadyStateConvergence(format!("relative residual {residual:.3e}")));
    }
    Ok(SteadyState { rho, residual, method })
}

/// The Liouvillian conserves `(m - n) mod 3` of `|m><n|`; the trace lives in
/// the `m = n (mod 3)` block, which is solved directly with one equation
/// replaced by the trace condition.
fn null_space(params: &KpoParams, spec: &DissipationSpec, dim: usize) -> Result<DensityMatrix> {
    let k = params.kerr;
    let parts = HamiltonianParts::build(params, dim)?;
    let ops = collapse_operators(spec, dim)?;
    let mut h_eff = parts.at(1.0, 0.0);
    for c in &ops {
        h_eff -= c.op.elements().adjoint() * c.op.elements() * (I * 0.5);
    }
    let h_eff = SparseOp::from_dense(&h_eff.unscale(k));
    let jumps: Vec<SparseOp> = ops.iter().map(|c| SparseOp::from_dense(&c.op.elements().unscale(k.sqrt()))).collect();

    let pairs: Vec<(usize, usize)> = (0..dim).flat_map(|m| (0..dim).map(move |n| (m, n))).filter(|(m, n)| (m + 3 * dim - n) % 3 == 0).collect();
    let index: HashMap<(usize, usize), usize> = pairs.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let size = pairs.len();
    let mut lmat = CMatrix::zeros(size, size);
    let h_entries: Vec<(usize, usize, C64)> = h_eff.entries().collect();
    for (col, &(kk, ll)) in pairs.iter().enumerate() {
        // -i H_eff |k><l|
        for &(m, c, v) in &h_entries {
            if c == kk {
                lmat[(index[&(m, ll)], col)] += -I * v;
            }
        }
        // +i |k><l| H_eff^dagger: (n, l) entries of H_eff give <k| ... |n>
        for &(n, c, v) in &h_entries {
            if c == ll {
                lmat[(index[&(kk, n)], col)] += I * v.conj();
            }
        }
        for j in &jumps {
            for (m, c1, a) in j.entries() {
                if c1 != kk {
                    continue;
                }
                for (n, c2, b) in j.entries() {
                    if c2 == ll {
                        lmat[(index[&(m, n)], col)] += a * b.conj();
                    }
                }
            }
        }
    }

    let mut system = lmat.clone();
    let mut rhs = CVector::zeros(size);
    let trace_row = index[&(0, 0)];
    for col in 0..size {
        let (m, n) = pairs[col];
        system[(trace_row, col)] = if m == n { ONE } else { ZERO };
    }
    rhs[trace_row] = ONE;

    let solution = system.lu().solve(&rhs).filter(|x| x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) && x.norm() < 1e6);
    let Some(x) = solution else {
        return Err(KpoError::NonUniqueSteadyState { kernel_dim: kernel_dimension(&lmat) });
    };
    let mut rho = CMatrix::zeros(dim, dim);
    for (i, &(m, n)) in pairs.iter().enumerate() {
        rho[(m, n)] = x[i];
    }
    let rho = (&rho + rho.adjoint()).scale(0.5);
    let candidate = DensityMatrix::from_raw(rho);
    let residual = (&lmat * &x).norm();
    if residual > 1e-8 * x.norm().max(1.0) || candidate.min_eigenvalue() < -1e-8 {
        return Err(KpoError::NonUniqueSteadyState { kernel_dim: kernel_dimension(&lmat) });
    }
    Ok(candidate)
}

fn kernel_dimension(lmat: &CMatrix) -> usize {
    let sv = lmat.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s <= 1e-9 * max.max(1e-300)).count()
}

/// Integrates in 1 us chunks until both `<n>` and the state itself (trace
/// distance) change by less than `LONG_TIME_DRIFT` per us.
fn long_time(params: &KpoParams, spec: &DissipationSpec, dim: usize) -> Result<DensityMatrix> {
    const CHUNK: f64 = 1e-6;
    const MAX_CHUNKS: usize = 5000;
    let sched = PumpSchedule::constant(params.pump, CHUNK);
    let opts = EvolveOptions { positivity_stride: 0, ..EvolveOptions::default() };
    let mut rho = DensityMatrix::thermal(dim, 0.0)?;
    for _ in 0..MAX_CHUNKS {
        let run = evolve_lindblad(params, &sched, spec, &rho, CHUNK, &opts)?;
        let tr = run.final_state.trace().re;
        let next = DensityMatrix::from_raw(run.final_state.into_elements().unscale(tr));
        let dn = (mean_photon(&next) - mean_photon(&rho)).abs();
        let dist = next.trace_distance(&rho)?;
        rho = next;
        if dn < LONG_TIME_DRIFT && dist < LONG_TIME_DRIFT {
            return Ok(rho);
        }
    }
    Err(KpoError::SteadyStateConvergence(format!("state still drifting after {MAX_CHUNKS} us")))
}
