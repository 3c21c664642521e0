//! Unitary and Lindblad time evolution under a pump schedule.
//!
//! Both evolvers integrate with the adaptive scheme in [`crate::ode`] and
//! never renormalize: the norm (or trace) drift is reported and checked.

mod fit;
mod steady;

pub use fit::{fft_gap, GapFit};
pub use steady::{liouvillian_residual, steady_state, SteadyMethod, SteadyState};

use crate::error::{KpoError, Result};
use crate::fock::{mean_photon, tail_population, DensityMatrix, Ket, TAIL_LIMIT};
use crate::linalg::{self, eigh, CMatrix, CVector, SparseOp, C64, I, ONE, ZERO};
use crate::model::{collapse_operators, envelope, DissipationSpec, HamiltonianParts, KpoParams, PumpSchedule};
use crate::ode::{integrate, OdeOptions, OdeStats};

/// Allowed norm or trace drift over a run.
pub const DRIFT_LIMIT: f64 = 1e-8;
/// Allowed negative eigenvalue of a propagated density matrix.
pub const POSITIVITY_LIMIT: f64 = -1e-7;

/// Sampling and tolerance controls shared by both evolvers.
#[derive(Debug, Clone)]
pub struct EvolveOptions {
    /// Largest integrator step, seconds.
    pub dt_max: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Number of uniformly spaced observable samples including both ends.
    pub samples: usize,
    /// Extra times at which the full state is stored.
    pub snapshot_times: Vec<f64>,
    /// Named pure states whose fidelity is recorded as `F_<name>`.
    pub targets: Vec<(String, Ket)>,
    pub tail_limit: f64,
    /// Check positivity every this many samples (Lindblad only; 0 disables).
    pub positivity_stride: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            dt_max: f64::INFINITY,
            rtol: 1e-10,
            atol: 1e-12,
            samples: 2,
            snapshot_times: Vec::new(),
            targets: Vec::new(),
            tail_limit: TAIL_LIMIT,
            positivity_stride: 1,
        }
    }
}

impl EvolveOptions {
    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_target(mut self, name: &str, ket: Ket) -> Self {
        self.targets.push((name.to_string(), ket));
        self
    }

    fn ode(&self) -> OdeOptions {
        OdeOptions { rtol: self.rtol, atol: self.atol, h_max: self.dt_max, ..OdeOptions::default() }
    }

    fn sample_grid(&self, t_final: f64) -> (Vec<f64>, Vec<bool>) {
        let n = self.samples.max(2);
        let mut times: Vec<(f64, bool)> = (0..n).map(|k| (t_final * k as f64 / (n - 1) as f64, false)).collect();
        for &s in &self.snapshot_times {
            if (0.0..=t_final).contains(&s) {
                match times.iter_mut().find(|(t, _)| (t - s).abs() <= 1e-12 * t_final.max(1e-300)) {
                    Some(entry) => entry.1 = true,
                    None => times.push((s, true)),
                }
            }
        }
        times.sort_by(|a, b| a.0.total_cmp(&b.0));
        times.into_iter().unzip()
    }
}

/// Observable time series and stored states of one run.
#[derive(Debug, Clone)]
pub struct EvolutionResult<S> {
    pub times: Vec<f64>,
    /// Named series aligned with `times`: `mean_photon`, `sector0..2`,
    /// `norm` and `F_<target>` for each requested target.
    pub observables: Vec<(String, Vec<f64>)>,
    /// Stored states at the requested snapshot times.
    pub snapshots: Vec<(f64, S)>,
    pub final_state: S,
    /// Largest `|norm - 1|` (unitary) or `|Tr rho - 1|` (Lindblad) seen.
    pub max_drift: f64,
    /// Smallest density-matrix eigenvalue checked (Lindblad only).
    pub min_eigenvalue: f64,
    pub stats: OdeStats,
}

impl<S> EvolutionResult<S> {
    pub fn observable(&self, name: &str) -> Option<&[f64]> {
        self.observables.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

struct Recorder {
    names: Vec<String>,
    series: Vec<Vec<f64>>,
}

impl Recorder {
    fn new(targets: &[(String, Ket)]) -> Self {
        let mut names: Vec<String> = ["mean_photon", "sector0", "sector1", "sector2", "norm"].iter().map(|s| s.to_string()).collect();
        names.extend(targets.iter().map(|(n, _)| format!("F_{n}")));
        let series = vec![Vec::new(); names.len()];
        Recorder { names, series }
    }

    fn push(&mut self, pops: &[f64], norm: f64, fidelities: impl Iterator<Item = f64>) {
        let mean: f64 = pops.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        let mut sectors = [0.0; 3];
        for (n, p) in pops.iter().enumerate() {
            sectors[n % 3] += p;
        }
        let values = [mean, sectors[0], sectors[1], sectors[2], norm].into_iter().chain(fidelities);
        for (s, v) in self.series.iter_mut().zip(values) {
            s.push(v);
        }
    }

    fn finish(self) -> Vec<(String, Vec<f64>)> {
        self.names.into_iter().zip(self.series).collect()
    }
}

fn tail_of(pops: &[f64]) -> f64 {
    pops[pops.len().saturating_sub(crate::fock::TAIL_LEVELS)..].iter().sum()
}

fn check_dims(parts_dim: usize, state_dim: usize, targets: &[(String, Ket)]) -> Result<()> {
    if parts_dim != state_dim {
        return Err(KpoError::DimensionMismatch { expected: parts_dim, got: state_dim });
    }
    for (_, k) in targets {
        if k.dim() != state_dim {
            return Err(KpoError::DimensionMismatch { expected: state_dim, got: k.dim() });
        }
    }
    Ok(())
}

fn check_time(t_final: f64) -> Result<()> {
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(KpoError::param("t_final", "must be non-negative and finite"));
    }
    Ok(())
}

/// Sparse pieces of `H(t)`; the pump amplitude is taken from the schedule.
struct TimeDependentH {
    drift: SparseOp,
    pump: SparseOp,
    cd: SparseOp,
    sched: PumpSchedule,
}

impl TimeDependentH {
    fn new(params: &KpoParams, sched: &PumpSchedule, dim: usize, extra_drift: Option<&CMatrix>) -> Result<Self> {
        sched.validate()?;
        let parts = HamiltonianParts::build(&params.with_pump(sched.p_peak), dim)?;
        let drift = match extra_drift {
            Some(m) => &parts.drift + m,
            None => parts.drift,
        };
        Ok(TimeDependentH {
            drift: SparseOp::from_dense(&drift),
            pump: SparseOp::from_dense(&parts.pump),
            cd: SparseOp::from_dense(&parts.cd),
            sched: *sched,
        })
    }

    fn envelope(&self, t: f64) -> (f64, f64) {
        envelope(&self.sched, t)
    }
}

/// Schrodinger evolution of `psi0` under `H(t)` from `t = 0` to `t_final`.
pub fn evolve_unitary(
    params: &KpoParams,
    sched: &PumpSchedule,
    psi0: &Ket,
    t_final: f64,
    opts: &EvolveOptions,
) -> Result<EvolutionResult<Ket>> {
    check_time(t_final)?;
    let dim = psi0.dim();
    let h = TimeDependentH::new(params, sched, dim, None)?;
    check_dims(dim, dim, &opts.targets)?;
    let (times, snap) = opts.sample_grid(t_final);
    let mut rec = Recorder::new(&opts.targets);
    let mut snapshots = Vec::new();
    let mut max_drift: f64 = 0.0;
    let mut last = psi0.clone();

    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        dy.fill(ZERO);
        let (main, cd) = h.envelope(t);
        h.drift.mul_vec_acc(-I, y, dy);
        if main != 0.0 {
            h.pump.mul_vec_acc(-I * main, y, dy);
        }
        if cd != 0.0 {
            h.cd.mul_vec_acc(-I * cd, y, dy);
        }
    };
    let y0: Vec<C64> = psi0.amplitudes().iter().copied().collect();
    let (_, stats) = integrate(rhs, 0.0, y0, &times, &opts.ode(), |k, t, y| {
        let pops: Vec<f64> = y.iter().map(|z| z.norm_sqr()).collect();
        let norm2: f64 = pops.iter().sum();
        let tail = tail_of(&pops);
        if tail > opts.tail_limit {
            return Err(KpoError::Truncation { dim, tail, limit: opts.tail_limit });
        }
        max_drift = max_drift.max((norm2.sqrt() - 1.0).abs());
        let ket = Ket::from_raw(CVector::from_column_slice(y));
        rec.push(&pops, norm2.sqrt(), opts.targets.iter().map(|(_, tgt)| tgt.inner(&ket).norm_sqr()));
        if snap[k] {
            snapshots.push((t, ket.clone()));
        }
        last = ket;
        Ok(())
    })?;
    if max_drift > DRIFT_LIMIT {
        return Err(KpoError::IntegratorAccuracy(format!("norm drift {max_drift:.3e} exceeds {DRIFT_LIMIT:.0e}")));
    }
    Ok(EvolutionResult {
        times,
        observables: rec.finish(),
        snapshots,
        final_state: last,
        max_drift,
        min_eigenvalue: 0.0,
        stats,
    })
}

/// Right-hand side of the master equation on a row-major density matrix.
pub(crate) struct LindbladRhs {
    h: TimeDependentH,
    jumps: Vec<SparseOp>,
}

impl LindbladRhs {
    pub(crate) fn new(params: &KpoParams, sched: &PumpSchedule, spec: &DissipationSpec, dim: usize) -> Result<Self> {
        let ops = collapse_operators(spec, dim)?;
        let mut anti = CMatrix::zeros(dim, dim);
        for c in &ops {
            anti += c.op.elements().adjoint() * c.op.elements();
        }
        let damping = anti * (-I * 0.5);
        let h = TimeDependentH::new(params, sched, dim, Some(&damping))?;
        let jumps = ops.iter().map(|c| SparseOp::from_dense(c.op.elements())).collect();
        Ok(LindbladRhs { h, jumps })
    }

    pub(crate) fn apply(&self, t: f64, rho: &[C64], out: &mut [C64]) {
        out.fill(ZERO);
        let (main, cd) = self.h.envelope(t);
        // -i (H_eff rho - rho H_eff^dagger)
        self.h.drift.left_mul_acc(-I, rho, out);
        self.h.drift.right_mul_adjoint_acc(I, rho, out);
        if main != 0.0 {
            self.h.pump.left_mul_acc(-I * main, rho, out);
            self.h.pump.right_mul_adjoint_acc(I * main, rho, out);
        }
        if cd != 0.0 {
            self.h.cd.left_mul_acc(-I * cd, rho, out);
            self.h.cd.right_mul_adjoint_acc(I * cd, rho, out);
        }
        for l in &self.jumps {
            l.sandwich_acc(ONE, rho, out);
        }
    }
}

/// Master-equation evolution of `rho0` with the loss channels of `spec`.
pub fn evolve_lindblad(
    params: &KpoParams,
    sched: &PumpSchedule,
    spec: &DissipationSpec,
    rho0: &DensityMatrix,
    t_final: f64,
    opts: &EvolveOptions,
) -> Result<EvolutionResult<DensityMatrix>> {
    check_time(t_final)?;
    let dim = rho0.dim();
    let rhs = LindbladRhs::new(params, sched, spec, dim)?;
    check_dims(dim, dim, &opts.targets)?;
    let (times, snap) = opts.sample_grid(t_final);
    let mut rec = Recorder::new(&opts.targets);
    let mut snapshots = Vec::new();
    let mut max_drift: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    let mut last = rho0.clone();
    let y0 = linalg::to_row_major(rho0.elements());
    let stride = opts.positivity_stride;

    let (_, stats) = integrate(|t, y, dy| rhs.apply(t, y, dy), 0.0, y0, &times, &opts.ode(), |k, t, y| {
        let m = linalg::from_row_major(dim, y);
        let pops: Vec<f64> = (0..dim).map(|n| m[(n, n)].re).collect();
        let tail = tail_of(&pops);
        if tail > opts.tail_limit {
            return Err(KpoError::Truncation { dim, tail, limit: opts.tail_limit });
        }
        let tr: f64 = pops.iter().sum();
        max_drift = max_drift.max((tr - 1.0).abs());
        let check = stride > 0 && (k % stride == 0 || k + 1 == times.len());
        if check {
            let herm = (&m + m.adjoint()).scale(0.5);
            let lowest = eigh(&herm).0[0];
            min_eig = min_eig.min(lowest);
            if lowest < POSITIVITY_LIMIT {
                return Err(KpoError::IntegratorAccuracy(format!(
                    "density matrix eigenvalue {lowest:.3e} at t = {t:.4e} s"
                )));
            }
        }
        let rho = DensityMatrix::from_raw(m);
        rec.push(&pops, tr, opts.targets.iter().map(|(_, tgt)| crate::fock::pure_fidelity(&rho, tgt)));
        if snap[k] {
            snapshots.push((t, rho.clone()));
        }
        last = rho;
        Ok(())
    })?;
    if max_drift > DRIFT_LIMIT {
        return Err(KpoError::IntegratorAccuracy(format!("trace drift {max_drift:.3e} exceeds {DRIFT_LIMIT:.0e}")));
    }
    Ok(EvolutionResult {
        times,
        observables: rec.finish(),
        snapshots,
        final_state: last,
        max_drift,
        min_eigenvalue: min_eig,
        stats,
    })
}

/// End-of-hold state of a cat preparation.
#[derive(Debug, Clone)]
pub enum PreparedState {
    Pure(Ket),
    Mixed(DensityMatrix),
}

impl PreparedState {
    pub fn to_density(&self) -> DensityMatrix {
        match self {
            PreparedState::Pure(k) => k.to_density(),
            PreparedState::Mixed(r) => r.clone(),
        }
    }

    pub fn mean_photon(&self) -> f64 {
        match self {
            PreparedState::Pure(k) => mean_photon(k),
            PreparedState::Mixed(r) => mean_photon(r),
        }
    }
}

/// Evolves the vacuum through the ramp and hold of `sched`. With `spec`
/// present (and lossy) the run is a master-equation evolution.
pub fn prepare_cat(
    params: &KpoParams,
    sched: &PumpSchedule,
    spec: Option<&DissipationSpec>,
    dim: usize,
    opts: &EvolveOptions,
) -> Result<PreparedState> {
    let vacuum = Ket::vacuum(dim)?;
    let duration = sched.duration();
    match spec.filter(|s| s.t1.is_finite() || s.t_phi.is_some_and(f64::is_finite)) {
        None => Ok(PreparedState::Pure(evolve_unitary(params, sched, &vacuum, duration, opts)?.final_state)),
        Some(s) => {
            let rho = evolve_lindblad(params, sched, s, &vacuum.to_density(), duration, opts)?;
            Ok(PreparedState::Mixed(rho.final_state))
        }
    }
}

/// Population of the top Fock levels of a stored state.
pub fn final_tail(state: &PreparedState) -> f64 {
    match state {
        PreparedState::Pure(k) => tail_population(k),
        PreparedState::Mixed(r) => tail_population(r),
    }
}
