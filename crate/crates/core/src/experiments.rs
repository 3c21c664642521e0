//! Composed workflows: Rabi chevrons, breathing and relaxation runs after a
//! pump ramp, steady-state photon-number scans, and the photon-number match
//! of prepared states.
//!
//! Sweeps run in parallel with rayon; results are collected in input order,
//! so every run is reproducible.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dynamics::{evolve_lindblad, evolve_unitary, fft_gap, steady_state, EvolveOptions, GapFit, SteadyMethod};
use crate::error::{KpoError, Result};
use crate::fock::{fidelity, mean_photon, DensityMatrix, Ket};
use crate::io::Table;
use crate::model::{DissipationSpec, KpoParams, PumpSchedule};
use crate::spectrum::{diagonalize, SpectrumResult};
use crate::tomography::effective_decay;
use crate::TWO_PI;

/// `Delta = omega_K - omega_p / 3` for a pump detuning
/// `(omega_p - 3 omega_K) / 2 pi` in Hz.
pub fn delta_from_pump_detuning(detuning_hz: f64) -> f64 {
    -TWO_PI * detuning_hz / 3.0
}

/// Inverse of [`delta_from_pump_detuning`].
pub fn pump_detuning_from_delta(delta: f64) -> f64 {
    -3.0 * delta / TWO_PI
}

/// `|0>` population after a constant pump, per detuning and duration.
#[derive(Debug, Clone)]
pub struct ChevronGrid {
    /// `(omega_p - 3 omega_K) / 2 pi`, Hz.
    pub detunings: Vec<f64>,
    /// Matching `Delta`, rad/s.
    pub deltas: Vec<f64>,
    /// Pump durations, s.
    pub durations: Vec<f64>,
    /// `p0[(i, j)]` at `detunings[i]` and `durations[j]`.
    pub p0: DMatrix<f64>,
}

/// A chevron resonance located from the time-averaged depletion of `|0>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    pub detuning: f64,
    pub delta: f64,
    /// `1 - mean_t p0` at the peak column.
    pub depletion: f64,
}

impl ChevronGrid {
    /// `1 - mean_t p0` per detuning.
    pub fn depletion(&self) -> Vec<f64> {
        let n = self.durations.len() as f64;
        (0..self.detunings.len()).map(|i| 1.0 - self.p0.row(i).sum() / n).collect()
    }

    /// Local maxima of the depletion, deepest first. Interior peaks are
    /// refined by a parabola through the neighbouring columns.
    pub fn resonances(&self) -> Vec<Resonance> {
        let dep = self.depletion();
        let n = dep.len();
        let mut out = Vec::new();
        for i in 0..n {
            let left = if i > 0 { dep[i - 1] } else { f64::NEG_INFINITY };
            let right = if i + 1 < n { dep[i + 1] } else { f64::NEG_INFINITY };
            if dep[i] < left || dep[i] < right || (dep[i] == left && i > 0) {
                continue;
            }
            let mut detuning = self.detunings[i];
            if i > 0 && i + 1 < n {
                let den = left - 2.0 * dep[i] + right;
                if den < 0.0 {
                    let shift = (0.5 * (left - right) / den).clamp(-0.5, 0.5);
                    let step = if shift >= 0.0 { self.detunings[i + 1] - self.detunings[i] } else { self.detunings[i] - self.detunings[i - 1] };
                    detuning += shift * step;
                }
            }
            out.push(Resonance { detuning, delta: delta_from_pump_detuning(detuning), depletion: dep[i] });
        }
        out.sort_by(|a, b| b.depletion.total_cmp(&a.depletion));
        out
    }

    /// One row per (detuning, duration) with both frequency axes.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["pump_detuning_hz", "delta_rad_s", "duration_s", "p0"]);
        for (i, (&det, &delta)) in self.detunings.iter().zip(&self.deltas).enumerate() {
            for (j, &dur) in self.durations.iter().enumerate() {
                t.rows.push(vec![det, delta, dur, self.p0[(i, j)]]);
            }
        }
        t
    }
}

fn check_increasing(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(KpoError::param(name, "must be non-empty"));
    }
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) || values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(KpoError::param(name, "must be finite, non-negative and strictly increasing"));
    }
    Ok(())
}

/// Evolves `|0>` under a constant pump for each pump detuning and records
/// `|<0|psi(t)>|^2` at each duration. `params.delta` is replaced by the
/// detuning-derived value.
pub fn rabi_chevron(params: &KpoParams, detunings: &[f64], durations: &[f64], dim: usize, opts: &EvolveOptions) -> Result<ChevronGrid> {
    if detunings.is_empty() || detunings.iter().any(|d| !d.is_finite()) {
        return Err(KpoError::param("detunings", "must be non-empty and finite"));
    }
    check_increasing("durations", durations)?;
    let vacuum = Ket::vacuum(dim)?;
    let t_final = *durations.last().unwrap();
    let columns: Vec<Vec<f64>> = detunings
        .par_iter()
        .map(|&det| {
            let p = params.with_delta(delta_from_pump_detuning(det));
            let opts = EvolveOptions { snapshot_times: durations.to_vec(), ..opts.clone() };
            let run = evolve_unitary(&p, &PumpSchedule::constant(p.pump, t_final), &vacuum, t_final, &opts)?;
            Ok(stored_at(&run.snapshots, durations)?.iter().map(|k| k.amplitudes()[0].norm_sqr()).collect())
        })
        .collect::<Result<_>>()?;
    Ok(ChevronGrid {
        detunings: detunings.to_vec(),
        deltas: detunings.iter().map(|&d| delta_from_pump_detuning(d)).collect(),
        durations: durations.to_vec(),
        p0: DMatrix::from_fn(detunings.len(), durations.len(), |i, j| columns[i][j]),
    })
}

/// Snapshot states at `times`; `t = 0` is included by the sample grid.
fn stored_at<S: Clone>(snapshots: &[(f64, S)], times: &[f64]) -> Result<Vec<S>> {
    times
        .iter()
        .map(|&t| {
            snapshots
                .iter()
                .find(|(s, _)| (s - t).abs() <= 1e-12 * t.abs().max(1e-300))
                .map(|(_, state)| state.clone())
                .ok_or_else(|| KpoError::IntegratorAccuracy(format!("no stored state at t = {t:.6e} s")))
        })
        .collect()
}

/// Photon loss during the parity-measurement window, applied to states
/// before their observables are computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParityWindow {
    /// Window length, s.
    pub duration: f64,
    /// Effective lifetime during the window, s.
    pub t1eff: f64,
}

impl ParityWindow {
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        effective_decay(rho, self.duration, self.t1eff, None)
    }
}

fn apply_window(window: Option<&ParityWindow>, rho: DensityMatrix) -> Result<DensityMatrix> {
    match window {
        Some(w) => w.apply(&rho),
        None => Ok(rho),
    }
}

fn is_lossy(spec: Option<&DissipationSpec>) -> Option<&DissipationSpec> {
    spec.filter(|s| s.t1.is_finite() || s.t_phi.is_some_and(f64::is_finite))
}

/// States at `times` of a run from `rho0` (pure runs stay pure).
fn states_at(
    params: &KpoParams,
    sched: &PumpSchedule,
    spec: Option<&DissipationSpec>,
    psi0: &Ket,
    times: &[f64],
    base: &EvolveOptions,
) -> Result<Vec<DensityMatrix>> {
    let t_final = *times.last().unwrap();
    let opts = EvolveOptions { snapshot_times: times.to_vec(), ..base.clone() };
    match is_lossy(spec) {
        None => {
            let run = evolve_unitary(params, sched, psi0, t_final, &opts)?;
            Ok(stored_at(&run.snapshots, times)?.iter().map(Ket::to_density).collect())
        }
        Some(s) => {
            let run = evolve_lindblad(params, sched, s, &psi0.to_density(), t_final, &opts)?;
            stored_at(&run.snapshots, times)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreathingRow {
    pub hold: f64,
    pub mean_photon: f64,
    /// Fidelity with `|0_C>`, `|1_C>`, `|2_C>`.
    pub qutrit: [f64; 3],
    /// Fidelity with `|0_C^ex>`.
    pub excited: f64,
}

#[derive(Debug, Clone)]
pub struct BreathingRun {
    pub rows: Vec<BreathingRow>,
    /// `E(|0_C>) - E(|0_C^ex>)` in units of K.
    pub gap: f64,
    /// `|gap| K / 2 pi`, Hz.
    pub gap_frequency: f64,
}

impl BreathingRun {
    /// Decaying-cosine fit of the mean photon number versus hold time.
    pub fn fit(&self) -> Result<GapFit> {
        let holds: Vec<f64> = self.rows.iter().map(|r| r.hold).collect();
        let n: Vec<f64> = self.rows.iter().map(|r| r.mean_photon).collect();
        fft_gap(&holds, &n)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["hold_s", "mean_photon", "F_0C", "F_1C", "F_2C", "F_0C_ex"])
            .with_meta("gap_over_k", self.gap)
            .with_meta("gap_frequency_hz", self.gap_frequency);
        for r in &self.rows {
            t.rows.push(vec![r.hold, r.mean_photon, r.qutrit[0], r.qutrit[1], r.qutrit[2], r.excited]);
        }
        t
    }
}

fn qutrit_fidelities(rho: &DensityMatrix, spectrum: &SpectrumResult) -> Result<([f64; 3], f64)> {
    let q = [fidelity(rho, spectrum.qutrit(0))?, fidelity(rho, spectrum.qutrit(1))?, fidelity(rho, spectrum.qutrit(2))?];
    Ok((q, fidelity(rho, spectrum.excited(0))?))
}

/// Ramp of `sched` from the vacuum followed by a hold at full pump; the
/// state after each hold time passes through the parity window (if any)
/// before its observables are computed. The whole run uses `spec`.
pub fn breathing_run(
    params: &KpoParams,
    sched: &PumpSchedule,
    spec: Option<&DissipationSpec>,
    holds: &[f64],
    dim: usize,
    window: Option<&ParityWindow>,
    opts: &EvolveOptions,
) -> Result<BreathingRun> {
    check_increasing("holds", holds)?;
    let p = params.with_pump(sched.p_peak);
    let spectrum = diagonalize(&p, dim)?;
    let full = PumpSchedule { tau_hold: *holds.last().unwrap(), ..*sched };
    full.validate()?;
    let times: Vec<f64> = holds.iter().map(|h| sched.tau_ramp + h).collect();
    let states = states_at(&p, &full, spec, &Ket::vacuum(dim)?, &times, opts)?;
    let rows = holds
        .iter()
        .zip(states)
        .map(|(&hold, rho)| {
            let rho = apply_window(window, rho)?;
            let (qutrit, excited) = qutrit_fidelities(&rho, &spectrum)?;
            Ok(BreathingRow { hold, mean_photon: mean_photon(&rho), qutrit, excited })
        })
        .collect::<Result<_>>()?;
    Ok(BreathingRun { rows, gap: spectrum.gap, gap_frequency: spectrum.gap.abs() * p.kerr / TWO_PI })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationRow {
    pub hold: f64,
    /// Fidelity with `|0_C>`, `|1_C>`, `|2_C>`.
    pub qutrit: [f64; 3],
    /// Sum of the three qutrit fidelities.
    pub total: f64,
    /// Fidelity with `|0_C^ex>`.
    pub excited: f64,
}

/// Prepares `|0_C>` with the (lossless) ramp of `sched`, then holds at full
/// pump under the loss channels of `spec` and records qutrit fidelities
/// after each hold time (through the parity window, if any).
pub fn relaxation_run(
    params: &KpoParams,
    sched: &PumpSchedule,
    spec: &DissipationSpec,
    holds: &[f64],
    dim: usize,
    window: Option<&ParityWindow>,
    opts: &EvolveOptions,
) -> Result<Vec<RelaxationRow>> {
    check_increasing("holds", holds)?;
    let p = params.with_pump(sched.p_peak);
    let spectrum = diagonalize(&p, dim)?;
    let ramp = PumpSchedule { tau_hold: 0.0, ..*sched };
    let prepared = evolve_unitary(&p, &ramp, &Ket::vacuum(dim)?, ramp.duration(), opts)?.final_state;
    let hold = PumpSchedule::constant(p.pump, *holds.last().unwrap());
    let states = states_at(&p, &hold, Some(spec), &prepared, holds, opts)?;
    holds
        .iter()
        .zip(states)
        .map(|(&hold, rho)| {
            let rho = apply_window(window, rho)?;
            let (qutrit, excited) = qutrit_fidelities(&rho, &spectrum)?;
            Ok(RelaxationRow { hold, qutrit, total: qutrit.iter().sum(), excited })
        })
        .collect()
}

pub fn relaxation_table(rows: &[RelaxationRow]) -> Table {
    let mut t = Table::new(["hold_s", "F_0C", "F_1C", "F_2C", "F_qutrit", "F_0C_ex"]);
    for r in rows {
        t.rows.push(vec![r.hold, r.qutrit[0], r.qutrit[1], r.qutrit[2], r.total, r.excited]);
    }
    t
}

/// Index of the first interior local maximum of `series`, or of the global
/// maximum when there is none.
pub fn first_peak(series: &[f64]) -> Option<usize> {
    if series.is_empty() {
        return None;
    }
    (1..series.len().saturating_sub(1))
        .find(|&i| series[i] > series[i - 1] && series[i] >= series[i + 1])
        .or_else(|| (0..series.len()).max_by(|&a, &b| series[a].total_cmp(&series[b])))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyScanRow {
    pub delta_over_k: f64,
    /// `eta = 0`.
    pub ideal: f64,
    /// `eta` of the base parameters.
    pub eta: f64,
    /// `eta` curve after the parity window.
    pub eta_with_window: f64,
}

/// Steady-state mean photon number versus `Delta/K` for the ideal model,
/// the model with the `eta` term, and the latter after the parity window.
pub fn steady_scan(
    base: &KpoParams,
    deltas_over_k: &[f64],
    spec: &DissipationSpec,
    window: &ParityWindow,
    dim: usize,
) -> Result<Vec<SteadyScanRow>> {
    if deltas_over_k.is_empty() {
        return Err(KpoError::param("deltas", "must be non-empty"));
    }
    deltas_over_k
        .par_iter()
        .map(|&d| {
            let p = base.with_delta(d * base.kerr);
            let ideal = steady_state(&p.with_eta(0.0), spec, dim, SteadyMethod::NullSpace)?;
            let with_eta = steady_state(&p, spec, dim, SteadyMethod::NullSpace)?;
            let decayed = window.apply(&with_eta.rho)?;
            Ok(SteadyScanRow {
                delta_over_k: d,
                ideal: mean_photon(&ideal.rho),
                eta: mean_photon(&with_eta.rho),
                eta_with_window: mean_photon(&decayed),
            })
        })
        .collect()
}

pub fn steady_scan_table(rows: &[SteadyScanRow]) -> Table {
    let mut t = Table::new(["delta_over_k", "n_ideal", "n_eta", "n_eta_window"]);
    for r in rows {
        t.rows.push(vec![r.delta_over_k, r.ideal, r.eta, r.eta_with_window]);
    }
    t
}

/// Mean photon number of the state after ramp, hold and parity window.
pub fn prepared_photon_number(
    params: &KpoParams,
    sched: &PumpSchedule,
    spec: Option<&DissipationSpec>,
    window: Option<&ParityWindow>,
    dim: usize,
) -> Result<f64> {
    let p = params.with_pump(sched.p_peak);
    let rho = states_at(&p, sched, spec, &Ket::vacuum(dim)?, &[sched.duration()], &EvolveOptions::default())?.remove(0);
    Ok(mean_photon(&apply_window(window, rho)?))
}

/// [`prepared_photon_number`] as a function of `Delta/K`.
pub fn preparation_scan(
    base: &KpoParams,
    sched: &PumpSchedule,
    spec: Option<&DissipationSpec>,
    window: Option<&ParityWindow>,
    deltas_over_k: &[f64],
    dim: usize,
) -> Result<Vec<(f64, f64)>> {
    deltas_over_k
        .par_iter()
        .map(|&d| Ok((d, prepared_photon_number(&base.with_delta(d * base.kerr), sched, spec, window, dim)?)))
        .collect()
}

/// For each target photon number, the smallest `Delta/K` on the scan grid
/// whose bracket contains it, refined by regula falsi. Returns
/// `(target, Delta/K, simulated <n>)`; targets never crossed by the scan are
/// reported at the closest grid point.
pub fn photon_number_matches(
    base: &KpoParams,
    sched: &PumpSchedule,
    spec: Option<&DissipationSpec>,
    window: Option<&ParityWindow>,
    deltas_over_k: &[f64],
    targets: &[f64],
    dim: usize,
) -> Result<Vec<(f64, f64, f64)>> {
    let scan = preparation_scan(base, sched, spec, window, deltas_over_k, dim)?;
    let n_at = |d: f64| prepared_photon_number(&base.with_delta(d * base.kerr), sched, spec, window, dim);
    targets
        .par_iter()
        .map(|&target| {
            let Some(w) = scan.windows(2).find(|w| (w[0].1 - target) * (w[1].1 - target) <= 0.0) else {
                let (d, n) = *scan.iter().min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs())).unwrap();
                return Ok((target, d, n));
            };
            let (mut a, mut b) = (w[0], w[1]);
            let mut best = if (a.1 - target).abs() <= (b.1 - target).abs() { a } else { b };
            for _ in 0..MATCH_ITERATIONS {
                if (best.1 - target).abs() < MATCH_TOLERANCE || a.1 == b.1 {
                    break;
                }
                let d = a.0 + (target - a.1) / (b.1 - a.1) * (b.0 - a.0);
                let c = (d, n_at(d)?);
                if (c.1 - target).abs() < (best.1 - target).abs() {
                    best = c;
                }
                if (a.1 - target) * (c.1 - target) <= 0.0 {
                    b = c;
                } else {
                    a = c;
                }
            }
            Ok((target, best.0, best.1))
        })
        .collect()
}

const MATCH_ITERATIONS: usize = 12;
const MATCH_TOLERANCE: f64 = 1e-3;
