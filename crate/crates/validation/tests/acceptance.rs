//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kpo_core::circuit::{derive_coefficients, fit_to_measured, rwa_from_expansion, CircuitParams};
use kpo_core::dynamics::{evolve_lindblad, evolve_unitary, steady_state, EvolveOptions, SteadyMethod};
use kpo_core::experiments::{breathing_run, first_peak, rabi_chevron, relaxation_run, steady_scan, ParityWindow};
use kpo_core::fock::{fidelity, mean_photon, mod3_parity, Ket};
use kpo_core::model::hamiltonian;
use kpo_core::spectrum::diagonalize;
use kpo_core::tomography::{effective_decay, parity_linecut, reconstruct, symmetric_axis, wigner, ParityMeasurementSpec};
use kpo_core::{DensityMatrix, DissipationSpec, KpoParams, PumpSchedule, RampShape, Result, C64, TWO_PI};

const K: f64 = TWO_PI * 1.46e6;
const PUMP_OVER_K: f64 = 0.822;
const ETA: f64 = -0.04;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn device(delta_over_k: f64) -> KpoParams {
    KpoParams::from_ratios(K, delta_over_k, PUMP_OVER_K, ETA).unwrap()
}

fn ramp(cd: f64) -> PumpSchedule {
    PumpSchedule::new(PUMP_OVER_K * K, cd, 0.4e-6, 0.0, RampShape::Sin2).unwrap()
}

fn symmetry() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_comm = 0.0f64;
    let mut worst_sector = 0.0f64;
    for _ in 0..100 {
        let delta_over_k = rng.random_range(-0.5..2.0);
        let pump_over_k = rng.random_range(0.05..1.0);
        let eta = rng.random_range(0.001..0.05) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let dim = rng.random_range(6..=40);
        let p = KpoParams::from_ratios(K, delta_over_k, pump_over_k, eta)?;
        let h = hamiltonian(&p, 1.0, dim)?;
        let comm = h.commutator_norm(&mod3_parity(dim)?)?;
        worst_comm = worst_comm.max(comm / h.elements().norm());

        let amps: Vec<C64> = (0..4).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        // Truncation keeps H block diagonal; the larger space only keeps the
        // tail guard quiet for strong pumps.
        let mut v = kpo_core::linalg::CVector::zeros(80);
        for (n, a) in amps.into_iter().enumerate() {
            v[n] = a;
        }
        let psi = Ket::normalized(v)?;
        let start: Vec<f64> = (0..3).map(|s| psi.populations().iter().skip(s).step_by(3).sum()).collect();
        let sched = PumpSchedule::new(pump_over_k * K, 0.3, 0.2e-6, 0.05e-6, RampShape::Sin2)?;
        let run = evolve_unitary(&p, &sched, &psi, sched.duration(), &EvolveOptions::default().with_samples(41))?;
        for (s, &s0) in start.iter().enumerate() {
            let series = run.observable(&format!("sector{s}")).unwrap();
            worst_sector = series.iter().fold(worst_sector, |m, &x| m.max((x - s0).abs()));
        }
    }
    outcome(
        worst_comm <= 1e-12 && worst_sector <= 1e-9,
        format!("max ||[H, P3]||/||H|| = {worst_comm:.2e} (limit 1e-12), max sector drift = {worst_sector:.2e} (limit 1e-9)"),
    )
}

fn rabi_splitting() -> Result<Outcome> {
    let p = KpoParams::from_ratios(K, 0.0, 0.05, ETA)?;
    let to_detuning = |delta_over_k: f64| -3.0 * delta_over_k * K / TWO_PI;
    let window = |lo: f64, hi: f64, step: f64, t_max: f64, samples: usize| -> Result<f64> {
        let n = ((hi - lo) / step).round() as usize;
        let detunings: Vec<f64> = (0..=n).map(|k| to_detuning(lo + step * k as f64)).collect();
        let durations: Vec<f64> = (0..samples).map(|k| t_max * k as f64 / (samples - 1) as f64).collect();
        let grid = rabi_chevron(&p, &detunings, &durations, 20, &EvolveOptions::default())?;
        Ok(grid.resonances()[0].delta / K)
    };
    let first = window(0.8, 1.2, 0.005, 20e-6, 201)?;
    let second = window(2.4, 2.6, 0.001, 150e-6, 301)?;
    let separation = (to_detuning(second) - to_detuning(first)).abs() / (K / TWO_PI);
    let ok = (first - 1.0).abs() <= 0.02 && (second / 2.5 - 1.0).abs() <= 0.02 && (separation / 4.5 - 1.0).abs() <= 0.02;
    outcome(ok, format!("resonances at Delta/K = {first:.4} and {second:.4}, pump-axis separation {separation:.4} K"))
}

fn eigenstructure() -> Result<Outcome> {
    let spectrum = diagonalize(&device(0.40), 40)?;
    let q = spectrum.qutrit(0);
    let ex = spectrum.excited(0);
    let n_q = mean_photon(q);
    let n_ex = mean_photon(ex);
    let plus = Ket::superpose(&[(C64::new(1.0, 0.0), q), (C64::new(0.2, 0.0), ex)])?;
    let minus = Ket::superpose(&[(C64::new(1.0, 0.0), q), (C64::new(-0.2, 0.0), ex)])?;
    let (lo, hi) = {
        let (a, b) = (mean_photon(&plus), mean_photon(&minus));
        (a.min(b), a.max(b))
    };
    let ok = (n_q - 1.37).abs() <= 0.02 && (n_ex - 2.04).abs() <= 0.02 && (lo - 0.75).abs() <= 0.02 && (hi - 2.03).abs() <= 0.02;
    outcome(ok, format!("<n>: 0_C {n_q:.4}, 0_C^ex {n_ex:.4}, superpositions {lo:.4} and {hi:.4}"))
}

fn gap_cross_check() -> Result<Outcome> {
    let holds: Vec<f64> = (0..256).map(|k| k as f64 * 0.02e-6).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for delta_over_k in [0.40, 0.75, 1.10] {
        let run = breathing_run(&device(delta_over_k), &ramp(0.0), None, &holds, 40, None, &EvolveOptions::default())?;
        let fit = run.fit()?;
        let rel = fit.frequency / run.gap_frequency - 1.0;
        ok &= rel.abs() <= 0.02;
        parts.push(format!("{delta_over_k:.2}: fit {:.4} MHz vs gap {:.4} MHz", fit.frequency / 1e6, run.gap_frequency / 1e6));
    }
    outcome(ok, parts.join("; "))
}

fn cyclic_relaxation() -> Result<Outcome> {
    let spec = DissipationSpec::new(4e-6, 0.0, None)?;
    let holds: Vec<f64> = (0..=120).map(|k| k as f64 * 0.1e-6).collect();
    let rows = relaxation_run(&device(0.40), &ramp(0.3), &spec, &holds, 40, None, &EvolveOptions::default())?;
    let f1: Vec<f64> = rows.iter().map(|r| r.qutrit[1]).collect();
    let f2: Vec<f64> = rows.iter().map(|r| r.qutrit[2]).collect();
    let (p1, p2) = (first_peak(&f1).unwrap(), first_peak(&f2).unwrap());
    let interior = |i: usize| i > 0 && i + 1 < holds.len();
    let drift = rows.iter().filter(|r| r.hold <= 2e-6 + 1e-12).map(|r| (r.total - rows[0].total).abs()).fold(0.0, f64::max);
    outcome(
        interior(p1) && interior(p2) && p2 < p1 && drift <= 0.05,
        format!("first peaks: F_2C at {:.2} us, F_1C at {:.2} us; total drift over 2 us = {drift:.4}", holds[p2] * 1e6, holds[p1] * 1e6),
    )
}

fn eta_suppression() -> Result<Outcome> {
    let spec = DissipationSpec::new(4e-6, 0.0, None)?;
    let window = ParityWindow { duration: 0.67e-6, t1eff: 8e-6 };
    let deltas: Vec<f64> = (0..21).map(|k| 0.1 + 0.055 * k as f64).collect();
    let rows = steady_scan(&device(0.0), &deltas, &spec, &window, 40)?;
    let bad: Vec<f64> = rows.iter().filter(|r| !(r.eta < r.ideal && r.eta_with_window < r.eta)).map(|r| r.delta_over_k).collect();
    let min_margin = rows.iter().map(|r| (r.ideal - r.eta).min(r.eta - r.eta_with_window)).fold(f64::INFINITY, f64::min);
    outcome(bad.is_empty(), format!("{} points, ordering violated at {bad:?}, smallest margin {min_margin:.4}", rows.len()))
}

fn t1eff_oracle() -> Result<Outcome> {
    let t1 = 4.5e-6;
    let spec = ParityMeasurementSpec::new(TWO_PI * 0.79e6, t1)?;
    let dim = 40;
    let xs: Vec<f64> = (0..25).map(|k| -3.0 + 0.25 * k as f64).collect();
    let alphas: Vec<C64> = xs.iter().map(|&x| C64::new(x, 0.0)).collect();
    let states = [
        ("3-cat", Ket::cat(dim, C64::new(1.6, 0.0), 3)?),
        ("even cat", Ket::cat(dim, C64::new(1.6, 0.0), 2)?),
        ("Fock 3", Ket::fock(dim, 3)?),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, ket) in &states {
        let rho = ket.to_density();
        let oracle = parity_linecut(&rho, &alphas, &spec)?;
        let model = |ratio: f64| -> Result<Vec<f64>> {
            let decayed = effective_decay(&rho, spec.ramsey_duration, ratio * t1, None)?;
            let grid = wigner(&decayed, &xs, &[0.0])?;
            Ok((0..xs.len()).map(|i| grid.value(i, 0) * PI / 2.0).collect())
        };
        let sse = |ratio: f64| -> Result<f64> { Ok(model(ratio)?.iter().zip(&oracle).map(|(m, o)| (m - o).powi(2)).sum()) };
        let ratio = golden_min(&sse, 0.5, 6.0, 40)?;
        let dev = model(ratio)?.iter().zip(&oracle).map(|(m, o)| (m - o).abs()).fold(0.0, f64::max);
        // Parity units are Wigner units times pi/2, so the Wigner-unit bound
        // 0.05 (2/pi) reads 0.05 here.
        let pass = (1.6..=2.4).contains(&ratio) && dev <= 0.05;
        ok &= pass;
        parts.push(format!("{name}: T1eff/T1 = {ratio:.3}, max deviation {dev:.4} (2/pi units)"));
    }
    outcome(ok, parts.join("; "))
}

fn golden_min(f: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, iterations: usize) -> Result<f64> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..iterations {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

fn tomography_round_trip() -> Result<Outcome> {
    let dim = 25;
    let target = Ket::cat(dim, C64::new(1.6, 0.0), 3)?;
    let axis = symmetric_axis(3.0, 61);
    let grid = wigner(&target.to_density(), &axis, &axis)?;
    let clean = fidelity(&reconstruct(&grid, dim)?.rho, &target)?;
    let noisy_grid = grid.with_gaussian_noise(0.02 * 2.0 / PI, 7)?;
    let noisy = fidelity(&reconstruct(&noisy_grid, dim)?.rho, &target)?;
    outcome(clean >= 0.999 && noisy >= 0.98, format!("fidelity noiseless {clean:.6}, with noise (seed 7) {noisy:.4}"))
}

fn circuit_derivation() -> Result<Outcome> {
    let fitted = fit_to_measured(3.112e9, 1.70e6, &CircuitParams::device_template())?;
    let d = derive_coefficients(&fitted)?;
    let (kerr, _, _) = rwa_from_expansion(&fitted)?;
    let rel = (kerr / d.kerr - 1.0).abs();
    let ok = fitted.n1 == 2 && fitted.n2 == 4 && (5e-4..=5e-3).contains(&d.eta.abs()) && rel <= 1e-9;
    outcome(ok, format!("eta = {:.3e}, K from expansion vs closed form: relative difference {rel:.2e}", d.eta))
}

fn dissipation_sanity() -> Result<Outcome> {
    let t1 = 4e-6;
    let spec = DissipationSpec::new(t1, 0.0, None)?;
    let p = KpoParams::from_ratios(K, 0.0, 0.0, 0.0)?;
    let rho0 = Ket::coherent(30, C64::new(1.5, 0.5))?.to_density();
    let n0 = mean_photon(&rho0);
    let t_final = 10e-6;
    let run = evolve_lindblad(&p, &PumpSchedule::constant(0.0, t_final), &spec, &rho0, t_final, &EvolveOptions::default().with_samples(51))?;
    let series = run.observable("mean_photon").unwrap();
    let lindblad_err = run.times.iter().zip(series).map(|(&t, &n)| (n - n0 * (-t / t1).exp()).abs()).fold(0.0, f64::max);
    let kraus_err = [0.5e-6, 2e-6, 8e-6]
        .iter()
        .map(|&t| Ok((mean_photon(&effective_decay(&rho0, t, t1, None)?) - n0 * (-t / t1).exp()).abs()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let thermal_spec = DissipationSpec::new(t1, 0.04, None)?;
    let ss: DensityMatrix = steady_state(&p, &thermal_spec, 20, SteadyMethod::NullSpace)?.rho;
    let n_ss = mean_photon(&ss);
    let ok = lindblad_err <= 1e-6 && kraus_err <= 1e-6 && (n_ss - 0.04).abs() <= 1e-6;
    outcome(ok, format!("decay error: master equation {lindblad_err:.2e}, damping channel {kraus_err:.2e}; thermal <n> = {n_ss:.9}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<Outcome>); 10] = [
        ("symmetry", symmetry),
        ("Rabi splitting", rabi_splitting),
        ("eigenstructure", eigenstructure),
        ("gap cross-check", gap_cross_check),
        ("cyclic relaxation", cyclic_relaxation),
        ("eta suppression", eta_suppression),
        ("T1eff oracle", t1eff_oracle),
        ("tomography round trip", tomography_round_trip),
        ("circuit derivation", circuit_derivation),
        ("dissipation sanity", dissipation_sanity),
    ];
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        for (k, (name, _)) in criteria.iter().enumerate() {
            println!("criterion {} [{name}]: test", k + 1);
        }
        return ExitCode::SUCCESS;
    }
    // Criterion numbers on the command line restrict the run to those.
    let only: Vec<usize> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    let mut ran = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(k + 1)) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!pass);
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {verdict} [{name}] {detail} ({:.1} s)", k + 1, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
