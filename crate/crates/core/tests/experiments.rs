use std::f64::consts::PI;

use kpo_core::dynamics::{evolve_unitary, fft_gap, steady_state, EvolveOptions, SteadyMethod};
use kpo_core::experiments::{
    breathing_run, delta_from_pump_detuning, photon_number_matches, pump_detuning_from_delta, rabi_chevron, steady_scan,
    ParityWindow, SteadyScanRow,
};
use kpo_core::fock::Ket;
use kpo_core::model::{DissipationSpec, KpoParams, PumpSchedule, RampShape};
use kpo_core::tomography::wigner;
use kpo_core::{C64, TWO_PI};

const K: f64 = TWO_PI * 1.46e6;

#[test]
fn detuning_axis_conversion() {
    assert!((delta_from_pump_detuning(-3.0 * K / TWO_PI) - K).abs() < 1e-6);
    assert!((pump_detuning_from_delta(delta_from_pump_detuning(-7.3e6)) + 7.3e6).abs() < 1e-6);
}

#[test]
fn chevron_starts_in_vacuum_and_stays_bounded() {
    let p = KpoParams::from_ratios(K, 0.0, 0.3, -0.04).unwrap();
    let detunings: Vec<f64> = (0..5).map(|k| -1e6 - 2e6 * k as f64).collect();
    let durations: Vec<f64> = (0..21).map(|k| k as f64 * 0.1e-6).collect();
    let grid = rabi_chevron(&p, &detunings, &durations, 20, &EvolveOptions::default()).unwrap();
    for i in 0..detunings.len() {
        assert_eq!(grid.p0[(i, 0)], 1.0);
    }
    assert!(grid.p0.iter().all(|&v| (-1e-9..=1.0 + 1e-9).contains(&v)));
    let table = grid.to_table();
    assert_eq!(table.rows.len(), 5 * 21);
}

#[test]
fn resonant_two_level_rabi_frequency() {
    // On the |0> <-> |3> resonance the coupling is (P/2) sqrt 6, so the
    // population oscillates at P sqrt 6 / 2 pi.
    let pump_over_k = 0.05;
    let p = KpoParams::from_ratios(K, 1.0, pump_over_k, 0.0).unwrap();
    let omega = pump_over_k * K * 6f64.sqrt();
    let t = 12.0 * TWO_PI / omega;
    let vac = Ket::vacuum(20).unwrap();
    let run = evolve_unitary(&p, &PumpSchedule::constant(p.pump, t), &vac, t, &EvolveOptions::default().with_samples(600).with_target("vac", vac.clone()))
        .unwrap();
    let fit = fft_gap(&run.times, run.observable("F_vac").unwrap()).unwrap();
    let expected = omega / TWO_PI;
    assert!((fit.frequency / expected - 1.0).abs() < 0.05, "{} vs {expected}", fit.frequency);
}

#[test]
fn eta_term_shifts_high_order_chevron() {
    let durations: Vec<f64> = (0..41).map(|k| k as f64 * 0.05e-6).collect();
    let detunings = [-10.0e6];
    let base = KpoParams::from_ratios(K, 0.0, 0.8, 0.0).unwrap();
    let ideal = rabi_chevron(&base, &detunings, &durations, 40, &EvolveOptions::default()).unwrap();
    let with_eta = rabi_chevron(&base.with_eta(-0.04), &detunings, &durations, 40, &EvolveOptions::default()).unwrap();
    let diff = (&ideal.p0 - &with_eta.p0).abs().max();
    assert!(diff > 0.05, "max |dp0| = {diff}");
}

#[test]
fn breathing_at_delta_040() {
    let p = KpoParams::from_ratios(K, 0.40, 0.822, -0.04).unwrap();
    let sched = PumpSchedule::new(p.pump, 0.0, 0.4e-6, 0.0, RampShape::Sin2).unwrap();
    let holds: Vec<f64> = (0..256).map(|k| k as f64 * 0.02e-6).collect();
    let run = breathing_run(&p, &sched, None, &holds, 40, None, &EvolveOptions::default()).unwrap();
    let fit = run.fit().unwrap();
    assert!((fit.frequency / run.gap_frequency - 1.0).abs() < 0.02);
    let n: Vec<f64> = run.rows.iter().map(|r| r.mean_photon).collect();
    let swing = n.iter().cloned().fold(f64::MIN, f64::max) - n.iter().cloned().fold(f64::MAX, f64::min);
    let excited = run.rows.iter().map(|r| r.excited).fold(0.0, f64::max);
    assert!(swing > 1.0, "swing {swing}");
    assert!(excited < 0.04, "excited population {excited}");
    assert!(excited <= 0.1);
    assert_eq!(run.to_table().rows.len(), holds.len());
}

#[test]
fn breathing_rejects_unsorted_holds() {
    let p = KpoParams::from_ratios(K, 0.40, 0.822, -0.04).unwrap();
    let sched = PumpSchedule::new(p.pump, 0.0, 0.4e-6, 0.0, RampShape::Sin2).unwrap();
    assert!(breathing_run(&p, &sched, None, &[0.2e-6, 0.1e-6], 30, None, &EvolveOptions::default()).is_err());
}

#[test]
fn steady_scan_curve_ordering() {
    let p = KpoParams::from_ratios(K, 0.0, 0.822, -0.04).unwrap();
    let spec = DissipationSpec::new(4e-6, 0.0, None).unwrap();
    let window = ParityWindow { duration: 0.67e-6, t1eff: 8e-6 };
    let deltas = [0.0, 0.3, 0.6, 0.9, 1.2];
    let rows = steady_scan(&p, &deltas, &spec, &window, 40).unwrap();
    for r in &rows {
        assert!(r.ideal > r.eta && r.eta > r.eta_with_window, "{r:?}");
    }
    let curves: [fn(&SteadyScanRow) -> f64; 3] = [|r| r.ideal, |r| r.eta, |r| r.eta_with_window];
    for curve in curves {
        let first = curve(&rows[0]);
        assert!(rows.iter().all(|r| curve(r) >= first));
    }
}

#[test]
fn steady_state_at_delta_040_has_three_lobes() {
    let p = KpoParams::from_ratios(K, 0.40, 0.822, -0.04).unwrap();
    let spec = DissipationSpec::new(4e-6, 0.0, None).unwrap();
    let ss = steady_state(&p, &spec, 40, SteadyMethod::NullSpace).unwrap();
    let well = kpo_core::model::landscape_wells(&p)[0];
    let radius = well.x.hypot(well.y);
    let phase0 = well.y.atan2(well.x);
    // Lobes on the well ring versus the midpoints between them.
    let ring = |offset: f64| -> Vec<f64> {
        (0..3)
            .map(|k| {
                let a = C64::from_polar(radius, phase0 + offset + 2.0 * PI * k as f64 / 3.0);
                wigner(&ss.rho, &[a.re], &[a.im]).unwrap().value(0, 0)
            })
            .collect()
    };
    let lobes = ring(0.0);
    let gaps = ring(PI / 3.0);
    let min_lobe = lobes.iter().cloned().fold(f64::MAX, f64::min);
    let max_gap = gaps.iter().cloned().fold(f64::MIN, f64::max);
    assert!(min_lobe > 2.0 * max_gap.max(0.0) && min_lobe > 0.05, "lobes {lobes:?} gaps {gaps:?}");
}

#[test]
fn prepared_photon_numbers_can_be_matched() {
    let p = KpoParams::from_ratios(K, 0.0, 0.822, -0.04).unwrap();
    let sched = PumpSchedule::new(p.pump, 0.3, 0.4e-6, 0.1e-6, RampShape::Sin2).unwrap();
    let spec = DissipationSpec::new(4e-6, 0.0, None).unwrap();
    let window = ParityWindow { duration: 0.67e-6, t1eff: 8e-6 };
    let grid: Vec<f64> = (0..=29).map(|k| -0.5 + 0.1 * k as f64).collect();
    let matches = photon_number_matches(&p, &sched, Some(&spec), Some(&window), &grid, &[0.52, 1.06, 1.99, 2.60], 50).unwrap();
    for (target, delta, n) in matches {
        assert!((n - target).abs() <= 0.05, "target {target}: Delta/K = {delta:.3} gives {n:.3}");
    }
}
