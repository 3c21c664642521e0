use std::f64::consts::PI;

use kpo_core::dynamics::{
    evolve_lindblad, evolve_unitary, fft_gap, prepare_cat, steady_state, EvolveOptions, PreparedState, SteadyMethod,
};
use kpo_core::fock::{fidelity, mean_photon, DensityMatrix, Ket};
use kpo_core::model::{DissipationSpec, KpoParams, PumpSchedule, RampShape};
use kpo_core::spectrum::diagonalize;
use kpo_core::{KpoError, C64};

const K: f64 = 2.0 * PI * 1.46e6;

fn params(delta_over_k: f64) -> KpoParams {
    KpoParams::from_ratios(K, delta_over_k, 0.822, -0.04).unwrap()
}

#[test]
fn fock_state_only_acquires_phase_without_pump() {
    let p = KpoParams::new(0.3 * K, K, 0.0, 0.0).unwrap();
    let one = Ket::fock(10, 1).unwrap();
    let t = 0.7e-6;
    let run = evolve_unitary(&p, &PumpSchedule::constant(0.0, t), &one, t, &EvolveOptions::default().with_samples(20)).unwrap();
    let n = run.observable("mean_photon").unwrap();
    assert!(n.iter().all(|v| (v - 1.0).abs() < 1e-9));
    let amp = run.final_state.amplitudes()[1];
    assert!((amp - C64::from_polar(1.0, -0.3 * K * t)).norm() < 1e-7);
}

#[test]
fn unitary_run_conserves_sector_populations() {
    let p = params(0.66);
    let psi = Ket::superpose(&[
        (C64::new(1.0, 0.0), &Ket::fock(24, 0).unwrap()),
        (C64::new(0.3, 0.2), &Ket::fock(24, 1).unwrap()),
        (C64::new(-0.5, 0.0), &Ket::fock(24, 2).unwrap()),
    ])
    .unwrap();
    let sched = PumpSchedule::new(p.pump, 0.3, 0.4e-6, 0.2e-6, RampShape::Sin2).unwrap();
    let run = evolve_unitary(&p, &sched, &psi, sched.duration(), &EvolveOptions::default().with_samples(50)).unwrap();
    let initial = [psi.populations()[0], psi.populations()[1], psi.populations()[2]];
    for s in 0..3 {
        let series = run.observable(&format!("sector{s}")).unwrap();
        assert!(series.iter().all(|v| (v - initial[s]).abs() < 1e-9));
    }
}

#[test]
fn amplitude_damping_of_single_photon() {
    let p = KpoParams::new(0.0, K, 0.0, 0.0).unwrap();
    let spec = DissipationSpec::new(4e-6, 0.0, None).unwrap();
    let rho0 = Ket::fock(8, 1).unwrap().to_density();
    let t = 8e-6;
    let run = evolve_lindblad(&p, &PumpSchedule::constant(0.0, t), &spec, &rho0, t, &EvolveOptions::default().with_samples(41)).unwrap();
    for (tt, n) in run.times.iter().zip(run.observable("mean_photon").unwrap()) {
        assert!((n - (-tt / 4e-6).exp()).abs() < 1e-6);
    }
}

#[test]
fn long_ramp_prepares_qutrit_state() {
    let p = params(0.66);
    let sched = PumpSchedule::new(p.pump, 0.0, 15e-6, 0.0, RampShape::Sin2).unwrap();
    let state = prepare_cat(&p, &sched, None, 30, &EvolveOptions::default()).unwrap();
    let target = diagonalize(&p, 30).unwrap();
    let PreparedState::Pure(psi) = state else { panic!("lossless run returns a ket") };
    let f = target.qutrit(0).inner(&psi).norm_sqr();
    assert!(f >= 0.999, "fidelity {f}");
}

#[test]
fn zero_ramp_leaves_vacuum() {
    let p = params(0.66);
    let sched = PumpSchedule::new(p.pump, 0.0, 0.0, 0.0, RampShape::Sin2).unwrap();
    let state = prepare_cat(&p, &sched, None, 20, &EvolveOptions::default()).unwrap();
    assert_eq!(state.mean_photon(), 0.0);
}

#[test]
fn steady_state_examples() {
    let p = KpoParams::new(0.2 * K, K, 0.0, 0.0).unwrap();
    let cold = DissipationSpec::new(4e-6, 0.0, None).unwrap();
    let ss = steady_state(&p, &cold, 12, SteadyMethod::NullSpace).unwrap();
    assert!(fidelity(&ss.rho, &Ket::vacuum(12).unwrap()).unwrap() > 1.0 - 1e-10);

    let warm = DissipationSpec::new(4e-6, 0.04, None).unwrap();
    let ss = steady_state(&p, &warm, 12, SteadyMethod::NullSpace).unwrap();
    assert!((mean_photon(&ss.rho) - 0.04).abs() < 1e-6);

    let closed = DissipationSpec::lossless();
    assert!(matches!(steady_state(&p, &closed, 12, SteadyMethod::NullSpace), Err(KpoError::NonUniqueSteadyState { .. })));
}

#[test]
fn pure_dephasing_alone_has_degenerate_kernel() {
    let p = KpoParams::new(0.2 * K, K, 0.0, 0.0).unwrap();
    let spec = DissipationSpec { t1: f64::INFINITY, n_th: 0.0, t_phi: Some(5e-6) };
    match steady_state(&p, &spec, 9, SteadyMethod::NullSpace) {
        Err(KpoError::NonUniqueSteadyState { kernel_dim }) => assert!(kernel_dim > 1),
        other => panic!("expected a degenerate kernel, got {other:?}"),
    }
}

#[test]
fn null_space_and_long_time_agree() {
    let spec = DissipationSpec::new(4e-6, 0.04, None).unwrap();
    for d in [0.2, 0.6, 1.0] {
        let p = params(d);
        let a = steady_state(&p, &spec, 24, SteadyMethod::NullSpace).unwrap();
        let b = steady_state(&p, &spec, 24, SteadyMethod::LongTime).unwrap();
        let dist = a.rho.trace_distance(&b.rho).unwrap();
        assert!(dist <= 1e-5, "Delta/K = {d}: trace distance {dist:.3e}");
    }
}

#[test]
fn kerr_ladder_beating_frequency() {
    // (|0> + |3>)/sqrt 2 at P = 0 beats at |E_3 - E_0| = |3 Delta - 3 K|.
    let p = KpoParams::new(0.2 * K, K, 0.0, 0.0).unwrap();
    let psi = Ket::superpose(&[(C64::new(1.0, 0.0), &Ket::fock(10, 0).unwrap()), (C64::new(1.0, 0.0), &Ket::fock(10, 3).unwrap())]).unwrap();
    let f_expected = (3.0 * 0.2 * K - 3.0 * K).abs() / (2.0 * PI);
    let t = 12.0 / f_expected;
    // Fidelity to the initial state oscillates at the beat frequency.
    let run = evolve_unitary(
        &p,
        &PumpSchedule::constant(0.0, t),
        &psi,
        t,
        &EvolveOptions::default().with_samples(400).with_target("init", psi.clone()),
    )
    .unwrap();
    let fit = fft_gap(&run.times, run.observable("F_init").unwrap()).unwrap();
    assert!((fit.frequency / f_expected - 1.0).abs() < 1e-6, "{} vs {}", fit.frequency, f_expected);
    assert_eq!(run.times.len(), 400);
}

#[test]
fn thermal_density_matrix_is_valid() {
    assert!(DensityMatrix::thermal(10, 0.5).unwrap().validate().is_ok());
}
