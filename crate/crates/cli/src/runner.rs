//! Executes a validated [`RunConfig`] and writes its data files.

use std::path::Path;

use kpo_core::dynamics::{evolve_lindblad, evolve_unitary, prepare_cat, steady_state, EvolveOptions, EvolutionResult, SteadyMethod};
use kpo_core::experiments::{breathing_run, rabi_chevron, relaxation_run, relaxation_table, steady_scan, steady_scan_table, ParityWindow};
use kpo_core::fock::{mean_photon, tail_population};
use kpo_core::io::{grid_to_table, matrix_to_table, Table};
use kpo_core::spectrum::diagonalize;
use kpo_core::tomography::{symmetric_axis, wigner};
use kpo_core::{DensityMatrix, Ket, TWO_PI};

use crate::config::{Experiment, RunConfig, Window, WignerSource};
use crate::error::CliError;
use crate::output::{write, Meta};

pub fn evolve_options(cfg: &RunConfig) -> EvolveOptions {
    EvolveOptions { dt_max: cfg.numerics.dt_max, rtol: cfg.numerics.rtol, atol: cfg.numerics.atol, ..EvolveOptions::default() }
}

fn parity_window(w: Option<Window>) -> Option<ParityWindow> {
    w.map(|w| ParityWindow { duration: w.duration, t1eff: w.t1eff })
}

fn apply_window(w: Option<Window>, rho: DensityMatrix) -> Result<DensityMatrix, CliError> {
    match parity_window(w) {
        Some(pw) => Ok(pw.apply(&rho)?),
        None => Ok(rho),
    }
}

/// Header lines shared by every data file.
fn echo_params(cfg: &RunConfig, table: Table) -> Table {
    let p = &cfg.params;
    table
        .with_meta("experiment", cfg.experiment.name())
        .with_meta("kerr_hz", p.kerr / TWO_PI)
        .with_meta("delta_hz", p.delta / TWO_PI)
        .with_meta("delta_over_k", p.delta_over_k())
        .with_meta("pump_hz", p.pump / TWO_PI)
        .with_meta("pump_over_k", p.pump_over_k())
        .with_meta("eta", p.eta)
        .with_meta("dim", cfg.numerics.dim)
}

fn write_table(dir: &Path, name: &str, cfg: &RunConfig, table: Table) -> Result<(), CliError> {
    write(dir, name, &echo_params(cfg, table).to_tsv())
}

fn series_table<S>(run: &EvolutionResult<S>) -> Table {
    let mut t = Table::new(std::iter::once("time_s".to_string()).chain(run.observables.iter().map(|(n, _)| n.clone())));
    t.rows = run
        .times
        .iter()
        .enumerate()
        .map(|(i, &time)| std::iter::once(time).chain(run.observables.iter().map(|(_, v)| v[i])).collect())
        .collect();
    t
}

/// Runs the experiment, writes `grid.tsv` or `series.tsv` (plus `state.tsv`
/// for single-state experiments) into `dir`, and returns result metadata.
pub fn execute(cfg: &RunConfig, dir: &Path) -> Result<Meta, CliError> {
    let dim = cfg.numerics.dim;
    let opts = evolve_options(cfg);
    let p = cfg.params;
    let mut meta = Meta::default();
    match &cfg.experiment {
        Experiment::Chevron { detunings, durations } => {
            let grid = rabi_chevron(&p, detunings, durations, dim, &opts)?;
            if let Some(r) = grid.resonances().first() {
                meta.push("strongest_resonance_detuning_hz", r.detuning);
                meta.push("strongest_resonance_delta_over_k", r.delta / p.kerr);
            }
            write_table(dir, "grid.tsv", cfg, grid.to_table())?;
        }
        Experiment::Prepare { samples, window } => {
            let spectrum = diagonalize(&p, dim)?;
            let mut o = opts.clone().with_samples(*samples);
            for s in 0..3 {
                o = o.with_target(&format!("{s}C"), spectrum.qutrit(s).clone());
            }
            o = o.with_target("0C_ex", spectrum.excited(0).clone());
            let vacuum = Ket::vacuum(dim)?;
            let lossy = cfg.dissipation.t1.is_finite() || cfg.dissipation.t_phi.is_some_and(f64::is_finite);
            let (table, final_rho) = if lossy {
                let run = evolve_lindblad(&p, &cfg.schedule, &cfg.dissipation, &vacuum.to_density(), cfg.schedule.duration(), &o)?;
                (series_table(&run), run.final_state)
            } else {
                let run = evolve_unitary(&p, &cfg.schedule, &vacuum, cfg.schedule.duration(), &o)?;
                (series_table(&run), run.final_state.to_density())
            };
            let measured = apply_window(*window, final_rho.clone())?;
            meta.push("final_mean_photon", mean_photon(&final_rho));
            meta.push("final_mean_photon_after_window", mean_photon(&measured));
            meta.push("final_tail_population", tail_population(&final_rho));
            write_table(dir, "series.tsv", cfg, table)?;
            write(dir, "state.tsv", &matrix_to_table(final_rho.elements()).to_tsv())?;
        }
        Experiment::Breathing { holds, window } => {
            let run = breathing_run(&p, &cfg.schedule, Some(&cfg.dissipation), holds, dim, parity_window(*window).as_ref(), &opts)?;
            meta.push("gap_over_k", run.gap);
            meta.push("gap_frequency_hz", run.gap_frequency);
            match run.fit() {
                Ok(fit) => {
                    meta.push("fit_frequency_hz", fit.frequency);
                    meta.push("fit_decay_time_s", fit.decay_time);
                }
                Err(e) => meta.push("fit", format!("failed: {e}")),
            }
            write_table(dir, "series.tsv", cfg, run.to_table())?;
        }
        Experiment::Relaxation { holds, window } => {
            let rows = relaxation_run(&p, &cfg.schedule, &cfg.dissipation, holds, dim, parity_window(*window).as_ref(), &opts)?;
            write_table(dir, "series.tsv", cfg, relaxation_table(&rows))?;
        }
        Experiment::SteadyScan { deltas_over_k, window } => {
            // A zero-length window leaves the states untouched.
            let pw = parity_window(*window).unwrap_or(ParityWindow { duration: 0.0, t1eff: 1.0 });
            let rows = steady_scan(&p, deltas_over_k, &cfg.dissipation, &pw, dim)?;
            write_table(dir, "series.tsv", cfg, steady_scan_table(&rows))?;
        }
        Experiment::Spectrum { levels } => {
            let spectrum = diagonalize(&p, dim)?;
            let mut t = Table::new(["index", "energy_over_k", "sector", "mean_photon", "role"]);
            // Wells are maxima, so the cat manifolds sit at the top.
            for i in (0..spectrum.eigenvalues.len()).rev().take(*levels) {
                let role = if spectrum.qutrit_indices.contains(&i) {
                    1.0
                } else if spectrum.excited_indices.first() == Some(&i) {
                    2.0
                } else {
                    0.0
                };
                t.rows.push(vec![i as f64, spectrum.eigenvalues[i], spectrum.sector[i] as f64, mean_photon(&spectrum.eigenstates[i]), role]);
            }
            t.push_meta("role", "1 = qutrit manifold, 2 = first excited state, 0 = other");
            t.push_meta("gap_over_k", spectrum.gap);
            meta.push("gap_over_k", spectrum.gap);
            meta.push("gap_frequency_hz", spectrum.gap.abs() * p.kerr / TWO_PI);
            meta.push("mean_photon_0C", mean_photon(spectrum.qutrit(0)));
            meta.push("mean_photon_0C_ex", mean_photon(spectrum.excited(0)));
            write_table(dir, "series.tsv", cfg, t)?;
        }
        Experiment::Wigner { source, extent, points, noise, window } => {
            let rho = match source {
                WignerSource::Prepared => prepare_cat(&p, &cfg.schedule, Some(&cfg.dissipation), dim, &opts)?.to_density(),
                WignerSource::Steady => {
                    let ss = steady_state(&p, &cfg.dissipation, dim, SteadyMethod::NullSpace)?;
                    meta.push("steady_state_residual", ss.residual);
                    ss.rho
                }
            };
            let rho = apply_window(*window, rho)?;
            let axis = symmetric_axis(*extent, *points);
            let mut grid = wigner(&rho, &axis, &axis)?;
            if *noise > 0.0 {
                grid = grid.with_gaussian_noise(*noise, cfg.seed)?;
            }
            meta.push("mean_photon", mean_photon(&rho));
            meta.push("wigner_integral", grid.integral());
            let table = grid_to_table(&grid).with_meta("units", "W(alpha), vacuum peak 2/pi").with_meta("noise_sigma", noise).with_meta("seed", cfg.seed);
            write_table(dir, "grid.tsv", cfg, table)?;
            write(dir, "state.tsv", &matrix_to_table(rho.elements()).to_tsv())?;
        }
    }
    Ok(meta)
}
