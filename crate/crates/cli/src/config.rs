//! Run configuration: TOML with unit-suffixed quantities.
//!
//! All frequencies in a config file are ordinary frequencies (Hz, i.e. the
//! "/2 pi" values); they are converted to angular frequencies here and
//! nowhere else. [`load`] is the single validation path used by both
//! `validate` and `run`.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use kpo_core::circuit::{derive_coefficients, fit_to_measured, irrotational_allocation, CircuitParams, DerivedCoefficients};
use kpo_core::model::hamiltonian;
use kpo_core::{DissipationSpec, KpoParams, PumpSchedule, RampShape, TWO_PI};

use crate::error::CliError;
use crate::units::{Farads, Hz, Seconds};

pub const MIN_DIM: usize = 8;
pub const MAX_DIM: usize = 200;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    model: Option<RawModel>,
    circuit: Option<RawCircuit>,
    pump: Option<RawPump>,
    dissipation: Option<RawDissipation>,
    experiment: Option<RawExperiment>,
    numerics: Option<RawNumerics>,
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kerr: Hz,
    #[serde(default)]
    eta: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCircuit {
    n1: u32,
    n2: u32,
    ej1a: Hz,
    ej1b: Hz,
    ej2: Hz,
    cj1a: Farads,
    cj1b: Farads,
    cj2: Farads,
    cs: Farads,
    /// Static flux per SQUID in flux quanta.
    flux_dc: f64,
    /// Pump flux amplitude in flux quanta.
    flux_ac: f64,
    ra: Option<f64>,
    rb: Option<f64>,
    fit: Option<RawFit>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFit {
    omega_k: Hz,
    kerr: Hz,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPump {
    amplitude: Option<Hz>,
    amplitude_over_k: Option<f64>,
    delta: Option<Hz>,
    delta_over_k: Option<f64>,
    #[serde(default)]
    cd_fraction: f64,
    ramp: Option<Seconds>,
    hold: Option<Seconds>,
    shape: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDissipation {
    t1: Option<Seconds>,
    #[serde(default)]
    n_th: f64,
    t_phi: Option<Seconds>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWindow {
    duration: Seconds,
    t1eff: Seconds,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawExperiment {
    Chevron {
        detuning_min: Hz,
        detuning_max: Hz,
        detuning_points: usize,
        duration_max: Seconds,
        duration_points: usize,
    },
    Prepare {
        samples: Option<usize>,
        window: Option<RawWindow>,
    },
    Breathing {
        hold_max: Seconds,
        hold_points: usize,
        window: Option<RawWindow>,
    },
    Relaxation {
        hold_max: Seconds,
        hold_points: usize,
        window: Option<RawWindow>,
    },
    SteadyScan {
        delta_over_k_min: f64,
        delta_over_k_max: f64,
        points: usize,
        window: Option<RawWindow>,
    },
    Spectrum {
        levels: Option<usize>,
    },
    Wigner {
        source: Option<String>,
        extent: Option<f64>,
        points: Option<usize>,
        noise: Option<f64>,
        window: Option<RawWindow>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNumerics {
    dim: usize,
    dt_max: Option<Seconds>,
    rtol: Option<f64>,
    atol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

/// Photon loss during the parity-measurement window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub duration: f64,
    pub t1eff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WignerSource {
    Prepared,
    Steady,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    Chevron { detunings: Vec<f64>, durations: Vec<f64> },
    Prepare { samples: usize, window: Option<Window> },
    Breathing { holds: Vec<f64>, window: Option<Window> },
    Relaxation { holds: Vec<f64>, window: Option<Window> },
    SteadyScan { deltas_over_k: Vec<f64>, window: Option<Window> },
    Spectrum { levels: usize },
    Wigner { source: WignerSource, extent: f64, points: usize, noise: f64, window: Option<Window> },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Chevron { .. } => "chevron",
            Experiment::Prepare { .. } => "prepare",
            Experiment::Breathing { .. } => "breathing",
            Experiment::Relaxation { .. } => "relaxation",
            Experiment::SteadyScan { .. } => "steady_scan",
            Experiment::Spectrum { .. } => "spectrum",
            Experiment::Wigner { .. } => "wigner",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    Abstract,
    Circuit { circuit: Box<CircuitParams>, derived: Box<DerivedCoefficients> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numerics {
    pub dim: usize,
    pub dt_max: f64,
    pub rtol: f64,
    pub atol: f64,
}

/// A fully validated run description. Frequencies in rad/s, times in s.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: ModelSource,
    pub params: KpoParams,
    pub schedule: PumpSchedule,
    pub dissipation: DissipationSpec,
    pub experiment: Experiment,
    pub numerics: Numerics,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    /// The config file as read.
    pub text: String,
}

/// Replaces the configured experiment or dimension before validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dim: Option<usize>,
    pub experiment: Option<Experiment>,
}

pub fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, overrides).map_err(|e| e.in_file(path))
}

pub fn parse(text: &str, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(parse_message(text, &e)))?;
    resolve(raw, text, overrides)
}

fn parse_message(text: &str, err: &toml::de::Error) -> String {
    match err.span() {
        Some(span) => {
            let (line, col) = line_col(text, span.start);
            format!("line {line}, column {col}: {}", err.message())
        }
        None => err.message().to_string(),
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn one_of<T>(field: &str, a: Option<T>, a_name: &str, b: Option<T>, b_name: &str) -> Result<Option<(T, bool)>, CliError> {
    match (a, b) {
        (Some(_), Some(_)) => Err(config_err(format!("{field}: give either `{a_name}` or `{b_name}`, not both"))),
        (Some(x), None) => Ok(Some((x, true))),
        (None, Some(y)) => Ok(Some((y, false))),
        (None, None) => Ok(None),
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn window(raw: Option<RawWindow>) -> Result<Option<Window>, CliError> {
    let Some(w) = raw else { return Ok(None) };
    if !(w.duration.0 >= 0.0 && w.duration.0.is_finite()) {
        return Err(config_err("experiment.window.duration must be finite and non-negative"));
    }
    if !(w.t1eff.0 > 0.0) {
        return Err(config_err("experiment.window.t1eff must be positive"));
    }
    Ok(Some(Window { duration: w.duration.0, t1eff: w.t1eff.0 }))
}

fn points(field: &str, n: usize, min: usize) -> Result<usize, CliError> {
    if n < min {
        return Err(config_err(format!("{field} must be at least {min}, got {n}")));
    }
    Ok(n)
}

fn positive(field: &str, v: f64) -> Result<f64, CliError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(config_err(format!("{field} must be positive and finite, got {v}")));
    }
    Ok(v)
}

fn resolve(raw: RawConfig, text: &str, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let (source, kerr, eta, circuit_pump) = match (raw.model, raw.circuit) {
        (Some(_), Some(_)) => return Err(config_err("[model] and [circuit] are mutually exclusive; give exactly one")),
        (None, None) => return Err(config_err("missing model: give a [model] or a [circuit] section")),
        (Some(m), None) => (ModelSource::Abstract, m.kerr.angular(), m.eta, None),
        (None, Some(c)) => {
            let (circuit, derived) = resolve_circuit(c)?;
            let (k, eta, p) = (TWO_PI * derived.kerr, derived.eta, TWO_PI * derived.pump);
            (ModelSource::Circuit { circuit: Box::new(circuit), derived: Box::new(derived) }, k, eta, Some(p))
        }
    };
    positive("model.kerr", kerr)?;

    let experiment = match overrides.experiment.clone() {
        Some(e) => e,
        None => resolve_experiment(raw.experiment.ok_or_else(|| config_err("missing [experiment] section"))?)?,
    };

    let pump = raw
        .pump
        .ok_or_else(|| config_err(format!("missing [pump] section: experiment `{}` needs the pump amplitude and detuning", experiment.name())))?;
    let amplitude = match one_of("pump", pump.amplitude.map(Hz::angular), "amplitude", pump.amplitude_over_k.map(|r| r * kerr), "amplitude_over_k")? {
        Some((p, _)) => p,
        None => circuit_pump.ok_or_else(|| config_err("pump: `amplitude` or `amplitude_over_k` is required with a [model] section"))?,
    };
    let delta = match one_of("pump", pump.delta.map(Hz::angular), "delta", pump.delta_over_k.map(|r| r * kerr), "delta_over_k")? {
        Some((d, _)) => d,
        None if matches!(experiment, Experiment::Chevron { .. } | Experiment::SteadyScan { .. }) => 0.0,
        None => return Err(config_err(format!("pump: `delta` or `delta_over_k` is required for experiment `{}`", experiment.name()))),
    };
    let shape: RampShape = pump.shape.as_deref().unwrap_or("sin2").parse()?;
    let ramp = pump.ramp.map_or(0.0, |s| s.0);
    let hold = pump.hold.map_or(0.0, |s| s.0);
    let schedule = PumpSchedule::new(amplitude, pump.cd_fraction, ramp, hold, shape)?;
    let ramped = match &experiment {
        Experiment::Prepare { .. } | Experiment::Breathing { .. } | Experiment::Relaxation { .. } => true,
        Experiment::Wigner { source, .. } => *source == WignerSource::Prepared,
        _ => false,
    };
    if ramped && schedule.duration() <= 0.0 {
        return Err(config_err(format!("pump: experiment `{}` needs a positive `ramp` or `hold`", experiment.name())));
    }
    let params = KpoParams::new(delta, kerr, amplitude, eta)?;

    let dissipation = match raw.dissipation {
        None => DissipationSpec::lossless(),
        Some(d) => DissipationSpec::new(d.t1.map_or(f64::INFINITY, |s| s.0), d.n_th, d.t_phi.map(|s| s.0))?,
    };
    let lossy = dissipation.t1.is_finite() || dissipation.t_phi.is_some_and(f64::is_finite);
    let needs_loss = match &experiment {
        Experiment::Relaxation { .. } | Experiment::SteadyScan { .. } => true,
        Experiment::Wigner { source, .. } => *source == WignerSource::Steady,
        _ => false,
    };
    if needs_loss && !lossy {
        return Err(config_err(format!("dissipation: experiment `{}` needs a finite `t1` or `t_phi`", experiment.name())));
    }

    let raw_num = raw.numerics.ok_or_else(|| config_err("missing [numerics] section (at least `dim`)"))?;
    let dim = overrides.dim.unwrap_or(raw_num.dim);
    // The model's own guard gives the physical reason for tiny dimensions.
    hamiltonian(&params, 1.0, dim.max(1)).map_err(|e| config_err(format!("numerics.dim = {dim}: {e}")))?;
    if !(MIN_DIM..=MAX_DIM).contains(&dim) {
        return Err(config_err(format!("numerics.dim = {dim} is outside [{MIN_DIM}, {MAX_DIM}]")));
    }
    let numerics = Numerics {
        dim,
        dt_max: raw_num.dt_max.map_or(f64::INFINITY, |s| s.0),
        rtol: raw_num.rtol.unwrap_or(1e-10),
        atol: raw_num.atol.unwrap_or(1e-12),
    };
    positive("numerics.dt_max", numerics.dt_max.min(f64::MAX))?;
    positive("numerics.rtol", numerics.rtol)?;
    positive("numerics.atol", numerics.atol)?;

    Ok(RunConfig {
        source,
        params,
        schedule,
        dissipation,
        experiment,
        numerics,
        output_dir: raw.output.and_then(|o| o.dir),
        seed: raw.seed.unwrap_or(0),
        text: text.to_string(),
    })
}

fn resolve_circuit(c: RawCircuit) -> Result<(CircuitParams, DerivedCoefficients), CliError> {
    let (ra, rb) = match (c.ra, c.rb) {
        (None, None) => irrotational_allocation(c.cj1a.0, c.cj1b.0),
        (Some(ra), None) => (ra, 1.0 - ra),
        (None, Some(rb)) => (1.0 - rb, rb),
        (Some(ra), Some(rb)) => (ra, rb),
    };
    let mut circuit = CircuitParams {
        n1: c.n1,
        n2: c.n2,
        ej1a: c.ej1a.0,
        ej1b: c.ej1b.0,
        ej2: c.ej2.0,
        cj1a: c.cj1a.0,
        cj1b: c.cj1b.0,
        cj2: c.cj2.0,
        cs: c.cs.0,
        phi_dc: TWO_PI * c.flux_dc,
        phi_ac_amp: TWO_PI * c.flux_ac,
        ra,
        rb,
    };
    circuit.validate()?;
    if let Some(fit) = c.fit {
        circuit = fit_to_measured(fit.omega_k.0, fit.kerr.0, &circuit)?;
    }
    let derived = derive_coefficients(&circuit)?;
    Ok((circuit, derived))
}

fn resolve_experiment(raw: RawExperiment) -> Result<Experiment, CliError> {
    Ok(match raw {
        RawExperiment::Chevron { detuning_min, detuning_max, detuning_points, duration_max, duration_points } => {
            if !(detuning_max.0 >= detuning_min.0) {
                return Err(config_err("experiment.detuning_max must not be below detuning_min"));
            }
            let n = points("experiment.detuning_points", detuning_points, 1)?;
            let m = points("experiment.duration_points", duration_points, 2)?;
            Experiment::Chevron {
                detunings: linspace(detuning_min.0, detuning_max.0, n),
                durations: linspace(0.0, positive("experiment.duration_max", duration_max.0)?, m),
            }
        }
        RawExperiment::Prepare { samples, window: w } => {
            Experiment::Prepare { samples: points("experiment.samples", samples.unwrap_or(201), 2)?, window: window(w)? }
        }
        RawExperiment::Breathing { hold_max, hold_points, window: w } => Experiment::Breathing {
            holds: linspace(0.0, positive("experiment.hold_max", hold_max.0)?, points("experiment.hold_points", hold_points, 8)?),
            window: window(w)?,
        },
        RawExperiment::Relaxation { hold_max, hold_points, window: w } => Experiment::Relaxation {
            holds: linspace(0.0, positive("experiment.hold_max", hold_max.0)?, points("experiment.hold_points", hold_points, 2)?),
            window: window(w)?,
        },
        RawExperiment::SteadyScan { delta_over_k_min, delta_over_k_max, points: n, window: w } => {
            if !(delta_over_k_max >= delta_over_k_min) {
                return Err(config_err("experiment.delta_over_k_max must not be below delta_over_k_min"));
            }
            Experiment::SteadyScan { deltas_over_k: linspace(delta_over_k_min, delta_over_k_max, points("experiment.points", n, 1)?), window: window(w)? }
        }
        RawExperiment::Spectrum { levels } => Experiment::Spectrum { levels: points("experiment.levels", levels.unwrap_or(12), 1)? },
        RawExperiment::Wigner { source, extent, points: n, noise, window: w } => {
            let source = match source.as_deref().unwrap_or("prepared") {
                "prepared" => WignerSource::Prepared,
                "steady" => WignerSource::Steady,
                other => return Err(config_err(format!("experiment.source: unknown state source `{other}` (prepared, steady)"))),
            };
            let noise = noise.unwrap_or(0.0);
            if !(noise >= 0.0 && noise.is_finite()) {
                return Err(config_err("experiment.noise must be finite and non-negative"));
            }
            Experiment::Wigner {
                source,
                extent: positive("experiment.extent", extent.unwrap_or(3.0))?,
                points: points("experiment.points", n.unwrap_or(61), 2)?,
                noise,
                window: window(w)?,
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[model]
kerr = "1.46 MHz"
[pump]
amplitude_over_k = 0.822
delta = "0.584 MHz"
ramp = "0.4 us"
[experiment]
kind = "prepare"
[numerics]
dim = 20
"#;

    #[test]
    fn frequencies_become_angular_at_the_parser() {
        let cfg = parse(BASE, &Overrides::default()).unwrap();
        assert!((cfg.params.kerr - TWO_PI * 1.46e6).abs() < 1e-6);
        assert!((cfg.params.delta_over_k() - 0.4).abs() < 1e-12);
        assert!((cfg.params.pump - 0.822 * TWO_PI * 1.46e6).abs() < 1e-6);
        assert_eq!(cfg.schedule.tau_ramp, 0.4e-6);
        assert_eq!(cfg.dissipation, DissipationSpec::lossless());
    }

    #[test]
    fn conflicting_alternatives_are_rejected() {
        let text = BASE.replace("delta = \"0.584 MHz\"", "delta = \"0.584 MHz\"\ndelta_over_k = 0.4");
        assert!(parse(&text, &Overrides::default()).unwrap_err().to_string().contains("not both"));
    }

    #[test]
    fn overrides_replace_dim_and_experiment() {
        let cfg = parse(BASE, &Overrides { dim: Some(30), experiment: Some(Experiment::Spectrum { levels: 4 }) }).unwrap();
        assert_eq!(cfg.numerics.dim, 30);
        assert_eq!(cfg.experiment, Experiment::Spectrum { levels: 4 });
    }

    #[test]
    fn line_and_column_are_one_based() {
        assert_eq!(line_col("ab\ncd", 4), (2, 2));
        assert_eq!(line_col("x", 0), (1, 1));
    }
}
