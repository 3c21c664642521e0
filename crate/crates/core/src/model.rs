//! Rotating-frame Hamiltonian, classical phase-space landscape, pump
//! envelopes and dissipation channels.

use std::f64::consts::PI;

use crate::error::{KpoError, Result};
use crate::fock::{annihilation, number_operator, OperatorMatrix};
use crate::linalg::{CMatrix, C64, I};

/// Default guard on `|eta|`.
pub const ETA_LIMIT: f64 = 0.5;

/// Coefficients of the rotating-frame Hamiltonian. Frequencies in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KpoParams {
    pub delta: f64,
    pub kerr: f64,
    pub pump: f64,
    pub eta: f64,
}

impl KpoParams {
    pub fn new(delta: f64, kerr: f64, pump: f64, eta: f64) -> Result<Self> {
        let p = KpoParams { delta, kerr, pump, eta };
        p.validate(ETA_LIMIT)?;
        Ok(p)
    }

    /// Builds parameters from `Delta/K` and `P/K`.
    pub fn from_ratios(kerr: f64, delta_over_k: f64, pump_over_k: f64, eta: f64) -> Result<Self> {
        KpoParams::new(delta_over_k * kerr, kerr, pump_over_k * kerr, eta)
    }

    pub fn validate(&self, eta_limit: f64) -> Result<()> {
        if !(self.kerr.is_finite() && self.kerr > 0.0) {
            return Err(KpoError::param("kerr", format!("must be positive, got {}", self.kerr)));
        }
        if !self.delta.is_finite() || !self.pump.is_finite() {
            return Err(KpoError::param("delta/pump", "must be finite"));
        }
        if !(self.eta.abs() < eta_limit) {
            return Err(KpoError::param("eta", format!("|eta| = {} exceeds the trusted limit {eta_limit}", self.eta.abs())));
        }
        Ok(())
    }

    pub fn with_pump(self, pump: f64) -> Self {
        KpoParams { pump, ..self }
    }

    pub fn with_delta(self, delta: f64) -> Self {
        KpoParams { delta, ..self }
    }

    pub fn with_eta(self, eta: f64) -> Self {
        KpoParams { eta, ..self }
    }

    pub fn delta_over_k(&self) -> f64 {
        self.delta / self.kerr
    }

    pub fn pump_over_k(&self) -> f64 {
        self.pump / self.kerr
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RampShape {
    Sin2,
    Linear,
    None,
}

impl std::str::FromStr for RampShape {
    type Err = KpoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sin2" => Ok(RampShape::Sin2),
            "linear" => Ok(RampShape::Linear),
            "none" => Ok(RampShape::None),
            other => Err(KpoError::param("ramp_shape", format!("unknown shape `{other}` (sin2, linear, none)"))),
        }
    }
}

/// Pump amplitude schedule: ramp to `p_peak`, then hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpSchedule {
    pub p_peak: f64,
    pub cd_fraction: f64,
    pub tau_ramp: f64,
    pub tau_hold: f64,
    pub ramp_shape: RampShape,
}

impl PumpSchedule {
    pub fn new(p_peak: f64, cd_fraction: f64, tau_ramp: f64, tau_hold: f64, ramp_shape: RampShape) -> Result<Self> {
        let s = PumpSchedule { p_peak, cd_fraction, tau_ramp, tau_hold, ramp_shape };
        s.validate()?;
        Ok(s)
    }

    /// Constant pump from `t = 0`.
    pub fn constant(p_peak: f64, duration: f64) -> Self {
        PumpSchedule { p_peak, cd_fraction: 0.0, tau_ramp: 0.0, tau_hold: duration, ramp_shape: RampShape::None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_ramp >= 0.0 && self.tau_ramp.is_finite()) {
            return Err(KpoError::param("tau_ramp", "must be non-negative"));
        }
        if !(self.tau_hold >= 0.0 && self.tau_hold.is_finite()) {
            return Err(KpoError::param("tau_hold", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.cd_fraction) {
            return Err(KpoError::param("cd_fraction", "must lie in [0, 1]"));
        }
        if !self.p_peak.is_finite() {
            return Err(KpoError::param("p_peak", "must be finite"));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.tau_ramp + self.tau_hold
    }
}

/// Envelope `(main, cd)` at time `t`; both dimensionless.
///
/// `cd` is the ramp derivative normalized to unit peak, times `cd_fraction`.
pub fn envelope(sched: &PumpSchedule, t: f64) -> (f64, f64) {
    if sched.ramp_shape == RampShape::None || t >= sched.tau_ramp {
        return (1.0, 0.0);
    }
    let t = t.max(0.0);
    let x = t / sched.tau_ramp;
    match sched.ramp_shape {
        RampShape::Sin2 => {
            let s = (PI * x / 2.0).sin();
            (s * s, sched.cd_fraction * (PI * x).sin())
        }
        RampShape::Linear => (x, sched.cd_fraction),
        RampShape::None => unreachable!(),
    }
}

/// Time-independent pieces of `H(t) = drift + main(t) pump + cd(t) cd`.
#[derive(Debug, Clone)]
pub struct HamiltonianParts {
    pub drift: CMatrix,
    pub pump: CMatrix,
    pub cd: CMatrix,
}

impl HamiltonianParts {
    pub fn build(params: &KpoParams, dim: usize) -> Result<Self> {
        if dim < 6 {
            return Err(KpoError::InvalidDimension {
                dim,
                reason: "the Hamiltonian needs dim >= 6 (quintic pump term needs headroom)".into(),
            });
        }
        params.validate(ETA_LIMIT)?;
        let a = annihilation(dim)?.elements().clone();
        let ad = a.adjoint();
        let n = number_operator(dim)?.elements().clone();
        let ad2a2 = &ad * &ad * &a * &a;
        let ad3 = &ad * &ad * &ad;
        let a3 = &a * &a * &a;
        let ad4a = &ad3 * &ad * &a;
        let ada4 = &ad * &a3 * &a;
        let half_p = params.pump / 2.0;

        let drift = n * C64::from(params.delta) - ad2a2 * C64::from(params.kerr / 2.0);
        let pump = ((&ad3 + &a3) + (&ad4a + &ada4) * C64::from(params.eta)) * C64::from(half_p);
        let cd = ((&ad3 - &a3) + (&ad4a - &ada4) * C64::from(params.eta)) * (I * half_p);
        Ok(HamiltonianParts { drift, pump, cd })
    }

    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    pub fn at(&self, main: f64, cd: f64) -> CMatrix {
        let mut h = self.drift.clone();
        if main != 0.0 {
            h += &self.pump * C64::from(main);
        }
        if cd != 0.0 {
            h += &self.cd * C64::from(cd);
        }
        h
    }
}

/// `H = Delta n - (K/2) a^dag^2 a^2 + (s P / 2)[(a^dag^3 + a^3) + eta (a^dag^4 a + a^dag a^4)]`.
pub fn hamiltonian(params: &KpoParams, pump_scale: f64, dim: usize) -> Result<OperatorMatrix> {
    let parts = HamiltonianParts::build(params, dim)?;
    Ok(OperatorMatrix::from_raw(parts.at(pump_scale, 0.0), true))
}

/// Classical energy in units of K at `alpha = x + i y`.
pub fn classical_energy(params: &KpoParams, x: f64, y: f64) -> f64 {
    let r2 = x * x + y * y;
    let d = params.delta_over_k();
    let p = params.pump_over_k();
    d * r2 - 0.5 * r2 * r2
        + p * ((x * x * x - 3.0 * x * y * y) + params.eta * (x.powi(5) - 2.0 * x.powi(3) * y * y - 3.0 * x * y.powi(4)))
}

fn classical_gradient(params: &KpoParams, x: f64, y: f64) -> (f64, f64) {
    let r2 = x * x + y * y;
    let d = params.delta_over_k();
    let p = params.pump_over_k();
    let e = params.eta;
    let gx = 2.0 * d * x - 2.0 * r2 * x
        + p * (3.0 * x * x - 3.0 * y * y + e * (5.0 * x.powi(4) - 6.0 * x * x * y * y - 3.0 * y.powi(4)));
    let gy = 2.0 * d * y - 2.0 * r2 * y + p * (-6.0 * x * y + e * (-4.0 * x.powi(3) * y - 12.0 * x * y.powi(3)));
    (gx, gy)
}

/// A stationary point of the classical landscape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Well {
    pub x: f64,
    pub y: f64,
    /// Energy in units of K.
    pub energy: f64,
}

/// The three wells of the landscape, found by descent on `-H/K` from seeds
/// at 0, 120 and 240 degrees.
///
/// In the rotating frame the Kerr term makes `H` unbounded below, so the
/// wells are local maxima of `H` (minima of `-H`).
pub fn landscape_wells(params: &KpoParams) -> Vec<Well> {
    let radius = (params.delta_over_k().max(0.0) + params.pump_over_k().abs()).sqrt().max(0.5);
    let mut wells: Vec<Well> = Vec::new();
    for k in 0..3 {
        let theta = 2.0 * PI * k as f64 / 3.0;
        let (mut x, mut y) = (radius * theta.cos(), radius * theta.sin());
        let mut step = 0.05;
        for _ in 0..100_000 {
            let (gx, gy) = classical_gradient(params, x, y);
            if gx.hypot(gy) < 1e-12 {
                break;
            }
            let e0 = classical_energy(params, x, y);
            loop {
                let (nx, ny) = (x + step * gx, y + step * gy);
                if classical_energy(params, nx, ny) >= e0 {
                    x = nx;
                    y = ny;
                    step *= 1.2;
                    break;
                }
                step *= 0.5;
                if step < 1e-14 {
                    break;
                }
            }
            if step < 1e-14 {
                break;
            }
        }
        let well = Well { x, y, energy: classical_energy(params, x, y) };
        if !wells.iter().any(|w| (w.x - x).hypot(w.y - y) < 1e-6) {
            wells.push(well);
        }
    }
    wells
}

/// Loss channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationSpec {
    /// Single-photon lifetime in seconds; `f64::INFINITY` disables loss.
    pub t1: f64,
    pub n_th: f64,
    /// Pure-dephasing time; `None` or infinite disables dephasing.
    pub t_phi: Option<f64>,
}

impl DissipationSpec {
    pub fn new(t1: f64, n_th: f64, t_phi: Option<f64>) -> Result<Self> {
        let s = DissipationSpec { t1, n_th, t_phi };
        s.validate()?;
        Ok(s)
    }

    pub fn lossless() -> Self {
        DissipationSpec { t1: f64::INFINITY, n_th: 0.0, t_phi: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0) {
            return Err(KpoError::param("t1", "must be positive"));
        }
        if !(self.n_th >= 0.0 && self.n_th.is_finite()) {
            return Err(KpoError::param("n_th", "must be non-negative"));
        }
        if let Some(tp) = self.t_phi {
            if !(tp > 0.0) {
                return Err(KpoError::param("t_phi", "must be positive"));
            }
        }
        Ok(())
    }
}

/// A jump operator already scaled by the square root of its rate.
#[derive(Debug, Clone)]
pub struct CollapseOperator {
    pub op: OperatorMatrix,
    pub rate: f64,
}

/// `sqrt((1+n_th)/T1) a`, `sqrt(n_th/T1) a^dag` and `sqrt(2/T_phi) n`.
pub fn collapse_operators(spec: &DissipationSpec, dim: usize) -> Result<Vec<CollapseOperator>> {
    spec.validate()?;
    let mut out = Vec::new();
    let a = annihilation(dim)?;
    if spec.t1.is_finite() {
        let down = (1.0 + spec.n_th) / spec.t1;
        out.push(CollapseOperator { op: a.scale(down.sqrt()), rate: down });
        if spec.n_th > 0.0 {
            let up = spec.n_th / spec.t1;
            out.push(CollapseOperator { op: a.adjoint().scale(up.sqrt()), rate: up });
        }
    }
    if let Some(tp) = spec.t_phi.filter(|t| t.is_finite()) {
        let rate = 2.0 / tp;
        out.push(CollapseOperator { op: number_operator(dim)?.scale(rate.sqrt()), rate });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::mod3_parity;
    use crate::linalg::max_abs;

    fn params() -> KpoParams {
        KpoParams::from_ratios(1.0, 0.66, 0.822, -0.04).unwrap()
    }

    #[test]
    fn kerr_ladder_without_pump() {
        let p = KpoParams::new(0.3, 1.0, 0.0, -0.04).unwrap();
        let h = hamiltonian(&p, 1.0, 12).unwrap();
        for n in 0..12usize {
            let expect = 0.3 * n as f64 - (n * n.saturating_sub(1)) as f64 / 2.0;
            assert!((h.elements()[(n, n)].re - expect).abs() < 1e-12);
        }
        let offdiag = h.elements() - CMatrix::from_diagonal(&h.elements().diagonal());
        assert_eq!(max_abs(&offdiag), 0.0);
    }

    #[test]
    fn three_photon_matrix_element() {
        let p = KpoParams::new(0.0, 1.0, 0.8, 0.0).unwrap();
        let h = hamiltonian(&p, 1.0, 10).unwrap();
        assert!((h.elements()[(3, 0)].re - 0.4 * 6f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn dimension_guard() {
        assert!(matches!(hamiltonian(&params(), 1.0, 5), Err(KpoError::InvalidDimension { .. })));
    }

    #[test]
    fn commutes_with_generalized_parity() {
        let h = hamiltonian(&params(), 1.0, 30).unwrap();
        assert!(h.commutator_norm(&mod3_parity(30).unwrap()).unwrap() < 1e-12 * h.elements().norm());
    }

    #[test]
    fn classical_origin_and_wells() {
        assert_eq!(classical_energy(&params(), 0.0, 0.0), 0.0);
        let wells = landscape_wells(&params());
        assert_eq!(wells.len(), 3);
        let on_axis = wells.iter().find(|w| w.y.abs() < 1e-6).expect("one well on the x axis");
        assert!(on_axis.x > 1.0);
    }

    #[test]
    fn envelope_examples() {
        let s = PumpSchedule::new(1.0, 0.3, 2.0, 1.0, RampShape::Sin2).unwrap();
        assert_eq!(envelope(&s, 0.0), (0.0, 0.0));
        assert!((envelope(&s, 1.0).0 - 0.5).abs() < 1e-15);
        assert!((envelope(&s, 1.0).1 - 0.3).abs() < 1e-15);
        assert_eq!(envelope(&s, 2.0), (1.0, 0.0));
        assert_eq!(envelope(&s, 7.0), (1.0, 0.0));
    }

    #[test]
    fn collapse_examples() {
        let spec = DissipationSpec::new(4.5e-6, 0.0, None).unwrap();
        let ops = collapse_operators(&spec, 8).unwrap();
        assert_eq!(ops.len(), 1);
        assert!((ops[0].rate - 1.0 / 4.5e-6).abs() < 1e-6);

        let spec = DissipationSpec::new(4.5e-6, 0.04, None).unwrap();
        let ops = collapse_operators(&spec, 8).unwrap();
        assert!((ops[0].rate * 4.5e-6 - 1.04).abs() < 1e-12);
        assert!((ops[1].rate * 4.5e-6 - 0.04).abs() < 1e-12);

        assert!(collapse_operators(&DissipationSpec::lossless(), 8).unwrap().is_empty());
    }
}
