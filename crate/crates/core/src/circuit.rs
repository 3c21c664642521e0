//! Circuit quantization: SQUID-array circuit parameters to the
//! rotating-frame coefficients (E_C, E_K, omega_K, K, P, eta).
//!
//! Energies are carried as ordinary frequencies (E/h, in Hz) and
//! capacitances in farads. The (Phi_0 / 2 pi)^2 renormalization cancels in
//! E_C = e^2 / (2 C_eff), which is what is evaluated here.

use crate::error::{KpoError, Result};

const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
const PLANCK: f64 = 6.626_070_15e-34;

/// Junction and capacitance parameters of the SQUID-array oscillator.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitParams {
    /// Number of DC SQUIDs.
    pub n1: u32,
    /// Number of array junctions.
    pub n2: u32,
    pub ej1a: f64,
    pub ej1b: f64,
    pub ej2: f64,
    pub cj1a: f64,
    pub cj1b: f64,
    pub cj2: f64,
    /// Shunt capacitance.
    pub cs: f64,
    /// Static flux bias, 2 pi Phi_dc / Phi_0.
    pub phi_dc: f64,
    /// Pump flux amplitude.
    pub phi_ac_amp: f64,
    pub ra: f64,
    pub rb: f64,
}

impl CircuitParams {
    /// Starting point for fitting the measured device: asymmetry 1.4,
    /// EJ2 = EJ1b, flux bias 0.149 Phi_0, junction capacitances scaled with
    /// junction area, flux split by the irrotational allocation.
    pub fn device_template() -> Self {
        let (cj1a, cj1b) = (2.0e-15, 2.8e-15);
        let (ra, rb) = irrotational_allocation(cj1a, cj1b);
        CircuitParams {
            n1: 2,
            n2: 4,
            ej1a: 80e9,
            ej1b: 112e9,
            ej2: 112e9,
            cj1a,
            cj1b,
            cj2: 2.8e-15,
            cs: 400e-15,
            phi_dc: 2.0 * std::f64::consts::PI * 0.149,
            phi_ac_amp: 0.05,
            ra,
            rb,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(KpoError::InvalidCircuit("N1 and N2 must be at least 1".into()));
        }
        let positive = [
            ("EJ1a", self.ej1a),
            ("EJ1b", self.ej1b),
            ("EJ2", self.ej2),
            ("CJ1a", self.cj1a),
            ("CJ1b", self.cj1b),
            ("CJ2", self.cj2),
            ("Cs", self.cs),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(KpoError::InvalidCircuit(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !self.phi_dc.is_finite() || !self.phi_ac_amp.is_finite() {
            return Err(KpoError::InvalidCircuit("flux values must be finite".into()));
        }
        if (self.ra + self.rb - 1.0).abs() > 1e-9 {
            return Err(KpoError::InvalidCircuit(format!(
                "irrotational constraint violated: ra + rb = {} (must equal 1)",
                self.ra + self.rb
            )));
        }
        Ok(())
    }

    fn scaled(&self, cs: f64, ej_scale: f64) -> CircuitParams {
        CircuitParams {
            cs,
            ej1a: self.ej1a * ej_scale,
            ej1b: self.ej1b * ej_scale,
            ej2: self.ej2 * ej_scale,
            ..self.clone()
        }
    }
}

/// Flux split `(ra, rb)` for a SQUID whose junction capacitances are `cj1a`, `cj1b`.
pub fn irrotational_allocation(cj1a: f64, cj1b: f64) -> (f64, f64) {
    let ra = cj1b / (cj1a + cj1b);
    (ra, 1.0 - ra)
}

/// Coefficients of the single-mode rotating-frame Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedCoefficients {
    pub ec: f64,
    pub ek: f64,
    pub xi: f64,
    pub omega_k0: f64,
    pub omega_k: f64,
    pub kerr: f64,
    /// P per unit lambda_ac.
    pub pump_rate: f64,
    pub eta: f64,
    pub zpf_n: f64,
    pub zpf_phi: f64,
    /// Pump-induced phase amplitude lambda_ac at the configured flux amplitude.
    pub lambda_ac: f64,
    /// `pump_rate * lambda_ac`.
    pub pump: f64,
    /// Stark-shifted junction energy E_J1.
    pub ej1: f64,
    /// Linear flux-drive coefficient E_J1^(1); dropped by the RWA.
    pub ej1_linear: f64,
}

/// Effective junction energy and phase offset of a SQUID at flux `phi_ex`.
pub fn squid_modulation(ej1a: f64, ej1b: f64, ra: f64, rb: f64, phi_ex: f64) -> (f64, f64) {
    let ej = (ej1a * ej1a + ej1b * ej1b + 2.0 * ej1a * ej1b * phi_ex.cos()).max(0.0).sqrt();
    let num = ej1a * (ra * phi_ex).sin() - ej1b * (rb * phi_ex).sin();
    let den = ej1a * (ra * phi_ex).cos() + ej1b * (rb * phi_ex).cos();
    (ej, num.atan2(den))
}

/// `d lambda / d phi_ex` of [`squid_modulation`].
pub fn lambda_derivative(ej1a: f64, ej1b: f64, ra: f64, rb: f64, phi_ex: f64) -> f64 {
    let num = ej1a * (ra * phi_ex).sin() - ej1b * (rb * phi_ex).sin();
    let den = ej1a * (ra * phi_ex).cos() + ej1b * (rb * phi_ex).cos();
    let dnum = ej1a * ra * (ra * phi_ex).cos() - ej1b * rb * (rb * phi_ex).cos();
    let dden = -ej1a * ra * (ra * phi_ex).sin() - ej1b * rb * (rb * phi_ex).sin();
    (dnum * den - num * dden) / (num * num + den * den)
}

/// Taylor coefficients `(E_J1^(0), E_J1^(1), E_J1^(2))` of the SQUID energy at `phi_dc`.
pub fn taylor_coefficients(ej1a: f64, ej1b: f64, phi_dc: f64) -> Result<(f64, f64, f64)> {
    if !(ej1a > 0.0 && ej1b > 0.0) {
        return Err(KpoError::InvalidCircuit("junction energies must be positive".into()));
    }
    let (c, s) = (phi_dc.cos(), phi_dc.sin());
    let ej0 = (ej1a * ej1a + ej1b * ej1b + 2.0 * ej1a * ej1b * c).max(0.0).sqrt();
    if ej0 <= 1e-12 * (ej1a + ej1b) {
        return Err(KpoError::SingularExpansion { ej0 });
    }
    let prod = ej1a * ej1b;
    let ej1 = -prod * s / ej0;
    let ej2 = -(prod * (ej1a * ej1a + ej1b * ej1b) * c + prod * prod * (c * c + 1.0)) / (2.0 * ej0.powi(3));
    Ok((ej0, ej1, ej2))
}

pub fn derive_coefficients(p: &CircuitParams) -> Result<DerivedCoefficients> {
    p.validate()?;
    let (ej0, ej1_linear, ej1_quad) = taylor_coefficients(p.ej1a, p.ej1b, p.phi_dc)?;
    let ej1 = ej0 + 2.0 * ej1_quad * p.phi_ac_amp * p.phi_ac_amp;
    if ej1 <= 0.0 {
        return Err(KpoError::InvalidCircuit(format!("Stark-shifted E_J1 = {ej1:.4e} Hz is not positive")));
    }
    let (n1, n2) = (p.n1 as f64, p.n2 as f64);
    let c1 = p.cs + (p.cj1a + p.cj1b) / n1;
    let c2 = p.cs + p.cj2 / n2;
    if c1 * c2 - p.cs * p.cs <= 0.0 {
        return Err(KpoError::InvalidCircuit("capacitance matrix is singular".into()));
    }
    let xi = n2 * p.ej2 / (n1 * ej1);
    let opx = 1.0 + xi;
    let c_eff = (c1 + c2 * xi * xi + 2.0 * p.cs * xi) / (opx * opx);
    let ec = ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * c_eff) / PLANCK;
    let ek = (ej1 / n1 + xi * xi * p.ej2 / n2) / (opx * opx);
    let omega_k0 = (8.0 * ec * ek).sqrt();
    let quartic = (ej1 / n1.powi(3) + xi.powi(4) * p.ej2 / n2.powi(3)) / opx.powi(4);
    let kerr = quartic * ec / ek;
    let ratio = 2.0 * ec / ek;
    let pump_rate = -ej0 / (3.0 * opx.powi(3) * n1 * n1) * ratio.powf(0.75);
    let eta = -ratio.sqrt() / (4.0 * opx * opx * n1 * n1);
    let lambda_ac = lambda_derivative(p.ej1a, p.ej1b, p.ra, p.rb, p.phi_dc) * p.phi_ac_amp;
    Ok(DerivedCoefficients {
        ec,
        ek,
        xi,
        omega_k0,
        omega_k: omega_k0 - kerr,
        kerr,
        pump_rate,
        eta,
        zpf_n: (ek / (32.0 * ec)).powf(0.25),
        zpf_phi: ratio.powf(0.25),
        lambda_ac,
        pump: pump_rate * lambda_ac,
        ej1,
        ej1_linear,
    })
}

/// Adjusts `Cs` and the overall junction-energy scale of `template` so the
/// derived `(omega_K, K)` match the targets (Hz) to 1e-6 relative.
pub fn fit_to_measured(omega_k_meas: f64, kerr_meas: f64, template: &CircuitParams) -> Result<CircuitParams> {
    const MAX_ITER: usize = 100;
    if !(omega_k_meas > 0.0 && kerr_meas > 0.0) {
        return Err(KpoError::param("targets", "omega_K and K must be positive"));
    }
    template.validate()?;
    let target = [omega_k_meas.ln(), kerr_meas.ln()];
    let residual = |u: [f64; 2]| -> Option<[f64; 2]> {
        let d = derive_coefficients(&template.scaled(u[0].exp(), u[1].exp())).ok()?;
        if !(d.omega_k > 0.0 && d.kerr > 0.0) {
            return None;
        }
        Some([d.omega_k.ln() - target[0], d.kerr.ln() - target[1]])
    };
    let norm = |r: [f64; 2]| r[0].abs().max(r[1].abs());

    let mut u = [template.cs.ln(), 0.0];
    let mut r = residual(u).ok_or(KpoError::FitFailure { iterations: 0, residual: f64::INFINITY })?;
    for iter in 0..MAX_ITER {
        if norm(r) < 1e-12 {
            return Ok(template.scaled(u[0].exp(), u[1].exp()));
        }
        let h = 1e-6;
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let mut up = u;
            up[k] += h;
            let mut dn = u;
            dn[k] -= h;
            let (rp, rm) = match (residual(up), residual(dn)) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(KpoError::FitFailure { iterations: iter, residual: norm(r) }),
            };
            for i in 0..2 {
                jac[i][k] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det.abs() < 1e-14 || !det.is_finite() {
            return Err(KpoError::FitFailure { iterations: iter, residual: norm(r) });
        }
        let step = [
            -(jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
            -(-jac[1][0] * r[0] + jac[0][0] * r[1]) / det,
        ];
        // Backtracking keeps the log-parameters inside the physical region.
        let mut t = 1.0;
        loop {
            let trial = [u[0] + t * step[0], u[1] + t * step[1]];
            if let Some(rt) = residual(trial) {
                if norm(rt) < norm(r) {
                    u = trial;
                    r = rt;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-6 {
                return Err(KpoError::FitFailure { iterations: iter, residual: norm(r) });
            }
        }
    }
    if norm(r) < 1e-9 {
        return Ok(template.scaled(u[0].exp(), u[1].exp()));
    }
    Err(KpoError::FitFailure { iterations: MAX_ITER, residual: norm(r) })
}

/// One normal-ordered term `coefficient * (a^dagger)^creation * a^annihilation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalOrderTerm {
    pub creation: usize,
    pub annihilation: usize,
    pub coefficient: f64,
}

/// Normal-ordered expansion of `(a^dagger + sign * a)^n` for `1 <= n <= 6`.
pub fn normal_order_expansion(n: usize, sign: i8) -> Result<Vec<NormalOrderTerm>> {
    if !(1..=6).contains(&n) {
        return Err(KpoError::param("n", format!("expansion order {n} outside 1..=6")));
    }
    if sign != 1 && sign != -1 {
        return Err(KpoError::param("sign", "must be +1 or -1"));
    }
    let fact = |k: usize| (1..=k).product::<usize>() as f64;
    let mut terms = Vec::new();
    for k in 0..=n {
        for m in 0..=k / 2 {
            // Each surviving `a` and each contraction carries one factor of `sign`.
            let s = if (n - k + m) % 2 == 0 { 1.0 } else { f64::from(sign) };
            let c = fact(n) / (fact(n - k) * fact(k - 2 * m) * fact(m) * 2f64.powi(m as i32));
            terms.push(NormalOrderTerm { creation: k - 2 * m, annihilation: n - k, coefficient: s * c });
        }
    }
    Ok(terms)
}

fn coefficient_of(terms: &[NormalOrderTerm], creation: usize, annihilation: usize) -> f64 {
    terms
        .iter()
        .filter(|t| t.creation == creation && t.annihilation == annihilation)
        .map(|t| t.coefficient)
        .sum()
}

/// `(K, P per unit lambda_ac, eta)` obtained by expanding the phi^3, phi^4
/// and phi^5 potential terms in normal order and keeping only the terms
/// that survive the rotating-wave approximation at pump frequency
/// `3 omega_K`.
pub fn rwa_from_expansion(p: &CircuitParams) -> Result<(f64, f64, f64)> {
    let d = derive_coefficients(p)?;
    let (n1, n2) = (p.n1 as f64, p.n2 as f64);
    let opx = 1.0 + d.xi;
    let phi0 = d.zpf_phi;
    let (ej0, _, _) = taylor_coefficients(p.ej1a, p.ej1b, p.phi_dc)?;

    // -(1/24) c' phi^4: the a^dag^2 a^2 coefficient is -K/2.
    let quartic = (d.ej1 / n1.powi(3) + d.xi.powi(4) * p.ej2 / n2.powi(3)) / opx.powi(4);
    let t4 = normal_order_expansion(4, 1)?;
    let kerr = 2.0 * quartic / 24.0 * phi0.powi(4) * coefficient_of(&t4, 2, 2);

    // 2 gamma cos(w t) [x - x^3/6 + x^5/120], x = phi / ((1 + xi) N1), gamma = N1 E_J1^(0) lambda.
    // cos contributes 1/2 to the co-rotating a^dag^3 term.
    let gamma = n1 * ej0;
    let t3 = normal_order_expansion(3, 1)?;
    let half_p = -gamma / (3.0 * (opx * n1).powi(3)) * 0.5 * phi0.powi(3) * coefficient_of(&t3, 3, 0);
    let t5 = normal_order_expansion(5, 1)?;
    let half_p_eta = gamma / (60.0 * (opx * n1).powi(5)) * 0.5 * phi0.powi(5) * coefficient_of(&t5, 4, 1);
    Ok((kerr, 2.0 * half_p, half_p_eta / half_p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn squid_examples() {
        let (ej, lam) = squid_modulation(10.0, 14.0, 0.4, 0.6, 0.0);
        assert!((ej - 24.0).abs() < 1e-12 && lam == 0.0);
        let (ej, lam) = squid_modulation(10.0, 14.0, 0.4, 0.6, PI);
        assert!((ej - 4.0).abs() < 1e-6 && lam.is_finite());
        for phi in [-2.0, 0.3, 1.7] {
            assert!(squid_modulation(12.0, 12.0, 0.5, 0.5, phi).1.abs() < 1e-15);
        }
    }

    #[test]
    fn taylor_examples() {
        let (ej0, ej1, _) = taylor_coefficients(10.0, 14.0, 0.0).unwrap();
        assert_eq!((ej0, ej1), (24.0, 0.0));
        let (ej0, ej1, _) = taylor_coefficients(10.0, 14.0, PI / 2.0).unwrap();
        assert!((ej1 + 140.0 / ej0).abs() < 1e-12);
        assert!(matches!(taylor_coefficients(10.0, 10.0, PI), Err(KpoError::SingularExpansion { .. })));
    }

    #[test]
    fn taylor_matches_finite_differences() {
        let (a, b, phi) = (31.0e9, 43.4e9, 0.93);
        let (_, ej1, ej2) = taylor_coefficients(a, b, phi).unwrap();
        let e = |x: f64| squid_modulation(a, b, 0.5, 0.5, x).0;
        let h = 1e-4;
        let d1 = (e(phi + h) - e(phi - h)) / (2.0 * h);
        let d2 = (e(phi + h) - 2.0 * e(phi) + e(phi - h)) / (h * h);
        assert!(((ej1 - d1) / d1).abs() < 1e-6);
        assert!(((ej2 - d2 / 2.0) / ej2).abs() < 1e-5);
    }

    #[test]
    fn lambda_derivative_matches_finite_difference() {
        let (a, b, ra, rb) = (10.0, 14.0, 0.58, 0.42);
        for phi in [0.2, 0.936, 2.5] {
            let h = 1e-6;
            let fd = (squid_modulation(a, b, ra, rb, phi + h).1 - squid_modulation(a, b, ra, rb, phi - h).1) / (2.0 * h);
            assert!((lambda_derivative(a, b, ra, rb, phi) - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn expansion_examples() {
        let t1 = normal_order_expansion(1, 1).unwrap();
        assert_eq!(coefficient_of(&t1, 1, 0), 1.0);
        assert_eq!(coefficient_of(&t1, 0, 1), 1.0);
        let t2 = normal_order_expansion(2, 1).unwrap();
        assert_eq!(
            [coefficient_of(&t2, 2, 0), coefficient_of(&t2, 1, 1), coefficient_of(&t2, 0, 2), coefficient_of(&t2, 0, 0)],
            [1.0, 2.0, 1.0, 1.0]
        );
        let t2m = normal_order_expansion(2, -1).unwrap();
        // (a^dag - a)^2 = a^dag^2 - 2 a^dag a + a^2 - 1
        assert_eq!(
            [coefficient_of(&t2m, 2, 0), coefficient_of(&t2m, 1, 1), coefficient_of(&t2m, 0, 2), coefficient_of(&t2m, 0, 0)],
            [1.0, -2.0, 1.0, -1.0]
        );
        assert_eq!(coefficient_of(&normal_order_expansion(4, 1).unwrap(), 2, 2), 6.0);
        assert!(normal_order_expansion(7, 1).is_err());
        assert!(normal_order_expansion(0, 1).is_err());
    }

    #[test]
    fn symmetric_xi_one_inductive_energy() {
        // N1 EJ2 / (N1 EJ1) = 1 at phi_dc = 0 with EJ1a + EJ1b = EJ2.
        let p = CircuitParams {
            n1: 3,
            n2: 3,
            ej1a: 40e9,
            ej1b: 60e9,
            ej2: 100e9,
            phi_dc: 0.0,
            phi_ac_amp: 0.0,
            ..CircuitParams::device_template()
        };
        let d = derive_coefficients(&p).unwrap();
        assert!((d.xi - 1.0).abs() < 1e-12);
        assert!(((d.ek - (100e9 / 3.0 + 100e9 / 3.0) / 4.0) / d.ek).abs() < 1e-12);
    }

    #[test]
    fn irrotational_constraint_is_enforced() {
        let p = CircuitParams { ra: 0.5, rb: 0.6, ..CircuitParams::device_template() };
        let err = derive_coefficients(&p).unwrap_err();
        assert!(err.to_string().contains("irrotational constraint"));
    }
}
