//! Adaptive Dormand-Prince 5(4) integrator for complex ODE systems with
//! continuous (dense) output at requested sample times.

use crate::error::{KpoError, Result};
use crate::linalg::{C64, ZERO};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step size, in the time unit of the system.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-12, h_max: f64::INFINITY, max_steps: 5_000_000 }
    }
}

/// Counters from a completed integration.
#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn combine(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = ZERO;
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        *o = y[i] + acc * h;
    }
}

fn error_norm(err: &[C64], y0: &[C64], y1: &[C64], opts: &OdeOptions) -> f64 {
    let n = err.len().max(1) as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = opts.atol + opts.rtol * a.norm().max(b.norm());
            (e.norm() / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

/// Integrates `dy/dt = f(t, y)` from `t0` through every time in `samples`
/// (ascending, each `>= t0`), calling `on_sample(index, t, y)` at each.
///
/// Returns the state at the last sample.
pub fn integrate<F, S>(
    mut f: F,
    t0: f64,
    y0: Vec<C64>,
    samples: &[f64],
    opts: &OdeOptions,
    mut on_sample: S,
) -> Result<(Vec<C64>, OdeStats)>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    S: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    if samples.windows(2).any(|w| w[1] < w[0]) || samples.first().is_some_and(|&s| s < t0) {
        return Err(KpoError::param("samples", "sample times must be ascending and not before t0"));
    }
    let n = y0.len();
    let mut stats = OdeStats::default();
    let mut y = y0;
    let mut t = t0;
    let mut next = 0;
    while next < samples.len() && samples[next] <= t0 {
        on_sample(next, samples[next], &y)?;
        next += 1;
    }
    let Some(&t_end) = samples.last() else {
        return Ok((y, stats));
    };
    if next == samples.len() {
        return Ok((y, stats));
    }

    let mut k1 = vec![ZERO; n];
    let mut k2 = vec![ZERO; n];
    let mut k3 = vec![ZERO; n];
    let mut k4 = vec![ZERO; n];
    let mut k5 = vec![ZERO; n];
    let mut k6 = vec![ZERO; n];
    let mut k7 = vec![ZERO; n];
    let mut tmp = vec![ZERO; n];
    let mut y_new = vec![ZERO; n];
    let mut err = vec![ZERO; n];
    let mut dense = vec![ZERO; n];

    f(t, &y, &mut k1);
    stats.rhs_evaluations += 1;

    let mut h = initial_step(&mut f, t, &y, &k1, opts, t_end - t0, &mut stats);
    let mut h_prev_rejected = false;

    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(KpoError::IntegratorAccuracy(format!("step budget {} exhausted at t = {t:.6e}", opts.max_steps)));
        }
        h = h.min(opts.h_max).min(t_end - t);
        if h <= 1e-14 * t.abs().max(t_end.abs()) || h <= f64::MIN_POSITIVE {
            return Err(KpoError::StepUnderflow { t, h });
        }

        combine(&mut tmp, &y, h, &[(A21, &k1)]);
        f(t + C2 * h, &tmp, &mut k2);
        combine(&mut tmp, &y, h, &[(A31, &k1), (A32, &k2)]);
        f(t + C3 * h, &tmp, &mut k3);
        combine(&mut tmp, &y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        f(t + C4 * h, &tmp, &mut k4);
        combine(&mut tmp, &y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        f(t + C5 * h, &tmp, &mut k5);
        combine(&mut tmp, &y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        f(t + h, &tmp, &mut k6);
        combine(&mut y_new, &y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        f(t + h, &y_new, &mut k7);
        stats.rhs_evaluations += 6;

        for i in 0..n {
            err[i] = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
        }
        let e = error_norm(&err, &y, &y_new, opts);
        if !e.is_finite() {
            stats.rejected += 1;
            h *= 0.2;
            h_prev_rejected = true;
            continue;
        }
        if e > 1.0 {
            stats.rejected += 1;
            h *= (0.9 * e.powf(-0.2)).max(0.2);
            h_prev_rejected = true;
            continue;
        }

        stats.accepted += 1;
        let t_new = if h >= t_end - t { t_end } else { t + h };
        while next < samples.len() && samples[next] <= t_new {
            let theta = ((samples[next] - t) / h).clamp(0.0, 1.0);
            let theta1 = 1.0 - theta;
            for i in 0..n {
                let r2 = y_new[i] - y[i];
                let r3 = k1[i] * h - r2;
                let r4 = r2 - k7[i] * h - r3;
                let r5 = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * h;
                dense[i] = y[i] + (r2 + (r3 + (r4 + r5 * theta1) * theta) * theta1) * theta;
            }
            on_sample(next, samples[next], &dense)?;
            next += 1;
        }
        std::mem::swap(&mut y, &mut y_new);
        std::mem::swap(&mut k1, &mut k7);
        t = t_new;
        if next == samples.len() {
            return Ok((y, stats));
        }

        let mut factor = (0.9 * e.max(1e-10).powf(-0.2)).clamp(0.2, 10.0);
        if h_prev_rejected {
            factor = factor.min(1.0);
        }
        h_prev_rejected = false;
        h *= factor;
    }
}

fn initial_step<F>(f: &mut F, t: f64, y: &[C64], f0: &[C64], opts: &OdeOptions, span: f64, stats: &mut OdeStats) -> f64
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = y.len().max(1) as f64;
    let scale: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.norm()).collect();
    let rms = |v: &[C64]| (v.iter().zip(&scale).map(|(a, s)| (a.norm() / s).powi(2)).sum::<f64>() / n).sqrt();
    let d0 = rms(y);
    let d1 = rms(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
    h0 = h0.min(opts.h_max).min(span);
    let y1: Vec<C64> = y.iter().zip(f0).map(|(a, b)| a + b * h0).collect();
    let mut f1 = vec![ZERO; y.len()];
    f(t + h0, &y1, &mut f1);
    stats.rhs_evaluations += 1;
    let diff: Vec<C64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6 * span) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(opts.h_max).min(span)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::I;

    #[test]
    fn harmonic_phase_with_dense_output() {
        let omega = 3.0;
        let samples: Vec<f64> = (0..=50).map(|k| k as f64 * 0.1).collect();
        let mut seen = Vec::new();
        integrate(
            |_, y, dy| dy[0] = -I * omega * y[0],
            0.0,
            vec![C64::new(1.0, 0.0)],
            &samples,
            &OdeOptions::default(),
            |_, t, y| {
                seen.push((t, y[0]));
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(seen.len(), samples.len());
        for (t, z) in seen {
            assert!((z - (-I * omega * t).exp()).norm() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn exponential_decay() {
        let (y, _) = integrate(
            |_, y, dy| dy[0] = -y[0] * 2.0,
            0.0,
            vec![C64::new(1.0, 0.0)],
            &[1.5],
            &OdeOptions::default(),
            |_, _, _| Ok(()),
        )
        .unwrap();
        assert!((y[0].re - (-3.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn rejects_descending_samples() {
        let r = integrate(|_, _, dy| dy[0] = ZERO, 0.0, vec![ZERO], &[1.0, 0.5], &OdeOptions::default(), |_, _, _| Ok(()));
        assert!(r.is_err());
    }
}
