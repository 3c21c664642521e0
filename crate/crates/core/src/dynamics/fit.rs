//! Decaying-cosine fit used to read oscillation frequencies off time series.

use std::f64::consts::PI;

use nalgebra::{Matrix5, Vector5};
use rustfft::FftPlanner;

use crate::error::{KpoError, Result};
use crate::linalg::C64;

/// Result of fitting `A exp(-(t - t0)/tau) cos(2 pi f t + phi) + C`, with
/// `t0` the first sample time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapFit {
    /// Hz.
    pub frequency: f64,
    /// Seconds; infinite when the fitted envelope does not decay.
    pub decay_time: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    /// Root-mean-square residual.
    pub rms_residual: f64,
}

fn model(p: &Vector5<f64>, t: f64) -> f64 {
    let (a, g, f, phi, c) = (p[0], p[1], p[2], p[3], p[4]);
    a * (-g * t).exp() * (2.0 * PI * f * t + phi).cos() + c
}

fn jacobian_row(p: &Vector5<f64>, t: f64) -> Vector5<f64> {
    let (a, g, f, phi) = (p[0], p[1], p[2], p[3]);
    let e = (-g * t).exp();
    let arg = 2.0 * PI * f * t + phi;
    let (s, c) = arg.sin_cos();
    Vector5::new(e * c, -t * a * e * c, -2.0 * PI * t * a * e * s, -a * e * s, 1.0)
}

/// Fits a decaying cosine to uniformly sampled `series(times)`.
///
/// The starting frequency comes from the periodogram peak; Levenberg-Marquardt
/// refines all five parameters. At least 8 periods with 8 samples per period
/// are required.
pub fn fft_gap(times: &[f64], series: &[f64]) -> Result<GapFit> {
    let n = times.len();
    if n != series.len() {
        return Err(KpoError::DimensionMismatch { expected: n, got: series.len() });
    }
    if n < 64 {
        return Err(KpoError::InsufficientSampling(format!("{n} samples; need at least 64")));
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(dt > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(KpoError::InsufficientSampling("samples must be uniformly spaced".into()));
    }
    let t0 = times[0];
    let mean = series.iter().sum::<f64>() / n as f64;

    let mut buf: Vec<C64> = series.iter().map(|&x| C64::new(x - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mags: Vec<f64> = buf.iter().map(|z| z.norm()).collect();
    let peak = (1..n / 2).max_by(|&a, &b| mags[a].total_cmp(&mags[b])).unwrap_or(1);
    let shift = if peak + 1 < n / 2 {
        let (l, c, r) = (mags[peak - 1], mags[peak], mags[peak + 1]);
        let den = l - 2.0 * c + r;
        if den.abs() > 0.0 { (0.5 * (l - r) / den).clamp(-0.5, 0.5) } else { 0.0 }
    } else {
        0.0
    };
    let span = dt * n as f64;
    let f0 = (peak as f64 + shift) / span;
    let periods = f0 * (times[n - 1] - t0);
    if periods < 8.0 {
        return Err(KpoError::InsufficientSampling(format!("{periods:.2} periods sampled; need at least 8")));
    }
    if 1.0 / (f0 * dt) < 8.0 {
        return Err(KpoError::InsufficientSampling(format!("{:.2} samples per period; need at least 8", 1.0 / (f0 * dt))));
    }

    let ts: Vec<f64> = times.iter().map(|t| t - t0).collect();
    let cost = |p: &Vector5<f64>| ts.iter().zip(series).map(|(&t, &y)| (model(p, t) - y).powi(2)).sum::<f64>();

    // Coarse scan of the phase around the periodogram estimate picks a
    // starting point inside the basin of the global minimum.
    let amp0 = 2.0 * mags[peak] / n as f64;
    let mut p = Vector5::new(amp0, 0.0, f0, buf[peak].arg(), mean);
    let mut best = cost(&p);
    for k in 0..16 {
        let trial = Vector5::new(amp0, 0.0, f0, 2.0 * PI * k as f64 / 16.0, mean);
        let c = cost(&trial);
        if c < best {
            best = c;
            p = trial;
        }
    }

    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..500 {
        let mut jtj = Matrix5::<f64>::zeros();
        let mut jtr = Vector5::<f64>::zeros();
        for (&t, &y) in ts.iter().zip(series) {
            let j = jacobian_row(&p, t);
            let r = y - model(&p, t);
            jtj += j * j.transpose();
            jtr += j * r;
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj;
            for d in 0..5 {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-300);
            }
            let Some(step) = a.cholesky().map(|ch| ch.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            let c = cost(&trial);
            if c.is_finite() && c <= best {
                let rel = (best - c) / best.max(1e-300);
                let small_step = (0..5).all(|d| step[d].abs() <= 1e-12 * trial[d].abs().max(1e-12));
                p = trial;
                best = c;
                lambda = (lambda / 10.0).max(1e-15);
                improved = true;
                if rel < 1e-15 || small_step {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No descent direction left: the current point is a minimum.
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged || !p.iter().all(|v| v.is_finite()) {
        return Err(KpoError::FitNonConvergence("Levenberg-Marquardt iteration limit reached".into()));
    }
    if p[0] < 0.0 {
        p[0] = -p[0];
        p[3] += PI;
    }
    let phase = (p[3] - 2.0 * PI * p[2] * t0).rem_euclid(2.0 * PI);
    let rms = (best / n as f64).sqrt();
    if p[2] <= 0.0 {
        return Err(KpoError::FitNonConvergence(format!("non-positive fitted frequency {}", p[2])));
    }
    Ok(GapFit {
        frequency: p[2],
        decay_time: if p[1] > 0.0 { 1.0 / p[1] } else { f64::INFINITY },
        amplitude: p[0],
        phase,
        offset: p[4],
        rms_residual: rms,
    })
}
