//! Quasienergy spectrum, qutrit/excited manifold labels and the protection gap.
//!
//! `H` conserves photon number mod 3, so every computation here works on
//! the three sector blocks separately.

use rayon::prelude::*;

use crate::error::{KpoError, Result};
use crate::fock::{tail_population, Ket};
use crate::linalg::{eigh, CMatrix, CVector, C64};
use crate::model::{HamiltonianParts, KpoParams};

/// Tail-population guard for the labelled states.
pub const SPECTRUM_TAIL_LIMIT: f64 = 1e-8;
/// Default number of continuation steps.
pub const CONTINUATION_STEPS: usize = 20;
const MAX_CONTINUATION_STEPS: usize = 160;
const MIN_OVERLAP: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Ascending quasienergies in units of K.
    pub eigenvalues: Vec<f64>,
    pub eigenstates: Vec<Ket>,
    /// Photon-number sector (n mod 3) of each eigenstate.
    pub sector: Vec<usize>,
    /// `qutrit_indices[s]` is `|s_C>`.
    pub qutrit_indices: [usize; 3],
    /// `excited_indices[s]` is `|s_C^ex>`.
    pub excited_indices: Vec<usize>,
    /// `E(|0_C>) - E(|0_C^ex>)` in units of K.
    pub gap: f64,
    /// Steps used by the continuation.
    pub continuation_steps: usize,
}

impl SpectrumResult {
    pub fn qutrit(&self, s: usize) -> &Ket {
        &self.eigenstates[self.qutrit_indices[s]]
    }

    pub fn excited(&self, s: usize) -> &Ket {
        &self.eigenstates[self.excited_indices[s]]
    }

    pub fn qutrit_energy(&self, s: usize) -> f64 {
        self.eigenvalues[self.qutrit_indices[s]]
    }

    pub fn excited_energy(&self, s: usize) -> f64 {
        self.eigenvalues[self.excited_indices[s]]
    }

    pub fn dim(&self) -> usize {
        self.eigenstates.first().map_or(0, Ket::dim)
    }
}

/// Fock indices `n = s (mod 3)` below `dim`.
pub fn sector_indices(dim: usize, s: usize) -> Vec<usize> {
    (s..dim).step_by(3).collect()
}

fn block(h: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_fn(idx.len(), idx.len(), |r, c| h[(idx[r], idx[c])])
}

/// Eigen-decomposition of one sector block with a fixed gauge: the first
/// non-negligible amplitude of every eigenvector is real and positive.
fn block_eigh(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let (vals, mut vecs) = eigh(h);
    for mut col in vecs.column_iter_mut() {
        if let Some(pivot) = col.iter().copied().find(|z| z.norm() > 1e-10) {
            let phase = pivot.conj() / pivot.norm();
            col *= phase;
        }
    }
    (vals, vecs)
}

/// Local indices of the qutrit and excited states within one sector block.
struct SectorLabels {
    qutrit: usize,
    excited: usize,
}

/// Follows the eigenstates connected to the Fock states `|s>` and `|s+3>`
/// from `P = 0` to the full pump.
fn continue_sector(parts: &HamiltonianParts, s: usize, steps: usize) -> Result<SectorLabels> {
    let idx = sector_indices(parts.dim(), s);
    let drift = block(&parts.drift, &idx);
    let pump = block(&parts.pump, &idx);
    let n = idx.len();
    let mut tracked = [CVector::zeros(n), CVector::zeros(n)];
    tracked[0][0] = C64::new(1.0, 0.0);
    tracked[1][1] = C64::new(1.0, 0.0);
    let mut labels = [0usize, 1usize];

    let q: f64 = 1.1;
    let denom = q.powi(steps as i32) - 1.0;
    for k in 1..=steps {
        let scale = (q.powi(k as i32) - 1.0) / denom;
        let h = &drift + &pump * C64::from(scale);
        let (_, vecs) = block_eigh(&h);
        let overlaps: Vec<[f64; 2]> = (0..n)
            .map(|j| {
                let col = vecs.column(j);
                [tracked[0].dotc(&col).norm(), tracked[1].dotc(&col).norm()]
            })
            .collect();
        let best = |which: usize, exclude: Option<usize>| {
            (0..n)
                .filter(|&j| Some(j) != exclude)
                .max_by(|&a, &b| overlaps[a][which].total_cmp(&overlaps[b][which]))
                .unwrap()
        };
        let (mut bq, mut be) = (best(0, None), best(1, None));
        if bq == be {
            if overlaps[bq][0] >= overlaps[be][1] {
                be = best(1, Some(bq));
            } else {
                bq = best(0, Some(be));
            }
        }
        for (which, j) in [(0, bq), (1, be)] {
            let ov = overlaps[j][which];
            if ov < MIN_OVERLAP {
                return Err(KpoError::TrackingFailure { step: k, overlap: ov });
            }
            tracked[which] = vecs.column(j).into_owned();
        }
        labels = [bq, be];
    }
    Ok(SectorLabels { qutrit: labels[0], excited: labels[1] })
}

/// Per-sector `(qutrit, excited)` local indices into the sector block's
/// ascending eigenvalues, by adiabatic continuation along a pump ramp.
/// The step count starts at `steps` and doubles on tracking failure up to 160.
pub fn classify_manifolds(params: &KpoParams, dim: usize, steps: usize) -> Result<([(usize, usize); 3], usize)> {
    let parts = HamiltonianParts::build(params, dim)?;
    classify_with_parts(&parts, steps)
}

fn classify_with_parts(parts: &HamiltonianParts, steps: usize) -> Result<([(usize, usize); 3], usize)> {
    let mut steps = steps.max(1);
    loop {
        let attempt: Result<Vec<SectorLabels>> = (0..3).map(|s| continue_sector(parts, s, steps)).collect();
        match attempt {
            Ok(labels) => {
                let out = [0, 1, 2].map(|s| (labels[s].qutrit, labels[s].excited));
                return Ok((out, steps));
            }
            Err(e) if steps * 2 > MAX_CONTINUATION_STEPS => return Err(e),
            Err(_) => steps *= 2,
        }
    }
}

/// Full spectrum with manifold labels.
pub fn diagonalize(params: &KpoParams, dim: usize) -> Result<SpectrumResult> {
    let parts = HamiltonianParts::build(params, dim)?;
    let h = parts.at(1.0, 0.0);
    let (labels, steps) = classify_with_parts(&parts, CONTINUATION_STEPS)?;

    // (energy, sector, local index, full-space vector)
    let mut entries: Vec<(f64, usize, usize, CVector)> = Vec::with_capacity(dim);
    for s in 0..3 {
        let idx = sector_indices(dim, s);
        let (vals, vecs) = block_eigh(&block(&h, &idx));
        for (j, v) in vals.iter().enumerate() {
            let mut full = CVector::zeros(dim);
            for (r, &n) in idx.iter().enumerate() {
                full[n] = vecs[(r, j)];
            }
            entries.push((v / params.kerr, s, j, full));
        }
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let find = |s: usize, j: usize| entries.iter().position(|e| e.1 == s && e.2 == j).unwrap();
    let qutrit_indices = [0, 1, 2].map(|s| find(s, labels[s].0));
    let excited_indices: Vec<usize> = (0..3).map(|s| find(s, labels[s].1)).collect();

    let eigenvalues: Vec<f64> = entries.iter().map(|e| e.0).collect();
    let sector: Vec<usize> = entries.iter().map(|e| e.1).collect();
    let eigenstates: Vec<Ket> = entries.into_iter().map(|e| Ket::from_raw(e.3)).collect();

    for &i in qutrit_indices.iter().chain(&excited_indices) {
        let tail = tail_population(&eigenstates[i]);
        if tail > SPECTRUM_TAIL_LIMIT {
            return Err(KpoError::Truncation { dim, tail, limit: SPECTRUM_TAIL_LIMIT });
        }
    }

    let gap = eigenvalues[qutrit_indices[0]] - eigenvalues[excited_indices[0]];
    Ok(SpectrumResult { eigenvalues, eigenstates, sector, qutrit_indices, excited_indices, gap, continuation_steps: steps })
}

/// Signed gap `E(|0_C>) - E(|0_C^ex>)` in units of K for each `Delta/K`.
pub fn gap_curve(base: &KpoParams, delta_over_k: &[f64], dim: usize) -> Result<Vec<(f64, f64)>> {
    delta_over_k
        .par_iter()
        .map(|&d| {
            let p = base.with_delta(d * base.kerr);
            diagonalize(&p, dim).map(|r| (d, r.gap))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::mean_photon;

    #[test]
    fn kerr_ladder_labels() {
        let p = KpoParams::new(0.0, 1.0, 0.0, 0.0).unwrap();
        let r = diagonalize(&p, 12).unwrap();
        for s in 0..3 {
            assert!((r.qutrit(s).amplitudes()[s].norm() - 1.0).abs() < 1e-12);
            assert!((r.excited(s).amplitudes()[s + 3].norm() - 1.0).abs() < 1e-12);
        }
        assert!((r.gap - 3.0).abs() < 1e-12);
    }

    #[test]
    fn photon_numbers_at_delta_040() {
        let p = KpoParams::from_ratios(1.0, 0.40, 0.822, -0.04).unwrap();
        let r = diagonalize(&p, 40).unwrap();
        assert!((mean_photon(r.qutrit(0)) - 1.37).abs() < 0.02);
        assert!((mean_photon(r.excited(0)) - 2.04).abs() < 0.02);
    }
}
