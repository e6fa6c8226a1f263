//! Seeded Monte Carlo harness.
//!
//! Every trial derives its own RNG stream from (master seed, experiment,
//! cell, trial), so results do not depend on scheduling or thread count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{tuple_dist, AtomicModel};
use crate::shape::Shape;
use crate::{C64, CVector};

pub mod experiments;

pub use experiments::{
    decomp_sweep, noisy_mse, phase_transition, DecompCellSummary, DecompReport,
    DecompSweepConfig, NoisyCellSummary, NoisyConfig, NoisyReport, PhaseCellSummary,
    PhaseConfig, PhaseReport,
};

/// Experiment domains, kept distinct so streams never collide across runners.
#[derive(Debug, Clone, Copy)]
pub enum StreamDomain {
    DecompSweep = 1,
    PhaseTransition = 2,
    NoisyMse = 3,
    Adhoc = 4,
}

/// Counter-based stream: the four words fill the ChaCha key directly.
pub fn trial_rng(master: u64, domain: StreamDomain, cell: u64, trial: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    key[16..24].copy_from_slice(&cell.to_le_bytes());
    key[24..32].copy_from_slice(&trial.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Budget for the rejection loop in [`random_freqs`].
pub const DRAW_BUDGET: usize = 1_000_000;

/// Frequency tuples with pairwise wrap Chebyshev separation at least
/// `min_sep`, drawn uniformly one at a time with rejection.
pub fn random_freqs<R: Rng>(
    d: usize,
    r: usize,
    min_sep: f64,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let mut freqs: Vec<Vec<f64>> = Vec::with_capacity(r);
    let mut draws = 0usize;
    while freqs.len() < r {
        if draws >= DRAW_BUDGET {
            return Err(Error::SearchFailed(format!(
                "could not place {r} frequencies at separation {min_sep} in {DRAW_BUDGET} draws"
            )));
        }
        draws += 1;
        let cand: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let ok = freqs.iter().all(|f| {
            let dist = tuple_dist(f, &cand);
            dist >= min_sep && dist > 0.0
        });
        if ok {
            freqs.push(cand);
        }
    }
    Ok(freqs)
}

/// Random model with positive powers `w^2 + 0.5`, `w` standard normal.
pub fn random_model<R: Rng>(
    d: usize,
    r: usize,
    min_sep: f64,
    rng: &mut R,
) -> Result<AtomicModel> {
    let freqs = random_freqs(d, r, min_sep, rng)?;
    let powers = (0..r)
        .map(|_| {
            let w: f64 = rng.sample(StandardNormal);
            w * w + 0.5
        })
        .collect();
    AtomicModel::new(freqs, powers)
}

/// One draw from the standard complex normal distribution.
pub fn complex_normal<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Random model with standard complex normal amplitudes.
pub fn random_signal_model<R: Rng>(
    d: usize,
    r: usize,
    min_sep: f64,
    rng: &mut R,
) -> Result<AtomicModel> {
    let freqs = random_freqs(d, r, min_sep, rng)?;
    let amps = (0..r).map(|_| complex_normal(rng)).collect();
    AtomicModel::with_amplitudes(freqs, amps)
}

/// Sorted selection of `m` distinct grid positions.
pub fn random_mask<R: Rng>(n: usize, m: usize, rng: &mut R) -> Vec<usize> {
    let mut mask = rand::seq::index::sample(rng, n, m).into_vec();
    mask.sort_unstable();
    mask
}

/// Dense complex white noise with per-entry variance `sigma2`.
pub fn complex_noise<R: Rng>(n: usize, sigma2: f64, rng: &mut R) -> CVector {
    let s = sigma2.sqrt();
    CVector::from_iter((0..n).map(|_| complex_normal(rng) * s))
}

/// The eight-atom demonstration constellation: one pair shares its first
/// coordinate, one pair its second, and one pair sits 0.045 apart in
/// Euclidean distance, well under the grid resolution.
pub fn demo_freqs() -> Vec<Vec<f64>> {
    vec![
        vec![0.10, 0.20],
        vec![0.10, 0.75],
        vec![0.35, 0.55],
        vec![0.62, 0.55],
        vec![0.50, 0.30],
        vec![0.532, 0.332],
        vec![0.80, 0.85],
        vec![0.25, 0.90],
    ]
}

pub fn demo_model<R: Rng>(rng: &mut R) -> AtomicModel {
    let freqs = demo_freqs();
    let amps = (0..freqs.len()).map(|_| complex_normal(rng)).collect();
    AtomicModel::with_amplitudes(freqs, amps).expect("valid fixed constellation")
}

/// Greedy pairing between two atom sets: repeatedly match the globally
/// closest (est, truth) pair in wrap Chebyshev distance, powers breaking
/// ties. Unmatched atoms on either side count as distance 0.5 (the metric
/// diameter).
#[derive(Debug, Clone)]
pub struct MatchReport {
    pub matched: usize,
    /// Largest matched distance, 0.5 when a side ran out of atoms.
    pub max_freq_err: f64,
    /// Mean squared matched distance with 0.25 per unmatched truth atom.
    pub mean_sq_freq_err: f64,
}

pub fn match_models(est: &AtomicModel, truth: &AtomicModel) -> MatchReport {
    let ne = est.order();
    let nt = truth.order();
    let mut est_used = vec![false; ne];
    let mut truth_used = vec![false; nt];
    let mut dists = Vec::new();
    for _ in 0..ne.min(nt) {
        let mut best: Option<(f64, f64, usize, usize)> = None;
        for i in 0..ne {
            if est_used[i] {
                continue;
            }
            for j in 0..nt {
                if truth_used[j] {
                    continue;
                }
                let d = tuple_dist(&est.freqs[i], &truth.freqs[j]);
                let tie = -(est.powers[i] + truth.powers[j]);
                if best.map_or(true, |(bd, bt, _, _)| (d, tie) < (bd, bt)) {
                    best = Some((d, tie, i, j));
                }
            }
        }
        let (d, _, i, j) = best.expect("pairs remain");
        est_used[i] = true;
        truth_used[j] = true;
        dists.push(d);
    }
    let matched = dists.len();
    let missing = nt.saturating_sub(matched) + ne.saturating_sub(matched);
    let mut max_err = dists.iter().cloned().fold(0.0f64, f64::max);
    if missing > 0 {
        max_err = 0.5;
    }
    let denom = matched + nt.saturating_sub(matched);
    let mean_sq = if denom == 0 {
        0.0
    } else {
        let sum: f64 = dists.iter().map(|d| d * d).sum::<f64>()
            + 0.25 * nt.saturating_sub(matched) as f64;
        sum / denom as f64
    };
    MatchReport { matched, max_freq_err: max_err, mean_sq_freq_err: mean_sq }
}

#[derive(Debug, Clone)]
pub struct TrialEval {
    pub success: bool,
    pub freq_err: f64,
    pub rmse: f64,
}

/// Success per the recovery thresholds: matching atom counts, frequency
/// error under 1e-6 in wrap Chebyshev distance, and relative signal error
/// under 1e-6.
pub fn evaluate_success(
    est: &AtomicModel,
    truth: &AtomicModel,
    y_est: &CVector,
    y_true: &CVector,
) -> TrialEval {
    let m = match_models(est, truth);
    let denom = y_true.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let num = y_est
        .iter()
        .zip(y_true.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let rmse = if denom > 0.0 { num / denom } else { num };
    let success = est.order() == truth.order() && m.max_freq_err < 1e-6 && rmse < 1e-6;
    TrialEval { success, freq_err: m.max_freq_err, rmse }
}

/// Full-grid signal of a model with amplitudes.
pub fn signal_of(shape: &Shape, model: &AtomicModel) -> Result<CVector> {
    crate::steering::model_signal(shape, model)
}
