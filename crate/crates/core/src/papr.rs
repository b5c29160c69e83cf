//! PAPR measurement, CCDF estimation, and the two baseline reduction
//! methods: amplitude clipping and selective mapping.

use crate::ofdm::{self, OfdmLayout};
use crate::{derive_seed, Complex64};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PaprError {
    #[error("PAPR is undefined for an empty signal")]
    EmptySignal,
    #[error("PAPR is undefined for an all-zero signal")]
    ZeroSignal,
    #[error("CCDF needs at least one PAPR sample")]
    NoSamples,
    #[error("clip ratio must lie in (0, 1], got {0}")]
    BadClipRatio(f64),
    #[error("selective mapping needs at least one candidate, got {0}")]
    NoCandidates(usize),
    #[error(transparent)]
    Ofdm(#[from] ofdm::OfdmError),
}

/// Empirical complementary CDF of PAPR over a threshold grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CcdfCurve {
    pub thresholds_db: Vec<f64>,
    pub probabilities: Vec<f64>,
    /// Exceedance counts behind each probability.
    pub exceed_counts: Vec<usize>,
    pub sample_count: usize,
}

/// Outcome of selective mapping: the phase-rotated frequency vector that
/// won the PAPR argmin, plus the side information needed to undo it.
#[derive(Debug, Clone)]
pub struct SlmResult {
    pub selected: Vec<Complex64>,
    pub candidate_index: usize,
    pub papr_db: f64,
    /// The per-bin phase sequence applied to the winner (all-ones for
    /// candidate 0); the receiver divides this out.
    pub phases: Vec<Complex64>,
}

/// 10·log10(max|w|² / mean|w|²).
pub fn papr_db(samples: &[Complex64]) -> Result<f64, PaprError> {
    if samples.is_empty() {
        return Err(PaprError::EmptySignal);
    }
    let mut peak = 0.0_f64;
    let mut sum = 0.0_f64;
    for s in samples {
        let p = s.norm_sqr();
        peak = peak.max(p);
        sum += p;
    }
    if sum == 0.0 {
        return Err(PaprError::ZeroSignal);
    }
    let mean = sum / samples.len() as f64;
    Ok(10.0 * (peak / mean).log10())
}

/// CCDF over a threshold grid, using strict exceedance (#samples > t)/N.
pub fn ccdf_estimate(papr_samples: &[f64], thresholds_db: &[f64]) -> Result<CcdfCurve, PaprError> {
    if papr_samples.is_empty() {
        return Err(PaprError::NoSamples);
    }
    let n = papr_samples.len();
    let exceed_counts: Vec<usize> = thresholds_db
        .iter()
        .map(|&t| papr_samples.iter().filter(|&&p| p > t).count())
        .collect();
    let probabilities = exceed_counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(CcdfCurve {
        thresholds_db: thresholds_db.to_vec(),
        probabilities,
        exceed_counts,
        sample_count: n,
    })
}

/// Hard amplitude clipping at T = clip_ratio · max|x|, phases preserved.
pub fn clip_signal(samples: &[Complex64], clip_ratio: f64) -> Result<Vec<Complex64>, PaprError> {
    if samples.is_empty() {
        return Err(PaprError::EmptySignal);
    }
    if !(clip_ratio > 0.0 && clip_ratio <= 1.0) {
        return Err(PaprError::BadClipRatio(clip_ratio));
    }
    let max_amp = samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
    let threshold = clip_ratio * max_amp;
    Ok(samples
        .iter()
        .map(|&s| {
            if s.norm() > threshold {
                Complex64::from_polar(threshold, s.arg())
            } else {
                s
            }
        })
        .collect())
}

/// The per-bin phase sequence for SLM candidate `m`: candidate 0 is the
/// identity, later candidates draw each bin from {+1, -1, +j, -j} on a
/// stream derived from `(phase_seed, m)`.
pub fn slm_phase_sequence(phase_seed: u64, m: usize, num_bins: usize) -> Vec<Complex64> {
    if m == 0 {
        return vec![Complex64::new(1.0, 0.0); num_bins];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(phase_seed, m as u64));
    (0..num_bins)
        .map(|_| match rng.gen_range(0..4u8) {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(-1.0, 0.0),
            2 => Complex64::new(0.0, 1.0),
            _ => Complex64::new(0.0, -1.0),
        })
        .collect()
}

/// Selective mapping: evaluates `num_candidates` phase-rotated versions
/// of the frequency-domain symbol and returns the one with the lowest
/// body PAPR (ties to the lowest index). PAPR is measured on the CP-free
/// 1024-sample body.
pub fn slm_reduce(
    freq_symbols: &[Complex64],
    num_candidates: usize,
    layout: &OfdmLayout,
    phase_seed: u64,
) -> Result<SlmResult, PaprError> {
    if num_candidates < 1 {
        return Err(PaprError::NoCandidates(num_candidates));
    }
    let mut best: Option<SlmResult> = None;
    for m in 0..num_candidates {
        let phases = slm_phase_sequence(phase_seed, m, freq_symbols.len());
        let rotated: Vec<Complex64> = freq_symbols
            .iter()
            .zip(&phases)
            .map(|(&c, &p)| c * p)
            .collect();
        let body = ofdm::ofdm_modulate_body(&rotated, layout)?;
        let papr = papr_db(&body)?;
        let better = match &best {
            None => true,
            Some(b) => papr < b.papr_db,
        };
        if better {
            best = Some(SlmResult {
                selected: rotated,
                candidate_index: m,
                papr_db: papr,
                phases,
            });
        }
    }
    Ok(best.expect("num_candidates >= 1"))
}
