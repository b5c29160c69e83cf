//! Receiver DSP: RF-pilot phase-noise compensation, training-symbol
//! channel estimation, one-tap equalization, and the full receive chain
//! down to bits.

use crate::ae::{self, MlpParams};
use crate::ofdm::{self, OfdmLayout, DATA_SYMBOLS, FRAME_SYMBOLS, TRAINING_SYMBOLS};
use crate::signal::{self, BitSeq};
use crate::{fft, Complex64, ComplexSignal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RxError {
    #[error("pilot lost: extracted pilot power below 1e-12 of signal power")]
    PilotLost,
    #[error("expected {expected} symbol vectors, got {got}")]
    WrongVectorCount { expected: usize, got: usize },
    #[error("zero known training value at bin {0}")]
    ZeroTrainingValue(usize),
    #[error("unequalizable bin {0}: |H| below 1e-12")]
    UnequalizableBin(usize),
    #[error("signal length {got} is not a whole number of frames ({frame_len} samples each)")]
    BadFrameLength { got: usize, frame_len: usize },
    #[error("ofdm stage: {0}")]
    Ofdm(#[from] ofdm::OfdmError),
    #[error("decoder stage: {0}")]
    Ae(#[from] ae::AeError),
}

/// Per-data-bin complex channel coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub coefficients: Vec<Complex64>,
}

/// Extracts the pilot time series from a CP-free concatenated frame by a
/// brick-wall frequency-domain low-pass of one-sided width equal to the
/// guard band. The filter is applied per OFDM body window so data
/// subcarriers stay exactly orthogonal to the pilot band.
///
/// Returns the pilot series and its power relative to the signal.
fn extract_pilot(
    signal: &ComplexSignal,
    layout: &OfdmLayout,
) -> Result<(Vec<Complex64>, f64), RxError> {
    let n = layout.fft_size;
    if signal.len() == 0 || signal.len() % n != 0 {
        return Err(RxError::BadFrameLength {
            got: signal.len(),
            frame_len: n,
        });
    }
    let half_width = layout.guard_half_width();
    let mut pilot = Vec::with_capacity(signal.len());
    for block in signal.samples.chunks_exact(n) {
        let mut spectrum = block.to_vec();
        fft::fft(&mut spectrum);
        for (k, v) in spectrum.iter_mut().enumerate() {
            let dist = k.min(n - k); // distance from DC with wrap-around
            if dist > half_width {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        fft::ifft(&mut spectrum);
        pilot.extend(spectrum);
    }
    let pilot_power: f64 = pilot.iter().map(|p| p.norm_sqr()).sum();
    let signal_power: f64 = signal.samples.iter().map(|s| s.norm_sqr()).sum();
    if signal_power == 0.0 || pilot_power < 1e-12 * signal_power {
        return Err(RxError::PilotLost);
    }
    Ok((pilot, pilot_power / signal_power))
}

/// Removes common phase noise using the RF-pilot: the extracted pilot's
/// phase is conjugate-multiplied onto the signal pointwise,
/// out[k] = in[k] · conj(pilot[k]) / |pilot[k]|.
///
/// Input is the CP-free concatenated frame time series.
pub fn pilot_phase_compensate(
    signal: &ComplexSignal,
    layout: &OfdmLayout,
) -> Result<ComplexSignal, RxError> {
    let (pilot, _) = extract_pilot(signal, layout)?;
    let samples = signal
        .samples
        .iter()
        .zip(&pilot)
        .map(|(&s, &p)| {
            let mag = p.norm();
            if mag > 0.0 {
                s * p.conj() / mag
            } else {
                s
            }
        })
        .collect();
    Ok(ComplexSignal::new(samples, signal.sample_rate))
}

/// Least-squares channel estimate averaged over the training symbols:
/// H[i] = (1/4) Σ_m received_m[i] / known_m[i].
pub fn estimate_channel(
    received_training: &[Vec<Complex64>],
    known_training: &[Vec<Complex64>],
) -> Result<ChannelEstimate, RxError> {
    if received_training.len() != TRAINING_SYMBOLS || known_training.len() != TRAINING_SYMBOLS {
        return Err(RxError::WrongVectorCount {
            expected: TRAINING_SYMBOLS,
            got: received_training.len().min(known_training.len()),
        });
    }
    let bins = known_training[0].len();
    let mut coefficients = vec![Complex64::new(0.0, 0.0); bins];
    for (rx, tx) in received_training.iter().zip(known_training) {
        for (i, (r, k)) in rx.iter().zip(tx).enumerate() {
            if k.norm_sqr() == 0.0 {
                return Err(RxError::ZeroTrainingValue(i));
            }
            coefficients[i] += r / k;
        }
    }
    for c in coefficients.iter_mut() {
        *c /= TRAINING_SYMBOLS as f64;
    }
    Ok(ChannelEstimate { coefficients })
}

/// One-tap equalization: out[i] = in[i] / H[i].
pub fn equalize(
    data_bins: &[Complex64],
    est: &ChannelEstimate,
) -> Result<Vec<Complex64>, RxError> {
    data_bins
        .iter()
        .zip(&est.coefficients)
        .enumerate()
        .map(|(i, (&d, &h))| {
            if h.norm() < 1e-12 {
                Err(RxError::UnequalizableBin(i))
            } else {
                Ok(d / h)
            }
        })
        .collect()
}

/// Receive-chain settings: layout, the shared training pattern, an
/// optional trained decoder, and optional per-symbol SLM phase sequences
/// to undo (side information).
pub struct RxConfig<'a> {
    pub layout: &'a OfdmLayout,
    pub known_training: &'a [Vec<Complex64>],
    pub decoder: Option<&'a MlpParams>,
    /// One phase vector per data symbol; bins are divided by these after
    /// equalization. Empty means no SLM derotation.
    pub slm_phases: &'a [Vec<Complex64>],
}

/// Per-run diagnostics from the receive chain.
#[derive(Debug, Clone, Default)]
pub struct RxDiagnostics {
    pub frames: usize,
    /// Extracted pilot power / total signal power, per frame.
    pub pilot_power_ratio: Vec<f64>,
}

/// Full receive chain on a frame-aligned sample stream:
/// CP removal → pilot phase compensation → per-symbol transforms →
/// channel estimation on the training symbols → equalization →
/// (AE decoder | identity) → QAM demapping → concatenated bits.
pub fn receive_chain(
    signal: &ComplexSignal,
    cfg: &RxConfig,
) -> Result<(BitSeq, RxDiagnostics), RxError> {
    let layout = cfg.layout;
    let frame_len = FRAME_SYMBOLS * layout.symbol_len();
    if signal.len() == 0 || signal.len() % frame_len != 0 {
        return Err(RxError::BadFrameLength {
            got: signal.len(),
            frame_len,
        });
    }
    let num_frames = signal.len() / frame_len;
    let mut bits = Vec::new();
    let mut diagnostics = RxDiagnostics {
        frames: num_frames,
        ..Default::default()
    };

    for f in 0..num_frames {
        let frame = &signal.samples[f * frame_len..(f + 1) * frame_len];
        // CP removal, concatenating the 1024-sample bodies
        let mut body = Vec::with_capacity(FRAME_SYMBOLS * layout.fft_size);
        for s in 0..FRAME_SYMBOLS {
            let sym = &frame[s * layout.symbol_len()..(s + 1) * layout.symbol_len()];
            body.extend_from_slice(&sym[layout.cp_len..]);
        }
        let body_sig = ComplexSignal::new(body, signal.sample_rate);
        let (pilot, ratio) = extract_pilot(&body_sig, layout)?;
        diagnostics.pilot_power_ratio.push(ratio);
        let compensated_samples: Vec<Complex64> = body_sig
            .samples
            .iter()
            .zip(&pilot)
            .map(|(&s, &p)| {
                let mag = p.norm();
                if mag > 0.0 {
                    s * p.conj() / mag
                } else {
                    s
                }
            })
            .collect();
        let compensated = ComplexSignal::new(compensated_samples, signal.sample_rate);

        // per-symbol demodulation
        let mut freq: Vec<Vec<Complex64>> = Vec::with_capacity(FRAME_SYMBOLS);
        for s in 0..FRAME_SYMBOLS {
            let sym = &compensated.samples[s * layout.fft_size..(s + 1) * layout.fft_size];
            freq.push(ofdm::ofdm_demodulate_body(sym, layout)?);
        }
        let est = estimate_channel(&freq[..TRAINING_SYMBOLS], cfg.known_training)?;
        for (d, sym) in freq[TRAINING_SYMBOLS..].iter().enumerate() {
            let mut eq = equalize(sym, &est)?;
            if !cfg.slm_phases.is_empty() {
                let phases = &cfg.slm_phases[f * DATA_SYMBOLS + d];
                for (v, p) in eq.iter_mut().zip(phases) {
                    *v /= p;
                }
            }
            let symbols = match cfg.decoder {
                Some(params) => {
                    let latent = ae::LatentBlock::from_complex(&eq);
                    let reals = ae::decoder_forward(&latent, params)?;
                    ae::unpack_symbols(&reals)
                }
                None => eq,
            };
            bits.extend(signal::qam16_demap(&symbols).bits);
        }
    }
    Ok((BitSeq::new(bits), diagnostics))
}
