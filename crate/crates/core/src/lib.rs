//! Core building blocks for a coherent-optical OFDM (CO-OFDM) simulation lab.
//!
//! The crate covers the full transmit/receive chain at complex baseband:
//!
//! * [`signal`] — PRBS generation, Gray-coded 16-QAM mapping and
//!   demapping, bit-error counting.
//! * [`ofdm`] — subcarrier layout, 1024-point (de)modulation, cyclic
//!   prefix handling and 52-symbol framing with an RF-pilot.
//! * [`papr`] — peak-to-average power ratio measurement, CCDF
//!   estimation, amplitude clipping and selective mapping.
//! * [`ae`] — a trainable encoder/decoder pair with a joint
//!   reconstruction + PAPR loss, exact gradients and weight persistence.
//! * [`channel`] — laser phase noise, IQ modulation, split-step fiber
//!   propagation over amplified spans, OSNR loading and coherent
//!   detection.
//! * [`rx`] — RF-pilot phase compensation, training-symbol channel
//!   estimation, one-tap equalization and the full receive chain.
//!
//! All stochastic operations take explicit seeds or RNGs, so every result
//! is reproducible from `(config, seed)`.

extern crate blas_src;

pub mod ae;
pub mod channel;
pub mod fft;
pub mod ofdm;
pub mod papr;
pub mod rx;
pub mod signal;

pub use num_complex::Complex64;

/// Complex baseband samples plus the rate at which they were taken.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
}

impl ComplexSignal {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of |s[k]|^2 over all samples.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

/// Derives an independent 64-bit stream seed from a master seed and a
/// stream index (SplitMix64 finalizer). Used wherever one master seed
/// must fan out into per-trial or per-candidate streams.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
