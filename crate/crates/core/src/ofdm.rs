//! Subcarrier layout, OFDM (de)modulation, cyclic prefix handling,
//! RF-pilot insertion and 52-symbol framing.
//!
//! Bins are addressed as signed offsets around DC (-N/2 .. N/2-1) and
//! mapped to transform order by the usual wrap-around. The inverse
//! transform carries the 1/N factor; the forward carries none.

use crate::fft;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OfdmError {
    #[error("layout counts inconsistent: data {data} + zero_pad {zero_pad} + guard {guard} + 1 pilot != fft_size {fft_size}")]
    InconsistentCounts {
        data: usize,
        zero_pad: usize,
        guard: usize,
        fft_size: usize,
    },
    #[error("guard and zero-pad counts must be even (split across both sides)")]
    OddSideCount,
    #[error("expected {expected} frequency-domain values, got {got}")]
    WrongSymbolCount { expected: usize, got: usize },
    #[error("expected {expected} time samples, got {got}")]
    WrongSampleCount { expected: usize, got: usize },
    #[error("expected {expected} symbol vectors, got {got}")]
    WrongVectorCount { expected: usize, got: usize },
}

/// Layout parameters; `Default` gives the full-scale 1024-bin system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayoutConfig {
    pub fft_size: usize,
    pub num_data: usize,
    pub num_guard: usize,
    pub num_zero_pad: usize,
    pub cp_len: usize,
    /// Linear amplitude of the RF-pilot placed at DC.
    pub pilot_gain: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            fft_size: 1024,
            num_data: 855,
            num_guard: 40,
            num_zero_pad: 128,
            cp_len: 128,
            // -10 dB pilot-to-signal power ratio for unit-power data symbols
            pilot_gain: (0.1 * 855.0_f64).sqrt(),
        }
    }
}

/// The subcarrier allocation map: which FFT bin carries what.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmLayout {
    pub fft_size: usize,
    /// Data bin indices in transform order, listed negative offsets
    /// ascending then positive offsets ascending.
    pub data_indices: Vec<usize>,
    pub pilot_index: usize,
    pub guard_indices: Vec<usize>,
    pub zero_pad_indices: Vec<usize>,
    pub cp_len: usize,
    pub pilot_gain: f64,
}

impl OfdmLayout {
    pub fn num_data(&self) -> usize {
        self.data_indices.len()
    }

    /// Samples per OFDM symbol including the cyclic prefix.
    pub fn symbol_len(&self) -> usize {
        self.fft_size + self.cp_len
    }

    /// Half-width of the pilot guard band, in subcarrier spacings.
    pub fn guard_half_width(&self) -> usize {
        self.guard_indices.len() / 2
    }
}

fn offset_to_index(offset: i64, n: usize) -> usize {
    ((offset + n as i64) % n as i64) as usize
}

/// Builds the deterministic subcarrier map: pilot at DC, guards at
/// offsets ±1..±g, data occupying offsets −(g+dn)..−(g+1) and
/// +(g+1)..+(g+dp) (extra bin on the negative side when the data count
/// is odd), zero-pad at the band edges.
///
/// Data ordering: symbol index i is interpreted as frequency i (mod
/// num_data) of the critical-rate (num_data-point) inverse transform —
/// the grid the autoencoder's PAPR loss acts on. Each such frequency is
/// placed at the identical signed offset in the full grid whenever the
/// guard band allows, so frequency-shaped inputs keep their time-domain
/// envelope up to interpolation; the low frequencies the guard band
/// excludes are zipped in ascending order onto the leftover band-edge
/// bins.
pub fn build_layout(cfg: &LayoutConfig) -> Result<OfdmLayout, OfdmError> {
    if cfg.num_data + cfg.num_zero_pad + cfg.num_guard + 1 != cfg.fft_size {
        return Err(OfdmError::InconsistentCounts {
            data: cfg.num_data,
            zero_pad: cfg.num_zero_pad,
            guard: cfg.num_guard,
            fft_size: cfg.fft_size,
        });
    }
    if cfg.num_guard % 2 != 0 || cfg.num_zero_pad % 2 != 0 {
        return Err(OfdmError::OddSideCount);
    }
    let n = cfg.fft_size;
    let g = (cfg.num_guard / 2) as i64;
    let dn = cfg.num_data.div_ceil(2) as i64; // negative-side data count
    let dp = cfg.num_data as i64 - dn;

    let pilot_index = 0;
    let mut guard_indices = Vec::with_capacity(cfg.num_guard);
    for k in 1..=g {
        guard_indices.push(offset_to_index(-k, n));
        guard_indices.push(offset_to_index(k, n));
    }

    let m = cfg.num_data as i64;
    let mut available: std::collections::BTreeSet<i64> = (-(g + dn)..=-(g + 1))
        .chain((g + 1)..=(g + dp))
        .collect();
    let latent_freq = |i: i64| if i <= (m - 1) / 2 { i } else { i - m };
    let mut data_offsets = vec![i64::MIN; cfg.num_data];
    let mut stragglers: Vec<(i64, usize)> = Vec::new();
    for i in 0..cfg.num_data {
        let nu = latent_freq(i as i64);
        if available.remove(&nu) {
            data_offsets[i] = nu;
        } else {
            stragglers.push((nu, i));
        }
    }
    stragglers.sort_unstable();
    for (&off, &(_, i)) in available.iter().zip(&stragglers) {
        data_offsets[i] = off;
    }
    let data_indices: Vec<usize> = data_offsets
        .iter()
        .map(|&off| offset_to_index(off, n))
        .collect();

    let mut zero_pad_indices = Vec::with_capacity(cfg.num_zero_pad);
    for off in -(n as i64 / 2)..-(g + dn) {
        zero_pad_indices.push(offset_to_index(off, n));
    }
    for off in (g + dp + 1)..(n as i64 / 2) {
        zero_pad_indices.push(offset_to_index(off, n));
    }

    Ok(OfdmLayout {
        fft_size: n,
        data_indices,
        pilot_index,
        guard_indices,
        zero_pad_indices,
        cp_len: cfg.cp_len,
        pilot_gain: cfg.pilot_gain,
    })
}

/// Embeds frequency-domain data into the layout and returns the CP-free
/// time-domain body (length `fft_size`).
pub fn ofdm_modulate_body(
    freq_symbols: &[Complex64],
    layout: &OfdmLayout,
) -> Result<Vec<Complex64>, OfdmError> {
    if freq_symbols.len() != layout.num_data() {
        return Err(OfdmError::WrongSymbolCount {
            expected: layout.num_data(),
            got: freq_symbols.len(),
        });
    }
    let mut bins = vec![Complex64::new(0.0, 0.0); layout.fft_size];
    for (&idx, &v) in layout.data_indices.iter().zip(freq_symbols) {
        bins[idx] = v;
    }
    bins[layout.pilot_index] = Complex64::new(layout.pilot_gain, 0.0);
    fft::ifft(&mut bins);
    Ok(bins)
}

/// Full OFDM modulation: layout embedding, inverse transform, and a
/// cyclic prefix copied from the tail of the body. Output length is
/// `fft_size + cp_len`.
pub fn ofdm_modulate(
    freq_symbols: &[Complex64],
    layout: &OfdmLayout,
) -> Result<Vec<Complex64>, OfdmError> {
    let body = ofdm_modulate_body(freq_symbols, layout)?;
    let mut out = Vec::with_capacity(layout.symbol_len());
    out.extend_from_slice(&body[layout.fft_size - layout.cp_len..]);
    out.extend_from_slice(&body);
    Ok(out)
}

/// Strips the CP, applies the forward transform, and reads the data bins
/// in layout order.
pub fn ofdm_demodulate(
    signal: &[Complex64],
    layout: &OfdmLayout,
) -> Result<Vec<Complex64>, OfdmError> {
    if signal.len() != layout.symbol_len() {
        return Err(OfdmError::WrongSampleCount {
            expected: layout.symbol_len(),
            got: signal.len(),
        });
    }
    let mut bins = signal[layout.cp_len..].to_vec();
    fft::fft(&mut bins);
    Ok(layout.data_indices.iter().map(|&i| bins[i]).collect())
}

/// Demodulates a CP-free body (length `fft_size`).
pub fn ofdm_demodulate_body(
    body: &[Complex64],
    layout: &OfdmLayout,
) -> Result<Vec<Complex64>, OfdmError> {
    if body.len() != layout.fft_size {
        return Err(OfdmError::WrongSampleCount {
            expected: layout.fft_size,
            got: body.len(),
        });
    }
    let mut bins = body.to_vec();
    fft::fft(&mut bins);
    Ok(layout.data_indices.iter().map(|&i| bins[i]).collect())
}

pub const FRAME_SYMBOLS: usize = 52;
pub const TRAINING_SYMBOLS: usize = 4;
pub const DATA_SYMBOLS: usize = FRAME_SYMBOLS - TRAINING_SYMBOLS;

/// One OFDM frame: 52 time-domain symbols, the first 4 of which are
/// training symbols.
#[derive(Debug, Clone)]
pub struct OfdmFrame {
    /// 52 symbols, each `fft_size + cp_len` samples.
    pub symbols: Vec<Vec<Complex64>>,
    /// Frame positions flagged as training (always 0..3 here).
    pub training_mask: Vec<usize>,
}

impl OfdmFrame {
    /// Concatenates all symbols into one contiguous sample stream.
    pub fn concatenate(&self) -> Vec<Complex64> {
        self.symbols.iter().flatten().copied().collect()
    }
}

/// Deterministic training symbols: a seeded ±1±j pattern (unit power)
/// on every data bin, shared between transmitter and receiver.
pub fn training_symbols(seed: u64, layout: &OfdmLayout) -> Vec<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..TRAINING_SYMBOLS)
        .map(|_| {
            (0..layout.num_data())
                .map(|_| {
                    let re = if rng.gen::<bool>() { s } else { -s };
                    let im = if rng.gen::<bool>() { s } else { -s };
                    Complex64::new(re, im)
                })
                .collect()
        })
        .collect()
}

/// Modulates 4 training + 48 data symbol vectors into a frame
/// (training at positions 0..3).
pub fn assemble_frame(
    data_symbols: &[Vec<Complex64>],
    training: &[Vec<Complex64>],
    layout: &OfdmLayout,
) -> Result<OfdmFrame, OfdmError> {
    if data_symbols.len() != DATA_SYMBOLS {
        return Err(OfdmError::WrongVectorCount {
            expected: DATA_SYMBOLS,
            got: data_symbols.len(),
        });
    }
    if training.len() != TRAINING_SYMBOLS {
        return Err(OfdmError::WrongVectorCount {
            expected: TRAINING_SYMBOLS,
            got: training.len(),
        });
    }
    let mut symbols = Vec::with_capacity(FRAME_SYMBOLS);
    for t in training {
        symbols.push(ofdm_modulate(t, layout)?);
    }
    for d in data_symbols {
        symbols.push(ofdm_modulate(d, layout)?);
    }
    Ok(OfdmFrame {
        symbols,
        training_mask: (0..TRAINING_SYMBOLS).collect(),
    })
}

/// Demodulates every symbol of a frame back to frequency-domain vectors.
pub fn disassemble_frame(
    frame: &OfdmFrame,
    layout: &OfdmLayout,
) -> Result<Vec<Vec<Complex64>>, OfdmError> {
    frame
        .symbols
        .iter()
        .map(|s| ofdm_demodulate(s, layout))
        .collect()
}
