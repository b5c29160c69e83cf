//! Electro-optic front end, laser phase noise, split-step fiber
//! propagation over amplified spans, OSNR noise loading, and coherent
//! detection back to electrical baseband.
//!
//! Single polarization, scalar NLSE. Fields carry units of sqrt(W).

use crate::{fft, ComplexSignal};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Speed of light, m/s.
const C_LIGHT: f64 = 299_792_458.0;
/// OSNR reference bandwidth (0.1 nm at 1550 nm), Hz.
pub const OSNR_REF_BANDWIDTH: f64 = 12.5e9;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("sample rate must be positive")]
    BadSampleRate,
    #[error("split-step increment must be positive")]
    BadStep,
    #[error("cannot normalize a zero-power signal to a launch power")]
    ZeroPowerSignal,
    #[error("signal is empty")]
    EmptySignal,
}

/// Per-span fiber physics plus link-level span count and amplifier gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberLinkConfig {
    pub span_length_km: f64,
    pub num_spans: usize,
    pub alpha_db_per_km: f64,
    /// Chromatic dispersion D, ps/(nm·km).
    pub dispersion_ps_nm_km: f64,
    /// Kerr nonlinearity, 1/(W·km).
    pub gamma_per_w_km: f64,
    pub amp_gain_db: f64,
    pub wavelength_nm: f64,
    pub step_km: f64,
    pub launch_power_dbm: f64,
}

impl Default for FiberLinkConfig {
    fn default() -> Self {
        Self {
            span_length_km: 80.0,
            num_spans: 10,
            alpha_db_per_km: 0.2,
            dispersion_ps_nm_km: 16.0,
            gamma_per_w_km: 1.3,
            amp_gain_db: 16.0,
            wavelength_nm: 1550.0,
            step_km: 0.5,
            launch_power_dbm: 0.0,
        }
    }
}

impl FiberLinkConfig {
    /// Group-velocity dispersion beta2 in s²/m (negative for D > 0,
    /// anomalous dispersion at 1550 nm).
    pub fn beta2_s2_per_m(&self) -> f64 {
        let d_si = self.dispersion_ps_nm_km * 1e-6; // s/m²
        let lambda = self.wavelength_nm * 1e-9;
        -d_si * lambda * lambda / (2.0 * std::f64::consts::PI * C_LIGHT)
    }

    /// Attenuation in Np/m.
    pub fn alpha_np_per_m(&self) -> f64 {
        self.alpha_db_per_km * (10.0_f64.ln() / 10.0) / 1000.0
    }

    /// Launch power in watts.
    pub fn launch_power_w(&self) -> f64 {
        10f64.powf((self.launch_power_dbm - 30.0) / 10.0)
    }
}

/// Transmit or local-oscillator laser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserSpec {
    pub linewidth_hz: f64,
    pub initial_phase: f64,
}

impl Default for LaserSpec {
    fn default() -> Self {
        Self {
            linewidth_hz: 100e3,
            initial_phase: 0.0,
        }
    }
}

/// Mach-Zehnder drive model for [`iq_modulate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MzmMode {
    /// Ideal linear transfer (default: isolates PAPR-induced fiber effects).
    Linear,
    /// Sine transfer per quadrature: v -> sin(pi·v/(2·v_pi))·2·v_pi/pi,
    /// which approaches the linear model for drives far below v_pi.
    Sine { v_pi: f64 },
}

/// Wiener phase-noise walk: increments are N(0, 2π·linewidth/sample_rate).
pub fn phase_noise_sequence<R: Rng>(
    n: usize,
    laser: &LaserSpec,
    sample_rate: f64,
    rng: &mut R,
) -> Result<Vec<f64>, ChannelError> {
    if sample_rate <= 0.0 {
        return Err(ChannelError::BadSampleRate);
    }
    let var = 2.0 * std::f64::consts::PI * laser.linewidth_hz / sample_rate;
    let dist = Normal::new(0.0, var.sqrt()).expect("variance >= 0");
    let mut phases = Vec::with_capacity(n);
    let mut phi = laser.initial_phase;
    for i in 0..n {
        if i > 0 {
            phi += dist.sample(rng);
        }
        phases.push(phi);
    }
    Ok(phases)
}

/// E/O conversion: scales the baseband to the requested launch power and
/// impresses the transmit laser's phase noise. Output is an optical field
/// in sqrt(W).
pub fn iq_modulate<R: Rng>(
    baseband: &ComplexSignal,
    laser: &LaserSpec,
    launch_power_dbm: f64,
    mode: MzmMode,
    rng: &mut R,
) -> Result<ComplexSignal, ChannelError> {
    if baseband.is_empty() {
        return Err(ChannelError::EmptySignal);
    }
    let driven: Vec<Complex64> = match mode {
        MzmMode::Linear => baseband.samples.clone(),
        MzmMode::Sine { v_pi } => baseband
            .samples
            .iter()
            .map(|s| {
                let k = std::f64::consts::PI / (2.0 * v_pi);
                Complex64::new((k * s.re).sin() / k, (k * s.im).sin() / k)
            })
            .collect(),
    };
    let mean_power = driven.iter().map(|s| s.norm_sqr()).sum::<f64>() / driven.len() as f64;
    if mean_power == 0.0 {
        return Err(ChannelError::ZeroPowerSignal);
    }
    let target = 10f64.powf((launch_power_dbm - 30.0) / 10.0);
    let scale = (target / mean_power).sqrt();
    let phases = phase_noise_sequence(driven.len(), laser, baseband.sample_rate, rng)?;
    let samples = driven
        .iter()
        .zip(&phases)
        .map(|(s, &phi)| s * scale * Complex64::from_polar(1.0, phi))
        .collect();
    Ok(ComplexSignal::new(samples, baseband.sample_rate))
}

/// One fiber span integrated with the symmetric split-step Fourier
/// method: half-step linear exp((-α/2 - j(β₂/2)ω²)·h/2) in the frequency
/// domain, full nonlinear step exp(jγ|A|²h), half-step linear.
pub fn ssfm_span(
    field: &ComplexSignal,
    cfg: &FiberLinkConfig,
    sample_rate: f64,
) -> Result<ComplexSignal, ChannelError> {
    if sample_rate <= 0.0 {
        return Err(ChannelError::BadSampleRate);
    }
    if cfg.step_km <= 0.0 {
        return Err(ChannelError::BadStep);
    }
    let n = field.len();
    if n == 0 {
        return Err(ChannelError::EmptySignal);
    }
    let alpha = cfg.alpha_np_per_m();
    let beta2 = cfg.beta2_s2_per_m();
    let gamma = cfg.gamma_per_w_km / 1000.0;
    let omega = fft::angular_frequencies(n, sample_rate);

    let span_m = cfg.span_length_km * 1000.0;
    let full_steps = (cfg.span_length_km / cfg.step_km).floor() as usize;
    let mut step_lengths = vec![cfg.step_km * 1000.0; full_steps];
    let remainder = span_m - full_steps as f64 * cfg.step_km * 1000.0;
    if remainder > 1e-9 {
        step_lengths.push(remainder);
    }

    let mut a = field.samples.clone();
    let linear_half = |a: &mut Vec<Complex64>, h: f64| {
        fft::fft(a);
        for (v, &w) in a.iter_mut().zip(&omega) {
            let op = Complex64::new(-alpha / 2.0, -(beta2 / 2.0) * w * w) * (h / 2.0);
            *v *= op.exp();
        }
        fft::ifft(a);
    };
    for &h in &step_lengths {
        linear_half(&mut a, h);
        for v in a.iter_mut() {
            let phi = gamma * v.norm_sqr() * h;
            *v *= Complex64::from_polar(1.0, phi);
        }
        linear_half(&mut a, h);
    }
    Ok(ComplexSignal::new(a, sample_rate))
}

/// Full link: `num_spans` repetitions of fiber span followed by a flat
/// amplifier gain. No in-line ASE is added; OSNR is imposed separately
/// by [`set_osnr`].
pub fn propagate_link(
    field: &ComplexSignal,
    cfg: &FiberLinkConfig,
    sample_rate: f64,
) -> Result<ComplexSignal, ChannelError> {
    let gain = 10f64.powf(cfg.amp_gain_db / 20.0);
    let mut current = field.clone();
    for _ in 0..cfg.num_spans {
        current = ssfm_span(&current, cfg, sample_rate)?;
        for v in current.samples.iter_mut() {
            *v *= gain;
        }
    }
    Ok(current)
}

/// Loads circular complex white Gaussian noise so the OSNR referenced to
/// the standard 12.5 GHz bandwidth equals `osnr_db`. Passing
/// `f64::INFINITY` leaves the signal untouched.
pub fn set_osnr<R: Rng>(
    signal: &ComplexSignal,
    osnr_db: f64,
    sample_rate: f64,
    rng: &mut R,
) -> Result<ComplexSignal, ChannelError> {
    if sample_rate <= 0.0 {
        return Err(ChannelError::BadSampleRate);
    }
    let p_sig = signal.mean_power();
    if p_sig == 0.0 || signal.is_empty() {
        return Err(ChannelError::ZeroPowerSignal);
    }
    if osnr_db.is_infinite() {
        return Ok(signal.clone());
    }
    let noise_power = p_sig / 10f64.powf(osnr_db / 10.0) * (sample_rate / OSNR_REF_BANDWIDTH);
    let sigma = (noise_power / 2.0).sqrt(); // per quadrature
    let dist = Normal::new(0.0, sigma).expect("sigma >= 0");
    let samples = signal
        .samples
        .iter()
        .map(|&s| s + Complex64::new(dist.sample(rng), dist.sample(rng)))
        .collect();
    Ok(ComplexSignal::new(samples, sample_rate))
}

/// Ideal 90° hybrid + balanced detection: mixes with the LO and collapses
/// to a pure phase rotation by the LO phase walk (responsivity 1).
pub fn coherent_detect<R: Rng>(
    field: &ComplexSignal,
    lo: &LaserSpec,
    rng: &mut R,
) -> Result<ComplexSignal, ChannelError> {
    if field.is_empty() {
        return Err(ChannelError::EmptySignal);
    }
    let phases = phase_noise_sequence(field.len(), lo, field.sample_rate, rng)?;
    let samples = field
        .samples
        .iter()
        .zip(&phases)
        .map(|(s, &phi)| s * Complex64::from_polar(1.0, -phi))
        .collect();
    Ok(ComplexSignal::new(samples, field.sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_signal(n: usize, seed: u64, fs: f64) -> ComplexSignal {
        let mut r = rng(seed);
        let samples = (0..n)
            .map(|_| Complex64::new(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5))
            .collect();
        ComplexSignal::new(samples, fs)
    }

    #[test]
    fn zero_linewidth_gives_constant_phase() {
        let laser = LaserSpec {
            linewidth_hz: 0.0,
            initial_phase: 1.25,
        };
        let seq = phase_noise_sequence(100, &laser, 2.5e9, &mut rng(0)).unwrap();
        assert!(seq.iter().all(|&p| p == 1.25));
    }

    #[test]
    fn phase_increment_variance_matches_linewidth() {
        let laser = LaserSpec {
            linewidth_hz: 100e3,
            initial_phase: 0.0,
        };
        let fs = 2.5e9;
        let seq = phase_noise_sequence(1_000_001, &laser, fs, &mut rng(3)).unwrap();
        let increments: Vec<f64> = seq.windows(2).map(|w| w[1] - w[0]).collect();
        let var: f64 =
            increments.iter().map(|d| d * d).sum::<f64>() / increments.len() as f64;
        let expect = 2.0 * std::f64::consts::PI * 100e3 / fs;
        assert!(
            (var - expect).abs() / expect < 0.03,
            "var {var} vs {expect}"
        );
    }

    #[test]
    fn phase_noise_is_seed_deterministic() {
        let laser = LaserSpec::default();
        let a = phase_noise_sequence(1000, &laser, 2.5e9, &mut rng(9)).unwrap();
        let b = phase_noise_sequence(1000, &laser, 2.5e9, &mut rng(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn launch_power_normalization() {
        let s = random_signal(4096, 1, 2.5e9);
        let laser = LaserSpec {
            linewidth_hz: 0.0,
            initial_phase: 0.0,
        };
        let out = iq_modulate(&s, &laser, 0.0, MzmMode::Linear, &mut rng(0)).unwrap();
        let rel = (out.mean_power() - 1e-3).abs() / 1e-3;
        assert!(rel < 1e-9, "relative error {rel}");
    }

    #[test]
    fn linear_mode_zero_linewidth_is_pure_scaling() {
        let s = random_signal(256, 2, 2.5e9);
        let laser = LaserSpec {
            linewidth_hz: 0.0,
            initial_phase: 0.0,
        };
        let out = iq_modulate(&s, &laser, 0.0, MzmMode::Linear, &mut rng(0)).unwrap();
        let scale = (1e-3 / s.mean_power()).sqrt();
        for (a, b) in s.samples.iter().zip(&out.samples) {
            assert!((a * scale - b).norm() < 1e-15);
        }
    }

    #[test]
    fn sine_drive_matches_linear_in_small_signal_regime() {
        // tiny drive relative to v_pi -> sine transfer is linear within 1%
        let mut s = random_signal(1024, 3, 2.5e9);
        for v in s.samples.iter_mut() {
            *v *= 0.01;
        }
        let laser = LaserSpec {
            linewidth_hz: 0.0,
            initial_phase: 0.0,
        };
        let lin = iq_modulate(&s, &laser, 0.0, MzmMode::Linear, &mut rng(0)).unwrap();
        let sin = iq_modulate(&s, &laser, 0.0, MzmMode::Sine { v_pi: 1.0 }, &mut rng(0)).unwrap();
        for (a, b) in lin.samples.iter().zip(&sin.samples) {
            assert!((a - b).norm() / a.norm().max(1e-12) < 0.01);
        }
    }

    #[test]
    fn dispersion_only_preserves_power() {
        let cfg = FiberLinkConfig {
            alpha_db_per_km: 0.0,
            gamma_per_w_km: 0.0,
            ..FiberLinkConfig::default()
        };
        let s = random_signal(2048, 4, 2.5e9);
        let out = ssfm_span(&s, &cfg, 2.5e9).unwrap();
        let rel = (out.mean_power() - s.mean_power()).abs() / s.mean_power();
        assert!(rel < 1e-9, "relative error {rel}");
    }

    #[test]
    fn spm_only_preserves_magnitude_and_shifts_phase() {
        let cfg = FiberLinkConfig {
            alpha_db_per_km: 0.0,
            dispersion_ps_nm_km: 0.0,
            ..FiberLinkConfig::default()
        };
        let s = random_signal(512, 5, 2.5e9);
        let out = ssfm_span(&s, &cfg, 2.5e9).unwrap();
        let gamma = cfg.gamma_per_w_km / 1000.0;
        let l_m = cfg.span_length_km * 1000.0;
        for (a, b) in s.samples.iter().zip(&out.samples) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
            let expect = a * Complex64::from_polar(1.0, gamma * a.norm_sqr() * l_m);
            assert!((expect - b).norm() < 1e-9);
        }
    }

    #[test]
    fn gaussian_pulse_broadens_per_closed_form() {
        // dispersion-only propagation of exp(-t^2/(2 T0^2)):
        // T1 = T0 sqrt(1 + (beta2 L / T0^2)^2)
        // fine grid + short pulse so beta2·L/T0^2 ~ 1 (measurable broadening)
        let fs = 250e9;
        let n = 8192;
        let t0 = 40e-12;
        let cfg = FiberLinkConfig {
            alpha_db_per_km: 0.0,
            gamma_per_w_km: 0.0,
            span_length_km: 80.0,
            step_km: 80.0, // linear case is exact in one step
            ..FiberLinkConfig::default()
        };
        let samples: Vec<Complex64> = (0..n)
            .map(|i| {
                let t = (i as f64 - n as f64 / 2.0) / fs;
                Complex64::new((-t * t / (2.0 * t0 * t0)).exp(), 0.0)
            })
            .collect();
        let out = ssfm_span(&ComplexSignal::new(samples, fs), &cfg, fs).unwrap();
        // rms width of |A|^2 profile; for a Gaussian, T = sqrt(2)·rms
        let rms = |sig: &[Complex64]| -> f64 {
            let p: Vec<f64> = sig.iter().map(|s| s.norm_sqr()).collect();
            let total: f64 = p.iter().sum();
            let mean_t: f64 = p
                .iter()
                .enumerate()
                .map(|(i, w)| (i as f64 - n as f64 / 2.0) / fs * w)
                .sum::<f64>()
                / total;
            (p.iter()
                .enumerate()
                .map(|(i, w)| {
                    let t = (i as f64 - n as f64 / 2.0) / fs - mean_t;
                    t * t * w
                })
                .sum::<f64>()
                / total)
                .sqrt()
        };
        let beta2_l = cfg.beta2_s2_per_m() * cfg.span_length_km * 1000.0;
        let t1_expect = t0 * (1.0 + (beta2_l / (t0 * t0)).powi(2)).sqrt();
        let t1_measured = rms(&out.samples) * std::f64::consts::SQRT_2;
        let rel = (t1_measured - t1_expect).abs() / t1_expect;
        assert!(rel < 0.005, "relative width error {rel}");
    }

    #[test]
    fn dispersion_compensation_round_trip() {
        let fs = 2.5e9;
        let base = FiberLinkConfig {
            alpha_db_per_km: 0.0,
            gamma_per_w_km: 0.0,
            step_km: 10.0,
            ..FiberLinkConfig::default()
        };
        let inverted = FiberLinkConfig {
            dispersion_ps_nm_km: -base.dispersion_ps_nm_km,
            ..base
        };
        let s = random_signal(2048, 6, fs);
        let fwd = ssfm_span(&s, &base, fs).unwrap();
        let back = ssfm_span(&fwd, &inverted, fs).unwrap();
        let max_err = s
            .samples
            .iter()
            .zip(&back.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-9, "max error {max_err}");
    }

    #[test]
    fn link_gain_cancels_loss_for_linear_fiber() {
        let cfg = FiberLinkConfig {
            gamma_per_w_km: 0.0,
            step_km: 5.0,
            ..FiberLinkConfig::default()
        };
        let s = random_signal(2048, 7, 2.5e9);
        let out = propagate_link(&s, &cfg, 2.5e9).unwrap();
        let rel = (out.mean_power() - s.mean_power()).abs() / s.mean_power();
        assert!(rel < 1e-6, "relative error {rel}");
    }

    #[test]
    fn zero_spans_is_identity() {
        let cfg = FiberLinkConfig {
            num_spans: 0,
            ..FiberLinkConfig::default()
        };
        let s = random_signal(128, 8, 2.5e9);
        let out = propagate_link(&s, &cfg, 2.5e9).unwrap();
        assert_eq!(out.samples, s.samples);
    }

    #[test]
    fn step_halving_converges() {
        let fs = 2.5e9;
        let s = random_signal(4096, 9, fs);
        // scale to 0 dBm launch
        let scale = (1e-3 / s.mean_power()).sqrt();
        let launched = ComplexSignal::new(
            s.samples.iter().map(|v| v * scale).collect(),
            fs,
        );
        let coarse_cfg = FiberLinkConfig {
            step_km: 1.0,
            ..FiberLinkConfig::default()
        };
        let fine_cfg = FiberLinkConfig {
            step_km: 0.5,
            ..FiberLinkConfig::default()
        };
        let coarse = ssfm_span(&launched, &coarse_cfg, fs).unwrap();
        let fine = ssfm_span(&launched, &fine_cfg, fs).unwrap();
        let num: f64 = coarse
            .samples
            .iter()
            .zip(&fine.samples)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let den: f64 = fine.samples.iter().map(|s| s.norm_sqr()).sum();
        let rel_rms = (num / den).sqrt();
        assert!(rel_rms < 1e-3, "step-convergence rel RMS {rel_rms}");
    }

    #[test]
    fn osnr_loading_hits_requested_ratio() {
        let fs = 2.5e9;
        let s = random_signal(1_000_000, 10, fs);
        let osnr_db = 20.0;
        let out = set_osnr(&s, osnr_db, fs, &mut rng(11)).unwrap();
        let noise_power: f64 = out
            .samples
            .iter()
            .zip(&s.samples)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / s.len() as f64;
        let measured_snr_db = 10.0 * (s.mean_power() / noise_power).log10();
        // SNR over the simulation band = OSNR - 10 log10(fs/Bref)
        let expected_snr = osnr_db - 10.0 * (fs / OSNR_REF_BANDWIDTH).log10();
        assert!(
            (measured_snr_db - expected_snr).abs() < 0.1,
            "measured {measured_snr_db}, expected {expected_snr}"
        );
    }

    #[test]
    fn infinite_osnr_is_identity() {
        let s = random_signal(64, 12, 2.5e9);
        let out = set_osnr(&s, f64::INFINITY, 2.5e9, &mut rng(0)).unwrap();
        assert_eq!(out.samples, s.samples);
    }

    #[test]
    fn osnr_noise_is_seed_deterministic() {
        let s = random_signal(256, 13, 2.5e9);
        let a = set_osnr(&s, 25.0, 2.5e9, &mut rng(4)).unwrap();
        let b = set_osnr(&s, 25.0, 2.5e9, &mut rng(4)).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn detection_with_quiet_lo_is_identity_or_sign_flip() {
        let s = random_signal(128, 14, 2.5e9);
        let quiet = LaserSpec {
            linewidth_hz: 0.0,
            initial_phase: 0.0,
        };
        let out = coherent_detect(&s, &quiet, &mut rng(0)).unwrap();
        assert_eq!(out.samples, s.samples);

        let flipped = LaserSpec {
            linewidth_hz: 0.0,
            initial_phase: std::f64::consts::PI,
        };
        let out = coherent_detect(&s, &flipped, &mut rng(0)).unwrap();
        for (a, b) in s.samples.iter().zip(&out.samples) {
            assert!((a + b).norm() < 1e-12);
        }
    }

    #[test]
    fn detection_preserves_magnitudes() {
        let s = random_signal(128, 15, 2.5e9);
        let lo = LaserSpec::default();
        let out = coherent_detect(&s, &lo, &mut rng(5)).unwrap();
        for (a, b) in s.samples.iter().zip(&out.samples) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
    }
}
