//! Training loop: seeded 16-QAM batches, combined loss, adaptive
//! per-parameter first/second-moment updates, and windowed convergence.

use super::{grad, AeError, MlpParams};
use crate::signal::{self, BitSeq};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("total loss became non-finite at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error(transparent)]
    Ae(#[from] AeError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Real width of the AE input/latent (2 × complex symbols per block).
    pub width: usize,
    pub noise_sigma: f64,
    pub lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// Convergence is assessed on windows of this many iterations.
    pub convergence_window: usize,
    /// Stop when the windowed mean total loss improves by less than this
    /// relative amount.
    pub convergence_tol: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Linear learning-rate ramp over this many initial iterations.
    /// Bias-corrected adaptive steps start at full magnitude (±lr per
    /// parameter) before the moment estimates are informative, which at
    /// this width is enough to destroy the initialization in one move;
    /// the ramp keeps the first steps proportionally small.
    pub warmup_iterations: usize,
    /// Reconstruction-loss level the weight controller holds training at;
    /// 0 selects `sigma² + 0.02` automatically. The PAPR weight applied
    /// each iteration is `lambda` scaled down whenever an EMA of the
    /// reconstruction loss sits above this target, which stops the PAPR
    /// term from dragging the encoder into the constant-latent collapse
    /// (the PAPR gradient is batch-consistent while the reconstruction
    /// restoring force is not, so adaptive per-parameter steps otherwise
    /// favor the collapse).
    pub recon_target: f64,
    /// Per-iteration multiplicative gain of the weight controller.
    pub controller_gain: f64,
    /// Learning-rate multiplier for the decoder stack. A decoder that
    /// adapts faster than the encoder keeps the reconstruction gradient
    /// informative while the encoder reshapes the latent.
    pub decoder_lr_mult: f64,
    /// Center the PAPR latent gradient across each batch
    /// (see [`grad::total_loss_and_gradients_opts`]).
    pub center_papr_grad: bool,
    /// Weight initialization scheme.
    pub init: InitScheme,
}

/// Initialization schemes for [`train_autoencoder`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    /// Identity-embedded start ([`MlpParams::init_identity`]).
    Identity,
    /// Time-domain-clipping start at the given multiple of a quadrature
    /// standard deviation ([`MlpParams::init_clip`]).
    Clip(f64),
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            width: 1710,
            noise_sigma: 0.35,
            lambda: 0.01,
            learning_rate: 1e-3,
            batch_size: 64,
            max_iterations: 20_000,
            seed: 0,
            convergence_window: 200,
            convergence_tol: 1e-5,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            warmup_iterations: 200,
            recon_target: 0.0,
            controller_gain: 0.02,
            decoder_lr_mult: 1.0,
            center_papr_grad: false,
            init: InitScheme::Clip(1.7),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iteration: usize,
    pub reconstruction_loss: f64,
    pub papr_loss: f64,
    pub total_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub records: Vec<IterRecord>,
    pub params: MlpParams,
    pub wall_time_s: f64,
}

struct AdamState {
    m: Vec<(Array2<f64>, Array1<f64>)>,
    v: Vec<(Array2<f64>, Array1<f64>)>,
    t: usize,
}

impl AdamState {
    fn new(layers: &[super::DenseLayer]) -> Self {
        let zeros: Vec<(Array2<f64>, Array1<f64>)> = layers
            .iter()
            .map(|l| {
                (
                    Array2::zeros(l.weights.raw_dim()),
                    Array1::zeros(l.bias.raw_dim()),
                )
            })
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(
        &mut self,
        layers: &mut [super::DenseLayer],
        grads: &[(Array2<f64>, Array1<f64>)],
        cfg: &TrainConfig,
        lr_mult: f64,
    ) {
        self.t += 1;
        let (b1, b2, eps) = (cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
        let ramp = if cfg.warmup_iterations > 0 {
            (self.t as f64 / cfg.warmup_iterations as f64).min(1.0)
        } else {
            1.0
        };
        let lr = cfg.learning_rate * ramp * lr_mult;
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        for (i, layer) in layers.iter_mut().enumerate() {
            let (gw, gb) = &grads[i];
            let (mw, mb) = &mut self.m[i];
            let (vw, vb) = &mut self.v[i];
            mw.zip_mut_with(gw, |m, &g| *m = b1 * *m + (1.0 - b1) * g);
            vw.zip_mut_with(gw, |v, &g| *v = b2 * *v + (1.0 - b2) * g * g);
            mb.zip_mut_with(gb, |m, &g| *m = b1 * *m + (1.0 - b1) * g);
            vb.zip_mut_with(gb, |v, &g| *v = b2 * *v + (1.0 - b2) * g * g);
            ndarray::Zip::from(&mut layer.weights)
                .and(&*mw)
                .and(&*vw)
                .for_each(|w, &m, &v| *w -= lr * (m / bc1) / ((v / bc2).sqrt() + eps));
            ndarray::Zip::from(&mut layer.bias)
                .and(&*mb)
                .and(&*vb)
                .for_each(|w, &m, &v| *w -= lr * (m / bc1) / ((v / bc2).sqrt() + eps));
        }
    }
}

/// Draws a batch of random unit-power 16-QAM blocks, packed as reals
/// (first half real parts, second half imaginary parts per row).
pub fn sample_qam_batch<R: Rng>(batch: usize, width: usize, rng: &mut R) -> Array2<f64> {
    let half = width / 2;
    let mut out = Array2::zeros((batch, width));
    for b in 0..batch {
        let bits: Vec<u8> = (0..half * 4).map(|_| rng.gen_range(0..2) as u8).collect();
        let symbols = signal::qam16_map(&BitSeq::new(bits)).expect("multiple of 4");
        for (i, s) in symbols.symbols.iter().enumerate() {
            out[[b, i]] = s.re;
            out[[b, half + i]] = s.im;
        }
    }
    out
}

/// Trains an encoder/decoder pair from scratch per the combined loss.
///
/// Stops at `max_iterations`, or earlier once the windowed mean total
/// loss stops improving by `convergence_tol` relative. Aborts with
/// [`TrainError::Diverged`] if the loss becomes non-finite.
/// Symmetry-breaking noise amplitude for the identity-embedded init.
pub const INIT_NOISE: f64 = 0.01;

pub fn train_autoencoder(cfg: &TrainConfig) -> Result<TrainReport, TrainError> {
    let start = std::time::Instant::now();
    let mut params = match cfg.init {
        InitScheme::Identity => MlpParams::init_identity(cfg.width, cfg.seed, INIT_NOISE)?,
        InitScheme::Clip(mult) => MlpParams::init_clip(cfg.width, mult, cfg.seed, INIT_NOISE)?,
    };
    let mut data_rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(cfg.seed, 1));
    let mut noise_rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(cfg.seed, 2));

    let mut enc_adam = AdamState::new(&params.encoder);
    let mut dec_adam = AdamState::new(&params.decoder);
    let mut records = Vec::new();
    let mut best_window: Option<f64> = None;
    let mut window_sum = 0.0;

    let recon_target = if cfg.recon_target > 0.0 {
        cfg.recon_target
    } else {
        cfg.noise_sigma * cfg.noise_sigma + 0.02
    };
    // PAPR-weight controller state: effective lambda = lambda * scale
    let mut lambda_scale: f64 = 0.05;
    let mut recon_ema: Option<f64> = None;

    for it in 0..cfg.max_iterations {
        let x = sample_qam_batch(cfg.batch_size, cfg.width, &mut data_rng);
        let (parts, grads) = grad::total_loss_and_gradients_opts(
            &x,
            &params,
            cfg.noise_sigma,
            cfg.lambda * lambda_scale,
            cfg.center_papr_grad,
            &mut noise_rng,
        )?;
        if !parts.total.is_finite() {
            return Err(TrainError::Diverged { iteration: it });
        }
        let ema = match recon_ema {
            Some(prev) => 0.95 * prev + 0.05 * parts.reconstruction,
            None => parts.reconstruction,
        };
        recon_ema = Some(ema);
        lambda_scale = (lambda_scale
            * (cfg.controller_gain * (recon_target - ema) / recon_target).exp())
        .clamp(1e-4, 1.0);
        enc_adam.step(&mut params.encoder, &grads.encoder, cfg, 1.0);
        dec_adam.step(&mut params.decoder, &grads.decoder, cfg, cfg.decoder_lr_mult);
        // the trace reports the configured lambda, not the controller's
        // momentary effective weight, so records stay comparable
        let total = parts.reconstruction + cfg.lambda * parts.papr;
        records.push(IterRecord {
            iteration: it,
            reconstruction_loss: parts.reconstruction,
            papr_loss: parts.papr,
            total_loss: total,
        });

        window_sum += total;
        if cfg.convergence_window > 0 && (it + 1) % cfg.convergence_window == 0 {
            let mean = window_sum / cfg.convergence_window as f64;
            window_sum = 0.0;
            if let Some(best) = best_window {
                if mean > best * (1.0 - cfg.convergence_tol) {
                    break;
                }
            }
            best_window = Some(best_window.map_or(mean, |b: f64| b.min(mean)));
        }
    }

    Ok(TrainReport {
        records,
        params,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
