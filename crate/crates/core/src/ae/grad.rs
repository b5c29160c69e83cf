//! Losses and exact gradients for the encoder/decoder pair.
//!
//! Subgradient choices, pinned for determinism:
//! * ReLU draws subgradient 0 at exactly 0;
//! * the max in the PAPR loss assigns all weight to the lowest-index
//!   argmax sample.
//!
//! The gradient through the inverse transform uses its adjoint: for the
//! 1/n-scaled inverse DFT, the adjoint is the unnormalized forward DFT
//! scaled by 1/n.

use super::{AeError, Activation, DenseLayer, LatentBlock, MlpParams};
use crate::fft;
use crate::ofdm::OfdmLayout;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

const LN10: f64 = std::f64::consts::LN_10;

/// Mean squared error over matching widths: (1/n)Σ(x_i - x̂_i)².
pub fn reconstruction_loss(x: &[f64], x_hat: &[f64]) -> Result<f64, AeError> {
    if x.len() != x_hat.len() {
        return Err(AeError::DimensionMismatch {
            expected: x.len(),
            got: x_hat.len(),
        });
    }
    let n = x.len() as f64;
    Ok(x.iter()
        .zip(x_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// PAPR of the latent's time-domain transform, in dB:
/// 10·log10(max|ŵ|² / mean|ŵ|²) with ŵ = IFFT of the packed complex latent.
pub fn papr_loss(w: &LatentBlock) -> Result<f64, AeError> {
    let (loss, _, _, _) = papr_loss_parts(w)?;
    Ok(loss)
}

/// PAPR of the latent embedded into the full OFDM subcarrier layout
/// (data bins in layout order, RF-pilot, guards and zero-pad at zero)
/// before the inverse transform — the transmitted body the CCDF
/// experiments measure. Exposed as the ablation alternative to the
/// pinned critical-rate [`papr_loss`].
pub fn papr_loss_layout(w: &LatentBlock, layout: &OfdmLayout) -> Result<f64, AeError> {
    let (loss, _, _, _) = papr_time_parts(&embed_latent(w, layout)?)?;
    Ok(loss)
}

fn embed_latent(w: &LatentBlock, layout: &OfdmLayout) -> Result<Vec<Complex64>, AeError> {
    let symbols = w.to_complex();
    if symbols.len() != layout.num_data() {
        return Err(AeError::DimensionMismatch {
            expected: 2 * layout.num_data(),
            got: w.values.len(),
        });
    }
    let mut bins = vec![Complex64::new(0.0, 0.0); layout.fft_size];
    for (&idx, &v) in layout.data_indices.iter().zip(&symbols) {
        bins[idx] = v;
    }
    bins[layout.pilot_index] = Complex64::new(layout.pilot_gain, 0.0);
    Ok(bins)
}

/// Returns (loss, time-domain samples, argmax index, mean power) for the
/// 1/n-scaled inverse transform of the given frequency bins.
fn papr_time_parts(bins: &[Complex64]) -> Result<(f64, Vec<Complex64>, usize, f64), AeError> {
    if bins.iter().all(|c| c.norm_sqr() == 0.0) {
        return Err(AeError::ZeroLatent);
    }
    let mut time = bins.to_vec();
    fft::ifft(&mut time);
    let mut peak = f64::MIN;
    let mut peak_idx = 0;
    let mut sum = 0.0;
    for (k, c) in time.iter().enumerate() {
        let p = c.norm_sqr();
        if p > peak {
            peak = p;
            peak_idx = k;
        }
        sum += p;
    }
    let mean = sum / time.len() as f64;
    Ok((10.0 * (peak / mean).log10(), time, peak_idx, mean))
}

/// Returns (loss, time-domain samples, argmax index, mean power).
fn papr_loss_parts(w: &LatentBlock) -> Result<(f64, Vec<Complex64>, usize, f64), AeError> {
    papr_time_parts(&w.to_complex())
}

/// Gradient of the dB PAPR with respect to the frequency bins, as
/// complex values dL/dRe + j·dL/dIm, via the adjoint of the 1/n-scaled
/// inverse transform.
fn papr_bin_gradient(time: &[Complex64], peak_idx: usize, mean: f64) -> Vec<Complex64> {
    let n = time.len();
    let peak = time[peak_idx].norm_sqr();
    // dL/d p_k for p_k = |ŵ_k|²
    let mut g: Vec<Complex64> = time
        .iter()
        .enumerate()
        .map(|(k, &wk)| {
            let dldp = (10.0 / LN10)
                * (if k == peak_idx { 1.0 / peak } else { 0.0 } - 1.0 / (n as f64 * mean));
            2.0 * dldp * wk
        })
        .collect();
    // adjoint of the 1/n-scaled inverse transform
    fft::fft(&mut g);
    for v in g.iter_mut() {
        *v /= n as f64;
    }
    g
}

/// Gradient of [`papr_loss`] with respect to the latent reals.
pub fn papr_loss_gradient(w: &LatentBlock) -> Result<Vec<f64>, AeError> {
    let (_, time, peak_idx, mean) = papr_loss_parts(w)?;
    let g = papr_bin_gradient(&time, peak_idx, mean);
    let mut out = Vec::with_capacity(2 * g.len());
    out.extend(g.iter().map(|c| c.re));
    out.extend(g.iter().map(|c| c.im));
    Ok(out)
}

/// Gradient of [`papr_loss_layout`] with respect to the latent reals.
/// The pilot, guard and zero-pad bins are constants of the embedding, so
/// only the data-bin components propagate back.
pub fn papr_loss_layout_gradient(w: &LatentBlock, layout: &OfdmLayout) -> Result<Vec<f64>, AeError> {
    let bins = embed_latent(w, layout)?;
    let (_, time, peak_idx, mean) = papr_time_parts(&bins)?;
    let g = papr_bin_gradient(&time, peak_idx, mean);
    let n = layout.num_data();
    let mut out = vec![0.0; 2 * n];
    for (i, &idx) in layout.data_indices.iter().enumerate() {
        out[i] = g[idx].re;
        out[n + i] = g[idx].im;
    }
    Ok(out)
}

/// Loss components of one batch evaluation. The pinned decomposition is
/// `total = reconstruction + lambda * papr` in that evaluation order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub reconstruction: f64,
    pub papr: f64,
    pub lambda: f64,
    pub total: f64,
}

/// Parameter gradients, mirroring [`MlpParams`] layer by layer.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub encoder: Vec<(Array2<f64>, Array1<f64>)>,
    pub decoder: Vec<(Array2<f64>, Array1<f64>)>,
}

struct StackTrace {
    /// Activations entering each layer plus the final output.
    activations: Vec<Array2<f64>>,
}

fn forward_traced(layers: &[DenseLayer], input: ArrayView2<f64>) -> StackTrace {
    let mut activations = vec![input.to_owned()];
    for layer in layers {
        let mut z = activations.last().unwrap().dot(&layer.weights.t()) + &layer.bias;
        layer.activation.apply(&mut z);
        activations.push(z);
    }
    StackTrace { activations }
}

/// Backpropagates `delta` (gradient w.r.t. the stack output) through a
/// traced stack; returns per-layer gradients and the gradient w.r.t. the
/// stack input. Since ReLU(z) == activation output and the subgradient at
/// 0 is 0, the mask `output > 0` recovers ReLU'(z).
fn backward_stack(
    layers: &[DenseLayer],
    trace: &StackTrace,
    mut delta: Array2<f64>,
) -> (Vec<(Array2<f64>, Array1<f64>)>, Array2<f64>) {
    let mut grads = Vec::with_capacity(layers.len());
    for (i, layer) in layers.iter().enumerate().rev() {
        if layer.activation == Activation::Relu {
            let out = &trace.activations[i + 1];
            delta.zip_mut_with(out, |d, &o| {
                if o <= 0.0 {
                    *d = 0.0;
                }
            });
        }
        let a_prev = &trace.activations[i];
        let dw = delta.t().dot(a_prev);
        let db = delta.sum_axis(Axis(0));
        let d_prev = delta.dot(&layer.weights);
        grads.push((dw, db));
        delta = d_prev;
    }
    grads.reverse();
    (grads, delta)
}

/// Evaluates the combined loss on a batch (rows = samples) and returns
/// exact gradients for every parameter. Channel noise is drawn from `rng`
/// and enters the decoder only (the additive-noise path has identity
/// gradient).
pub fn total_loss_and_gradients<R: Rng>(
    x_batch: &Array2<f64>,
    params: &MlpParams,
    sigma: f64,
    lambda: f64,
    rng: &mut R,
) -> Result<(LossParts, Gradients), AeError> {
    total_loss_and_gradients_opts(x_batch, params, sigma, lambda, GradOptions::default(), rng)
}

/// Optional behaviors of [`total_loss_and_gradients_opts`].
#[derive(Debug, Clone, Copy, Default)]
pub struct GradOptions<'a> {
    /// Center the PAPR latent gradient across the batch. The batch-mean
    /// component of that gradient is a uniform translation of every
    /// latent toward one common low-PAPR point — the input-independent
    /// collapse direction — and carries no per-block peak-shaping
    /// information, so the trainer can remove it. With centering the
    /// reported losses are unchanged but the gradient is no longer the
    /// exact derivative of the batch loss.
    pub center_papr: bool,
    /// When set, the PAPR term is [`papr_loss_layout`] on this layout
    /// (the transmitted body) instead of the critical-rate
    /// [`papr_loss`] of the latent itself.
    pub layout: Option<&'a OfdmLayout>,
}

/// [`total_loss_and_gradients`] with configurable PAPR-term behavior.
pub fn total_loss_and_gradients_opts<R: Rng>(
    x_batch: &Array2<f64>,
    params: &MlpParams,
    sigma: f64,
    lambda: f64,
    opts: GradOptions,
    rng: &mut R,
) -> Result<(LossParts, Gradients), AeError> {
    let batch = x_batch.nrows();
    if batch == 0 {
        return Err(AeError::EmptyBatch);
    }
    if x_batch.ncols() != params.io_width() {
        return Err(AeError::DimensionMismatch {
            expected: params.io_width(),
            got: x_batch.ncols(),
        });
    }
    if sigma < 0.0 {
        return Err(AeError::NegativeSigma(sigma));
    }
    let width = x_batch.ncols();

    let enc_trace = forward_traced(&params.encoder, x_batch.view());
    // normalize each latent row to unit average complex power; the
    // normalization is part of the differentiated graph
    let mut latent = enc_trace.activations.last().unwrap().clone();
    let mut gains = Vec::with_capacity(batch);
    for mut row in latent.outer_iter_mut() {
        let g = super::normalize_latent(row.as_slice_mut().expect("contiguous row"))?;
        gains.push(g);
    }

    let mut latent_noisy = latent.clone();
    if sigma > 0.0 {
        let dist = Normal::new(0.0, sigma).expect("sigma > 0");
        latent_noisy.mapv_inplace(|v| v + dist.sample(rng));
    }

    let dec_trace = forward_traced(&params.decoder, latent_noisy.view());
    let x_hat = dec_trace.activations.last().unwrap();

    // reconstruction: mean over elements of each sample, averaged over batch
    let diff = x_hat - x_batch;
    let recon = diff.iter().map(|d| d * d).sum::<f64>() / (width as f64 * batch as f64);

    // PAPR loss and its latent gradient, per sample
    let mut papr_sum = 0.0;
    let mut papr_grad = Array2::<f64>::zeros(latent.raw_dim());
    for (b, row) in latent.outer_iter().enumerate() {
        let block = LatentBlock {
            values: row.to_vec(),
        };
        let (loss, g) = match opts.layout {
            Some(layout) => (
                papr_loss_layout(&block, layout)?,
                papr_loss_layout_gradient(&block, layout)?,
            ),
            None => (papr_loss(&block)?, papr_loss_gradient(&block)?),
        };
        papr_sum += loss;
        for (j, v) in g.into_iter().enumerate() {
            papr_grad[[b, j]] = v * lambda / batch as f64;
        }
    }
    if opts.center_papr && batch > 1 {
        let mean = papr_grad.mean_axis(Axis(0)).expect("non-empty batch");
        papr_grad -= &mean;
    }
    let papr = papr_sum / batch as f64;
    let total = recon + lambda * papr;

    // backward: MSE path through decoder then encoder, PAPR path added at the latent
    let d_xhat = diff.mapv(|d| 2.0 * d / (width as f64 * batch as f64));
    let (dec_grads, d_latent_mse) = backward_stack(&params.decoder, &dec_trace, d_xhat);
    let mut d_latent = d_latent_mse + papr_grad;
    // back through the per-row normalization n = g(u)·u:
    // d_u = g·(d − (d·n)·n / (width/2))
    let half_width = width as f64 / 2.0;
    for (b, mut d_row) in d_latent.outer_iter_mut().enumerate() {
        let n_row = latent.row(b);
        let dot: f64 = d_row.iter().zip(n_row.iter()).map(|(d, n)| d * n).sum();
        let g = gains[b];
        ndarray::Zip::from(&mut d_row)
            .and(&n_row)
            .for_each(|d, &n| *d = g * (*d - dot * n / half_width));
    }
    let (enc_grads, _) = backward_stack(&params.encoder, &enc_trace, d_latent);

    Ok((
        LossParts {
            reconstruction: recon,
            papr,
            lambda,
            total,
        },
        Gradients {
            encoder: enc_grads,
            decoder: dec_grads,
        },
    ))
}
