//! Seeded experiment orchestration: CCDF and BER-vs-OSNR sweeps.
//!
//! Every trial owns its full simulation state; per-trial seeds are
//! `master_seed ^ trial_index`, so fanning trials across workers and
//! merging by index yields byte-identical results to a serial run.

use std::path::PathBuf;

use coofdm_core::ae::{self, MlpParams};
use coofdm_core::channel::{self, LaserSpec, MzmMode};
use coofdm_core::ofdm::{self, OfdmLayout, DATA_SYMBOLS};
use coofdm_core::papr::{self, CcdfCurve};
use coofdm_core::rx::{receive_chain, RxConfig};
use coofdm_core::signal::{bit_error_rate, prbs_generate, qam16_map, BitSeq};
use coofdm_core::{derive_seed, Complex64, ComplexSignal};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ExperimentConfig, Method};

/// Baseband sample rate of the simulated system.
pub const SAMPLE_RATE: f64 = 2.5e9;

/// CCDF threshold grid: 0 to 16 dB in 0.25 dB steps.
pub fn ccdf_threshold_grid() -> Vec<f64> {
    (0..=64).map(|i| i as f64 * 0.25).collect()
}

#[derive(Debug, Error)]
pub enum LabError {
    #[error("weight file {0} is missing or unreadable: {1}")]
    WeightFile(PathBuf, #[source] ae::WeightIoError),
    #[error("autoencoder i/o width {width} does not fit {num_data} data subcarriers")]
    WidthMismatch { width: usize, num_data: usize },
    #[error(
        "{failed} of {total} trials failed at {context} (limit 1%); first error: {first}"
    )]
    TooManyFailedTrials {
        failed: usize,
        total: usize,
        context: String,
        first: String,
    },
    #[error(transparent)]
    Ofdm(#[from] ofdm::OfdmError),
    #[error(transparent)]
    Papr(#[from] papr::PaprError),
    #[error(transparent)]
    Ae(#[from] ae::AeError),
    #[error("{0}")]
    Runtime(String),
}

/// One experiment observation, generic over CCDF and BER sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub method: String,
    /// Threshold (CCDF) or OSNR (BER sweep), in dB.
    pub x_db: f64,
    pub numerator: u64,
    pub denominator: u64,
    pub ratio: f64,
    pub seed: u64,
}

/// Loads and sanity-checks the weight files referenced by `ae` methods,
/// so a broken path is rejected before any simulation work.
pub fn load_method_weights(
    methods: &[Method],
    layout: &OfdmLayout,
) -> Result<Vec<Option<MlpParams>>, LabError> {
    methods
        .iter()
        .map(|m| match m {
            Method::Ae { weights } => {
                let params = ae::load_weights(weights)
                    .map_err(|e| LabError::WeightFile(weights.clone(), e))?;
                let width = params.io_width();
                if width != 2 * layout.num_data() {
                    return Err(LabError::WidthMismatch {
                        width,
                        num_data: layout.num_data(),
                    });
                }
                Ok(Some(params))
            }
            _ => Ok(None),
        })
        .collect()
}

fn random_data_bits(seed: u64, count: usize) -> BitSeq {
    // PRBS-31 payload; the register seed is derived per trial and forced
    // nonzero to avoid the LFSR lock-up state.
    let register = (seed as u32 & 0x7fff_ffff) | 1;
    prbs_generate(register, count).expect("nonzero seed, positive length")
}

fn encode_block(symbols: &[Complex64], params: &MlpParams) -> Result<Vec<Complex64>, LabError> {
    let latent = ae::encoder_forward(&ae::pack_symbols(symbols), params)?;
    Ok(latent.to_complex())
}

/// Per-trial PAPR (dB) of one OFDM symbol body under `method`.
fn ccdf_trial(
    method: &Method,
    params: Option<&MlpParams>,
    layout: &OfdmLayout,
    master_seed: u64,
    trial: u64,
) -> Result<f64, LabError> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master_seed ^ trial, 0));
    let bits: Vec<u8> = (0..layout.num_data() * 4)
        .map(|_| rng.gen::<bool>() as u8)
        .collect();
    let symbols = qam16_map(&BitSeq::new(bits)).expect("multiple of 4").symbols;
    let papr = match method {
        Method::None => papr::papr_db(&ofdm::ofdm_modulate_body(&symbols, layout)?)?,
        Method::Clip { ratio } => {
            let body = ofdm::ofdm_modulate_body(&symbols, layout)?;
            papr::papr_db(&papr::clip_signal(&body, *ratio)?)?
        }
        Method::Slm { candidates } => {
            papr::slm_reduce(&symbols, *candidates, layout, derive_seed(master_seed, SLM_PHASE_STREAM))?
                .papr_db
        }
        Method::Ae { .. } => {
            let encoded = encode_block(&symbols, params.expect("weights preloaded"))?;
            papr::papr_db(&ofdm::ofdm_modulate_body(&encoded, layout)?)?
        }
    };
    Ok(papr)
}

// Seed-stream indices; distinct per use so no two RNG streams collide.
const SLM_PHASE_STREAM: u64 = 100;
const TRAINING_STREAM: u64 = 101;
const PAYLOAD_STREAM: u64 = 1;
const TX_LASER_STREAM: u64 = 3;
const LO_LASER_STREAM: u64 = 4;
const OSNR_STREAM_BASE: u64 = 20;

/// Estimates the PAPR CCDF for every configured method on the shared
/// threshold grid. Trials are independent and fan out across workers.
pub fn run_ccdf_experiment(cfg: &ExperimentConfig) -> Result<Vec<(String, CcdfCurve)>, LabError> {
    let layout = ofdm::build_layout(&cfg.layout)?;
    let weights = load_method_weights(&cfg.methods, &layout)?;
    let thresholds = ccdf_threshold_grid();
    let mut out = Vec::with_capacity(cfg.methods.len());
    for (method, params) in cfg.methods.iter().zip(&weights) {
        let paprs: Vec<f64> = (0..cfg.ccdf_trials as u64)
            .into_par_iter()
            .map(|t| ccdf_trial(method, params.as_ref(), &layout, cfg.seed, t))
            .collect::<Result<_, _>>()?;
        out.push((
            method.label().to_string(),
            papr::ccdf_estimate(&paprs, &thresholds)?,
        ));
    }
    Ok(out)
}

/// Converts one method's CCDF curve into metric records.
pub fn ccdf_records(label: &str, curve: &CcdfCurve, seed: u64) -> Vec<MetricRecord> {
    curve
        .thresholds_db
        .iter()
        .zip(&curve.exceed_counts)
        .zip(&curve.probabilities)
        .map(|((&t, &n), &p)| MetricRecord {
            method: label.to_string(),
            x_db: t,
            numerator: n as u64,
            denominator: curve.sample_count as u64,
            ratio: p,
            seed,
        })
        .collect()
}

/// Outcome of one transmitted frame.
struct TrialOutcome {
    bit_errors: u64,
    bits: u64,
}

/// Simulates one frame end to end: payload → PAPR method → optical
/// chain → receiver → error count.
fn ber_trial(
    method: &Method,
    params: Option<&MlpParams>,
    layout: &OfdmLayout,
    cfg: &ExperimentConfig,
    training: &[Vec<Complex64>],
    osnr_db: f64,
    osnr_index: u64,
    trial: u64,
) -> Result<TrialOutcome, LabError> {
    let base = cfg.seed ^ trial;
    let bits_per_frame = DATA_SYMBOLS * layout.num_data() * 4;
    let sent = random_data_bits(derive_seed(base, PAYLOAD_STREAM), bits_per_frame);
    let qam = qam16_map(&sent).expect("multiple of 4").symbols;
    let data: Vec<Vec<Complex64>> = qam
        .chunks(layout.num_data())
        .map(|c| c.to_vec())
        .collect();

    let mut slm_phases: Vec<Vec<Complex64>> = Vec::new();
    let freq: Vec<Vec<Complex64>> = match method {
        Method::None | Method::Clip { .. } => data,
        Method::Slm { candidates } => {
            let phase_seed = derive_seed(cfg.seed, SLM_PHASE_STREAM);
            let mut rotated = Vec::with_capacity(data.len());
            for d in &data {
                let r = papr::slm_reduce(d, *candidates, layout, phase_seed)?;
                slm_phases.push(r.phases.clone());
                rotated.push(r.selected);
            }
            rotated
        }
        Method::Ae { .. } => {
            let p = params.expect("weights preloaded");
            data.iter()
                .map(|d| encode_block(d, p))
                .collect::<Result<_, _>>()?
        }
    };

    let frame = ofdm::assemble_frame(&freq, training, layout)?;
    let mut samples = frame.concatenate();
    if let Method::Clip { ratio } = method {
        samples = papr::clip_signal(&samples, *ratio)?;
    }
    let baseband = ComplexSignal::new(samples, SAMPLE_RATE);

    let laser = LaserSpec {
        linewidth_hz: cfg.laser_linewidth_hz,
        initial_phase: 0.0,
    };
    let mut tx_rng = ChaCha8Rng::seed_from_u64(derive_seed(base, TX_LASER_STREAM));
    let field = channel::iq_modulate(
        &baseband,
        &laser,
        cfg.fiber.launch_power_dbm,
        MzmMode::Linear,
        &mut tx_rng,
    )?;
    let propagated = channel::propagate_link(&field, &cfg.fiber, SAMPLE_RATE)?;
    let mut osnr_rng =
        ChaCha8Rng::seed_from_u64(derive_seed(base, OSNR_STREAM_BASE + osnr_index));
    let noisy = channel::set_osnr(&propagated, osnr_db, SAMPLE_RATE, &mut osnr_rng)?;
    let mut lo_rng = ChaCha8Rng::seed_from_u64(derive_seed(base, LO_LASER_STREAM));
    let detected = channel::coherent_detect(&noisy, &laser, &mut lo_rng)?;

    let rx_cfg = RxConfig {
        layout,
        known_training: training,
        decoder: params,
        slm_phases: &slm_phases,
    };
    let (received, _) = receive_chain(&detected, &rx_cfg)?;
    let (errors, _) = bit_error_rate(&sent, &received).expect("equal lengths by construction");
    Ok(TrialOutcome {
        bit_errors: errors as u64,
        bits: sent.len() as u64,
    })
}

impl From<coofdm_core::channel::ChannelError> for LabError {
    fn from(e: coofdm_core::channel::ChannelError) -> Self {
        LabError::Runtime(e.to_string())
    }
}

impl From<coofdm_core::rx::RxError> for LabError {
    fn from(e: coofdm_core::rx::RxError) -> Self {
        LabError::Runtime(e.to_string())
    }
}

/// Runs the full BER-vs-OSNR sweep: one record per (method, OSNR point).
/// Individual failed trials are skipped; more than 1% failures at any
/// point aborts the sweep.
pub fn run_ber_sweep(cfg: &ExperimentConfig) -> Result<Vec<MetricRecord>, LabError> {
    let layout = ofdm::build_layout(&cfg.layout)?;
    let weights = load_method_weights(&cfg.methods, &layout)?;
    let training = ofdm::training_symbols(derive_seed(cfg.seed, TRAINING_STREAM), &layout);
    let mut records = Vec::new();
    for (method, params) in cfg.methods.iter().zip(&weights) {
        for (oi, &osnr_db) in cfg.osnr_grid_db.iter().enumerate() {
            let outcomes: Vec<Result<TrialOutcome, LabError>> = (0..cfg.ber_trials as u64)
                .into_par_iter()
                .map(|t| {
                    ber_trial(
                        method,
                        params.as_ref(),
                        &layout,
                        cfg,
                        &training,
                        osnr_db,
                        oi as u64,
                        t,
                    )
                })
                .collect();
            let failed = outcomes.iter().filter(|o| o.is_err()).count();
            if failed * 100 > cfg.ber_trials {
                let first = outcomes
                    .iter()
                    .find_map(|o| o.as_ref().err().map(|e| e.to_string()))
                    .unwrap_or_default();
                return Err(LabError::TooManyFailedTrials {
                    failed,
                    total: cfg.ber_trials,
                    context: format!("method {} at {} dB OSNR", method.label(), osnr_db),
                    first,
                });
            }
            let (errors, bits) = outcomes
                .iter()
                .flatten()
                .fold((0u64, 0u64), |(e, b), o| (e + o.bit_errors, b + o.bits));
            records.push(MetricRecord {
                method: method.label().to_string(),
                x_db: osnr_db,
                numerator: errors,
                denominator: bits,
                ratio: if bits == 0 { 0.0 } else { errors as f64 / bits as f64 },
                seed: cfg.seed,
            });
        }
    }
    Ok(records)
}

/// Serial twin of [`run_ber_sweep`] used to check parallel/serial
/// equivalence.
pub fn run_ber_sweep_serial(cfg: &ExperimentConfig) -> Result<Vec<MetricRecord>, LabError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("pool");
    pool.install(|| run_ber_sweep(cfg))
}

/// Diagnostics from a single verbose end-to-end run.
#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub method: String,
    pub tx_papr_db: f64,
    pub launch_power_dbm: f64,
    pub rx_power_dbm: f64,
    pub pilot_power_ratio: f64,
    pub osnr_db: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub ber: f64,
}

/// One fully instrumented frame through the chain, reporting per-stage
/// diagnostics. Uses the first configured method and the highest OSNR
/// grid point.
pub fn simulate_once(cfg: &ExperimentConfig) -> Result<SimulateReport, LabError> {
    let layout = ofdm::build_layout(&cfg.layout)?;
    let weights = load_method_weights(&cfg.methods, &layout)?;
    let method = &cfg.methods[0];
    let params = weights[0].as_ref();
    let training = ofdm::training_symbols(derive_seed(cfg.seed, TRAINING_STREAM), &layout);
    let osnr_db = cfg
        .osnr_grid_db
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);

    // Rebuild the same frame as ber_trial(trial = 0) but keep the
    // intermediate signals for reporting.
    let base = cfg.seed;
    let bits_per_frame = DATA_SYMBOLS * layout.num_data() * 4;
    let sent = random_data_bits(derive_seed(base, PAYLOAD_STREAM), bits_per_frame);
    let qam = qam16_map(&sent).expect("multiple of 4").symbols;
    let data: Vec<Vec<Complex64>> = qam
        .chunks(layout.num_data())
        .map(|c| c.to_vec())
        .collect();
    let mut slm_phases: Vec<Vec<Complex64>> = Vec::new();
    let freq: Vec<Vec<Complex64>> = match method {
        Method::None | Method::Clip { .. } => data,
        Method::Slm { candidates } => {
            let phase_seed = derive_seed(cfg.seed, SLM_PHASE_STREAM);
            let mut rotated = Vec::with_capacity(data.len());
            for d in &data {
                let r = papr::slm_reduce(d, *candidates, &layout, phase_seed)?;
                slm_phases.push(r.phases.clone());
                rotated.push(r.selected);
            }
            rotated
        }
        Method::Ae { .. } => {
            let p = params.expect("weights preloaded");
            data.iter()
                .map(|d| encode_block(d, p))
                .collect::<Result<_, _>>()?
        }
    };
    let frame = ofdm::assemble_frame(&freq, &training, &layout)?;
    let mut samples = frame.concatenate();
    if let Method::Clip { ratio } = method {
        samples = papr::clip_signal(&samples, *ratio)?;
    }
    let tx_papr_db = papr::papr_db(&samples)?;
    let baseband = ComplexSignal::new(samples, SAMPLE_RATE);

    let laser = LaserSpec {
        linewidth_hz: cfg.laser_linewidth_hz,
        initial_phase: 0.0,
    };
    let mut tx_rng = ChaCha8Rng::seed_from_u64(derive_seed(base, TX_LASER_STREAM));
    let field = channel::iq_modulate(
        &baseband,
        &laser,
        cfg.fiber.launch_power_dbm,
        MzmMode::Linear,
        &mut tx_rng,
    )?;
    let propagated = channel::propagate_link(&field, &cfg.fiber, SAMPLE_RATE)?;
    let rx_power_dbm = 10.0 * propagated.mean_power().log10() + 30.0;
    let mut osnr_rng = ChaCha8Rng::seed_from_u64(derive_seed(base, OSNR_STREAM_BASE));
    let noisy = channel::set_osnr(&propagated, osnr_db, SAMPLE_RATE, &mut osnr_rng)?;
    let mut lo_rng = ChaCha8Rng::seed_from_u64(derive_seed(base, LO_LASER_STREAM));
    let detected = channel::coherent_detect(&noisy, &laser, &mut lo_rng)?;
    let rx_cfg = RxConfig {
        layout: &layout,
        known_training: &training,
        decoder: params,
        slm_phases: &slm_phases,
    };
    let (received, diag) = receive_chain(&detected, &rx_cfg)?;
    let (errors, ber) = bit_error_rate(&sent, &received).expect("equal lengths");
    Ok(SimulateReport {
        method: method.label().to_string(),
        tx_papr_db,
        launch_power_dbm: cfg.fiber.launch_power_dbm,
        rx_power_dbm,
        pilot_power_ratio: diag.pilot_power_ratio.first().copied().unwrap_or(0.0),
        osnr_db,
        bit_errors: errors as u64,
        bits: sent.len() as u64,
        ber,
    })
}
