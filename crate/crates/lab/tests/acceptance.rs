//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N: PASS/FAIL — details` line (run with `--nocapture` to see
//! them). Criteria 8–10 train autoencoders on first use and cache the
//! weight files under `target/acceptance/`, so reruns are fast.
//!
//! Criteria 1–7 are property checks that run in seconds. Criteria 8–11
//! reproduce the published experiment curves at desk scale; they are
//! compute-heavy (the first run trains four models on one core) and their
//! trained-model targets are soft: measured gaps and onsets are printed.

use std::path::PathBuf;
use std::process::Command;
use std::sync::Mutex;

use coofdm_core::ae::{self, LatentBlock, MlpParams, TrainConfig};
use coofdm_core::channel::{self, FiberLinkConfig};
use coofdm_core::ofdm::{self, LayoutConfig};
use coofdm_core::papr;
use coofdm_core::signal::qam16_map;
use coofdm_core::signal::BitSeq;
use coofdm_core::{Complex64, ComplexSignal};
use coofdm_lab::config::{ExperimentConfig, Method};
use coofdm_lab::experiments::{run_ber_sweep, run_ccdf_experiment, MetricRecord};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn verdict(criterion: u32, pass: bool, details: &str) {
    println!(
        "criterion {criterion}: {} — {details}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion}: {details}");
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_symbols(n: usize, r: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5))
        .collect()
}

// --- property-based criteria -------------------------------------------

#[test]
fn criterion_1_transform_round_trip() {
    let layout = ofdm::build_layout(&LayoutConfig::default()).unwrap();
    let mut r = rng(101);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let tx = random_symbols(layout.num_data(), &mut r);
        let sym = ofdm::ofdm_modulate(&tx, &layout).unwrap();
        let rx = ofdm::ofdm_demodulate(&sym, &layout).unwrap();
        for (a, b) in tx.iter().zip(&rx) {
            worst = worst.max((a - b).norm());
        }
    }
    verdict(
        1,
        worst < 1e-12,
        &format!("max |demod(mod(x)) - x| = {worst:.2e} over 10^3 random symbol vectors"),
    );
}

#[test]
fn criterion_2_gradient_matches_finite_differences() {
    use ndarray::Array2;
    let width = 16;
    let lambda = 0.01;
    // pick a base configuration away from ReLU kinks and argmax ties
    let near_kink = |x: &Array2<f64>, params: &MlpParams| -> bool {
        let mut a = x.clone();
        let mut latent: Option<Array2<f64>> = None;
        for (i, layer) in params.encoder.iter().chain(&params.decoder).enumerate() {
            let z = a.dot(&layer.weights.t()) + &layer.bias;
            if layer.activation == ae::Activation::Relu {
                if z.iter().any(|v| v.abs() < 1e-3) {
                    return true;
                }
                a = z.mapv(|v| v.max(0.0));
            } else {
                a = z;
            }
            if i == 2 {
                latent = Some(a.clone());
            }
        }
        for row in latent.expect("three encoder layers").outer_iter() {
            let block = LatentBlock {
                values: row.to_vec(),
            };
            let mut time = block.to_complex();
            coofdm_core::fft::ifft(&mut time);
            let mut p: Vec<f64> = time.iter().map(|c| c.norm_sqr()).collect();
            p.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if p[0] - p[1] < 1e-6 {
                return true;
            }
        }
        false
    };
    let (params, x) = (0..10_000u64)
        .find_map(|seed| {
            let params = MlpParams::init(width, seed).ok()?;
            let mut r = rng(seed ^ 0xacce97);
            let x = Array2::from_shape_fn((4, width), |_| r.gen::<f64>() - 0.5);
            (!near_kink(&x, &params)).then_some((params, x))
        })
        .expect("kink-free base configuration");
    let (_, grads) = ae::total_loss_and_gradients(&x, &params, 0.0, lambda, &mut rng(0)).unwrap();
    let eval = |p: &MlpParams| {
        ae::total_loss_and_gradients(&x, p, 0.0, lambda, &mut rng(0))
            .unwrap()
            .0
            .total
    };
    let mut probe_rng = rng(77);
    let mut checked = 0;
    let mut attempts = 0;
    let mut worst_rel = 0.0_f64;
    while checked < 50 {
        attempts += 1;
        assert!(attempts < 10_000, "probe rejection rate too high");
        let enc = probe_rng.gen::<bool>();
        let li = probe_rng.gen_range(0..3);
        let rr = probe_rng.gen_range(0..width);
        let cc = probe_rng.gen_range(0..width);
        let analytic = if enc {
            grads.encoder[li].0[[rr, cc]]
        } else {
            grads.decoder[li].0[[rr, cc]]
        };
        let h = 1e-5;
        let mut plus = params.clone();
        let mut minus = params.clone();
        {
            let (p, m) = if enc {
                (&mut plus.encoder[li], &mut minus.encoder[li])
            } else {
                (&mut plus.decoder[li], &mut minus.decoder[li])
            };
            p.weights[[rr, cc]] += h;
            m.weights[[rr, cc]] -= h;
        }
        if near_kink(&x, &plus) || near_kink(&x, &minus) {
            continue;
        }
        let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
        worst_rel = worst_rel.max((analytic - fd).abs() / fd.abs().max(1e-7));
        checked += 1;
    }
    verdict(
        2,
        worst_rel < 1e-4,
        &format!("worst relative gradient error {worst_rel:.2e} over 50 probes (lambda 0.01)"),
    );
}

#[test]
fn criterion_3_adjoint_identity() {
    let n = 855;
    let mut r = rng(303);
    let u = random_symbols(n, &mut r);
    let v = random_symbols(n, &mut r);
    let mut ifft_u = u.clone();
    coofdm_core::fft::ifft(&mut ifft_u);
    let mut adj_v = v.clone();
    coofdm_core::fft::fft(&mut adj_v);
    for a in adj_v.iter_mut() {
        *a /= n as f64;
    }
    let inner = |a: &[Complex64], b: &[Complex64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
    };
    let gap = (inner(&ifft_u, &v) - inner(&u, &adj_v)).abs();
    verdict(3, gap < 1e-10, &format!("|<IFFT u, v> - <u, adj v>| = {gap:.2e}"));
}

#[test]
fn criterion_4_ssfm_analytic_oracles() {
    let fs = 250e9;
    let n = 8192;
    // (a) SPM only: exact per-sample magnitude preservation
    let spm_cfg = FiberLinkConfig {
        dispersion_ps_nm_km: 0.0,
        alpha_db_per_km: 0.0,
        num_spans: 1,
        ..FiberLinkConfig::default()
    };
    let mut r = rng(404);
    let field = ComplexSignal::new(random_symbols(n, &mut r), fs);
    let out = channel::ssfm_span(&field, &spm_cfg, fs).unwrap();
    let mag_err = field
        .samples
        .iter()
        .zip(&out.samples)
        .map(|(a, b)| (a.norm() - b.norm()).abs())
        .fold(0.0_f64, f64::max);

    // (b) dispersion only: Gaussian pulse broadening closed form
    let cd_cfg = FiberLinkConfig {
        gamma_per_w_km: 0.0,
        alpha_db_per_km: 0.0,
        num_spans: 1,
        ..FiberLinkConfig::default()
    };
    let t0 = 40e-12;
    let pulse: Vec<Complex64> = (0..n)
        .map(|i| {
            let t = (i as f64 - n as f64 / 2.0) / fs;
            Complex64::new((-t * t / (2.0 * t0 * t0)).exp(), 0.0)
        })
        .collect();
    let pulse_sig = ComplexSignal::new(pulse, fs);
    let dispersed = channel::ssfm_span(&pulse_sig, &cd_cfg, fs).unwrap();
    let rms_width = |s: &ComplexSignal| -> f64 {
        let (mut p, mut tm, mut t2) = (0.0, 0.0, 0.0);
        for (i, v) in s.samples.iter().enumerate() {
            let t = (i as f64 - n as f64 / 2.0) / fs;
            let w = v.norm_sqr();
            p += w;
            tm += w * t;
            t2 += w * t * t;
        }
        let mean = tm / p;
        (t2 / p - mean * mean).sqrt()
    };
    let l = cd_cfg.span_length_km * 1000.0;
    let beta2 = cd_cfg.beta2_s2_per_m();
    let t1 = t0 * (1.0 + (beta2 * l / (t0 * t0)).powi(2)).sqrt();
    let broaden_rel = (rms_width(&dispersed) / rms_width(&pulse_sig) - t1 / t0).abs() / (t1 / t0);

    // (c) dispersion / un-dispersion round trip
    let mut undo = cd_cfg;
    undo.dispersion_ps_nm_km = -cd_cfg.dispersion_ps_nm_km;
    let back = channel::ssfm_span(&dispersed, &undo, fs).unwrap();
    let rt_err = pulse_sig
        .samples
        .iter()
        .zip(&back.samples)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0_f64, f64::max);

    let pass = mag_err < 1e-12 && broaden_rel < 0.005 && rt_err < 1e-9;
    verdict(
        4,
        pass,
        &format!(
            "SPM |ampl| err {mag_err:.2e}; broadening vs closed form {:.3}%; ±D round trip {rt_err:.2e}",
            broaden_rel * 100.0
        ),
    );
}

#[test]
fn criterion_5_noiseless_chain_zero_ber() {
    let cfg = ExperimentConfig {
        methods: vec![Method::None],
        fiber: FiberLinkConfig {
            num_spans: 0,
            ..FiberLinkConfig::default()
        },
        laser_linewidth_hz: 0.0,
        osnr_grid_db: vec![f64::INFINITY],
        ber_trials: 7, // 7 frames = 1_149_120 bits ≥ 10^6
        seed: 55,
        ..ExperimentConfig::default()
    };
    let records = run_ber_sweep(&cfg).unwrap();
    let r = &records[0];
    verdict(
        5,
        r.numerator == 0 && r.denominator >= 1_000_000,
        &format!("{} errors over {} bits (identity channel)", r.numerator, r.denominator),
    );
}

#[test]
fn criterion_6_slm_brute_force_equivalence() {
    let layout = ofdm::build_layout(&LayoutConfig::default()).unwrap();
    let mut r = rng(606);
    let phase_seed = 9;
    let m = 4;
    let mut all_match = true;
    for _ in 0..100 {
        let bits: Vec<u8> = (0..layout.num_data() * 4).map(|_| r.gen::<bool>() as u8).collect();
        let syms = qam16_map(&BitSeq::new(bits)).unwrap().symbols;
        let got = papr::slm_reduce(&syms, m, &layout, phase_seed).unwrap();
        // independent brute force over the same candidate set
        let mut best = (usize::MAX, f64::INFINITY);
        for c in 0..m {
            let phases = papr::slm_phase_sequence(phase_seed, c, syms.len());
            let rotated: Vec<Complex64> =
                syms.iter().zip(&phases).map(|(&s, &p)| s * p).collect();
            let body = ofdm::ofdm_modulate_body(&rotated, &layout).unwrap();
            let papr = papr::papr_db(&body).unwrap();
            if papr < best.1 {
                best = (c, papr);
            }
        }
        if got.candidate_index != best.0 || got.papr_db != best.1 {
            all_match = false;
        }
    }
    verdict(6, all_match, "exact index and value match on 100 random symbols, M=4");
}

#[test]
fn criterion_7_cli_determinism() {
    let bin = env!("CARGO_BIN_EXE_coofdm");
    let dir = out_dir().join("cli_det");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg_path = dir.join("det.cfg");
    std::fs::write(
        &cfg_path,
        "[experiment]\nmethods = none, clip, slm\nslm_candidates = 4\nccdf_trials = 200\n\
         ber_trials = 1\nosnr_grid_db = 30\n[fiber]\nnum_spans = 1\nstep_km = 10\n",
    )
    .unwrap();
    let run = |tag: &str| -> Vec<(String, Vec<u8>)> {
        let out = dir.join(tag);
        for sub in ["ccdf", "ber-sweep"] {
            let status = Command::new(bin)
                .args([
                    sub,
                    "--config",
                    cfg_path.to_str().unwrap(),
                    "--seed",
                    "7",
                    "--out",
                    out.to_str().unwrap(),
                ])
                .status()
                .unwrap();
            assert!(status.success(), "{sub} failed");
        }
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    std::fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort();
        files
    };
    let a = run("a");
    let b = run("b");
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    verdict(
        7,
        a == b && a.len() == 4,
        &format!("byte-identical outputs across two runs: {names:?}"),
    );
}

// --- trained-model criteria --------------------------------------------

/// Iteration budget for acceptance training. The published recipe allows
/// up to 20 000 iterations; on this single-core box that is ~3.6 h per
/// model, so the suite trains with a reduced budget and records actuals.
const TRAIN_BUDGET: usize = 2000;

fn out_dir() -> PathBuf {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.pop();
    p.pop();
    p.push("target");
    p.push("acceptance");
    std::fs::create_dir_all(&p).unwrap();
    p
}

static TRAIN_LOCK: Mutex<()> = Mutex::new(());

/// Trains (or loads a cached) autoencoder for the given channel-noise
/// sigma and returns the weight file path.
fn trained_weights(sigma: f64) -> PathBuf {
    let path = out_dir().join(format!("ae_sigma_{:03}.aew", (sigma * 100.0).round() as u32));
    let _guard = TRAIN_LOCK.lock().unwrap();
    if path.exists() {
        return path;
    }
    let cfg = TrainConfig {
        noise_sigma: sigma,
        max_iterations: TRAIN_BUDGET,
        seed: 42,
        ..TrainConfig::default()
    };
    let report = ae::train_autoencoder(&cfg).unwrap();
    eprintln!(
        "trained sigma={sigma}: {} iterations, {:.0} s, final papr {:.2} dB, recon {:.4}",
        report.records.len(),
        report.wall_time_s,
        report.records.last().unwrap().papr_loss,
        report.records.last().unwrap().reconstruction_loss
    );
    ae::save_weights(&report.params, &path).unwrap();
    path
}

/// Threshold (dB) where the CCDF first drops to or below `p`.
fn threshold_at(curve: &papr::CcdfCurve, p: f64) -> f64 {
    curve
        .thresholds_db
        .iter()
        .zip(&curve.probabilities)
        .find(|(_, &prob)| prob <= p)
        .map(|(&t, _)| t)
        .unwrap_or(f64::INFINITY)
}

#[test]
fn criterion_8_ccdf_reproduction() {
    let weights = trained_weights(0.35);
    let cfg = ExperimentConfig {
        methods: vec![
            Method::None,
            Method::Slm { candidates: 64 },
            Method::Ae { weights },
        ],
        ccdf_trials: 10_000,
        seed: 8,
        ..ExperimentConfig::default()
    };
    let curves = run_ccdf_experiment(&cfg).unwrap();
    let t = |label: &str| {
        threshold_at(
            &curves.iter().find(|(l, _)| l == label).unwrap().1,
            1e-3,
        )
    };
    let (t_none, t_slm, t_ae) = (t("none"), t("slm"), t("ae"));
    let gap_none = t_none - t_ae;
    let pass = t_slm < t_none && t_ae < t_slm && gap_none >= 6.0;
    verdict(
        8,
        pass,
        &format!(
            "thresholds at 1e-3: none {t_none} dB, slm-64 {t_slm} dB, ae {t_ae} dB; \
             ae-vs-none gap {gap_none:.2} dB (target ≥ 6, paper >10), ae-vs-slm {:.2} dB",
            t_slm - t_ae
        ),
    );
}

fn ber_cfg(methods: Vec<Method>, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        methods,
        osnr_grid_db: vec![20.0, 26.0, 32.0, 38.0, 44.0],
        ber_trials: 61, // 61 frames ≈ 1.0e7 bits per point
        fiber: FiberLinkConfig {
            step_km: 5.0,
            ..FiberLinkConfig::default()
        },
        seed,
        ..ExperimentConfig::default()
    }
}

fn by_method<'a>(records: &'a [MetricRecord], label: &str) -> Vec<&'a MetricRecord> {
    let mut v: Vec<&MetricRecord> = records.iter().filter(|r| r.method == label).collect();
    v.sort_by(|a, b| a.x_db.partial_cmp(&b.x_db).unwrap());
    v
}

/// BER at the top OSNR point within 10× of BER one 6 dB step down.
fn has_floor(points: &[&MetricRecord]) -> bool {
    let top = points.last().unwrap();
    let prev = &points[points.len() - 2];
    top.ratio > 0.0 && prev.ratio > 0.0 && top.ratio * 10.0 >= prev.ratio
}

/// Lowest OSNR with zero observed errors, if any.
fn error_free_onset(points: &[&MetricRecord]) -> Option<f64> {
    points.iter().find(|r| r.numerator == 0).map(|r| r.x_db)
}

#[test]
fn criterion_9_ber_vs_osnr_reproduction() {
    let weights = trained_weights(0.35);
    let cfg = ber_cfg(
        vec![
            Method::None,
            Method::Clip { ratio: 0.7 },
            Method::Slm { candidates: 64 },
            Method::Ae { weights },
        ],
        9,
    );
    let records = run_ber_sweep(&cfg).unwrap();
    let mut floors = Vec::new();
    let mut all_floor = true;
    for label in ["none", "clip", "slm"] {
        let pts = by_method(&records, label);
        let floored = has_floor(&pts);
        all_floor &= floored;
        floors.push(format!(
            "{label} floor {} (top BER {:.2e})",
            floored,
            pts.last().unwrap().ratio
        ));
    }
    let ae_pts = by_method(&records, "ae");
    let onset = error_free_onset(&ae_pts);
    let slm_top = by_method(&records, "slm").last().unwrap().ratio;
    let pass = all_floor && onset.is_some();
    verdict(
        9,
        pass,
        &format!(
            "{}; ae error-free onset {:?} dB (paper ≈28 dB); slm-64 top-OSNR BER {:.2e} \
             (paper ≈2e-6 at 44 dB, reported only); ae top BER {:.2e}",
            floors.join("; "),
            onset,
            slm_top,
            ae_pts.last().unwrap().ratio
        ),
    );
}

#[test]
fn criterion_10_noise_sigma_sweep() {
    let mut onsets = Vec::new();
    let mut pass = true;
    for &sigma in &[0.1, 0.16, 0.2, 0.35] {
        let weights = trained_weights(sigma);
        let cfg = ber_cfg(vec![Method::Ae { weights }], 10);
        let records = run_ber_sweep(&cfg).unwrap();
        let pts = by_method(&records, "ae");
        let onset = error_free_onset(&pts);
        let expect_error_free = sigma >= 0.2;
        if expect_error_free {
            pass &= onset.is_some();
        } else {
            pass &= onset.is_none();
        }
        onsets.push(format!(
            "sigma {sigma}: onset {onset:?} dB, top BER {:.2e}",
            pts.last().unwrap().ratio
        ));
    }
    verdict(
        10,
        pass,
        &format!(
            "{} (paper: 0.2/0.35 error-free near 32/28 dB; 0.1/0.16 floor)",
            onsets.join("; ")
        ),
    );
}

#[test]
fn criterion_11_training_sanity_and_ablation() {
    // Held-out PAPR loss through initial vs trained weights, lambda=0.01.
    let weights = trained_weights(0.35);
    let trained = ae::load_weights(&weights).unwrap();
    // iteration-0 state of the same training configuration
    let initial = match TrainConfig::default().init {
        ae::InitScheme::Identity => MlpParams::init_identity(1710, 42, ae::INIT_NOISE).unwrap(),
        ae::InitScheme::Clip(m) => MlpParams::init_clip(1710, m, 42, ae::INIT_NOISE).unwrap(),
    };

    let held_out_papr = |params: &MlpParams| -> f64 {
        let mut r = rng(0xea1);
        let mut total = 0.0;
        let n = 32;
        for _ in 0..n {
            let bits: Vec<u8> = (0..855 * 4).map(|_| r.gen::<bool>() as u8).collect();
            let x = ae::pack_symbols(&qam16_map(&BitSeq::new(bits)).unwrap().symbols);
            let latent = ae::encoder_forward(&x, params).unwrap();
            total += ae::papr_loss(&latent).unwrap();
        }
        total / n as f64
    };
    let papr_before = held_out_papr(&initial);
    let papr_after = held_out_papr(&trained);

    // Ablation: lambda = 0 training should not systematically reduce PAPR.
    let ablate_cfg = TrainConfig {
        lambda: 0.0,
        max_iterations: 300,
        seed: 42,
        ..TrainConfig::default()
    };
    let ablate = ae::train_autoencoder(&ablate_cfg).unwrap();
    let papr_ablate = held_out_papr(&ablate.params);

    let decreased = papr_after < papr_before;
    let ablation_flat = papr_ablate > papr_after && papr_before - papr_ablate < 2.0;
    verdict(
        11,
        decreased && ablation_flat,
        &format!(
            "held-out papr: init {papr_before:.2} dB → trained(λ=0.01) {papr_after:.2} dB; \
             λ=0 ablation {papr_ablate:.2} dB"
        ),
    );
}
