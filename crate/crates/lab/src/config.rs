//! Plain-text sectioned key-value configuration.
//!
//! Grammar: `[section]` headers, `key = value` assignments, `#` starts a
//! comment (whole line or trailing), blank lines ignored. Keys are
//! case-sensitive; values are trimmed. Lists are comma-separated.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use coofdm_core::ae::{InitScheme, TrainConfig};
use coofdm_core::channel::FiberLinkConfig;
use coofdm_core::ofdm::LayoutConfig;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Unreadable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value` or `[section]`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: assignment `{key}` appears before any [section]")]
    KeyOutsideSection { line: usize, key: String },
    #[error("[{section}] {key}: cannot parse `{value}` as {expected}")]
    BadValue {
        section: String,
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("[{section}] {key}: unknown key")]
    UnknownKey { section: String, key: String },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown method `{0}` (expected none, clip, slm or ae)")]
    UnknownMethod(String),
    #[error("method `ae` requires a `weights` path in [experiment]")]
    MissingWeights,
    #[error("[{section}] {key}: {reason}")]
    BadField {
        section: String,
        key: String,
        reason: &'static str,
    },
}

/// Raw parse result: section name → key → value, in declaration order
/// within each section (later duplicates overwrite earlier ones).
pub type RawConfig = BTreeMap<String, BTreeMap<String, String>>;

/// Parses the sectioned key-value grammar without interpreting values.
pub fn parse_config(text: &str) -> Result<RawConfig, ConfigError> {
    let mut out: RawConfig = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw_line) in text.lines().enumerate() {
        let line = match raw_line.split_once('#') {
            Some((head, _)) => head,
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_string();
            out.entry(name.clone()).or_default();
            current = Some(name);
        } else if let Some((key, value)) = line.split_once('=') {
            let key = key.trim().to_string();
            let section = current.clone().ok_or_else(|| ConfigError::KeyOutsideSection {
                line: i + 1,
                key: key.clone(),
            })?;
            out.get_mut(&section)
                .expect("section entry created on header")
                .insert(key, value.trim().to_string());
        } else {
            return Err(ConfigError::Malformed {
                line: i + 1,
                text: line.to_string(),
            });
        }
    }
    Ok(out)
}

/// A PAPR-reduction method under test.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    None,
    Clip { ratio: f64 },
    Slm { candidates: usize },
    Ae { weights: PathBuf },
}

impl Method {
    /// Label used in CSV rows and plot legends.
    pub fn label(&self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Clip { .. } => "clip",
            Method::Slm { .. } => "slm",
            Method::Ae { .. } => "ae",
        }
    }
}

/// Everything an experiment run needs: methods, grids, physics, seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub layout: LayoutConfig,
    pub fiber: FiberLinkConfig,
    pub laser_linewidth_hz: f64,
    /// OSNR grid in dB for BER sweeps.
    pub osnr_grid_db: Vec<f64>,
    /// OFDM symbols sampled per method for CCDF estimation.
    pub ccdf_trials: usize,
    /// Frames simulated per OSNR point for BER sweeps.
    pub ber_trials: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::None],
            layout: LayoutConfig::default(),
            fiber: FiberLinkConfig::default(),
            laser_linewidth_hz: 100e3,
            osnr_grid_db: (5..=11).map(|i| 4.0 * i as f64).collect(),
            ccdf_trials: 10_000,
            ber_trials: 61, // 61 frames ≈ 10^7 bits per point
            seed: 1,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Training settings: the core [`TrainConfig`] plus where to put the
/// weight file and loss trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub train: TrainConfig,
    pub weights_out: PathBuf,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            weights_out: PathBuf::from("ae.aew"),
        }
    }
}

/// Fully interpreted configuration file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabConfig {
    pub experiment: ExperimentConfig,
    pub training: TrainSettings,
}

fn parse_scalar<T: std::str::FromStr>(
    section: &str,
    key: &str,
    value: &str,
    expected: &'static str,
) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        section: section.to_string(),
        key: key.to_string(),
        value: value.to_string(),
        expected,
    })
}

fn parse_f64_list(section: &str, key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(|v| parse_scalar(section, key, v.trim(), "a number list"))
        .collect()
}

impl LabConfig {
    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        let raw = parse_config(text)?;
        let mut cfg = LabConfig::default();
        // method parameters gathered first, resolved after the section loop
        let mut method_names: Vec<String> = vec!["none".to_string()];
        let mut clip_ratio = 0.5;
        let mut slm_candidates = 64usize;
        let mut weights: Option<PathBuf> = None;

        for (section, entries) in &raw {
            for (key, value) in entries {
                let (s, k) = (section.as_str(), key.as_str());
                match s {
                    "experiment" => match k {
                        "methods" => {
                            method_names =
                                value.split(',').map(|m| m.trim().to_string()).collect()
                        }
                        "clip_ratio" => clip_ratio = parse_scalar(s, k, value, "a ratio")?,
                        "slm_candidates" => {
                            slm_candidates = parse_scalar(s, k, value, "a count")?
                        }
                        "weights" => weights = Some(PathBuf::from(value)),
                        "osnr_grid_db" => {
                            cfg.experiment.osnr_grid_db = parse_f64_list(s, k, value)?
                        }
                        "ccdf_trials" => {
                            cfg.experiment.ccdf_trials = parse_scalar(s, k, value, "a count")?
                        }
                        "ber_trials" => {
                            cfg.experiment.ber_trials = parse_scalar(s, k, value, "a count")?
                        }
                        "seed" => cfg.experiment.seed = parse_scalar(s, k, value, "a u64 seed")?,
                        "out_dir" => cfg.experiment.out_dir = PathBuf::from(value),
                        _ => return Err(unknown_key(s, k)),
                    },
                    "layout" => {
                        let l = &mut cfg.experiment.layout;
                        match k {
                            "fft_size" => l.fft_size = parse_scalar(s, k, value, "a count")?,
                            "num_data" => l.num_data = parse_scalar(s, k, value, "a count")?,
                            "num_guard" => l.num_guard = parse_scalar(s, k, value, "a count")?,
                            "num_zero_pad" => {
                                l.num_zero_pad = parse_scalar(s, k, value, "a count")?
                            }
                            "cp_len" => l.cp_len = parse_scalar(s, k, value, "a count")?,
                            "pilot_gain" => l.pilot_gain = parse_scalar(s, k, value, "a gain")?,
                            _ => return Err(unknown_key(s, k)),
                        }
                    }
                    "fiber" => {
                        let f = &mut cfg.experiment.fiber;
                        match k {
                            "span_length_km" => {
                                f.span_length_km = parse_scalar(s, k, value, "km")?
                            }
                            "num_spans" => f.num_spans = parse_scalar(s, k, value, "a count")?,
                            "alpha_db_per_km" => {
                                f.alpha_db_per_km = parse_scalar(s, k, value, "dB/km")?
                            }
                            "dispersion_ps_nm_km" => {
                                f.dispersion_ps_nm_km = parse_scalar(s, k, value, "ps/(nm·km)")?
                            }
                            "gamma_per_w_km" => {
                                f.gamma_per_w_km = parse_scalar(s, k, value, "1/(W·km)")?
                            }
                            "amp_gain_db" => f.amp_gain_db = parse_scalar(s, k, value, "dB")?,
                            "wavelength_nm" => {
                                f.wavelength_nm = parse_scalar(s, k, value, "nm")?
                            }
                            "step_km" => f.step_km = parse_scalar(s, k, value, "km")?,
                            "launch_power_dbm" => {
                                f.launch_power_dbm = parse_scalar(s, k, value, "dBm")?
                            }
                            _ => return Err(unknown_key(s, k)),
                        }
                    }
                    "laser" => match k {
                        "linewidth_hz" => {
                            cfg.experiment.laser_linewidth_hz = parse_scalar(s, k, value, "Hz")?
                        }
                        _ => return Err(unknown_key(s, k)),
                    },
                    "train" => {
                        let t = &mut cfg.training.train;
                        match k {
                            "width" => t.width = parse_scalar(s, k, value, "a count")?,
                            "sigma" => t.noise_sigma = parse_scalar(s, k, value, "a std dev")?,
                            "lambda" => t.lambda = parse_scalar(s, k, value, "a weight")?,
                            "learning_rate" => {
                                t.learning_rate = parse_scalar(s, k, value, "a rate")?
                            }
                            "batch_size" => t.batch_size = parse_scalar(s, k, value, "a count")?,
                            "max_iterations" => {
                                t.max_iterations = parse_scalar(s, k, value, "a count")?
                            }
                            "seed" => t.seed = parse_scalar(s, k, value, "a u64 seed")?,
                            "convergence_window" => {
                                t.convergence_window = parse_scalar(s, k, value, "a count")?
                            }
                            "convergence_tol" => {
                                t.convergence_tol = parse_scalar(s, k, value, "a tolerance")?
                            }
                            "warmup_iterations" => {
                                t.warmup_iterations = parse_scalar(s, k, value, "a count")?
                            }
                            "recon_target" => {
                                t.recon_target = parse_scalar(s, k, value, "a loss level")?
                            }
                            "controller_gain" => {
                                t.controller_gain = parse_scalar(s, k, value, "a gain")?
                            }
                            "init" => {
                                t.init = match value.as_str() {
                                    "identity" => InitScheme::Identity,
                                    "clip" => InitScheme::Clip(1.7),
                                    _ => {
                                        return Err(ConfigError::BadValue {
                                            section: s.to_string(),
                                            key: k.to_string(),
                                            value: value.to_string(),
                                            expected: "identity or clip",
                                        })
                                    }
                                }
                            }
                            "clip_mult" => {
                                t.init =
                                    InitScheme::Clip(parse_scalar(s, k, value, "a multiplier")?)
                            }
                            "decoder_lr_mult" => {
                                t.decoder_lr_mult = parse_scalar(s, k, value, "a multiplier")?
                            }
                            "center_papr_grad" => {
                                t.center_papr_grad = match value.as_str() {
                                    "true" => true,
                                    "false" => false,
                                    _ => {
                                        return Err(ConfigError::BadValue {
                                            section: s.to_string(),
                                            key: k.to_string(),
                                            value: value.to_string(),
                                            expected: "true or false",
                                        })
                                    }
                                }
                            }
                            "weights_out" => cfg.training.weights_out = PathBuf::from(value),
                            _ => return Err(unknown_key(s, k)),
                        }
                    }
                    _ => return Err(ConfigError::UnknownSection(section.clone())),
                }
            }
        }

        cfg.experiment.methods = method_names
            .iter()
            .map(|name| match name.as_str() {
                "none" => Ok(Method::None),
                "clip" => Ok(Method::Clip { ratio: clip_ratio }),
                "slm" => Ok(Method::Slm {
                    candidates: slm_candidates,
                }),
                "ae" => weights
                    .clone()
                    .map(|weights| Method::Ae { weights })
                    .ok_or(ConfigError::MissingWeights),
                other => Err(ConfigError::UnknownMethod(other.to_string())),
            })
            .collect::<Result<_, _>>()?;

        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_str(&text)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |section: &str, key: &str, reason: &'static str| ConfigError::BadField {
            section: section.to_string(),
            key: key.to_string(),
            reason,
        };
        let e = &self.experiment;
        if e.ccdf_trials < 1 {
            return Err(bad("experiment", "ccdf_trials", "must be at least 1"));
        }
        if e.ber_trials < 1 {
            return Err(bad("experiment", "ber_trials", "must be at least 1"));
        }
        if e.osnr_grid_db.is_empty() {
            return Err(bad("experiment", "osnr_grid_db", "must not be empty"));
        }
        for m in &e.methods {
            match m {
                Method::Clip { ratio } if !(*ratio > 0.0 && *ratio <= 1.0) => {
                    return Err(bad("experiment", "clip_ratio", "must be in (0, 1]"));
                }
                Method::Slm { candidates } if *candidates < 1 => {
                    return Err(bad("experiment", "slm_candidates", "must be at least 1"));
                }
                _ => {}
            }
        }
        let t = &self.training.train;
        if t.noise_sigma < 0.0 {
            return Err(bad("train", "sigma", "must be nonnegative"));
        }
        if t.lambda < 0.0 {
            return Err(bad("train", "lambda", "must be nonnegative"));
        }
        if t.batch_size < 1 {
            return Err(bad("train", "batch_size", "must be at least 1"));
        }
        Ok(())
    }
}

fn unknown_key(section: &str, key: &str) -> ConfigError {
    ConfigError::UnknownKey {
        section: section.to_string(),
        key: key.to_string(),
    }
}
