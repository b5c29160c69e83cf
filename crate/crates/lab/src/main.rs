//! `coofdm` — CCDF / BER experiment runner and autoencoder trainer.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coofdm_core::ae;
use coofdm_lab::config::LabConfig;
use coofdm_lab::emit::{emit_csv, emit_plot, CsvKind, PlotCurve};
use coofdm_lab::experiments::{
    ccdf_records, run_ber_sweep, run_ccdf_experiment, simulate_once, LabError, MetricRecord,
};

#[derive(Parser)]
#[command(
    name = "coofdm",
    about = "Coherent-optical OFDM PAPR-reduction laboratory",
    disable_help_subcommand = true
)]
struct Cli {
    /// Experiment/training configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the autoencoder and write a weight file plus a loss trace.
    Train,
    /// Estimate the PAPR CCDF of every configured method.
    Ccdf,
    /// Run the BER-vs-OSNR sweep over the configured grid.
    BerSweep,
    /// Run a single instrumented frame end to end.
    Simulate,
}

/// Errors that indicate a bad configuration (exit 1) rather than a
/// runtime failure (exit 2).
fn is_config_error(e: &LabError) -> bool {
    matches!(
        e,
        LabError::WeightFile(..) | LabError::WidthMismatch { .. }
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage and version/help requests print and exit 0; anything
            // else is a usage error.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

type CliError = (u8, String);

fn config_err(message: impl ToString) -> CliError {
    (1, message.to_string())
}

fn runtime_err(message: impl ToString) -> CliError {
    (2, message.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => LabConfig::from_file(path).map_err(config_err)?,
        None => LabConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.experiment.seed = seed;
        cfg.training.train.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.experiment.out_dir = out;
    }
    let out_dir = cfg.experiment.out_dir.clone();
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| runtime_err(format!("cannot create {}: {e}", out_dir.display())))?;

    let lab_err = |e: LabError| {
        if is_config_error(&e) {
            config_err(e)
        } else {
            runtime_err(e)
        }
    };

    match cli.command {
        Command::Train => {
            let report = ae::train_autoencoder(&cfg.training.train).map_err(runtime_err)?;
            let weights_path = if cfg.training.weights_out.is_relative() {
                out_dir.join(&cfg.training.weights_out)
            } else {
                cfg.training.weights_out.clone()
            };
            ae::save_weights(&report.params, &weights_path).map_err(runtime_err)?;
            let trace_path = out_dir.join("train_report.csv");
            let mut text = String::from("iteration,reconstruction_loss,papr_loss,total_loss\n");
            for r in &report.records {
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    r.iteration, r.reconstruction_loss, r.papr_loss, r.total_loss
                ));
            }
            std::fs::write(&trace_path, text)
                .map_err(|e| runtime_err(format!("cannot write {}: {e}", trace_path.display())))?;
            if let Some(last) = report.records.last() {
                println!(
                    "trained {} iterations in {:.1} s: recon {:.6}, papr {:.3} dB, total {:.6}",
                    report.records.len(),
                    report.wall_time_s,
                    last.reconstruction_loss,
                    last.papr_loss,
                    last.total_loss
                );
            }
            println!("weights: {}", weights_path.display());
            println!("loss trace: {}", trace_path.display());
        }
        Command::Ccdf => {
            let curves = run_ccdf_experiment(&cfg.experiment).map_err(lab_err)?;
            let records: Vec<MetricRecord> = curves
                .iter()
                .flat_map(|(label, curve)| ccdf_records(label, curve, cfg.experiment.seed))
                .collect();
            let csv_path = out_dir.join("ccdf.csv");
            emit_csv(CsvKind::Ccdf, &records, &csv_path).map_err(runtime_err)?;
            let plot: Vec<PlotCurve> = curves
                .iter()
                .map(|(label, _)| PlotCurve::from_records(label, &records))
                .collect();
            let svg_path = out_dir.join("ccdf.svg");
            emit_plot(&plot, &svg_path).map_err(runtime_err)?;
            println!("ccdf: {} methods × {} trials", curves.len(), cfg.experiment.ccdf_trials);
            println!("wrote {} and {}", csv_path.display(), svg_path.display());
        }
        Command::BerSweep => {
            let records = run_ber_sweep(&cfg.experiment).map_err(lab_err)?;
            let csv_path = out_dir.join("ber.csv");
            emit_csv(CsvKind::Ber, &records, &csv_path).map_err(runtime_err)?;
            let mut labels: Vec<String> = records.iter().map(|r| r.method.clone()).collect();
            labels.dedup();
            labels.sort();
            labels.dedup();
            let plot: Vec<PlotCurve> = labels
                .iter()
                .map(|l| PlotCurve::from_records(l, &records))
                .collect();
            let svg_path = out_dir.join("ber.svg");
            emit_plot(&plot, &svg_path).map_err(runtime_err)?;
            for r in &records {
                println!(
                    "{} @ {} dB OSNR: {} / {} bits, ber {:.3e}",
                    r.method, r.x_db, r.numerator, r.denominator, r.ratio
                );
            }
            println!("wrote {} and {}", csv_path.display(), svg_path.display());
        }
        Command::Simulate => {
            let report = simulate_once(&cfg.experiment).map_err(lab_err)?;
            println!("method:           {}", report.method);
            println!("tx papr:          {:.2} dB", report.tx_papr_db);
            println!("launch power:     {:.1} dBm", report.launch_power_dbm);
            println!("rx power:         {:.1} dBm", report.rx_power_dbm);
            println!("pilot power frac: {:.4}", report.pilot_power_ratio);
            println!("osnr:             {} dB", report.osnr_db);
            println!(
                "ber:              {:.3e} ({} / {} bits)",
                report.ber, report.bit_errors, report.bits
            );
        }
    }
    Ok(())
}
