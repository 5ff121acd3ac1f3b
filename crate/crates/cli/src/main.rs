use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod error;
mod settings;
mod tables;

use error::CliError;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

/// Hippocampal MRI prognosis pipeline: synthetic data, CNN feature learning,
/// LASSO-Cox survival modelling and evaluation.
#[derive(Parser, Debug)]
#[command(name = "hippoprog", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Flat key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the config `seed`).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic cohort: volumes, manifest and ground truth.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the two-stream classifier on the NC and AD rows of a manifest.
    TrainCnn {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
        /// Network channel scale factor, e.g. `1/8` or `0.5`.
        #[arg(long)]
        scale: Option<String>,
        /// Training log CSV (default: `<out>.log.csv`).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Write per-subject GAP feature vectors.
    ExtractFeatures {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a Cox model on the MCI rows of a manifest.
    FitCox {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        /// Feature CSV from extract-features.
        #[arg(long)]
        features: Option<PathBuf>,
        /// COXFIT1 file to write.
        #[arg(long)]
        out: PathBuf,
        /// CV curve CSV (default: `<out>.cv.csv`).
        #[arg(long)]
        cv_out: Option<PathBuf>,
        /// Unpenalized Cox on clinical columns only.
        #[arg(long)]
        clinical: bool,
        /// Unpenalized Cox on clinical columns plus the imaging risk score.
        #[arg(long)]
        combined: bool,
        /// Comma-separated clinical columns.
        #[arg(long)]
        covariates: Option<String>,
        /// Imaging LASSO-Cox model supplying the risk score for --combined.
        #[arg(long)]
        coxfit: Option<PathBuf>,
        /// Number of cross-validation folds.
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Predict linear predictors and progression probabilities.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        coxfit: PathBuf,
        #[arg(long)]
        features: Option<PathBuf>,
        /// Imaging model for the `imaging_risk` covariate of a combined fit.
        #[arg(long)]
        imaging_coxfit: Option<PathBuf>,
        /// Comma-separated horizons in months.
        #[arg(long)]
        horizon: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// C-index with bootstrap CI and IPCW time-dependent AUC.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Prediction CSV (subject_id, eta, ...).
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        horizon: Option<String>,
        /// `strict` or `half`.
        #[arg(long)]
        tie_rule: Option<String>,
        /// Directory for evaluation and ROC CSVs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quartile risk groups, Kaplan-Meier curves and log-rank tests.
    Stratify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated clinical columns for a covariate-adjusted test.
        #[arg(long)]
        adjust: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Upsampled class activation maps as VOL3 files.
    RelevanceMap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// `AD` or `NC`.
        #[arg(long, default_value = "AD")]
        class: String,
        /// Restrict to these subject ids (repeatable).
        #[arg(long)]
        subject: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    use commands::*;
    match cli.command {
        Command::GenData { common, out } => gen_data(&common, &out),
        Command::TrainCnn {
            common,
            manifest,
            out,
            scale,
            log,
        } => train_cnn(&common, &manifest, &out, scale.as_deref(), log),
        Command::ExtractFeatures {
            common,
            manifest,
            model,
            out,
        } => extract(&common, &manifest, &model, &out),
        Command::FitCox {
            common,
            manifest,
            features,
            out,
            cv_out,
            clinical,
            combined,
            covariates,
            coxfit,
            folds,
        } => fit_cox(
            &common,
            &FitCoxArgs {
                manifest,
                features,
                out,
                cv_out,
                clinical,
                combined,
                covariates,
                imaging: coxfit,
                folds,
            },
        ),
        Command::Predict {
            common,
            manifest,
            coxfit,
            features,
            imaging_coxfit,
            horizon,
            out,
        } => predict(
            &common,
            &manifest,
            &coxfit,
            features.as_deref(),
            imaging_coxfit.as_deref(),
            horizon.as_deref(),
            &out,
        ),
        Command::Evaluate {
            common,
            predictions,
            manifest,
            horizon,
            tie_rule,
            out,
        } => evaluate(
            &common,
            &predictions,
            &manifest,
            horizon.as_deref(),
            tie_rule.as_deref(),
            out.as_deref(),
        ),
        Command::Stratify {
            common,
            predictions,
            manifest,
            adjust,
            out,
        } => stratify(&common, &predictions, &manifest, adjust.as_deref(), &out),
        Command::RelevanceMap {
            common,
            manifest,
            model,
            class,
            subject,
            out,
        } => relevance(&common, &manifest, &model, &class, &subject, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("error usage: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error {}: {}", e.kind(), e.to_string().replace('\n', " "));
            ExitCode::from(e.exit_code())
        }
    }
}
