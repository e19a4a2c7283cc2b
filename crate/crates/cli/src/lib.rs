//! The `lungnet` command line.
//!
//! Every subcommand reads an optional TOML config (`--config`), applies its flags
//! on top, validates the result and delegates to [`commands`]. Exit codes: 0 on
//! success, 1 for usage errors, 2 for data errors, 3 for internal failures.

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lungnet::dataset::Split;

use crate::config::Config;
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "lungnet", version, about = "Chest-CT slice classification pipeline")]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed for every randomized stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// NIfTI volumes to body-cropped PNG slices from the middle of the stack.
    Convert(ConvertArgs),
    /// Body-crop every image of a manifest.
    Preprocess(PreprocessArgs),
    /// Stratified train/val/test assignment.
    Split(SplitArgs),
    /// Train the transfer head with early stopping.
    Train(TrainArgs),
    /// Score a split and write metrics and curves.
    Evaluate(EvaluateArgs),
    /// Grad-CAM and guided-backprop renders for single images.
    Explain(ExplainArgs),
    /// Generate the synthetic phantom dataset.
    Phantoms(PhantomsArgs),
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// `.nii` or `.nii.gz` files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub window_lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub window_hi: Option<f64>,
    #[arg(long)]
    pub band_lo: Option<f64>,
    #[arg(long)]
    pub band_hi: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also replace everything outside the body with the exterior mean.
    #[arg(long)]
    pub exclude_exterior: bool,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output manifest path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub train: Option<f64>,
    #[arg(long)]
    pub val: Option<f64>,
    #[arg(long)]
    pub test: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Weights to start from; tensors it lacks keep their initial values.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub image_size: Option<usize>,
    /// Train the backbone too.
    #[arg(long)]
    pub unfreeze: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = Split::Test)]
    pub split: Split,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub image_size: Option<usize>,
    /// Also write `pr.svg` and `roc.svg`.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(required = true)]
    pub images: Vec<PathBuf>,
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub image_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PhantomsArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Images per class.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub size: Option<usize>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Resolves the configuration of one invocation: file, then flags.
pub fn resolve_config(cli: &Cli) -> Result<Config> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    cfg.set_seed(seed);
    match &cli.command {
        Command::Convert(a) => {
            let (lo, hi) = (
                a.window_lo.unwrap_or(cfg.convert.window.lo()),
                a.window_hi.unwrap_or(cfg.convert.window.hi()),
            );
            cfg.convert.window = lungnet::HuWindow::new(lo, hi)?;
            set(&mut cfg.convert.band.lo, a.band_lo);
            set(&mut cfg.convert.band.hi, a.band_hi);
        }
        Command::Split(a) => {
            set(&mut cfg.split.train, a.train);
            set(&mut cfg.split.val, a.val);
            set(&mut cfg.split.test, a.test);
        }
        Command::Train(a) => {
            set(&mut cfg.train.max_epochs, a.epochs);
            set(&mut cfg.train.batch_size, a.batch_size);
            set(&mut cfg.train.adam.lr, a.lr);
            set(&mut cfg.train.patience, a.patience);
            set(&mut cfg.image_size, a.image_size);
            if a.unfreeze {
                cfg.freeze_backbone = false;
            }
        }
        Command::Evaluate(a) => {
            set(&mut cfg.train.threshold, a.threshold);
            set(&mut cfg.image_size, a.image_size);
        }
        Command::Explain(a) => {
            set(&mut cfg.train.threshold, a.threshold);
            set(&mut cfg.explain.alpha, a.alpha);
            set(&mut cfg.image_size, a.image_size);
        }
        Command::Phantoms(a) => {
            set(&mut cfg.phantoms.count_per_class, a.count);
            set(&mut cfg.phantoms.size, a.size);
        }
        Command::Preprocess(_) => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Convert(a) => {
            let written = commands::convert(&cfg, &a.inputs, &a.out)?;
            println!("wrote {} slices to {}", written.len(), a.out.display());
        }
        Command::Preprocess(a) => {
            let m = commands::preprocess(&cfg, &a.manifest, &a.out, a.exclude_exterior)?;
            println!("preprocessed {} images into {}", m.rows.len(), a.out.display());
        }
        Command::Split(a) => {
            let rows = commands::split(&cfg, &a.manifest, &a.out)?;
            let count = |s: Split| rows.iter().filter(|r| r.split == Some(s)).count();
            println!(
                "train {} / val {} / test {} written to {}",
                count(Split::Train),
                count(Split::Val),
                count(Split::Test),
                a.out.display()
            );
        }
        Command::Train(a) => {
            let outcome = commands::train_cmd(&cfg, &a.manifest, &a.out, a.init.as_deref())?;
            for w in &outcome.log.warnings {
                eprintln!("warning: {w}");
            }
            let best = &outcome.log.epochs[outcome.log.best_epoch - 1];
            println!(
                "best epoch {} of {} (val_acc {:.4}, val_loss {:.4}){}; weights in {}",
                outcome.log.best_epoch,
                outcome.log.epochs.len(),
                best.val_acc,
                best.val_loss,
                if outcome.log.stopped_early { ", stopped early" } else { "" },
                outcome.weights.display()
            );
        }
        Command::Evaluate(a) => {
            let report = commands::evaluate(&cfg, &a.manifest, &a.weights, &a.out, a.split, a.svg)?;
            let s = report.summary();
            println!(
                "accuracy {:.4} precision {:.4} recall {:.4} f1 {:.4} AP {:.4} AUC {:.4}",
                s.accuracy, s.precision, s.recall, s.f1, s.average_precision, s.roc_auc
            );
        }
        Command::Explain(a) => {
            commands::explain(&cfg, &a.weights, &a.images, &a.out)?;
        }
        Command::Phantoms(a) => {
            let rows = commands::phantoms(&cfg, &a.out)?;
            println!("wrote {} phantoms to {}", rows.len(), a.out.display());
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(CliError { kind, message }) => {
            eprintln!("error: {message}");
            kind.exit_code()
        }
    }
}
