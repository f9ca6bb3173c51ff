//! `moto` — Chinese text classification over character, radical, Wubi, and
//! Pinyin streams.
//!
//! Settings resolve in three layers: built-in defaults, then an optional
//! `--config` file of `key = value` lines, then command-line flags. Every
//! command is deterministic given its inputs and seed: no timestamps,
//! wall-clock, or locale-dependent output anywhere.

mod commands;
mod config;
mod error;
mod logging;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Settings;
use crate::error::Result;
use crate::logging::Logger;

#[derive(Debug, Parser)]
#[command(
    name = "moto",
    version,
    about = "Chinese text classification over character, radical, Wubi, and Pinyin streams"
)]
struct Cli {
    /// Config file of `key = value` lines; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit vocabularies on a corpus and export encoded id streams.
    Featurize(FeaturizeArgs),
    /// Train a classifier; writes a checkpoint and a training log.
    Train(TrainArgs),
    /// Score a labelled corpus against a trained checkpoint.
    Eval(EvalArgs),
    /// Classify a single text with a trained checkpoint.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
struct DictFlags {
    /// Character → radicals dictionary (TSV: char<TAB>comma-joined tokens).
    #[arg(long, value_name = "FILE")]
    dict_radical: Option<PathBuf>,
    /// Character → Wubi code dictionary (TSV).
    #[arg(long, value_name = "FILE")]
    dict_wubi: Option<PathBuf>,
    /// Character → Pinyin dictionary (TSV).
    #[arg(long, value_name = "FILE")]
    dict_pinyin: Option<PathBuf>,
}

impl DictFlags {
    fn apply(&self, s: &mut Settings) {
        if let Some(p) = &self.dict_radical {
            s.dict_radical = Some(p.clone());
        }
        if let Some(p) = &self.dict_wubi {
            s.dict_wubi = Some(p.clone());
        }
        if let Some(p) = &self.dict_pinyin {
            s.dict_pinyin = Some(p.clone());
        }
    }
}

#[derive(Debug, Args)]
struct FeaturizeArgs {
    /// Corpus to fit vocabularies on (TSV: label<TAB>text).
    #[arg(long, value_name = "FILE")]
    train: Option<PathBuf>,
    /// Optional held-out corpus encoded with the fitted vocabularies.
    #[arg(long, value_name = "FILE")]
    test: Option<PathBuf>,
    #[command(flatten)]
    dicts: DictFlags,
    /// Artifact directory to write into.
    #[arg(long, value_name = "DIR")]
    ckpt: Option<PathBuf>,
    /// Drop samples whose share of non-Chinese characters exceeds this.
    #[arg(long, value_name = "RATIO")]
    max_non_chinese_ratio: Option<f64>,
}

impl FeaturizeArgs {
    fn apply(&self, s: &mut Settings) -> Result<()> {
        if let Some(p) = &self.train {
            s.train = Some(p.clone());
        }
        if let Some(p) = &self.test {
            s.test = Some(p.clone());
        }
        self.dicts.apply(s);
        if let Some(p) = &self.ckpt {
            s.ckpt = p.clone();
        }
        if let Some(r) = self.max_non_chinese_ratio {
            s.max_non_chinese_ratio = Some(r);
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Training corpus (TSV: label<TAB>text).
    #[arg(long, value_name = "FILE")]
    train: Option<PathBuf>,
    /// Held-out corpus scored after every epoch.
    #[arg(long, value_name = "FILE")]
    test: Option<PathBuf>,
    #[command(flatten)]
    dicts: DictFlags,
    /// Pretrained character vectors overlaid on the character embeddings.
    #[arg(long, value_name = "FILE")]
    embeddings: Option<PathBuf>,
    /// Artifact directory for the checkpoint and training log.
    #[arg(long, value_name = "DIR")]
    ckpt: Option<PathBuf>,
    /// Seed for initialization and batch shuffling.
    #[arg(long)]
    seed: Option<u64>,
    /// Streams to enable: `c` plus any of `r`, `w`, `p` (e.g. `crwp`, `c`).
    #[arg(long, value_name = "LETTERS")]
    streams: Option<String>,
    /// Epoch budget.
    #[arg(long, value_name = "N")]
    max_epochs: Option<usize>,
    /// Samples per optimizer step.
    #[arg(long, value_name = "N")]
    batch: Option<usize>,
    /// Learning rate.
    #[arg(long, value_name = "RATE")]
    lr: Option<f64>,
    /// Dropout rate in [0, 1).
    #[arg(long, value_name = "RATE")]
    dropout: Option<f64>,
    /// Worker threads per batch (changes floating-point accumulation order).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Drop samples whose share of non-Chinese characters exceeds this.
    #[arg(long, value_name = "RATIO")]
    max_non_chinese_ratio: Option<f64>,
}

impl TrainArgs {
    fn apply(&self, s: &mut Settings) -> Result<()> {
        if let Some(p) = &self.train {
            s.train = Some(p.clone());
        }
        if let Some(p) = &self.test {
            s.test = Some(p.clone());
        }
        self.dicts.apply(s);
        if let Some(p) = &self.embeddings {
            s.embeddings = Some(p.clone());
        }
        if let Some(p) = &self.ckpt {
            s.ckpt = p.clone();
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(sel) = &self.streams {
            s.streams = config::parse_streams(sel).map_err(error::CliError::usage)?;
        }
        if let Some(v) = self.max_epochs {
            s.max_epochs = v;
        }
        if let Some(v) = self.batch {
            s.batch = v;
        }
        if let Some(v) = self.lr {
            s.lr = v;
        }
        if let Some(v) = self.dropout {
            s.dropout = v;
        }
        if let Some(v) = self.threads {
            s.threads = v;
        }
        if let Some(r) = self.max_non_chinese_ratio {
            s.max_non_chinese_ratio = Some(r);
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Labelled corpus to score (TSV: label<TAB>text).
    #[arg(long, value_name = "FILE")]
    test: Option<PathBuf>,
    #[command(flatten)]
    dicts: DictFlags,
    /// Artifact directory holding model.bin.
    #[arg(long, value_name = "DIR")]
    ckpt: Option<PathBuf>,
}

impl EvalArgs {
    fn apply(&self, s: &mut Settings) -> Result<()> {
        if let Some(p) = &self.test {
            s.test = Some(p.clone());
        }
        self.dicts.apply(s);
        if let Some(p) = &self.ckpt {
            s.ckpt = p.clone();
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Text to classify.
    text: String,
    #[command(flatten)]
    dicts: DictFlags,
    /// Artifact directory holding model.bin.
    #[arg(long, value_name = "DIR")]
    ckpt: Option<PathBuf>,
    /// Write attention weights as TSV to this path (`-` for stdout).
    #[arg(long, value_name = "FILE")]
    dump_attention: Option<PathBuf>,
}

impl PredictArgs {
    fn apply(&self, s: &mut Settings) -> Result<()> {
        self.dicts.apply(s);
        if let Some(p) = &self.ckpt {
            s.ckpt = p.clone();
        }
        Ok(())
    }
}

fn resolve(
    config_path: Option<&Path>,
    apply_flags: impl FnOnce(&mut Settings) -> Result<()>,
) -> Result<Settings> {
    let mut settings = Settings::default();
    if let Some(path) = config_path {
        settings.apply_file(path)?;
    }
    apply_flags(&mut settings)?;
    settings.validate()?;
    Ok(settings)
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let logger = Logger::from_env()?;
    let config_path = cli.config.as_deref();
    match &cli.command {
        Command::Featurize(args) => {
            let settings = resolve(config_path, |s| args.apply(s))?;
            commands::featurize::run(&settings, &logger)
        }
        Command::Train(args) => {
            let settings = resolve(config_path, |s| args.apply(s))?;
            commands::train::run(&settings, &logger)
        }
        Command::Eval(args) => {
            let settings = resolve(config_path, |s| args.apply(s))?;
            commands::eval::run(&settings, &logger)
        }
        Command::Predict(args) => {
            let settings = resolve(config_path, |s| args.apply(s))?;
            commands::predict::run(
                &settings,
                &args.text,
                args.dump_attention.as_deref(),
                &logger,
            )
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
