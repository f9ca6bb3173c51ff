//! `moto train` — fit vocabularies, train the classifier, and write the
//! checkpoint plus a training log.
//!
//! Produces `model.bin` (rewritten after every epoch, so an interrupted run
//! keeps its latest state) and `train.log` (one tab-separated row per epoch
//! and split) in the artifact directory. Two runs with the same inputs and
//! settings produce byte-identical files; to that end the checkpoint echoes
//! the training hyperparameters in its metadata but never any local path.

use std::io::Write as _;

use moto_core::adam::AdamConfig;
use moto_core::checkpoint;
use moto_core::encode::{Featurizer, Granularity};
use moto_core::error::Error as CoreError;
use moto_core::model::{ModelConfig, ModelParams};
use moto_core::train::TrainConfig;
use moto_core::vocab::Vocab;

use crate::commands::{load_corpus, load_dicts, model_path, require};
use crate::config::{streams_string, Settings};
use crate::error::{CliError, Result};
use crate::logging::Logger;

pub fn run(settings: &Settings, logger: &Logger) -> Result<()> {
    let train_path = require(&settings.train, "--train", "train")?;
    let dicts = load_dicts(settings)?;
    let corpus = load_corpus(train_path, None, settings, logger)?;
    let featurizer = Featurizer::fit(&corpus, dicts);
    let encoded = featurizer.encode_corpus(&corpus);

    let dev = match &settings.test {
        Some(path) => {
            let held_out = load_corpus(path, Some(&corpus.labels), settings, logger)?;
            Some(featurizer.encode_corpus(&held_out))
        }
        None => None,
    };

    let config = ModelConfig {
        dim: settings.dim,
        classes: corpus.labels.len(),
        streams: settings.streams,
        dropout: settings.dropout,
        sigmoid_scores: settings.sigmoid,
        downsample_target: settings.downsample_target,
        downsample_threshold: settings.downsample_threshold,
    };
    let vocab_sizes = Granularity::ALL.map(|g| featurizer.vocab(g).len());
    let mut params = ModelParams::init(config, vocab_sizes, featurizer.targets(), settings.seed);

    logger.info(format!(
        "training on {} samples, {} classes, streams {}",
        encoded.len(),
        corpus.labels.len(),
        streams_string(&settings.streams)
    ));
    logger.debug(format!(
        "vocab sizes: char={} radical={} wubi={} pinyin={}",
        vocab_sizes[0], vocab_sizes[1], vocab_sizes[2], vocab_sizes[3]
    ));

    if let Some(path) = &settings.embeddings {
        let table = params.embeddings[Granularity::Char.index()]
            .as_mut()
            .expect("the character stream is always present");
        let report = table.load_pretrained(path, featurizer.vocab(Granularity::Char))?;
        logger.info(format!(
            "pretrained vectors: {} tokens covered, {} kept their random start",
            report.hits, report.misses
        ));
    }

    let dir = &settings.ckpt;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Core(CoreError::io(dir, e)))?;
    let log_path = dir.join("train.log");
    let ckpt_path = model_path(settings);
    let mut log_file = std::fs::File::create(&log_path)
        .map_err(|e| CliError::Core(CoreError::io(&log_path, e)))?;

    let vocabs: [Vocab; 4] = Granularity::ALL.map(|g| featurizer.vocab(g).clone());
    let extras = config_echo(settings);
    let train_config = TrainConfig {
        epochs: settings.max_epochs,
        batch_size: settings.batch,
        seed: settings.seed,
        adam: AdamConfig {
            lr: settings.lr,
            ..AdamConfig::default()
        },
        threads: settings.threads,
        target_accuracy: None,
    };

    moto_core::train::train(
        &mut params,
        &encoded,
        dev.as_deref(),
        &train_config,
        &mut |lines, current| {
            for line in lines {
                writeln!(log_file, "{line}").map_err(|e| CoreError::io(&log_path, e))?;
                logger.info(line);
            }
            checkpoint::save(&ckpt_path, current, &vocabs, &corpus.labels, &extras)
        },
    )?;

    logger.info(format!("wrote {}", ckpt_path.display()));
    Ok(())
}

/// The training-side effective configuration, echoed into checkpoint
/// metadata. Model-shape settings (dim, dropout, streams, …) are already
/// first-class metadata; paths are deliberately excluded so identical runs
/// in different directories stay byte-identical.
fn config_echo(settings: &Settings) -> Vec<(String, String)> {
    let mut extras = vec![
        ("train.seed".to_string(), settings.seed.to_string()),
        ("train.lr".to_string(), settings.lr.to_string()),
        ("train.batch".to_string(), settings.batch.to_string()),
        (
            "train.max-epochs".to_string(),
            settings.max_epochs.to_string(),
        ),
        ("train.threads".to_string(), settings.threads.to_string()),
    ];
    if let Some(ratio) = settings.max_non_chinese_ratio {
        extras.push(("train.max-non-chinese-ratio".to_string(), ratio.to_string()));
    }
    extras
}
