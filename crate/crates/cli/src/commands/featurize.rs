//! `moto featurize` — fit vocabularies on a corpus and export the encoded
//! id streams for inspection or downstream tooling.
//!
//! Writes into the artifact directory: `labels.tsv` (one label per line,
//! id = line number), `vocab.<stream>.tsv` (one token per line, id = line
//! number), `targets.tsv` (per-stream fixed lengths), and
//! `encoded.train.tsv` / `encoded.test.tsv` (per sample: label id, then the
//! four id streams space-joined, tab-separated). Reruns over the same
//! inputs produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use moto_core::corpus::Corpus;
use moto_core::encode::{Featurizer, Granularity};
use moto_core::error::Error as CoreError;

use crate::commands::{load_corpus, load_dicts, require, write_file};
use crate::config::Settings;
use crate::error::{CliError, Result};
use crate::logging::Logger;

pub fn run(settings: &Settings, logger: &Logger) -> Result<()> {
    let train_path = require(&settings.train, "--train", "train")?;
    let dicts = load_dicts(settings)?;
    let corpus = load_corpus(train_path, None, settings, logger)?;
    let featurizer = Featurizer::fit(&corpus, dicts);

    let dir = &settings.ckpt;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Core(CoreError::io(dir, e)))?;

    write_file(&dir.join("labels.tsv"), &joined_lines(&corpus.labels))?;
    for g in Granularity::ALL {
        write_file(
            &dir.join(format!("vocab.{}.tsv", g.name())),
            &joined_lines(featurizer.vocab(g).tokens()),
        )?;
    }

    let mut targets = String::new();
    for g in Granularity::ALL {
        writeln!(targets, "{}\t{}", g.name(), featurizer.target_len(g)).unwrap();
    }
    write_file(&dir.join("targets.tsv"), &targets)?;

    write_encoded(&dir.join("encoded.train.tsv"), &featurizer, &corpus)?;
    if let Some(test_path) = &settings.test {
        let test = load_corpus(test_path, Some(&corpus.labels), settings, logger)?;
        write_encoded(&dir.join("encoded.test.tsv"), &featurizer, &test)?;
        logger.info(format!(
            "encoded {} test samples against the fitted vocabularies",
            test.samples.len()
        ));
    }

    logger.info(format!(
        "fitted on {} samples across {} labels",
        corpus.samples.len(),
        corpus.labels.len()
    ));
    logger.info(describe(&featurizer, "vocab sizes", |f, g| {
        f.vocab(g).len()
    }));
    logger.info(describe(&featurizer, "stream lengths", |f, g| {
        f.target_len(g)
    }));
    logger.info(format!("wrote artifacts to {}", dir.display()));
    Ok(())
}

fn joined_lines<S: AsRef<str>>(items: &[S]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(item.as_ref());
        out.push('\n');
    }
    out
}

fn describe(
    featurizer: &Featurizer,
    what: &str,
    get: impl Fn(&Featurizer, Granularity) -> usize,
) -> String {
    let mut line = String::from(what);
    line.push(':');
    for g in Granularity::ALL {
        write!(line, " {}={}", g.name(), get(featurizer, g)).unwrap();
    }
    line
}

fn write_encoded(path: &Path, featurizer: &Featurizer, corpus: &Corpus) -> Result<()> {
    let mut out = String::new();
    for sample in &corpus.samples {
        let streams = featurizer.encode(&sample.text);
        out.push_str(&sample.label.to_string());
        for ids in &streams {
            out.push('\t');
            for (i, id) in ids.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                out.push_str(&id.to_string());
            }
        }
        out.push('\n');
    }
    write_file(path, &out)
}
