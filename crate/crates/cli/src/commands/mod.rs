//! The four subcommands and the plumbing they share.

pub mod eval;
pub mod featurize;
pub mod predict;
pub mod train;

use std::path::{Path, PathBuf};

use moto_core::corpus::Corpus;
use moto_core::encode::{non_chinese_ratio, Dicts};
use moto_core::error::Error as CoreError;

use crate::config::Settings;
use crate::error::{CliError, Result};
use crate::logging::Logger;

/// Unwraps a path setting or explains both ways to provide it.
pub(crate) fn require<'a>(value: &'a Option<PathBuf>, flag: &str, key: &str) -> Result<&'a Path> {
    value.as_deref().ok_or_else(|| {
        CliError::usage(format!(
            "{flag} is required: pass the flag or set `{key}` in the config file"
        ))
    })
}

/// Loads all three transliteration dictionaries. A missing file surfaces as
/// an input error naming its path.
pub(crate) fn load_dicts(settings: &Settings) -> Result<Dicts> {
    let radical = require(&settings.dict_radical, "--dict-radical", "dict-radical")?;
    let wubi = require(&settings.dict_wubi, "--dict-wubi", "dict-wubi")?;
    let pinyin = require(&settings.dict_pinyin, "--dict-pinyin", "dict-pinyin")?;
    Ok(Dicts::load(radical, wubi, pinyin)?)
}

/// Loads a corpus, optionally pinned to a fixed label set, and applies the
/// non-Chinese-ratio filter when one is configured.
pub(crate) fn load_corpus(
    path: &Path,
    labels: Option<&[String]>,
    settings: &Settings,
    logger: &Logger,
) -> Result<Corpus> {
    let mut corpus = match labels {
        Some(l) => Corpus::load_with_labels(path, l)?,
        None => Corpus::load(path)?,
    };
    if corpus.skipped_empty > 0 {
        logger.debug(format!(
            "{}: skipped {} lines with empty text",
            path.display(),
            corpus.skipped_empty
        ));
    }
    if let Some(max) = settings.max_non_chinese_ratio {
        let before = corpus.samples.len();
        corpus.samples.retain(|s| non_chinese_ratio(&s.text) <= max);
        let dropped = before - corpus.samples.len();
        if dropped > 0 {
            logger.info(format!(
                "{}: dropped {dropped} of {before} samples whose non-Chinese \
                 ratio exceeds {max}",
                path.display()
            ));
        }
        if corpus.samples.is_empty() {
            return Err(CliError::usage(format!(
                "{}: every sample exceeds max-non-chinese-ratio {max}",
                path.display()
            )));
        }
    }
    Ok(corpus)
}

/// Writes a file, mapping failures to the input-error exit path.
pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| CliError::Core(CoreError::io(path, e)))
}

/// The checkpoint a directory-style `--ckpt` setting points at.
pub(crate) fn model_path(settings: &Settings) -> PathBuf {
    settings.ckpt.join("model.bin")
}
