//! Effective settings: built-in defaults, overridden by an optional config
//! file, overridden in turn by command-line flags.
//!
//! The config file is UTF-8 `key = value` lines, sectionless, with `#`
//! comments and blank lines ignored. Keys are spelled exactly like the
//! long flags without the leading dashes (`lr`, `max-epochs`,
//! `dict-radical`, …); a handful of model-shape keys (`dim`, `sigmoid`,
//! `downsample-target`, `downsample-threshold`) exist only in the file.
//! One file can drive the whole pipeline: each command reads the keys it
//! needs and ignores the rest.

use std::path::{Path, PathBuf};

use moto_core::model::StreamFlags;

use crate::error::{CliError, Result};

/// Everything the commands need once defaults, file, and flags are merged.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    /// Training corpus: TSV lines of `label<TAB>text`.
    pub train: Option<PathBuf>,
    /// Held-out corpus: dev metrics during training, the scored set for eval.
    pub test: Option<PathBuf>,
    pub dict_radical: Option<PathBuf>,
    pub dict_wubi: Option<PathBuf>,
    pub dict_pinyin: Option<PathBuf>,
    /// Pretrained character vectors overlaid on the character embeddings.
    pub embeddings: Option<PathBuf>,
    /// Artifact directory: checkpoints, training log, featurizer exports.
    pub ckpt: PathBuf,
    /// Embedding and encoder width. Must be even: the bidirectional encoder
    /// splits it across the two directions.
    pub dim: usize,
    pub dropout: f64,
    pub lr: f64,
    pub batch: usize,
    pub max_epochs: usize,
    /// Length that long streams are compressed to by the learned convolution.
    pub downsample_target: usize,
    /// Stream length above which the compression applies.
    pub downsample_threshold: usize,
    pub seed: u64,
    /// Worker threads per training batch. Part of the determinism domain:
    /// changing it reorders floating-point accumulation.
    pub threads: usize,
    /// Which auxiliary streams join the character stream.
    pub streams: StreamFlags,
    /// Squash class scores through a sigmoid before the softmax.
    pub sigmoid: bool,
    /// Drop samples whose share of non-Chinese characters exceeds this.
    pub max_non_chinese_ratio: Option<f64>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            train: None,
            test: None,
            dict_radical: None,
            dict_wubi: None,
            dict_pinyin: None,
            embeddings: None,
            ckpt: PathBuf::from("ckpt"),
            dim: 256,
            dropout: 0.5,
            lr: 0.001,
            batch: 32,
            max_epochs: 30,
            downsample_target: 18,
            downsample_threshold: 64,
            seed: 42,
            threads: 1,
            streams: StreamFlags::all(),
            sigmoid: true,
            max_non_chinese_ratio: None,
        }
    }
}

impl Settings {
    /// Applies every `key = value` pair from a config file, reporting the
    /// file and line on any problem.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        for (i, line) in raw.lines().enumerate() {
            let lineno = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!(
                    "{}:{lineno}: expected `key = value`, got {line:?}",
                    path.display()
                ))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|msg| CliError::usage(format!("{}:{lineno}: {msg}", path.display())))?;
        }
        Ok(())
    }

    /// Applies one pair. Errors are bare messages; callers add location.
    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "train" => self.train = Some(PathBuf::from(value)),
            "test" => self.test = Some(PathBuf::from(value)),
            "dict-radical" => self.dict_radical = Some(PathBuf::from(value)),
            "dict-wubi" => self.dict_wubi = Some(PathBuf::from(value)),
            "dict-pinyin" => self.dict_pinyin = Some(PathBuf::from(value)),
            "embeddings" => self.embeddings = Some(PathBuf::from(value)),
            "ckpt" => self.ckpt = PathBuf::from(value),
            "dim" => self.dim = parse_unsigned(key, value)?,
            "dropout" => self.dropout = parse_float(key, value)?,
            "lr" => self.lr = parse_float(key, value)?,
            "batch" => self.batch = parse_unsigned(key, value)?,
            "max-epochs" => self.max_epochs = parse_unsigned(key, value)?,
            "downsample-target" => self.downsample_target = parse_unsigned(key, value)?,
            "downsample-threshold" => self.downsample_threshold = parse_unsigned(key, value)?,
            "seed" => self.seed = parse_unsigned(key, value)?,
            "threads" => self.threads = parse_unsigned(key, value)?,
            "streams" => self.streams = parse_streams(value)?,
            "sigmoid" => self.sigmoid = parse_bool(key, value)?,
            "max-non-chinese-ratio" => self.max_non_chinese_ratio = Some(parse_float(key, value)?),
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Rejects impossible combinations once all layers are merged.
    pub fn validate(&self) -> Result<()> {
        let usage = |msg: String| Err(CliError::Usage(msg));
        if self.dim == 0 || !self.dim.is_multiple_of(2) {
            return usage(format!(
                "dim must be a positive even number (it is split across the \
                 two encoder directions), got {}",
                self.dim
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return usage(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return usage(format!("lr must be positive, got {}", self.lr));
        }
        if self.batch == 0 {
            return usage("batch must be at least 1".into());
        }
        if self.max_epochs == 0 {
            return usage("max-epochs must be at least 1".into());
        }
        if self.threads == 0 {
            return usage("threads must be at least 1".into());
        }
        if self.downsample_target == 0 {
            return usage("downsample-target must be at least 1".into());
        }
        if let Some(r) = self.max_non_chinese_ratio {
            if !(0.0..=1.0).contains(&r) {
                return usage(format!("max-non-chinese-ratio must be in [0, 1], got {r}"));
            }
        }
        Ok(())
    }
}

fn parse_unsigned<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("{key}: expected an unsigned integer, got {value:?}"))
}

fn parse_float(key: &str, value: &str) -> std::result::Result<f64, String> {
    value
        .parse()
        .map_err(|_| format!("{key}: expected a number, got {value:?}"))
}

fn parse_bool(key: &str, value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got {value:?}")),
    }
}

/// Parses a stream selector like `crwp` or `c`: `c` characters (required),
/// `r` radicals, `w` Wubi codes, `p` Pinyin.
pub fn parse_streams(value: &str) -> std::result::Result<StreamFlags, String> {
    let mut flags = StreamFlags::none();
    let mut has_char = false;
    for ch in value.chars() {
        match ch {
            'c' => has_char = true,
            'r' => flags.radical = true,
            'w' => flags.wubi = true,
            'p' => flags.pinyin = true,
            other => {
                return Err(format!(
                    "streams: unknown stream letter {other:?} (use c, r, w, p)"
                ))
            }
        }
    }
    if !has_char {
        return Err("streams: the character stream `c` is required".into());
    }
    Ok(flags)
}

/// The selector string for a flag set, in canonical `crwp` order.
pub fn streams_string(flags: &StreamFlags) -> String {
    let mut s = String::from("c");
    if flags.radical {
        s.push('r');
    }
    if flags.wubi {
        s.push('w');
    }
    if flags.pinyin {
        s.push('p');
    }
    s
}
