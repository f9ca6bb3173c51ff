//! Labeled text corpora.
//!
//! A corpus file is TSV with one sample per line: `label<TAB>text`. The
//! label inventory is built in order of first appearance, so the same file
//! always yields the same class indices. Lines with empty text are skipped
//! and counted rather than treated as fatal.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Sample {
    pub label: usize,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub samples: Vec<Sample>,
    pub labels: Vec<String>,
    /// Lines dropped because their text field was empty.
    pub skipped_empty: usize,
}

impl Corpus {
    /// Loads a corpus, discovering labels in first-appearance order.
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_impl(path, None)
    }

    /// Loads a corpus against a fixed label inventory; a label outside the
    /// inventory is an incompatibility, not a parse error.
    pub fn load_with_labels(path: &Path, labels: &[String]) -> Result<Self> {
        Self::load_impl(path, Some(labels))
    }

    fn load_impl(path: &Path, fixed: Option<&[String]>) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut labels: Vec<String> = fixed.map(|l| l.to_vec()).unwrap_or_default();
        let mut index: HashMap<String, usize> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        let mut samples = Vec::new();
        let mut skipped_empty = 0;
        for (i, line) in raw.lines().enumerate() {
            let lineno = i + 1;
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.is_empty() {
                continue;
            }
            let (label, text) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, lineno, "expected <label>TAB<text>"))?;
            if label.is_empty() {
                return Err(Error::parse(path, lineno, "empty label"));
            }
            if text.is_empty() {
                skipped_empty += 1;
                continue;
            }
            let label_id = match index.get(label) {
                Some(&id) => id,
                None => {
                    if fixed.is_some() {
                        return Err(Error::Incompatible(format!(
                            "{}:{lineno}: label {label:?} is not in the model's label set",
                            path.display()
                        )));
                    }
                    let id = labels.len();
                    labels.push(label.to_string());
                    index.insert(label.to_string(), id);
                    id
                }
            };
            samples.push(Sample {
                label: label_id,
                text: text.to_string(),
            });
        }
        if samples.is_empty() {
            return Err(Error::parse(path, 0, "corpus contains no usable samples"));
        }
        Ok(Corpus {
            samples,
            labels,
            skipped_empty,
        })
    }
}
