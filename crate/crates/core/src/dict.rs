//! Character transliteration dictionaries.
//!
//! A dictionary maps one Chinese character to the tokens that spell it in
//! another writing system: its radical decomposition, its Wubi input code,
//! or its Pinyin syllable. The on-disk format is TSV, one entry per line:
//!
//! ```text
//! 盟<TAB>日,月,皿
//! 中<TAB>zhōng
//! ```
//!
//! Multiple tokens are comma-separated. When the same character appears on
//! several lines, the first line wins — dictionary order encodes preference,
//! so for polyphones the most common reading should come first.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

/// How many tokens of an entry to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenPolicy {
    /// Keep the full token sequence (radical decompositions).
    All,
    /// Keep only the first token (Wubi codes, Pinyin readings — the first
    /// listed pronunciation wins for polyphones).
    First,
}

#[derive(Debug, Clone)]
pub struct TranslitDict {
    entries: HashMap<char, Vec<String>>,
}

impl TranslitDict {
    pub fn load(path: &Path, policy: TokenPolicy) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&raw, policy, path)
    }

    pub(crate) fn parse(raw: &str, policy: TokenPolicy, path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        for (i, line) in raw.lines().enumerate() {
            let lineno = i + 1;
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.is_empty() {
                continue;
            }
            let (key, toks) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, lineno, "expected <char>TAB<tokens>"))?;
            let mut chars = key.chars();
            let ch = chars
                .next()
                .ok_or_else(|| Error::parse(path, lineno, "empty character field"))?;
            if chars.next().is_some() {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("key {key:?} is not a single character"),
                ));
            }
            let tokens: Vec<String> = toks
                .split(',')
                .map(|t| t.trim().to_string())
                .filter(|t| !t.is_empty())
                .collect();
            if tokens.is_empty() {
                return Err(Error::parse(path, lineno, "entry has no tokens"));
            }
            let kept = match policy {
                TokenPolicy::All => tokens,
                TokenPolicy::First => vec![tokens.into_iter().next().unwrap()],
            };
            // First occurrence wins; later duplicates are ignored.
            entries.entry(ch).or_insert(kept);
        }
        Ok(TranslitDict { entries })
    }

    /// Tokens for `ch`, or `None` when the character is not covered.
    pub fn lookup(&self, ch: char) -> Option<&[String]> {
        self.entries.get(&ch).map(|v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
