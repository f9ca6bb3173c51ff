//! Token vocabularies with reserved padding and unknown entries.

use std::collections::HashMap;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Builds a vocabulary from token occurrences. Ids 0 and 1 are reserved
    /// for padding and unknowns; the rest are assigned by descending
    /// frequency, ties broken lexicographically, so the same corpus always
    /// produces the same ids.
    pub fn build<'a>(occurrences: impl IntoIterator<Item = &'a str>) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for tok in occurrences {
            if tok == PAD_TOKEN || tok == UNK_TOKEN {
                continue;
            }
            *counts.entry(tok).or_insert(0) += 1;
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        tokens.extend(ranked.into_iter().map(|(t, _)| t.to_string()));
        Self::from_tokens(tokens)
    }

    /// Reassembles a vocabulary from its exact token list (ids are the
    /// positions). The first two entries must be the reserved tokens.
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        assert!(
            tokens.len() >= 2 && tokens[PAD_ID] == PAD_TOKEN && tokens[UNK_ID] == UNK_TOKEN,
            "vocabulary must start with {PAD_TOKEN:?}, {UNK_TOKEN:?}"
        );
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab { tokens, index }
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // always holds the two reserved entries
    }
}
