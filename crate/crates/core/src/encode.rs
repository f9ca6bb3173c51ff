//! Turning text into parallel id streams, one per granularity.
//!
//! Every sample is viewed four ways: as its characters, as the radical
//! decomposition of those characters, as their Wubi input codes, and as
//! their Pinyin syllables. Each view has its own vocabulary and its own
//! fixed stream length (the ceiling of the mean length over the training
//! corpus), so downstream tensors have static shapes.

use std::path::Path;

use crate::corpus::Corpus;
use crate::dict::{TokenPolicy, TranslitDict};
use crate::error::Result;
use crate::vocab::{Vocab, PAD_ID, UNK_TOKEN};

/// The character used to synthesize padding tokens: its transliteration in
/// each granularity fills short streams, so padding looks like ordinary,
/// maximally common text rather than a special symbol.
pub const PAD_FILL_CHAR: char = '一';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Granularity {
    Char,
    Radical,
    Wubi,
    Pinyin,
}

impl Granularity {
    pub const ALL: [Granularity; 4] = [
        Granularity::Char,
        Granularity::Radical,
        Granularity::Wubi,
        Granularity::Pinyin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Granularity::Char => "char",
            Granularity::Radical => "radical",
            Granularity::Wubi => "wubi",
            Granularity::Pinyin => "pinyin",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Granularity::Char => 0,
            Granularity::Radical => 1,
            Granularity::Wubi => 2,
            Granularity::Pinyin => 3,
        }
    }
}

/// The three transliteration dictionaries (characters need none).
#[derive(Debug, Clone)]
pub struct Dicts {
    pub radical: TranslitDict,
    pub wubi: TranslitDict,
    pub pinyin: TranslitDict,
}

impl Dicts {
    pub fn load(radical: &Path, wubi: &Path, pinyin: &Path) -> Result<Self> {
        Ok(Dicts {
            radical: TranslitDict::load(radical, TokenPolicy::All)?,
            wubi: TranslitDict::load(wubi, TokenPolicy::First)?,
            pinyin: TranslitDict::load(pinyin, TokenPolicy::First)?,
        })
    }
}

/// Spells `text` in the given granularity. Whitespace carries no signal and
/// is dropped. Characters the dictionary does not cover become a single
/// unknown token; in the character view every non-whitespace character is
/// its own token.
pub fn transliterate(text: &str, g: Granularity, dicts: &Dicts) -> Vec<String> {
    let mut out = Vec::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            continue;
        }
        match g {
            Granularity::Char => out.push(ch.to_string()),
            Granularity::Radical => match dicts.radical.lookup(ch) {
                Some(toks) => out.extend(toks.iter().cloned()),
                None => out.push(UNK_TOKEN.to_string()),
            },
            Granularity::Wubi => match dicts.wubi.lookup(ch) {
                Some(toks) => out.push(toks[0].clone()),
                None => out.push(UNK_TOKEN.to_string()),
            },
            Granularity::Pinyin => match dicts.pinyin.lookup(ch) {
                Some(toks) => out.push(toks[0].clone()),
                None => out.push(UNK_TOKEN.to_string()),
            },
        }
    }
    out
}

/// True for CJK Unified Ideographs (including Extension A).
pub fn is_chinese(ch: char) -> bool {
    matches!(ch, '\u{4e00}'..='\u{9fff}' | '\u{3400}'..='\u{4dbf}')
}

/// Fraction of non-whitespace characters that are not Chinese. An
/// all-whitespace text counts as entirely non-Chinese.
pub fn non_chinese_ratio(text: &str) -> f64 {
    let mut total = 0usize;
    let mut non_chinese = 0usize;
    for ch in text.chars() {
        if ch.is_whitespace() {
            continue;
        }
        total += 1;
        if !is_chinese(ch) {
            non_chinese += 1;
        }
    }
    if total == 0 {
        1.0
    } else {
        non_chinese as f64 / total as f64
    }
}

/// One sample encoded as four fixed-length id streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSample {
    pub label: usize,
    pub streams: [Vec<usize>; 4],
}

/// Vocabularies, stream lengths, and dictionaries needed to encode text.
pub struct Featurizer {
    dicts: Dicts,
    vocabs: [Vocab; 4],
    targets: [usize; 4],
    fills: [Vec<usize>; 4],
}

impl Featurizer {
    /// Fits vocabularies and stream lengths on a training corpus.
    pub fn fit(corpus: &Corpus, dicts: Dicts) -> Self {
        let mut vocabs = Vec::with_capacity(4);
        let mut targets = Vec::with_capacity(4);
        for g in Granularity::ALL {
            let mut occurrences: Vec<String> = Vec::new();
            let mut total_len = 0usize;
            for s in &corpus.samples {
                let toks = transliterate(&s.text, g, &dicts);
                total_len += toks.len();
                occurrences.extend(toks);
            }
            let n = corpus.samples.len();
            let target = total_len.div_ceil(n).max(1);
            vocabs.push(Vocab::build(occurrences.iter().map(|t| t.as_str())));
            targets.push(target);
        }
        let vocabs: [Vocab; 4] = vocabs.try_into().unwrap();
        let targets: [usize; 4] = targets.try_into().unwrap();
        let fills = Self::compute_fills(&vocabs, &dicts);
        Featurizer {
            dicts,
            vocabs,
            targets,
            fills,
        }
    }

    /// Reassembles a featurizer from stored vocabularies and stream
    /// lengths, plus freshly loaded dictionaries.
    pub fn restore(vocabs: [Vocab; 4], targets: [usize; 4], dicts: Dicts) -> Self {
        for t in targets {
            assert!(t >= 1, "stream length must be at least 1");
        }
        let fills = Self::compute_fills(&vocabs, &dicts);
        Featurizer {
            dicts,
            vocabs,
            targets,
            fills,
        }
    }

    /// Padding id sequence per granularity: the transliteration of
    /// [`PAD_FILL_CHAR`], with tokens the vocabulary does not know falling
    /// back to the neutral padding id.
    fn compute_fills(vocabs: &[Vocab; 4], dicts: &Dicts) -> [Vec<usize>; 4] {
        let text = PAD_FILL_CHAR.to_string();
        Granularity::ALL.map(|g| {
            let toks = transliterate(&text, g, dicts);
            let ids: Vec<usize> = toks
                .iter()
                .map(|t| {
                    if t == UNK_TOKEN {
                        PAD_ID
                    } else {
                        vocabs[g.index()].id(t).unwrap_or(PAD_ID)
                    }
                })
                .collect();
            if ids.is_empty() {
                vec![PAD_ID]
            } else {
                ids
            }
        })
    }

    pub fn vocab(&self, g: Granularity) -> &Vocab {
        &self.vocabs[g.index()]
    }

    pub fn target_len(&self, g: Granularity) -> usize {
        self.targets[g.index()]
    }

    pub fn targets(&self) -> [usize; 4] {
        self.targets
    }

    pub fn dicts(&self) -> &Dicts {
        &self.dicts
    }

    /// Encodes one text into four id streams of exactly the fitted lengths:
    /// longer streams keep their first tokens, shorter ones are padded by
    /// cycling the fill sequence.
    pub fn encode(&self, text: &str) -> [Vec<usize>; 4] {
        Granularity::ALL.map(|g| {
            let gi = g.index();
            let target = self.targets[gi];
            let mut ids: Vec<usize> = transliterate(text, g, &self.dicts)
                .iter()
                .map(|t| self.vocabs[gi].id_or_unk(t))
                .collect();
            ids.truncate(target);
            let fill = &self.fills[gi];
            let mut k = 0;
            while ids.len() < target {
                ids.push(fill[k % fill.len()]);
                k += 1;
            }
            ids
        })
    }

    pub fn encode_corpus(&self, corpus: &Corpus) -> Vec<EncodedSample> {
        corpus
            .samples
            .iter()
            .map(|s| EncodedSample {
                label: s.label,
                streams: self.encode(&s.text),
            })
            .collect()
    }
}
