//! Arabic token normalization, whitespace tokenization with character spans,
//! and sentence splitting.
//!
//! Normalization runs four steps in a fixed order:
//!
//! 1. drop every character belonging to an enabled [`RemoveClass`];
//! 2. apply the user-supplied letter map;
//! 3. collapse runs of more than two identical characters to one;
//! 4. rewrite the Alif variants أ إ آ to bare ا.
//!
//! When Alif unification is on, step 3 compares characters after Alif
//! unification, so `اأأ` counts as a run of three. Without that, step 4 could
//! create a fresh run and a second pass would change the output again.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_script::{Script, UnicodeScript};

const BARE_ALIF: char = '\u{0627}';
const TATWEEL: char = '\u{0640}';
const MADDA: char = '\u{0653}';
const SUPERSCRIPT_ALIF: char = '\u{0670}';

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemoveClass {
    /// Harakat U+064B..U+065F, superscript Alif U+0670 and tatweel U+0640.
    Diacritics,
    /// Unicode general category P*, which includes ؟ ، ؛.
    Punctuation,
    /// Combining madda U+0653.
    Madda,
    /// ASCII digits 0-9.
    DigitsArabic,
    /// Arabic-Indic digits U+0660..U+0669.
    DigitsHindi,
    /// Any character of the Latin script, accented letters included.
    Latin,
}

impl RemoveClass {
    pub const ALL: [RemoveClass; 6] = [
        RemoveClass::Diacritics,
        RemoveClass::Punctuation,
        RemoveClass::Madda,
        RemoveClass::DigitsArabic,
        RemoveClass::DigitsHindi,
        RemoveClass::Latin,
    ];

    pub fn contains(self, c: char) -> bool {
        match self {
            RemoveClass::Diacritics => matches!(c, '\u{064B}'..='\u{065F}') || c == SUPERSCRIPT_ALIF || c == TATWEEL,
            RemoveClass::Punctuation => is_punctuation(c),
            RemoveClass::Madda => c == MADDA,
            RemoveClass::DigitsArabic => c.is_ascii_digit(),
            RemoveClass::DigitsHindi => matches!(c, '\u{0660}'..='\u{0669}'),
            RemoveClass::Latin => c.script() == Script::Latin,
        }
    }
}

fn is_punctuation(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
    ) || matches!(c, '\u{061F}' | '\u{060C}' | '\u{061B}')
}

fn is_alif_variant(c: char) -> bool {
    matches!(c, '\u{0623}' | '\u{0625}' | '\u{0622}')
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("letter map sends {from:?} to {to:?}, which is itself mapped")]
    ChainedMapping { from: char, to: char },
    #[error("letter map sends {from:?} to {to:?}, which is a removed character")]
    MapsToRemoved { from: char, to: char },
    #[error("letter map sends {from:?} to whitespace")]
    MapsToWhitespace { from: char },
    #[error("letter map remaps bare Alif, which Alif unification produces")]
    RemapsBareAlif,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizationConfig {
    pub unify_alif: bool,
    pub extra_letter_map: BTreeMap<char, char>,
    pub remove_classes: BTreeSet<RemoveClass>,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        NormalizationConfig {
            unify_alif: true,
            extra_letter_map: BTreeMap::new(),
            remove_classes: RemoveClass::ALL.into_iter().collect(),
        }
    }
}

impl NormalizationConfig {
    pub fn is_removed(&self, c: char) -> bool {
        self.remove_classes.iter().any(|class| class.contains(c))
    }

    /// Rejects letter maps that would make normalization non-idempotent.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (&from, &to) in &self.extra_letter_map {
            if self.extra_letter_map.contains_key(&to) && from != to {
                return Err(ConfigError::ChainedMapping { from, to });
            }
            if self.is_removed(to) {
                return Err(ConfigError::MapsToRemoved { from, to });
            }
            if to.is_whitespace() {
                return Err(ConfigError::MapsToWhitespace { from });
            }
        }
        if self.unify_alif && self.extra_letter_map.get(&BARE_ALIF).is_some_and(|&to| to != BARE_ALIF) {
            return Err(ConfigError::RemapsBareAlif);
        }
        Ok(())
    }

    fn run_key(&self, c: char) -> char {
        if self.unify_alif && is_alif_variant(c) {
            BARE_ALIF
        } else {
            c
        }
    }
}

/// Normalizes one token. The result may be empty.
pub fn normalize_token(raw: &str, cfg: &NormalizationConfig) -> String {
    let mapped: Vec<char> = raw
        .chars()
        .filter(|&c| !cfg.is_removed(c))
        .map(|c| cfg.extra_letter_map.get(&c).copied().unwrap_or(c))
        .collect();

    let mut out = String::with_capacity(raw.len());
    let mut i = 0;
    while i < mapped.len() {
        let key = cfg.run_key(mapped[i]);
        let run = mapped[i..].iter().take_while(|&&c| cfg.run_key(c) == key).count();
        let kept = if run > 2 {
            &mapped[i..i + 1]
        } else {
            &mapped[i..i + run]
        };
        out.extend(kept.iter().map(|&c| cfg.run_key(c)));
        i += run;
    }
    out
}

/// A whitespace-delimited token with its character span in the source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSpan {
    pub text: String,
    /// Inclusive start, in Unicode scalar values.
    pub start: usize,
    /// Exclusive end, in Unicode scalar values.
    pub end: usize,
}

/// Splits on runs of whitespace, recording character offsets.
pub fn tokenize(sentence: &str) -> Vec<TokenSpan> {
    let mut tokens = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    let mut pos = 0;
    for (byte, c) in sentence.char_indices() {
        match (c.is_whitespace(), current) {
            (false, None) => current = Some((pos, byte)),
            (true, Some((start, from))) => {
                tokens.push(TokenSpan {
                    text: sentence[from..byte].to_owned(),
                    start,
                    end: pos,
                });
                current = None;
            }
            _ => {}
        }
        pos += 1;
    }
    if let Some((start, from)) = current {
        tokens.push(TokenSpan {
            text: sentence[from..].to_owned(),
            start,
            end: pos,
        });
    }
    tokens
}

/// Splits running text on newlines and on a space followed by a period.
/// Delimiters are dropped, as are empty segments.
pub fn split_sentences(text: &str) -> Vec<String> {
    text.split('\n')
        .flat_map(|line| line.split(" ."))
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}
