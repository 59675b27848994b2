//! Lemma-level embedding tables built by averaging word vectors.

use std::collections::HashMap;
use std::io::{self, BufRead};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{open_maybe_gz, EmbeddingTable};

#[derive(Debug, Error)]
pub enum LemmaMapError {
    #[error("line {line}: expected \"wordform<TAB>lemma\"")]
    Malformed { line: usize },
    #[error("line {line}: empty or whitespace-containing field {field:?}")]
    Field { line: usize, field: String },
    #[error("line {line}: invalid UTF-8")]
    Utf8 { line: usize },
    #[error("{path}: {source}")]
    Open { path: String, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Word form to lemma assignments, one lemma per form.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LemmaMap {
    entries: HashMap<String, String>,
}

impl LemmaMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the previous lemma when `word` was already mapped.
    pub fn insert(&mut self, word: impl Into<String>, lemma: impl Into<String>) -> Option<String> {
        self.entries.insert(word.into(), lemma.into())
    }

    pub fn get(&self, word: &str) -> Option<&str> {
        self.entries.get(word).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reads `wordform<TAB>lemma` lines. Blank lines are skipped; a repeated
    /// word form keeps its last lemma. Returns the map and the number of
    /// repeated lines.
    pub fn read_tsv<R: BufRead>(mut reader: R) -> Result<(Self, usize), LemmaMapError> {
        let mut map = LemmaMap::new();
        let mut duplicates = 0;
        let mut buf = Vec::new();
        let mut line_no = 0;
        loop {
            buf.clear();
            if reader.read_until(b'\n', &mut buf)? == 0 {
                break;
            }
            line_no += 1;
            let line = std::str::from_utf8(&buf)
                .map_err(|_| LemmaMapError::Utf8 { line: line_no })?
                .trim_end_matches(['\n', '\r']);
            if line.trim().is_empty() {
                continue;
            }
            let (word, lemma) = line
                .split_once('\t')
                .ok_or(LemmaMapError::Malformed { line: line_no })?;
            for field in [word, lemma] {
                if field.is_empty() || field.chars().any(char::is_whitespace) {
                    return Err(LemmaMapError::Field {
                        line: line_no,
                        field: field.to_owned(),
                    });
                }
            }
            if map.insert(word, lemma).is_some() {
                duplicates += 1;
            }
        }
        if duplicates > 0 {
            log::warn!("lemma map: {duplicates} repeated word forms, last lemma kept");
        }
        Ok((map, duplicates))
    }

    pub fn open(path: impl AsRef<Path>) -> Result<(Self, usize), LemmaMapError> {
        let path = path.as_ref();
        let reader = open_maybe_gz(path).map_err(|source| LemmaMapError::Open {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_tsv(reader)
    }
}

impl<W: Into<String>, L: Into<String>> FromIterator<(W, L)> for LemmaMap {
    fn from_iter<I: IntoIterator<Item = (W, L)>>(iter: I) -> Self {
        let mut map = LemmaMap::new();
        for (w, l) in iter {
            map.insert(w, l);
        }
        map
    }
}

/// Counts describing a lemma table build.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaStats {
    pub unique_word_forms: usize,
    pub unique_lemmas: usize,
    pub words_not_lemmatized: usize,
    /// Unlemmatized words whose own key was already taken by a lemma; the
    /// lemma's mean vector was kept.
    pub collisions: usize,
}

impl LemmaStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize") + "\n"
    }
}

/// Builds the lemma table.
///
/// Each lemma realized by at least one word of `words` gets the mean of its
/// members' vectors. Words without a lemma keep their own vector under their
/// own key. Rows appear in the order in which their key is first reached
/// while walking `words`.
pub fn build_lemma_table(words: &EmbeddingTable, lemmas: &LemmaMap) -> (EmbeddingTable, LemmaStats) {
    let dim = words.dim();

    enum Slot {
        Lemma { sum: Vec<f64>, members: usize },
        Fallback(usize),
    }

    let mut order: Vec<&str> = Vec::new();
    let mut slots: HashMap<&str, Slot> = HashMap::new();
    let mut collisions = 0;
    let mut fallbacks = 0;

    for (row, (word, vector)) in words.iter().enumerate() {
        match lemmas.get(word) {
            Some(lemma) => {
                let slot = slots.entry(lemma).or_insert_with(|| {
                    order.push(lemma);
                    Slot::Lemma {
                        sum: vec![0.0; dim],
                        members: 0,
                    }
                });
                match slot {
                    Slot::Lemma { sum, members } => {
                        for (s, &v) in sum.iter_mut().zip(vector) {
                            *s += f64::from(v);
                        }
                        *members += 1;
                    }
                    Slot::Fallback(_) => {
                        // An unlemmatized word with this spelling was seen
                        // earlier; the lemma replaces it.
                        collisions += 1;
                        let mut sum = vec![0.0; dim];
                        for (s, &v) in sum.iter_mut().zip(vector) {
                            *s += f64::from(v);
                        }
                        *slot = Slot::Lemma { sum, members: 1 };
                    }
                }
            }
            None => {
                fallbacks += 1;
                match slots.get(word) {
                    Some(_) => collisions += 1,
                    None => {
                        order.push(word);
                        slots.insert(word, Slot::Fallback(row));
                    }
                }
            }
        }
    }

    let mut table = EmbeddingTable::with_capacity(format!("{}.lemma", words.name()), dim, order.len());
    let mut unique_lemmas = 0;
    let rows: Vec<&[f32]> = words.iter().map(|(_, v)| v).collect();
    let mut mean = vec![0f32; dim];
    for key in order {
        match &slots[key] {
            Slot::Lemma { sum, members } => {
                unique_lemmas += 1;
                let k = *members as f64;
                for (m, s) in mean.iter_mut().zip(sum) {
                    *m = (s / k) as f32;
                }
                table.insert(key, &mean).expect("lemma keys are validated tokens");
            }
            Slot::Fallback(row) => {
                table.insert(key, rows[*row]).expect("word tokens are valid");
            }
        }
    }

    if collisions > 0 {
        log::warn!("{collisions} unlemmatized words collide with lemma keys; lemma vectors kept");
    }

    let stats = LemmaStats {
        unique_word_forms: words.len(),
        unique_lemmas,
        words_not_lemmatized: fallbacks,
        collisions,
    };
    (table, stats)
}

/// Vector for `token` under a lemma table: the vector of its lemma when it
/// has one, otherwise its own fallback row.
pub fn lemma_vector<'t>(token: &str, lemmas: &LemmaMap, lemma_table: &'t EmbeddingTable) -> Option<&'t [f32]> {
    match lemmas.get(token) {
        Some(lemma) => lemma_table.lookup(lemma),
        None => lemma_table.lookup(token),
    }
}
