//! Sentence-pair classification by pooled context similarity.
//!
//! For each sentence the target word is located from its character span,
//! the `n` words on either side of it (the target itself excluded) are
//! normalized, optionally stripped of stop words, mapped to word or lemma
//! vectors and pooled into one vector. The pair is labelled TRUE when the
//! cosine of the two pooled vectors reaches the threshold.

use std::collections::HashSet;
use std::fmt;
use std::io::{self, BufRead};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine, open_maybe_gz, EmbeddingTable};
use crate::lemma::{lemma_vector, LemmaMap};
use crate::normalize::{normalize_token, tokenize, NormalizationConfig, TokenSpan};

/// Gold or predicted tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tag {
    #[serde(rename = "T", alias = "TRUE")]
    True,
    #[serde(rename = "F", alias = "FALSE")]
    False,
}

impl Tag {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Tag::True
        } else {
            Tag::False
        }
    }

    pub fn is_true(self) -> bool {
        self == Tag::True
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::True => "T",
            Tag::False => "F",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "T" | "TRUE" => Ok(Tag::True),
            "F" | "FALSE" => Ok(Tag::False),
            other => Err(format!("unknown tag {other:?}")),
        }
    }
}

/// Half-open character range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    fn overlap(self, token: &TokenSpan) -> usize {
        self.end.min(token.end).saturating_sub(self.start.max(token.start))
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WicInstance {
    pub id: String,
    pub sentence1: String,
    pub sentence2: String,
    pub span1: Span,
    pub span2: Span,
    pub gold: Option<Tag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Min,
    Max,
    Mean,
    Std,
}

impl Pooling {
    pub const ALL: [Pooling; 4] = [Pooling::Min, Pooling::Max, Pooling::Mean, Pooling::Std];

    pub fn as_str(self) -> &'static str {
        match self {
            Pooling::Min => "min",
            Pooling::Max => "max",
            Pooling::Mean => "mean",
            Pooling::Std => "std",
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pooling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pooling::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown pooling {s:?} (expected min, max, mean or std)"))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("context_size must be at least 1")]
    ContextSize,
    #[error("threshold {0} is outside [-1, 1]")]
    Threshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub context_size: usize,
    pub pooling: Pooling,
    pub threshold: f64,
    /// Remove stop words from contexts.
    pub stop_words: bool,
}

impl Params {
    pub fn new(context_size: usize, pooling: Pooling, threshold: f64, stop_words: bool) -> Result<Self, ParamsError> {
        let params = Params {
            context_size,
            pooling,
            threshold,
            stop_words,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        if self.context_size == 0 {
            return Err(ParamsError::ContextSize);
        }
        if !(-1.0..=1.0).contains(&self.threshold) {
            return Err(ParamsError::Threshold(self.threshold));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    /// `None` when the pair could not be compared.
    pub similarity: Option<f64>,
    pub label: Tag,
    /// Set when a context vector was undefined or zero, in which case the
    /// label is FALSE by default.
    pub degenerate: bool,
}

impl Prediction {
    pub fn from_similarity(id: impl Into<String>, similarity: Option<f64>, threshold: f64) -> Self {
        match similarity {
            Some(s) => Prediction {
                id: id.into(),
                similarity: Some(s),
                label: Tag::from_bool(s >= threshold),
                degenerate: false,
            },
            None => Prediction {
                id: id.into(),
                similarity: None,
                label: Tag::False,
                degenerate: true,
            },
        }
    }
}

/// Normalized functional words removed from contexts on request.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopList {
    words: HashSet<String>,
}

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_ar.txt");

impl StopList {
    pub fn new() -> Self {
        Self::default()
    }

    /// Small general-purpose list of Arabic functional words in normalized
    /// form.
    pub fn default_arabic() -> Self {
        Self::read(DEFAULT_STOPWORDS.as_bytes()).expect("bundled stop list parses")
    }

    /// One word per line; blank lines and lines starting with `#` are
    /// skipped, surrounding whitespace is trimmed.
    pub fn read<R: BufRead>(reader: R) -> io::Result<Self> {
        let mut words = HashSet::new();
        for line in reader.lines() {
            let line = line?;
            let word = line.trim();
            if !word.is_empty() && !word.starts_with('#') {
                words.insert(word.to_owned());
            }
        }
        Ok(StopList { words })
    }

    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        Self::read(open_maybe_gz(path.as_ref())?)
    }

    /// The same list with every entry passed through `normalize_token`, so
    /// it matches normalized context words. Entries that normalize to
    /// nothing are dropped.
    pub fn normalized(&self, cfg: &NormalizationConfig) -> Self {
        self.words
            .iter()
            .map(|w| normalize_token(w, cfg))
            .filter(|w| !w.is_empty())
            .collect()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

impl<S: Into<String>> FromIterator<S> for StopList {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        StopList {
            words: iter.into_iter().map(Into::into).collect(),
        }
    }
}

/// Where context words get their vectors from.
#[derive(Debug, Clone, Copy)]
pub enum VectorSource<'a> {
    Word(&'a EmbeddingTable),
    Lemma {
        map: &'a LemmaMap,
        table: &'a EmbeddingTable,
    },
}

impl<'a> VectorSource<'a> {
    pub fn dim(&self) -> usize {
        match self {
            VectorSource::Word(t) => t.dim(),
            VectorSource::Lemma { table, .. } => table.dim(),
        }
    }

    pub fn vector(&self, token: &str) -> Option<&'a [f32]> {
        match *self {
            VectorSource::Word(t) => t.lookup(token),
            VectorSource::Lemma { map, table } => lemma_vector(token, map, table),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no token overlaps span {0}")]
pub struct NoOverlap(pub Span);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("instance {id}: sentence {sentence}: {source}")]
pub struct InstanceError {
    pub id: String,
    pub sentence: u8,
    pub source: NoOverlap,
}

/// Index of the token overlapping `span` the most; the earlier token wins
/// ties.
pub fn locate_target(tokens: &[TokenSpan], span: Span) -> Result<usize, NoOverlap> {
    let mut best: Option<(usize, usize)> = None;
    for (i, token) in tokens.iter().enumerate() {
        let overlap = span.overlap(token);
        if overlap > 0 && best.is_none_or(|(_, b)| overlap > b) {
            best = Some((i, overlap));
        }
    }
    best.map(|(i, _)| i).ok_or(NoOverlap(span))
}

/// Up to `n` items on each side of `target`, in order, without the target.
pub fn extract_context<T>(tokens: &[T], target: usize, n: usize) -> Vec<&T> {
    let (left, right) = context_slices(tokens, target, n);
    left.iter().chain(right).collect()
}

fn context_slices<T>(tokens: &[T], target: usize, n: usize) -> (&[T], &[T]) {
    let from = target.saturating_sub(n);
    let to = (target + 1 + n).min(tokens.len());
    (&tokens[from..target], &tokens[target + 1..to])
}

/// Elementwise pooling in `f64`. `std` is the population standard deviation.
/// Returns `None` for an empty set.
pub fn pool(vectors: &[&[f32]], pooling: Pooling) -> Option<Vec<f64>> {
    let first = vectors.first()?;
    let dim = first.len();
    let k = vectors.len() as f64;
    let column = |j: usize| vectors.iter().map(move |v| f64::from(v[j]));
    let mean = |j: usize| column(j).sum::<f64>() / k;
    let pooled = (0..dim)
        .map(|j| match pooling {
            Pooling::Min => column(j).fold(f64::INFINITY, f64::min),
            Pooling::Max => column(j).fold(f64::NEG_INFINITY, f64::max),
            Pooling::Mean => mean(j),
            Pooling::Std => {
                let m = mean(j);
                (column(j).map(|x| (x - m) * (x - m)).sum::<f64>() / k).sqrt()
            }
        })
        .collect();
    Some(pooled)
}

/// Pools already-normalized context words. Empty strings are skipped.
fn pool_normalized<'w>(
    words: impl Iterator<Item = &'w str> + Clone,
    pooling: Pooling,
    stop_words: bool,
    source: &VectorSource<'_>,
    stoplist: &StopList,
) -> Option<Vec<f64>> {
    let present = words.filter(|w| !w.is_empty());
    let vectors: Vec<&[f32]> = if stop_words && present.clone().any(|w| !stoplist.contains(w)) {
        present
            .filter(|w| !stoplist.contains(w))
            .filter_map(|w| source.vector(w))
            .collect()
    } else {
        // Either filtering is off or it would leave nothing; keep everything.
        present.filter_map(|w| source.vector(w)).collect()
    };
    pool(&vectors, pooling)
}

/// Pooled vector of raw context tokens, or `None` when no token survives
/// normalization, filtering and lookup.
pub fn context_vector<S: AsRef<str>>(
    context: &[S],
    params: &Params,
    source: &VectorSource<'_>,
    stoplist: &StopList,
    cfg: &NormalizationConfig,
) -> Option<Vec<f64>> {
    let normalized: Vec<String> = context.iter().map(|t| normalize_token(t.as_ref(), cfg)).collect();
    pool_normalized(
        normalized.iter().map(String::as_str),
        params.pooling,
        params.stop_words,
        source,
        stoplist,
    )
}

/// One sentence tokenized and normalized once, reusable across parameter
/// settings.
#[derive(Debug, Clone)]
pub struct PreparedSentence {
    normalized: Vec<String>,
    target: usize,
}

impl PreparedSentence {
    pub fn new(sentence: &str, span: Span, cfg: &NormalizationConfig) -> Result<Self, NoOverlap> {
        let tokens = tokenize(sentence);
        let target = locate_target(&tokens, span)?;
        let normalized = tokens.iter().map(|t| normalize_token(&t.text, cfg)).collect();
        Ok(PreparedSentence { normalized, target })
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn context_vector(
        &self,
        context_size: usize,
        pooling: Pooling,
        stop_words: bool,
        source: &VectorSource<'_>,
        stoplist: &StopList,
    ) -> Option<Vec<f64>> {
        let (left, right) = context_slices(&self.normalized, self.target, context_size);
        pool_normalized(
            left.iter().chain(right).map(String::as_str),
            pooling,
            stop_words,
            source,
            stoplist,
        )
    }
}

#[derive(Debug, Clone)]
pub struct PreparedPair {
    pub id: String,
    pub first: PreparedSentence,
    pub second: PreparedSentence,
}

impl PreparedPair {
    pub fn new(inst: &WicInstance, cfg: &NormalizationConfig) -> Result<Self, InstanceError> {
        let prepare = |sentence: &str, span, which| {
            PreparedSentence::new(sentence, span, cfg).map_err(|source| InstanceError {
                id: inst.id.clone(),
                sentence: which,
                source,
            })
        };
        Ok(PreparedPair {
            id: inst.id.clone(),
            first: prepare(&inst.sentence1, inst.span1, 1)?,
            second: prepare(&inst.sentence2, inst.span2, 2)?,
        })
    }

    /// Cosine of the two pooled contexts, `None` when either is undefined
    /// or has zero norm.
    pub fn similarity(
        &self,
        context_size: usize,
        pooling: Pooling,
        stop_words: bool,
        source: &VectorSource<'_>,
        stoplist: &StopList,
    ) -> Option<f64> {
        let a = self
            .first
            .context_vector(context_size, pooling, stop_words, source, stoplist)?;
        let b = self
            .second
            .context_vector(context_size, pooling, stop_words, source, stoplist)?;
        cosine(&a, &b).expect("contexts share the source dimension")
    }
}

pub fn prepare_all(instances: &[WicInstance], cfg: &NormalizationConfig) -> Result<Vec<PreparedPair>, InstanceError> {
    instances.par_iter().map(|inst| PreparedPair::new(inst, cfg)).collect()
}

/// Classifies one sentence pair.
pub fn classify_pair(
    inst: &WicInstance,
    params: &Params,
    source: &VectorSource<'_>,
    stoplist: &StopList,
    cfg: &NormalizationConfig,
) -> Result<Prediction, InstanceError> {
    let pair = PreparedPair::new(inst, cfg)?;
    let sim = pair.similarity(params.context_size, params.pooling, params.stop_words, source, stoplist);
    Ok(Prediction::from_similarity(&inst.id, sim, params.threshold))
}

/// Classifies every instance, in parallel, keeping input order.
pub fn classify_all(
    instances: &[WicInstance],
    params: &Params,
    source: &VectorSource<'_>,
    stoplist: &StopList,
    cfg: &NormalizationConfig,
) -> Result<Vec<Prediction>, InstanceError> {
    instances
        .par_iter()
        .map(|inst| classify_pair(inst, params, source, stoplist, cfg))
        .collect()
}
