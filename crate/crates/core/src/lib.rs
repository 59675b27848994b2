//! Word-in-Context disambiguation with static word and lemma embeddings.
//!
//! The pipeline: load a word2vec text table ([`embedding`]), optionally
//! average it into a lemma table ([`lemma`]), normalize and window the two
//! sentences of each pair ([`normalize`], [`wic`]), compare pooled context
//! vectors by cosine against a threshold, tune the four parameters on a
//! labelled set ([`tuner`]) and report per-class metrics and cross-model
//! tables ([`report`]). Datasets are read by [`dataset`].

pub mod dataset;
pub mod embedding;
pub mod lemma;
pub mod normalize;
pub mod report;
pub mod tuner;
pub mod wic;

pub use embedding::{cosine, EmbeddingTable};
pub use lemma::{build_lemma_table, LemmaMap, LemmaStats};
pub use normalize::{normalize_token, tokenize, NormalizationConfig};
pub use wic::{classify_pair, Params, Pooling, Prediction, StopList, Tag, VectorSource, WicInstance};
