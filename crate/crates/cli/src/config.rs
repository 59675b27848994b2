use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use wicdis_core::dataset::OffsetUnit;
use wicdis_core::tuner::GridSpec;
use wicdis_core::{NormalizationConfig, Params, Pooling};

/// Bad invocation or configuration; maps to exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Word,
    Lemma,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Offsets {
    #[default]
    Chars,
    Bytes,
}

impl From<Offsets> for OffsetUnit {
    fn from(o: Offsets) -> Self {
        match o {
            Offsets::Chars => OffsetUnit::Chars,
            Offsets::Bytes => OffsetUnit::Bytes,
        }
    }
}

/// Parameters as they may appear in a config file: any subset, completed by
/// command-line flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialParams {
    pub context_size: Option<usize>,
    pub pooling: Option<Pooling>,
    pub threshold: Option<f64>,
    pub stop_words: Option<bool>,
}

/// Experiment manifest. Relative paths are resolved against the directory
/// of the file they were read from.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub embedding_path: Option<PathBuf>,
    pub lemma_map_path: Option<PathBuf>,
    pub mode: Mode,
    pub stoplist_path: Option<PathBuf>,
    pub normalization: NormalizationConfig,
    pub grid: GridSpec,
    pub params: PartialParams,
    pub output_dir: Option<PathBuf>,
    pub offsets: Offsets,
}

/// Flags that override the config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Word2vec text file (.gz accepted).
    #[arg(long, global = true, value_name = "PATH")]
    pub embeddings: Option<PathBuf>,
    /// Tab-separated word-to-lemma map.
    #[arg(long, global = true, value_name = "PATH")]
    pub lemma_map: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<Mode>,
    /// Stop-word list, one word per line. Defaults to the bundled list.
    #[arg(long, global = true, value_name = "PATH")]
    pub stoplist: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// How dataset span offsets are counted.
    #[arg(long, global = true, value_enum)]
    pub offsets: Option<Offsets>,
    #[arg(long, global = true)]
    pub context_size: Option<usize>,
    #[arg(long, global = true)]
    pub pooling: Option<Pooling>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    /// Remove stop words from contexts (true/false).
    #[arg(long, global = true, value_name = "BOOL")]
    pub stop_words: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.embedding_path,
            &mut cfg.lemma_map_path,
            &mut cfg.stoplist_path,
            &mut cfg.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Clone>(slot: &mut Option<T>, v: &Option<T>) {
            if v.is_some() {
                slot.clone_from(v);
            }
        }
        set(&mut self.embedding_path, &o.embeddings);
        set(&mut self.lemma_map_path, &o.lemma_map);
        set(&mut self.stoplist_path, &o.stoplist);
        set(&mut self.output_dir, &o.output_dir);
        set(&mut self.params.context_size, &o.context_size);
        set(&mut self.params.pooling, &o.pooling);
        set(&mut self.params.threshold, &o.threshold);
        set(&mut self.params.stop_words, &o.stop_words);
        if let Some(m) = o.mode {
            self.mode = m;
        }
        if let Some(u) = o.offsets {
            self.offsets = u;
        }
    }

    /// Checks that do not touch the filesystem.
    pub fn validate(&self) -> anyhow::Result<()> {
        self.normalization
            .validate()
            .map_err(|e| usage(format!("normalization: {e}")))?;
        if self.mode == Mode::Lemma && self.lemma_map_path.is_none() {
            return Err(usage("lemma mode requires lemma_map_path (or --lemma-map)"));
        }
        for (name, p) in [
            ("embedding_path", &self.embedding_path),
            ("lemma_map_path", &self.lemma_map_path),
            ("stoplist_path", &self.stoplist_path),
            ("output_dir", &self.output_dir),
        ] {
            if p.as_ref().is_some_and(|p| p.as_os_str().is_empty()) {
                return Err(usage(format!("{name} is empty")));
            }
        }
        self.grid.validate().map_err(|e| usage(format!("grid: {e}")))?;
        Ok(())
    }

    pub fn embedding_path(&self) -> anyhow::Result<&Path> {
        self.embedding_path
            .as_deref()
            .ok_or_else(|| usage("no embedding file; set embedding_path or pass --embeddings"))
    }

    pub fn lemma_map_path(&self) -> anyhow::Result<&Path> {
        self.lemma_map_path
            .as_deref()
            .ok_or_else(|| usage("no lemma map; set lemma_map_path or pass --lemma-map"))
    }

    pub fn output_dir(&self) -> &Path {
        self.output_dir.as_deref().unwrap_or(Path::new("."))
    }

    pub fn params(&self) -> anyhow::Result<Params> {
        let p = &self.params;
        let missing: Vec<&str> = [
            ("context_size", p.context_size.is_none()),
            ("pooling", p.pooling.is_none()),
            ("threshold", p.threshold.is_none()),
            ("stop_words", p.stop_words.is_none()),
        ]
        .into_iter()
        .filter_map(|(name, absent)| absent.then_some(name))
        .collect();
        if !missing.is_empty() {
            return Err(usage(format!("missing parameters: {}", missing.join(", "))));
        }
        Params::new(
            p.context_size.unwrap(),
            p.pooling.unwrap(),
            p.threshold.unwrap(),
            p.stop_words.unwrap(),
        )
        .map_err(|e| usage(e.to_string()))
    }
}
