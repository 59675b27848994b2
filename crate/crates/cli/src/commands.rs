use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use log::info;
use wicdis_core::dataset::{
    attach_gold, gold_from_instances, parse_dataset, parse_gold, parse_predictions, write_predictions, GoldFile,
};
use wicdis_core::embedding::read_maybe_gz;
use wicdis_core::report::{check_coverage, compute_metrics, cross_tabulate, Format, Render};
use wicdis_core::tuner::{best_json, curve_csv, run_grid, select_best, top_k, top_k_table};
use wicdis_core::wic::classify_all;
use wicdis_core::{
    build_lemma_table, normalize_token, tokenize, EmbeddingTable, LemmaMap, StopList, VectorSource, WicInstance,
};

use crate::config::{Mode, RunConfig};

/// Everything a classification run needs in memory.
struct Resources {
    words: EmbeddingTable,
    lemmas: Option<(LemmaMap, EmbeddingTable)>,
    stoplist: StopList,
}

impl Resources {
    fn load(cfg: &RunConfig) -> anyhow::Result<Self> {
        let stoplist = match &cfg.stoplist_path {
            Some(p) => StopList::open(p).with_context(|| format!("stop list {}", p.display()))?,
            None => StopList::default_arabic(),
        }
        .normalized(&cfg.normalization);
        let words = load_embeddings(cfg.embedding_path()?)?;
        let lemmas = match cfg.mode {
            Mode::Word => None,
            Mode::Lemma => {
                let map = load_lemma_map(cfg.lemma_map_path()?)?;
                let (table, stats) = build_lemma_table(&words, &map);
                info!("lemma table: {stats:?}");
                Some((map, table))
            }
        };
        Ok(Resources {
            words,
            lemmas,
            stoplist,
        })
    }

    fn source(&self) -> VectorSource<'_> {
        match &self.lemmas {
            None => VectorSource::Word(&self.words),
            Some((map, table)) => VectorSource::Lemma { map, table },
        }
    }
}

fn load_embeddings(path: &Path) -> anyhow::Result<EmbeddingTable> {
    let started = Instant::now();
    let (table, report) = EmbeddingTable::open(path)?;
    info!(
        "{}: {} vectors of dimension {} in {:.1?} ({} duplicate tokens)",
        path.display(),
        table.len(),
        table.dim(),
        started.elapsed(),
        report.duplicates
    );
    Ok(table)
}

fn load_lemma_map(path: &Path) -> anyhow::Result<LemmaMap> {
    let (map, duplicates) = LemmaMap::open(path)?;
    info!("{}: {} entries ({duplicates} duplicates)", path.display(), map.len());
    Ok(map)
}

fn load_dataset(cfg: &RunConfig, path: &Path) -> anyhow::Result<Vec<WicInstance>> {
    let bytes = read_maybe_gz(path).with_context(|| format!("dataset {}", path.display()))?;
    parse_dataset(&bytes, cfg.offsets.into()).with_context(|| format!("dataset {}", path.display()))
}

fn load_gold(path: &Path) -> anyhow::Result<GoldFile> {
    let bytes = read_maybe_gz(path).with_context(|| format!("gold {}", path.display()))?;
    parse_gold(&bytes).with_context(|| format!("gold {}", path.display()))
}

fn load_predictions(path: &Path) -> anyhow::Result<Vec<wicdis_core::Prediction>> {
    let bytes = read_maybe_gz(path).with_context(|| format!("predictions {}", path.display()))?;
    parse_predictions(&bytes).with_context(|| format!("predictions {}", path.display()))
}

/// Writes all files only after every one of them has been produced.
fn write_outputs(files: &[(PathBuf, Vec<u8>)]) -> anyhow::Result<()> {
    for (path, bytes) in files {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        info!("wrote {}", path.display());
    }
    Ok(())
}

pub fn build_lemma2vec(cfg: &RunConfig, out: Option<PathBuf>) -> anyhow::Result<()> {
    let map_path = cfg.lemma_map_path()?;
    let words = load_embeddings(cfg.embedding_path()?)?;
    let map = load_lemma_map(map_path)?;
    let (table, stats) = build_lemma_table(&words, &map);
    let mut text = Vec::new();
    table.write_text(&mut text)?;
    let out = out.unwrap_or_else(|| cfg.output_dir().join("lemma2vec.txt"));
    let stats_path = out.with_file_name("lemma_stats.json");
    write_outputs(&[(out, text), (stats_path, stats.to_json().into_bytes())])
}

pub fn classify(cfg: &RunConfig, dataset: &Path, out: Option<PathBuf>) -> anyhow::Result<()> {
    let params = cfg.params()?;
    let instances = load_dataset(cfg, dataset)?;
    let res = Resources::load(cfg)?;
    let preds = classify_all(&instances, &params, &res.source(), &res.stoplist, &cfg.normalization)?;
    let degenerate = preds.iter().filter(|p| p.degenerate).count();
    info!("{} instances classified, {degenerate} degenerate", preds.len());
    let out = out.unwrap_or_else(|| cfg.output_dir().join("predictions.json"));
    write_outputs(&[(out, write_predictions(&preds).into_bytes())])
}

pub fn tune(cfg: &RunConfig, dataset: &Path, gold: Option<&Path>, k: usize) -> anyhow::Result<()> {
    let mut instances = load_dataset(cfg, dataset)?;
    match gold {
        Some(path) => attach_gold(&mut instances, &load_gold(path)?)?,
        None => {
            gold_from_instances(&instances).context("no gold file given and the dataset is not fully tagged")?;
        }
    }
    let res = Resources::load(cfg)?;
    let started = Instant::now();
    let rows = run_grid(&instances, &cfg.grid, &res.source(), &res.stoplist, &cfg.normalization)?;
    info!("{} grid rows in {:.1?}", rows.len(), started.elapsed());
    let best = select_best(&rows).context("empty grid")?;
    let dir = cfg.output_dir();
    write_outputs(&[
        (dir.join("grid.csv"), curve_csv(&rows).into_bytes()),
        (dir.join("best_params.json"), best_json(best, rows.len()).into_bytes()),
        (dir.join("top_k.txt"), top_k_table(&top_k(&rows, k)).into_bytes()),
    ])
}

pub fn evaluate(cfg: &RunConfig, predictions: &Path, gold: &Path, model: &str) -> anyhow::Result<()> {
    let preds = load_predictions(predictions)?;
    let gold = load_gold(gold)?;
    check_coverage(&preds, gold.as_map())?;
    let report = compute_metrics(&preds, gold.as_map())?.with_model(model);
    let text = report.render(Format::Text);
    let dir = cfg.output_dir();
    write_outputs(&[
        (dir.join("report.json"), report.render(Format::Json)),
        (dir.join("report.txt"), text.clone()),
    ])?;
    io::stdout().write_all(&text)?;
    Ok(())
}

pub fn compare(cfg: &RunConfig, predictions: [&Path; 2], gold: &Path, labels: [&str; 2]) -> anyhow::Result<()> {
    let a = load_predictions(predictions[0])?;
    let b = load_predictions(predictions[1])?;
    let gold = load_gold(gold)?;
    let tab = cross_tabulate(&a, &b, gold.as_map(), labels[0], labels[1])?;
    let text = tab.render(Format::Text);
    let dir = cfg.output_dir();
    write_outputs(&[
        (dir.join("crosstab.json"), tab.render(Format::Json)),
        (dir.join("crosstab.txt"), text.clone()),
    ])?;
    io::stdout().write_all(&text)?;
    Ok(())
}

pub fn normalize(cfg: &RunConfig) -> anyhow::Result<()> {
    let stdin = io::stdin().lock();
    let mut out = io::BufWriter::new(io::stdout().lock());
    for line in stdin.lines() {
        let line = line?;
        let tokens: Vec<String> = tokenize(&line)
            .iter()
            .map(|t| normalize_token(&t.text, &cfg.normalization))
            .filter(|t| !t.is_empty())
            .collect();
        writeln!(out, "{}", tokens.join(" "))?;
    }
    out.flush()?;
    Ok(())
}
