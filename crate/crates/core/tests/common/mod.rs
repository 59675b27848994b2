#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use wicdis_core::dataset::{attach_gold, parse_dataset, parse_gold, GoldFile, OffsetUnit};
use wicdis_core::{build_lemma_table, EmbeddingTable, LemmaMap, Params, Pooling, StopList, Tag, WicInstance};

pub fn mini_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini")
}

pub fn oracle_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/oracle")
}

pub struct Mini {
    pub words: EmbeddingTable,
    pub lemmas: LemmaMap,
    pub lemma_table: EmbeddingTable,
    pub stoplist: StopList,
    pub instances: Vec<WicInstance>,
    pub gold: GoldFile,
}

impl Mini {
    pub fn load() -> Self {
        let dir = mini_dir();
        let (words, _) = EmbeddingTable::open(dir.join("embeddings.txt")).unwrap();
        let (lemmas, _) = LemmaMap::open(dir.join("lemmas.tsv")).unwrap();
        let (lemma_table, _) = build_lemma_table(&words, &lemmas);
        let stoplist = StopList::open(dir.join("stopwords.txt")).unwrap();
        let mut instances =
            parse_dataset(&std::fs::read(dir.join("dataset.json")).unwrap(), OffsetUnit::Chars).unwrap();
        let gold = parse_gold(&std::fs::read(dir.join("gold.json")).unwrap()).unwrap();
        attach_gold(&mut instances, &gold).unwrap();
        Mini {
            words,
            lemmas,
            lemma_table,
            stoplist,
            instances,
            gold,
        }
    }

    pub fn gold_map(&self) -> &HashMap<String, Tag> {
        self.gold.as_map()
    }
}

#[derive(Debug, Deserialize)]
pub struct OraclePrediction {
    pub id: String,
    pub tag: String,
    pub similarity: Option<f64>,
    pub degenerate: bool,
}

#[derive(Debug, Deserialize)]
pub struct OracleSetting {
    pub context_size: usize,
    pub pooling: String,
    pub threshold: f64,
    pub stop_words: bool,
}

impl OracleSetting {
    pub fn params(&self) -> Params {
        Params::new(
            self.context_size,
            self.pooling.parse::<Pooling>().unwrap(),
            self.threshold,
            self.stop_words,
        )
        .unwrap()
    }
}

#[derive(Debug, Deserialize)]
pub struct OracleExpected {
    pub settings: Vec<OracleSetting>,
    pub word: Vec<Vec<OraclePrediction>>,
    pub lemma: Vec<Vec<OraclePrediction>>,
    pub lemma_table: HashMap<String, Vec<f64>>,
    pub lemma_stats: serde_json::Value,
}

pub fn oracle_expected() -> OracleExpected {
    serde_json::from_slice(&std::fs::read(oracle_dir().join("expected_predictions.json")).unwrap()).unwrap()
}

#[derive(Debug)]
pub struct OracleRow {
    pub params: Params,
    pub counts: [usize; 4],
    pub precision_true: f64,
    pub recall_true: f64,
    pub f1_true: f64,
    pub precision_false: f64,
    pub recall_false: f64,
    pub f1_false: f64,
    pub accuracy: f64,
    pub degenerate: usize,
}

pub fn oracle_grid(mode: &str) -> Vec<OracleRow> {
    let text = std::fs::read_to_string(oracle_dir().join(format!("expected_grid_{mode}.csv"))).unwrap();
    text.lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let num = |i: usize| f[i].parse::<f64>().unwrap();
            let int = |i: usize| f[i].parse::<usize>().unwrap();
            OracleRow {
                params: Params::new(int(0), f[1].parse().unwrap(), num(3), f[2] == "true").unwrap(),
                counts: [int(4), int(5), int(6), int(7)],
                precision_true: num(8),
                recall_true: num(9),
                f1_true: num(10),
                precision_false: num(11),
                recall_false: num(12),
                f1_false: num(13),
                accuracy: num(14),
                degenerate: int(15),
            }
        })
        .collect()
}

pub fn oracle_best(mode: &str) -> Params {
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(oracle_dir().join("expected_best.json")).unwrap()).unwrap();
    let b = &v[mode];
    Params::new(
        b["context_size"].as_u64().unwrap() as usize,
        b["pooling"].as_str().unwrap().parse().unwrap(),
        b["threshold"].as_f64().unwrap(),
        b["stop_words"].as_bool().unwrap(),
    )
    .unwrap()
}
