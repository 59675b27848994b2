//! Per-class precision, recall and F1, cross-model contingency tables, and
//! their JSON / CSV / text renderings.
//!
//! All arithmetic is kept at full precision; rounding happens only when
//! rendering. Percentages are rounded half away from zero.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::wic::{Params, Prediction, Tag};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("duplicate prediction id {0:?}")]
    DuplicateId(String),
    #[error("no gold tag for ids: {}", .0.join(", "))]
    MissingGold(Vec<String>),
    #[error("id sets differ: {0}")]
    IdMismatch(IdDiff),
}

/// Ids found in one collection but not in another.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdDiff {
    pub groups: Vec<(String, Vec<String>)>,
}

impl IdDiff {
    fn push(&mut self, what: &str, ids: BTreeSet<&str>) {
        if !ids.is_empty() {
            self.groups
                .push((what.to_owned(), ids.into_iter().map(str::to_owned).collect()));
        }
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

impl std::fmt::Display for IdDiff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .groups
            .iter()
            .map(|(what, ids)| format!("{what}: {}", ids.join(", ")))
            .collect();
        f.write_str(&parts.join("; "))
    }
}

/// Confusion counts with TRUE as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Counts {
    pub fn add(&mut self, predicted: Tag, gold: Tag) {
        match (predicted, gold) {
            (Tag::True, Tag::True) => self.tp += 1,
            (Tag::True, Tag::False) => self.fp += 1,
            (Tag::False, Tag::True) => self.fn_ += 1,
            (Tag::False, Tag::False) => self.tn += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Which ratios hit a zero denominator (and were reported as 0).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ZeroDivision {
    pub precision_true: bool,
    pub recall_true: bool,
    pub f1_true: bool,
    pub precision_false: bool,
    pub recall_false: bool,
    pub f1_false: bool,
}

impl ZeroDivision {
    pub fn any(&self) -> bool {
        self.names().next().is_some()
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> {
        [
            (self.precision_true, "precision_TRUE"),
            (self.recall_true, "recall_TRUE"),
            (self.f1_true, "f1_TRUE"),
            (self.precision_false, "precision_FALSE"),
            (self.recall_false, "recall_FALSE"),
            (self.f1_false, "f1_FALSE"),
        ]
        .into_iter()
        .filter_map(|(set, name)| set.then_some(name))
    }
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn class_metrics(hit: usize, false_pos: usize, false_neg: usize) -> (ClassMetrics, [bool; 3]) {
    let (precision, zp) = ratio(hit, hit + false_pos);
    let (recall, zr) = ratio(hit, hit + false_neg);
    let (f1, zf) = if precision + recall == 0.0 {
        (0.0, true)
    } else {
        (2.0 * precision * recall / (precision + recall), false)
    };
    (ClassMetrics { precision, recall, f1 }, [zp, zr, zf])
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub model: String,
    pub params: Option<Params>,
    pub counts: Counts,
    pub true_class: ClassMetrics,
    pub false_class: ClassMetrics,
    pub accuracy: f64,
    pub degenerate_count: usize,
    pub zero_division: ZeroDivision,
}

impl MetricsReport {
    pub fn from_counts(counts: Counts, degenerate_count: usize) -> Self {
        let (true_class, [pt, rt, ft]) = class_metrics(counts.tp, counts.fp, counts.fn_);
        let (false_class, [pf, rf, ff]) = class_metrics(counts.tn, counts.fn_, counts.fp);
        let (accuracy, _) = ratio(counts.tp + counts.tn, counts.total());
        MetricsReport {
            model: String::new(),
            params: None,
            counts,
            true_class,
            false_class,
            accuracy,
            degenerate_count,
            zero_division: ZeroDivision {
                precision_true: pt,
                recall_true: rt,
                f1_true: ft,
                precision_false: pf,
                recall_false: rf,
                f1_false: ff,
            },
        }
    }

    pub fn n(&self) -> usize {
        self.counts.total()
    }

    pub fn macro_f1(&self) -> f64 {
        (self.true_class.f1 + self.false_class.f1) / 2.0
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    pub fn with_params(mut self, params: Params) -> Self {
        self.params = Some(params);
        self
    }
}

/// Scores predictions against gold tags. Degenerate predictions count as
/// ordinary FALSE predictions and are tallied separately.
pub fn compute_metrics(preds: &[Prediction], gold: &HashMap<String, Tag>) -> Result<MetricsReport, EvalError> {
    let mut seen = HashSet::with_capacity(preds.len());
    let mut missing = Vec::new();
    let mut counts = Counts::default();
    let mut degenerate = 0;
    for p in preds {
        if !seen.insert(p.id.as_str()) {
            return Err(EvalError::DuplicateId(p.id.clone()));
        }
        match gold.get(&p.id) {
            Some(&g) => counts.add(p.label, g),
            None => missing.push(p.id.clone()),
        }
        degenerate += usize::from(p.degenerate);
    }
    if !missing.is_empty() {
        return Err(EvalError::MissingGold(missing));
    }
    Ok(MetricsReport::from_counts(counts, degenerate))
}

/// Fails unless predictions and gold cover exactly the same ids.
pub fn check_coverage(preds: &[Prediction], gold: &HashMap<String, Tag>) -> Result<(), EvalError> {
    let ids = index_predictions(preds)?;
    let ids: BTreeSet<&str> = ids.keys().copied().collect();
    let ids_gold: BTreeSet<&str> = gold.keys().map(String::as_str).collect();
    let mut diff = IdDiff::default();
    diff.push("without gold", &ids - &ids_gold);
    diff.push("gold without predictions", &ids_gold - &ids);
    if diff.is_empty() {
        Ok(())
    } else {
        Err(EvalError::IdMismatch(diff))
    }
}

/// Per-gold-tag counts in one contingency cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Cell {
    pub gold_true: usize,
    pub gold_false: usize,
}

impl Cell {
    pub fn total(&self) -> usize {
        self.gold_true + self.gold_false
    }

    fn add(&mut self, gold: Tag) {
        match gold {
            Tag::True => self.gold_true += 1,
            Tag::False => self.gold_false += 1,
        }
    }
}

/// Correct/wrong contingency of two models against gold, split by gold tag.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CrossTab {
    pub label_a: String,
    pub label_b: String,
    pub both_correct: Cell,
    /// Correct under A, wrong under B.
    pub a_only: Cell,
    /// Wrong under A, correct under B.
    pub b_only: Cell,
    pub both_wrong: Cell,
}

impl CrossTab {
    pub fn cells(&self) -> [Cell; 4] {
        [self.both_correct, self.a_only, self.b_only, self.both_wrong]
    }

    pub fn total(&self) -> Cell {
        let mut total = Cell::default();
        for c in self.cells() {
            total.gold_true += c.gold_true;
            total.gold_false += c.gold_false;
        }
        total
    }

    pub fn n(&self) -> usize {
        self.total().total()
    }

    pub fn accuracy_a(&self) -> f64 {
        (self.both_correct.total() + self.a_only.total()) as f64 / self.n() as f64
    }

    pub fn accuracy_b(&self) -> f64 {
        (self.both_correct.total() + self.b_only.total()) as f64 / self.n() as f64
    }

    /// The same table with the roles of the two models exchanged.
    pub fn swapped(&self) -> Self {
        CrossTab {
            label_a: self.label_b.clone(),
            label_b: self.label_a.clone(),
            both_correct: self.both_correct,
            a_only: self.b_only,
            b_only: self.a_only,
            both_wrong: self.both_wrong,
        }
    }

    fn row_names(&self) -> [String; 4] {
        let (a, b) = (&self.label_a, &self.label_b);
        [
            format!("Correct {a} - Correct {b}"),
            format!("Correct {a} - Wrong {b}"),
            format!("Wrong {a} - Correct {b}"),
            format!("Wrong {a} - Wrong {b}"),
        ]
    }
}

fn index_predictions(preds: &[Prediction]) -> Result<HashMap<&str, Tag>, EvalError> {
    let mut map = HashMap::with_capacity(preds.len());
    for p in preds {
        if map.insert(p.id.as_str(), p.label).is_some() {
            return Err(EvalError::DuplicateId(p.id.clone()));
        }
    }
    Ok(map)
}

/// Places every instance in one of the four correct/wrong cells.
pub fn cross_tabulate(
    preds_a: &[Prediction],
    preds_b: &[Prediction],
    gold: &HashMap<String, Tag>,
    label_a: &str,
    label_b: &str,
) -> Result<CrossTab, EvalError> {
    let a = index_predictions(preds_a)?;
    let b = index_predictions(preds_b)?;
    let ids_a: BTreeSet<&str> = a.keys().copied().collect();
    let ids_b: BTreeSet<&str> = b.keys().copied().collect();
    let ids_gold: BTreeSet<&str> = gold.keys().map(String::as_str).collect();
    let mut diff = IdDiff::default();
    diff.push(&format!("only in {label_a}"), &ids_a - &ids_b);
    diff.push(&format!("only in {label_b}"), &ids_b - &ids_a);
    diff.push("without gold", &(&ids_a | &ids_b) - &ids_gold);
    diff.push("gold without predictions", &ids_gold - &(&ids_a | &ids_b));
    if !diff.is_empty() {
        return Err(EvalError::IdMismatch(diff));
    }

    let mut tab = CrossTab {
        label_a: label_a.to_owned(),
        label_b: label_b.to_owned(),
        ..Default::default()
    };
    for (id, &g) in gold {
        let cell = match (a[id.as_str()] == g, b[id.as_str()] == g) {
            (true, true) => &mut tab.both_correct,
            (true, false) => &mut tab.a_only,
            (false, true) => &mut tab.b_only,
            (false, false) => &mut tab.both_wrong,
        };
        cell.add(g);
    }
    Ok(tab)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Text,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "text" | "txt" => Ok(Format::Text),
            other => Err(format!("unknown format {other:?}")),
        }
    }
}

/// Rounds to six decimals for display.
pub fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// `x` as an integer percentage, rounded half away from zero. The product is
/// snapped to six decimals first so that e.g. 0.565 renders as 57.
pub fn percent(x: f64) -> i64 {
    round6(x * 100.0).round() as i64
}

pub trait Render {
    fn render(&self, format: Format) -> Vec<u8>;
}

#[derive(Serialize)]
struct ClassJson {
    p: f64,
    r: f64,
    f1: f64,
    p_pct: i64,
    r_pct: i64,
    f1_pct: i64,
}

impl From<&ClassMetrics> for ClassJson {
    fn from(m: &ClassMetrics) -> Self {
        ClassJson {
            p: round6(m.precision),
            r: round6(m.recall),
            f1: round6(m.f1),
            p_pct: percent(m.precision),
            r_pct: percent(m.recall),
            f1_pct: percent(m.f1),
        }
    }
}

#[derive(Serialize)]
struct PerClassJson {
    #[serde(rename = "TRUE")]
    true_class: ClassJson,
    #[serde(rename = "FALSE")]
    false_class: ClassJson,
}

#[derive(Serialize)]
struct MetricsJson<'a> {
    model: &'a str,
    params: Option<&'a Params>,
    n: usize,
    accuracy: f64,
    accuracy_pct: i64,
    per_class: PerClassJson,
    counts: Counts,
    degenerate_count: usize,
    zero_division_flags: Vec<&'static str>,
}

impl Render for MetricsReport {
    fn render(&self, format: Format) -> Vec<u8> {
        match format {
            Format::Json => {
                let doc = MetricsJson {
                    model: &self.model,
                    params: self.params.as_ref(),
                    n: self.n(),
                    accuracy: round6(self.accuracy),
                    accuracy_pct: percent(self.accuracy),
                    per_class: PerClassJson {
                        true_class: (&self.true_class).into(),
                        false_class: (&self.false_class).into(),
                    },
                    counts: self.counts,
                    degenerate_count: self.degenerate_count,
                    zero_division_flags: self.zero_division.names().collect(),
                };
                let mut out = serde_json::to_vec_pretty(&doc).expect("report serializes");
                out.push(b'\n');
                out
            }
            Format::Csv => {
                let mut s = String::from(
                    "model,n,accuracy,precision_true,recall_true,f1_true,precision_false,recall_false,f1_false,degenerate_count\n",
                );
                let (t, f) = (&self.true_class, &self.false_class);
                let _ = writeln!(
                    s,
                    "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
                    csv_field(&self.model),
                    self.n(),
                    self.accuracy,
                    t.precision,
                    t.recall,
                    t.f1,
                    f.precision,
                    f.recall,
                    f.f1,
                    self.degenerate_count
                );
                s.into_bytes()
            }
            Format::Text => {
                let mut s = String::new();
                if !self.model.is_empty() {
                    let _ = writeln!(s, "model: {}", self.model);
                }
                if let Some(p) = &self.params {
                    let _ = writeln!(s, "params: {}", describe_params(p));
                }
                let _ = writeln!(s, "n: {}  degenerate: {}", self.n(), self.degenerate_count);
                let _ = writeln!(s);
                let _ = writeln!(s, "{:<10} {:>4} {:>4}   {:>8} {:>8}", "", "T", "F", "T", "F");
                let rows = [
                    ("Precision", self.true_class.precision, self.false_class.precision),
                    ("Recall", self.true_class.recall, self.false_class.recall),
                    ("F1-score", self.true_class.f1, self.false_class.f1),
                ];
                for (name, t, f) in rows {
                    let _ = writeln!(s, "{name:<10} {:>4} {:>4}   {t:>8.6} {f:>8.6}", percent(t), percent(f));
                }
                let _ = writeln!(
                    s,
                    "{:<10} {:>4} {:>4}   {:>8.6}",
                    "Accuracy",
                    percent(self.accuracy),
                    "",
                    self.accuracy
                );
                let flags: Vec<_> = self.zero_division.names().collect();
                if !flags.is_empty() {
                    let _ = writeln!(s, "zero division (reported as 0): {}", flags.join(", "));
                }
                s.into_bytes()
            }
        }
    }
}

pub fn describe_params(p: &Params) -> String {
    format!(
        "context_size={} pooling={} threshold={} stop_words={}",
        p.context_size,
        p.pooling,
        p.threshold,
        if p.stop_words { "yes" } else { "no" }
    )
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

#[derive(Serialize)]
struct CrossRowJson {
    row: String,
    a_correct: Option<bool>,
    b_correct: Option<bool>,
    #[serde(rename = "TRUE")]
    gold_true: usize,
    #[serde(rename = "FALSE")]
    gold_false: usize,
    #[serde(rename = "Total")]
    total: usize,
}

#[derive(Serialize)]
struct CrossTabJson<'a> {
    model_a: &'a str,
    model_b: &'a str,
    rows: Vec<CrossRowJson>,
    accuracy_a: f64,
    accuracy_b: f64,
}

/// Row label, (A correct, B correct) for the four cells, and counts.
type CrossRow = (String, Option<(bool, bool)>, Cell);

impl CrossTab {
    fn rows(&self) -> Vec<CrossRow> {
        let flags = [(true, true), (true, false), (false, true), (false, false)];
        let mut rows: Vec<_> = self
            .row_names()
            .into_iter()
            .zip(flags)
            .zip(self.cells())
            .map(|((name, f), c)| (name, Some(f), c))
            .collect();
        rows.push(("Total".to_owned(), None, self.total()));
        rows
    }
}

impl Render for CrossTab {
    fn render(&self, format: Format) -> Vec<u8> {
        let n = self.n();
        let acc = |x: f64| if n == 0 { 0.0 } else { round6(x) };
        match format {
            Format::Json => {
                let doc = CrossTabJson {
                    model_a: &self.label_a,
                    model_b: &self.label_b,
                    rows: self
                        .rows()
                        .into_iter()
                        .map(|(row, flags, c)| CrossRowJson {
                            row,
                            a_correct: flags.map(|f| f.0),
                            b_correct: flags.map(|f| f.1),
                            gold_true: c.gold_true,
                            gold_false: c.gold_false,
                            total: c.total(),
                        })
                        .collect(),
                    accuracy_a: if n == 0 { 0.0 } else { acc(self.accuracy_a()) },
                    accuracy_b: if n == 0 { 0.0 } else { acc(self.accuracy_b()) },
                };
                let mut out = serde_json::to_vec_pretty(&doc).expect("crosstab serializes");
                out.push(b'\n');
                out
            }
            Format::Csv => {
                let mut s = String::from("row,TRUE,FALSE,Total\n");
                for (name, _, c) in self.rows() {
                    let _ = writeln!(s, "{},{},{},{}", csv_field(&name), c.gold_true, c.gold_false, c.total());
                }
                s.into_bytes()
            }
            Format::Text => {
                let rows = self.rows();
                let width = rows.iter().map(|r| r.0.chars().count()).max().unwrap_or(0);
                let mut s = String::new();
                let _ = writeln!(s, "{:<width$} {:>6} {:>6} {:>6}", "", "TRUE", "FALSE", "Total");
                for (name, _, c) in rows {
                    let pad = width - name.chars().count();
                    let _ = writeln!(
                        s,
                        "{name}{:pad$} {:>6} {:>6} {:>6}",
                        "",
                        c.gold_true,
                        c.gold_false,
                        c.total()
                    );
                }
                s.into_bytes()
            }
        }
    }
}
