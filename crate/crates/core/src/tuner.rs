//! Exhaustive grid search over [`Params`] on a labelled set.
//!
//! Similarities depend on `(context_size, pooling, stop_words)` only, so
//! each such group is scored once and every threshold is applied to the
//! cached similarities afterwards. Groups run in parallel; rows always come
//! back ordered by context size, pooling, stop-word option and threshold in
//! the order the [`GridSpec`] lists them.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalize::NormalizationConfig;
use crate::report::{describe_params, percent, ClassMetrics, Counts, MetricsReport};
use crate::wic::{prepare_all, InstanceError, Params, Pooling, StopList, Tag, VectorSource, WicInstance};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridSpecError {
    #[error("grid axis {0} is empty")]
    EmptyAxis(&'static str),
    #[error("thresholds must be strictly increasing")]
    Unordered,
    #[error("threshold range needs start <= stop and a positive step")]
    BadRange,
    #[error(transparent)]
    Params(#[from] crate::wic::ParamsError),
}

#[derive(Debug, Error)]
pub enum TuneError {
    #[error("no instances to tune on")]
    Empty,
    #[error("instances without a gold tag: {}", .0.join(", "))]
    Unlabeled(Vec<String>),
    #[error(transparent)]
    Spec(#[from] GridSpecError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub context_sizes: Vec<usize>,
    #[serde(with = "threshold_list")]
    pub thresholds: Vec<f64>,
    pub poolings: Vec<Pooling>,
    pub stop_words_options: Vec<bool>,
}

impl Default for GridSpec {
    /// Context sizes 1..=10, thresholds 0.55..=0.85 by 0.01, all four
    /// poolings, stop-word removal on and off.
    fn default() -> Self {
        GridSpec {
            context_sizes: (1..=10).collect(),
            thresholds: threshold_range(0.55, 0.85, 0.01).expect("default range is valid"),
            poolings: Pooling::ALL.to_vec(),
            stop_words_options: vec![true, false],
        }
    }
}

impl GridSpec {
    /// A one-cell grid.
    pub fn single(params: &Params) -> Self {
        GridSpec {
            context_sizes: vec![params.context_size],
            thresholds: vec![params.threshold],
            poolings: vec![params.pooling],
            stop_words_options: vec![params.stop_words],
        }
    }

    pub fn len(&self) -> usize {
        self.context_sizes.len() * self.thresholds.len() * self.poolings.len() * self.stop_words_options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<(), GridSpecError> {
        for (name, empty) in [
            ("context_sizes", self.context_sizes.is_empty()),
            ("thresholds", self.thresholds.is_empty()),
            ("poolings", self.poolings.is_empty()),
            ("stop_words_options", self.stop_words_options.is_empty()),
        ] {
            if empty {
                return Err(GridSpecError::EmptyAxis(name));
            }
        }
        if self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GridSpecError::Unordered);
        }
        for &n in &self.context_sizes {
            for &t in &self.thresholds {
                Params::new(n, Pooling::Min, t, true)?;
            }
        }
        Ok(())
    }

    fn groups(&self) -> Vec<(usize, Pooling, bool)> {
        let mut groups = Vec::new();
        for &n in &self.context_sizes {
            for &p in &self.poolings {
                for &s in &self.stop_words_options {
                    groups.push((n, p, s));
                }
            }
        }
        groups
    }
}

/// Evenly spaced thresholds from `start` to `stop` inclusive. Values are
/// snapped to ten decimals so that e.g. the 0.01 grid contains exactly 0.58.
pub fn threshold_range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, GridSpecError> {
    let valid = step > 0.0 && start <= stop && start.is_finite() && stop.is_finite();
    if !valid {
        return Err(GridSpecError::BadRange);
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| ((start + i as f64 * step) * 1e10).round() / 1e10)
        .collect())
}

/// Thresholds are written as a list, or read from either a list or a
/// `{start, stop, step}` range.
mod threshold_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        List(Vec<f64>),
        Range { start: f64, stop: f64, step: f64 },
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::List(v) => Ok(v),
            Repr::Range { start, stop, step } => {
                super::threshold_range(start, stop, step).map_err(serde::de::Error::custom)
            }
        }
    }
}

/// Metrics of one grid cell, all in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub params: Params,
    pub counts: Counts,
    pub true_class: ClassMetrics,
    pub false_class: ClassMetrics,
    pub accuracy: f64,
    pub degenerate_count: usize,
}

impl GridRow {
    fn new(params: Params, report: MetricsReport) -> Self {
        GridRow {
            params,
            counts: report.counts,
            true_class: report.true_class,
            false_class: report.false_class,
            accuracy: report.accuracy,
            degenerate_count: report.degenerate_count,
        }
    }

    pub fn macro_f1(&self) -> f64 {
        (self.true_class.f1 + self.false_class.f1) / 2.0
    }

    pub fn to_report(&self) -> MetricsReport {
        let mut r = MetricsReport::from_counts(self.counts, self.degenerate_count);
        r.params = Some(self.params);
        r
    }
}

/// Scores every cell of `spec` on `instances`.
pub fn run_grid(
    instances: &[WicInstance],
    spec: &GridSpec,
    source: &VectorSource<'_>,
    stoplist: &StopList,
    cfg: &NormalizationConfig,
) -> Result<Vec<GridRow>, TuneError> {
    if instances.is_empty() {
        return Err(TuneError::Empty);
    }
    spec.validate()?;
    let unlabeled: Vec<String> = instances
        .iter()
        .filter(|i| i.gold.is_none())
        .map(|i| i.id.clone())
        .collect();
    if !unlabeled.is_empty() {
        return Err(TuneError::Unlabeled(unlabeled));
    }
    let gold: Vec<Tag> = instances.iter().filter_map(|i| i.gold).collect();
    let prepared = prepare_all(instances, cfg)?;

    let rows = spec
        .groups()
        .into_par_iter()
        .map(|(n, pooling, stop_words)| {
            let sims: Vec<Option<f64>> = prepared
                .iter()
                .map(|p| p.similarity(n, pooling, stop_words, source, stoplist))
                .collect();
            let degenerate = sims.iter().filter(|s| s.is_none()).count();
            spec.thresholds
                .iter()
                .map(|&threshold| {
                    let mut counts = Counts::default();
                    for (sim, &g) in sims.iter().zip(&gold) {
                        let label = Tag::from_bool(sim.is_some_and(|s| s >= threshold));
                        counts.add(label, g);
                    }
                    let params = Params {
                        context_size: n,
                        pooling,
                        threshold,
                        stop_words,
                    };
                    GridRow::new(params, MetricsReport::from_counts(counts, degenerate))
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>();
    Ok(rows.into_iter().flatten().collect())
}

/// Orders rows best first: higher macro-F1, then smaller context size,
/// lower threshold, pooling in min/max/mean/std order, stop-word removal
/// before no removal.
pub fn rank(a: &GridRow, b: &GridRow) -> Ordering {
    b.macro_f1()
        .total_cmp(&a.macro_f1())
        .then(a.params.context_size.cmp(&b.params.context_size))
        .then(a.params.threshold.total_cmp(&b.params.threshold))
        .then(a.params.pooling.cmp(&b.params.pooling))
        .then(b.params.stop_words.cmp(&a.params.stop_words))
}

/// The macro-F1 argmax under [`rank`]'s tie-breaks.
pub fn select_best(rows: &[GridRow]) -> Option<&GridRow> {
    rows.iter().min_by(|a, b| rank(a, b))
}

pub fn top_k(rows: &[GridRow], k: usize) -> Vec<&GridRow> {
    let mut sorted: Vec<&GridRow> = rows.iter().collect();
    sorted.sort_by(|a, b| rank(a, b));
    sorted.truncate(k);
    sorted
}

pub const SELECTION_RULE: &str = "argmax of macro-F1 = (f1_true + f1_false) / 2; ties broken by smaller context_size, \
then lower threshold, then pooling min < max < mean < std, then stop_words removal first";

pub const CURVE_HEADER: &str = "context_size,pooling,stop_words,threshold,f1_true,f1_false,accuracy";

/// One CSV line per row, for redrawing F1-versus-threshold curves.
pub fn curve_csv(rows: &[GridRow]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CURVE_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.6},{:.6},{:.6}",
            r.params.context_size,
            r.params.pooling,
            r.params.stop_words,
            r.params.threshold,
            r.true_class.f1,
            r.false_class.f1,
            r.accuracy
        );
    }
    s
}

/// Human-readable ranking of the best `rows`, percentages first.
pub fn top_k_table(rows: &[&GridRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>4} {:>5} {:>7} {:>9} {:>5} {:>5} {:>5} {:>5} {:>5} {:>5} {:>5} {:>9} {:>5}",
        "rank", "ctx", "pooling", "threshold", "stop", "P_T", "R_T", "F1_T", "P_F", "R_F", "F1_F", "macro_F1", "degen"
    );
    for (i, r) in rows.iter().enumerate() {
        let p = &r.params;
        let _ = writeln!(
            s,
            "{:>4} {:>5} {:>7} {:>9} {:>5} {:>5} {:>5} {:>5} {:>5} {:>5} {:>5} {:>9.6} {:>5}",
            i + 1,
            p.context_size,
            p.pooling,
            p.threshold,
            if p.stop_words { "yes" } else { "no" },
            percent(r.true_class.precision),
            percent(r.true_class.recall),
            percent(r.true_class.f1),
            percent(r.false_class.precision),
            percent(r.false_class.recall),
            percent(r.false_class.f1),
            r.macro_f1(),
            r.degenerate_count
        );
    }
    s
}

#[derive(Serialize)]
struct BestJson<'a> {
    selection_rule: &'static str,
    params: &'a Params,
    summary: String,
    macro_f1: f64,
    f1_true: f64,
    f1_false: f64,
    accuracy: f64,
    degenerate_count: usize,
    grid_rows: usize,
}

/// Best-parameter document, echoing the selection rule.
pub fn best_json(best: &GridRow, grid_rows: usize) -> String {
    use crate::report::round6;
    let doc = BestJson {
        selection_rule: SELECTION_RULE,
        params: &best.params,
        summary: describe_params(&best.params),
        macro_f1: round6(best.macro_f1()),
        f1_true: round6(best.true_class.f1),
        f1_false: round6(best.false_class.f1),
        accuracy: round6(best.accuracy),
        degenerate_count: best.degenerate_count,
        grid_rows,
    };
    serde_json::to_string_pretty(&doc).expect("best params serialize") + "\n"
}
