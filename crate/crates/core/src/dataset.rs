//! SemEval-style WiC datasets, gold files and prediction files.
//!
//! A dataset is a JSON array of objects carrying `id`, `sentence1`,
//! `sentence2` and the character offsets `start1`, `end1`, `start2`, `end2`
//! (integers, or strings holding integers). Other fields are ignored, except
//! that an optional `tag` is taken as the gold label. Gold files are arrays
//! of `{id, tag}` with tags `T`/`F`/`TRUE`/`FALSE`.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::wic::{Prediction, Span, Tag, WicInstance};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("expected a JSON array of objects")]
    NotArray,
    #[error("entry {index}: not an object")]
    NotObject { index: usize },
    #[error("entry {index}: missing or non-string id")]
    MissingId { index: usize },
    #[error("instance {id}: field {field}: {problem}")]
    Field {
        id: String,
        field: &'static str,
        problem: String,
    },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("id {id}: unknown tag {tag:?}")]
    UnknownTag { id: String, tag: String },
    #[error("dataset and gold disagree: {}", describe_join(.missing_gold, .unknown))]
    Join {
        missing_gold: Vec<String>,
        unknown: Vec<String>,
    },
}

fn describe_join(missing: &[String], unknown: &[String]) -> String {
    let mut parts = Vec::new();
    if !missing.is_empty() {
        parts.push(format!("no gold tag for {}", missing.join(", ")));
    }
    if !unknown.is_empty() {
        parts.push(format!("gold ids not in dataset: {}", unknown.join(", ")));
    }
    parts.join("; ")
}

/// How the dataset's offsets count positions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OffsetUnit {
    /// Unicode scalar values.
    #[default]
    Chars,
    /// UTF-8 bytes; converted to character offsets on load.
    Bytes,
}

fn entries(source: &[u8]) -> Result<Vec<Value>, DatasetError> {
    match serde_json::from_slice(source)? {
        Value::Array(items) => Ok(items),
        _ => Err(DatasetError::NotArray),
    }
}

fn entry_id(index: usize, value: &Value) -> Result<(&Map<String, Value>, String), DatasetError> {
    let obj = value.as_object().ok_or(DatasetError::NotObject { index })?;
    let id = match obj.get("id") {
        Some(Value::String(s)) => s.clone(),
        _ => return Err(DatasetError::MissingId { index }),
    };
    Ok((obj, id))
}

fn field_error(id: &str, field: &'static str, problem: impl Into<String>) -> DatasetError {
    DatasetError::Field {
        id: id.to_owned(),
        field,
        problem: problem.into(),
    }
}

fn string_field<'v>(obj: &'v Map<String, Value>, id: &str, field: &'static str) -> Result<&'v str, DatasetError> {
    match obj.get(field) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(field_error(id, field, "expected a string")),
        None => Err(field_error(id, field, "missing")),
    }
}

fn offset_field(obj: &Map<String, Value>, id: &str, field: &'static str) -> Result<usize, DatasetError> {
    let parsed = match obj.get(field) {
        Some(Value::Number(n)) => n.as_u64(),
        Some(Value::String(s)) => s.trim().parse::<u64>().ok(),
        Some(_) => None,
        None => return Err(field_error(id, field, "missing")),
    };
    parsed
        .and_then(|v| usize::try_from(v).ok())
        .ok_or_else(|| field_error(id, field, format!("not a non-negative integer: {}", obj[field])))
}

fn to_char_offset(sentence: &str, byte: usize) -> Option<usize> {
    if byte > sentence.len() || !sentence.is_char_boundary(byte) {
        return None;
    }
    Some(sentence[..byte].chars().count())
}

fn read_span(
    obj: &Map<String, Value>,
    id: &str,
    sentence: &str,
    fields: (&'static str, &'static str),
    unit: OffsetUnit,
) -> Result<Span, DatasetError> {
    let mut start = offset_field(obj, id, fields.0)?;
    let mut end = offset_field(obj, id, fields.1)?;
    if unit == OffsetUnit::Bytes {
        start = to_char_offset(sentence, start)
            .ok_or_else(|| field_error(id, fields.0, format!("byte offset {start} is not a character boundary")))?;
        end = to_char_offset(sentence, end)
            .ok_or_else(|| field_error(id, fields.1, format!("byte offset {end} is not a character boundary")))?;
    }
    let len = sentence.chars().count();
    if end > len {
        return Err(field_error(
            id,
            fields.1,
            format!("{end} is past the sentence end ({len})"),
        ));
    }
    if start >= end {
        return Err(field_error(id, fields.0, format!("{start} is not before end {end}")));
    }
    Ok(Span::new(start, end))
}

fn parse_tag(id: &str, value: &Value) -> Result<Tag, DatasetError> {
    let text = value.as_str().unwrap_or_default();
    text.parse().map_err(|_| DatasetError::UnknownTag {
        id: id.to_owned(),
        tag: if value.is_string() {
            text.to_owned()
        } else {
            value.to_string()
        },
    })
}

/// Parses and validates a dataset, keeping file order.
pub fn parse_dataset(source: &[u8], unit: OffsetUnit) -> Result<Vec<WicInstance>, DatasetError> {
    let items = entries(source)?;
    let mut seen = HashSet::with_capacity(items.len());
    let mut out = Vec::with_capacity(items.len());
    for (index, item) in items.iter().enumerate() {
        let (obj, id) = entry_id(index, item)?;
        if !seen.insert(id.clone()) {
            return Err(DatasetError::DuplicateId(id));
        }
        let sentence1 = string_field(obj, &id, "sentence1")?;
        let sentence2 = string_field(obj, &id, "sentence2")?;
        let span1 = read_span(obj, &id, sentence1, ("start1", "end1"), unit)?;
        let span2 = read_span(obj, &id, sentence2, ("start2", "end2"), unit)?;
        let gold = obj.get("tag").map(|t| parse_tag(&id, t)).transpose()?;
        out.push(WicInstance {
            id,
            sentence1: sentence1.to_owned(),
            sentence2: sentence2.to_owned(),
            span1,
            span2,
            gold,
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct InstanceJson<'a> {
    id: &'a str,
    sentence1: &'a str,
    sentence2: &'a str,
    start1: usize,
    end1: usize,
    start2: usize,
    end2: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    tag: Option<Tag>,
}

/// Serializes instances back to the dataset layout with integer
/// character offsets.
pub fn write_dataset(instances: &[WicInstance]) -> String {
    let rows: Vec<InstanceJson<'_>> = instances
        .iter()
        .map(|i| InstanceJson {
            id: &i.id,
            sentence1: &i.sentence1,
            sentence2: &i.sentence2,
            start1: i.span1.start,
            end1: i.span1.end,
            start2: i.span2.start,
            end2: i.span2.end,
            tag: i.gold,
        })
        .collect();
    serde_json::to_string_pretty(&rows).expect("dataset serializes") + "\n"
}

/// Gold tags by id, in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldFile {
    ids: Vec<String>,
    tags: HashMap<String, Tag>,
}

impl GoldFile {
    pub fn get(&self, id: &str) -> Option<Tag> {
        self.tags.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn as_map(&self) -> &HashMap<String, Tag> {
        &self.tags
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Tag)> {
        self.ids.iter().map(|id| (id.as_str(), self.tags[id]))
    }

    pub fn count(&self, tag: Tag) -> usize {
        self.tags.values().filter(|&&t| t == tag).count()
    }
}

impl FromIterator<(String, Tag)> for GoldFile {
    fn from_iter<I: IntoIterator<Item = (String, Tag)>>(iter: I) -> Self {
        let mut gold = GoldFile::default();
        for (id, tag) in iter {
            if gold.tags.insert(id.clone(), tag).is_none() {
                gold.ids.push(id);
            }
        }
        gold
    }
}

pub fn parse_gold(source: &[u8]) -> Result<GoldFile, DatasetError> {
    let items = entries(source)?;
    let mut gold = GoldFile::default();
    for (index, item) in items.iter().enumerate() {
        let (obj, id) = entry_id(index, item)?;
        let tag = match obj.get("tag") {
            Some(v) => parse_tag(&id, v)?,
            None => return Err(field_error(&id, "tag", "missing")),
        };
        if gold.tags.insert(id.clone(), tag).is_some() {
            return Err(DatasetError::DuplicateId(id));
        }
        gold.ids.push(id);
    }
    Ok(gold)
}

pub fn write_gold(gold: &GoldFile) -> String {
    #[derive(Serialize)]
    struct Row<'a> {
        id: &'a str,
        tag: Tag,
    }
    let rows: Vec<Row<'_>> = gold.iter().map(|(id, tag)| Row { id, tag }).collect();
    serde_json::to_string_pretty(&rows).expect("gold serializes") + "\n"
}

/// Sets every instance's gold tag from `gold`. The id sets must match
/// exactly; otherwise nothing is modified and both differences are listed.
pub fn attach_gold(instances: &mut [WicInstance], gold: &GoldFile) -> Result<(), DatasetError> {
    let ids: HashSet<&str> = instances.iter().map(|i| i.id.as_str()).collect();
    let missing_gold: Vec<String> = instances
        .iter()
        .filter(|i| gold.get(&i.id).is_none())
        .map(|i| i.id.clone())
        .collect();
    let unknown: Vec<String> = gold
        .iter()
        .filter(|(id, _)| !ids.contains(id))
        .map(|(id, _)| id.to_owned())
        .collect();
    if !missing_gold.is_empty() || !unknown.is_empty() {
        return Err(DatasetError::Join { missing_gold, unknown });
    }
    for inst in instances {
        inst.gold = gold.get(&inst.id);
    }
    Ok(())
}

/// Gold tags carried by the instances themselves.
pub fn gold_from_instances(instances: &[WicInstance]) -> Result<GoldFile, DatasetError> {
    let missing: Vec<String> = instances
        .iter()
        .filter(|i| i.gold.is_none())
        .map(|i| i.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(DatasetError::Join {
            missing_gold: missing,
            unknown: Vec::new(),
        });
    }
    Ok(instances
        .iter()
        .filter_map(|i| i.gold.map(|g| (i.id.clone(), g)))
        .collect())
}

#[derive(Serialize, Deserialize)]
struct PredictionJson {
    id: String,
    tag: Tag,
    similarity: Option<f64>,
    degenerate: bool,
}

/// Predictions as a JSON array of `{id, tag, similarity, degenerate}`.
pub fn write_predictions(preds: &[Prediction]) -> String {
    let rows: Vec<PredictionJson> = preds
        .iter()
        .map(|p| PredictionJson {
            id: p.id.clone(),
            tag: p.label,
            similarity: p.similarity,
            degenerate: p.degenerate,
        })
        .collect();
    serde_json::to_string_pretty(&rows).expect("predictions serialize") + "\n"
}

pub fn parse_predictions(source: &[u8]) -> Result<Vec<Prediction>, DatasetError> {
    let rows: Vec<PredictionJson> = serde_json::from_slice(source)?;
    let mut seen = BTreeSet::new();
    rows.into_iter()
        .map(|r| {
            if !seen.insert(r.id.clone()) {
                return Err(DatasetError::DuplicateId(r.id));
            }
            Ok(Prediction {
                id: r.id,
                similarity: r.similarity,
                label: r.tag,
                degenerate: r.degenerate,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE: &str = r#"[{"id":"x.1","lemma":"cd","pos":"NOUN","sentence1":"ab cd","start1":"3","end1":"5","sentence2":"cd ef","start2":"0","end2":"2"}]"#;

    #[test]
    fn parses_string_offsets() {
        let d = parse_dataset(ONE.as_bytes(), OffsetUnit::Chars).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].span1, Span::new(3, 5));
        assert_eq!(d[0].span2, Span::new(0, 2));
        assert_eq!(d[0].gold, None);
    }

    #[test]
    fn out_of_bounds_names_id_and_field() {
        let bad = ONE.replace(r#""end1":"5""#, r#""end1":"99""#);
        let err = parse_dataset(bad.as_bytes(), OffsetUnit::Chars).unwrap_err();
        assert!(
            matches!(&err, DatasetError::Field { id, field: "end1", .. } if id == "x.1"),
            "{err}"
        );
        assert!(err.to_string().contains("x.1") && err.to_string().contains("end1"));
    }

    #[test]
    fn field_errors() {
        let missing = ONE.replace(r#""sentence2":"cd ef","#, "");
        assert!(matches!(
            parse_dataset(missing.as_bytes(), OffsetUnit::Chars),
            Err(DatasetError::Field { field: "sentence2", .. })
        ));
        let non_int = ONE.replace(r#""start2":"0""#, r#""start2":"zero""#);
        assert!(matches!(
            parse_dataset(non_int.as_bytes(), OffsetUnit::Chars),
            Err(DatasetError::Field { field: "start2", .. })
        ));
        let neg = ONE.replace(r#""start2":"0""#, r#""start2":-1"#);
        assert!(matches!(
            parse_dataset(neg.as_bytes(), OffsetUnit::Chars),
            Err(DatasetError::Field { field: "start2", .. })
        ));
        let empty = ONE.replace(r#""start1":"3""#, r#""start1":5"#);
        assert!(matches!(
            parse_dataset(empty.as_bytes(), OffsetUnit::Chars),
            Err(DatasetError::Field { field: "start1", .. })
        ));
        assert!(matches!(
            parse_dataset(b"{}", OffsetUnit::Chars),
            Err(DatasetError::NotArray)
        ));
        assert!(matches!(
            parse_dataset(b"[{}]", OffsetUnit::Chars),
            Err(DatasetError::MissingId { index: 0 })
        ));
        let dup = format!("[{0},{0}]", &ONE[1..ONE.len() - 1]);
        assert!(matches!(
            parse_dataset(dup.as_bytes(), OffsetUnit::Chars),
            Err(DatasetError::DuplicateId(_))
        ));
    }

    #[test]
    fn byte_offsets_convert_to_chars() {
        // "ذهب الولد": the second word starts at char 4, byte 7
        let src =
            r#"[{"id":"a","sentence1":"ذهب الولد","start1":7,"end1":17,"sentence2":"الولد","start2":0,"end2":10}]"#;
        let d = parse_dataset(src.as_bytes(), OffsetUnit::Bytes).unwrap();
        assert_eq!(d[0].span1, Span::new(4, 9));
        assert_eq!(d[0].span2, Span::new(0, 5));
        let mid = src.replace(r#""start1":7"#, r#""start1":8"#);
        assert!(parse_dataset(mid.as_bytes(), OffsetUnit::Bytes).is_err());
    }

    #[test]
    fn gold_parsing() {
        let g = parse_gold(br#"[{"id":"a","tag":"T"},{"id":"b","tag":"FALSE"}]"#).unwrap();
        assert_eq!(g.get("a"), Some(Tag::True));
        assert_eq!(g.get("b"), Some(Tag::False));
        let g = parse_gold(br#"[{"id":"a","tag":"TRUE"}]"#).unwrap();
        assert_eq!(g.get("a"), Some(Tag::True));
        assert!(matches!(
            parse_gold(br#"[{"id":"a","tag":"T"},{"id":"a","tag":"F"}]"#),
            Err(DatasetError::DuplicateId(id)) if id == "a"
        ));
        assert!(matches!(
            parse_gold(br#"[{"id":"a","tag":"yes"}]"#),
            Err(DatasetError::UnknownTag { .. })
        ));
    }

    #[test]
    fn join_lists_both_sides() {
        let mut d = parse_dataset(ONE.as_bytes(), OffsetUnit::Chars).unwrap();
        let g = parse_gold(br#"[{"id":"other","tag":"T"}]"#).unwrap();
        let err = attach_gold(&mut d, &g).unwrap_err();
        let DatasetError::Join { missing_gold, unknown } = err else {
            panic!()
        };
        assert_eq!(missing_gold, vec!["x.1"]);
        assert_eq!(unknown, vec!["other"]);
        assert_eq!(d[0].gold, None);

        let g = parse_gold(br#"[{"id":"x.1","tag":"F"}]"#).unwrap();
        attach_gold(&mut d, &g).unwrap();
        assert_eq!(d[0].gold, Some(Tag::False));
    }

    #[test]
    fn round_trip() {
        let d = parse_dataset(ONE.as_bytes(), OffsetUnit::Chars).unwrap();
        let again = parse_dataset(write_dataset(&d).as_bytes(), OffsetUnit::Chars).unwrap();
        assert_eq!(d, again);

        let preds = vec![
            Prediction {
                id: "a".into(),
                similarity: Some(0.25),
                label: Tag::False,
                degenerate: false,
            },
            Prediction {
                id: "b".into(),
                similarity: None,
                label: Tag::False,
                degenerate: true,
            },
        ];
        assert_eq!(parse_predictions(write_predictions(&preds).as_bytes()).unwrap(), preds);
    }
}
