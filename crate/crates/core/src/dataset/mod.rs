//! Known-style factual prompts: loading, answer judging, filtering and WER.

mod filter;
mod judge;
mod wer;

use std::ops::Range;
use std::path::Path;

use serde_json::{Map, Value};
use thiserror::Error;

pub use filter::{filter_dataset, record_prompt, FilteredDataset, FilteredRecord, DEFAULT_MAX_NEW};
pub use judge::{judge, judge_with, normalize_words, JudgeRules, Judgment, Verdict};
pub use wer::{wer, word_edit_distance, Wer};

use crate::model::ModelError;
use crate::tracer::TraceError;

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("dataset must be a JSON array of objects")]
    NotAnArray,
    #[error("record {index}: {reason}")]
    BadRecord { index: usize, reason: String },
    #[error("record {id}: {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("reference transcript has no words")]
    EmptyReference,
    #[error("invalid field mapping {0:?}")]
    FieldMap(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("io: {0}")]
    Io(String),
}

/// JSON field names for the core record fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldMap {
    pub id: String,
    pub prompt: String,
    pub subject: String,
    pub attribute: String,
}

impl Default for FieldMap {
    fn default() -> Self {
        Self {
            id: "known_id".into(),
            prompt: "prompt".into(),
            subject: "subject".into(),
            attribute: "attribute".into(),
        }
    }
}

impl FieldMap {
    /// Applies overrides such as `attribute=target_true,id=case_id`.
    pub fn with_overrides(mut self, spec: &str) -> Result<Self, DatasetError> {
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| DatasetError::FieldMap(part.into()))?;
            let slot = match k.trim() {
                "id" => &mut self.id,
                "prompt" => &mut self.prompt,
                "subject" => &mut self.subject,
                "attribute" => &mut self.attribute,
                _ => return Err(DatasetError::FieldMap(part.into())),
            };
            *slot = v.trim().to_string();
        }
        Ok(self)
    }
}

/// One factual prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownRecord {
    pub id: String,
    pub prompt: String,
    pub subject: String,
    pub attribute: String,
    /// Byte range of the first occurrence of `subject` in `prompt`.
    pub subject_span: Range<usize>,
    /// Every other field, in input order.
    pub extra: Map<String, Value>,
}

impl KnownRecord {
    pub fn new(
        id: impl Into<String>,
        prompt: impl Into<String>,
        subject: impl Into<String>,
        attribute: impl Into<String>,
    ) -> Option<Self> {
        let (prompt, subject) = (prompt.into(), subject.into());
        let start = locate_subject(&prompt, &subject)?;
        Some(Self {
            id: id.into(),
            subject_span: start..start + subject.trim().len(),
            prompt,
            subject,
            attribute: attribute.into(),
            extra: Map::new(),
        })
    }

    /// The record as a JSON object using `fields` for the core names.
    pub fn to_json(&self, fields: &FieldMap) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert(fields.id.clone(), Value::String(self.id.clone()));
        m.insert(fields.prompt.clone(), Value::String(self.prompt.clone()));
        m.insert(fields.subject.clone(), Value::String(self.subject.clone()));
        m.insert(fields.attribute.clone(), Value::String(self.attribute.clone()));
        for (k, v) in &self.extra {
            m.insert(k.clone(), v.clone());
        }
        m
    }
}

fn locate_subject(prompt: &str, subject: &str) -> Option<usize> {
    let subject = subject.trim();
    if subject.is_empty() {
        return None;
    }
    prompt.find(subject)
}

fn string_field(obj: &Map<String, Value>, key: &str, index: usize) -> Result<String, DatasetError> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(other) => {
            Err(DatasetError::BadRecord { index, reason: format!("field {key:?} is not a string: {other}") })
        }
        None => Err(DatasetError::BadRecord { index, reason: format!("missing field {key:?}") }),
    }
}

/// Parses a JSON array of records. Records whose subject does not occur in
/// the prompt are skipped with a warning.
pub fn parse_known(text: &str, fields: &FieldMap) -> Result<Vec<KnownRecord>, DatasetError> {
    let value: Value = serde_json::from_str(text).map_err(|e| DatasetError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let Value::Array(items) = value else {
        return Err(DatasetError::NotAnArray);
    };
    let mut out = Vec::with_capacity(items.len());
    for (index, item) in items.into_iter().enumerate() {
        let Value::Object(mut obj) = item else {
            return Err(DatasetError::BadRecord { index, reason: "not an object".into() });
        };
        let prompt = string_field(&obj, &fields.prompt, index)?;
        let subject = string_field(&obj, &fields.subject, index)?;
        let attribute = string_field(&obj, &fields.attribute, index)?;
        let id = match obj.get(&fields.id) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            Some(other) => {
                return Err(DatasetError::BadRecord { index, reason: format!("id is not a string or number: {other}") })
            }
            None => index.to_string(),
        };
        for k in [&fields.id, &fields.prompt, &fields.subject, &fields.attribute] {
            obj.shift_remove(k);
        }
        match KnownRecord::new(id, prompt, subject, attribute) {
            Some(mut rec) => {
                rec.extra = obj;
                out.push(rec);
            }
            None => log::warn!("record {index}: subject not found in prompt, skipped"),
        }
    }
    Ok(out)
}

pub fn load_known(path: impl AsRef<Path>, fields: &FieldMap) -> Result<Vec<KnownRecord>, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))?;
    parse_known(&text, fields)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_and_locates_subject() {
        let text = r#"[{"known_id": 7, "prompt": "The capital of Italy is", "subject": "Italy",
                        "attribute": "Rome", "relation_id": "P36"}]"#;
        let recs = parse_known(text, &FieldMap::default()).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!(r.id, "7");
        assert_eq!(&r.prompt[r.subject_span.clone()], "Italy");
        assert_eq!(r.extra.get("relation_id"), Some(&Value::String("P36".into())));
        assert_eq!(r.extra.len(), 1);
    }

    #[test]
    fn skips_missing_subject_and_accepts_empty() {
        let text = r#"[{"prompt": "The capital of Italy is", "subject": "France", "attribute": "Paris"},
                       {"prompt": "Paris is in", "subject": "Paris", "attribute": "France"}]"#;
        let recs = parse_known(text, &FieldMap::default()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].id, "1");
        assert!(parse_known("[]", &FieldMap::default()).unwrap().is_empty());
    }

    #[test]
    fn parse_errors_carry_position() {
        match parse_known("[\n{\"prompt\": }", &FieldMap::default()) {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert_eq!(parse_known("{}", &FieldMap::default()), Err(DatasetError::NotAnArray));
        assert!(matches!(
            parse_known(r#"[{"prompt": "a"}]"#, &FieldMap::default()),
            Err(DatasetError::BadRecord { index: 0, .. })
        ));
    }

    #[test]
    fn field_overrides() {
        let f = FieldMap::default().with_overrides("attribute=target, id=case_id").unwrap();
        assert_eq!((f.attribute.as_str(), f.id.as_str()), ("target", "case_id"));
        assert!(FieldMap::default().with_overrides("colour=red").is_err());
        let text = r#"[{"case_id": "x", "prompt": "Rome is in", "subject": "Rome", "target": "Italy"}]"#;
        let recs = parse_known(text, &f).unwrap();
        assert_eq!(recs[0].attribute, "Italy");
        assert_eq!(recs[0].to_json(&f).get("target"), Some(&Value::String("Italy".into())));
    }
}
