use rayon::prelude::*;
use serde_json::{Map, Value};

use super::{judge_with, DatasetError, FieldMap, JudgeRules, Judgment, KnownRecord};
use crate::model::{words_covering, Lexicon, Modality, Model, TokenSequence};
use crate::tracer::TracePrompt;

/// Tokens generated per record when filtering.
pub const DEFAULT_MAX_NEW: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct FilteredRecord {
    pub record: KnownRecord,
    pub judgment: Judgment,
}

impl FilteredRecord {
    pub fn to_json(&self, fields: &FieldMap) -> Map<String, Value> {
        let mut m = self.record.to_json(fields);
        m.insert("judgment".into(), Value::String(self.judgment.verdict.as_str().into()));
        m.insert("generated".into(), Value::String(self.judgment.generated.clone()));
        m
    }
}

/// Records the model answers correctly in one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredDataset {
    pub modality: Modality,
    pub records: Vec<FilteredRecord>,
    pub n_input: usize,
}

impl FilteredDataset {
    pub fn retention(&self) -> f64 {
        if self.n_input == 0 {
            return 0.0;
        }
        self.records.len() as f64 / self.n_input as f64
    }

    pub fn to_json(&self, fields: &FieldMap) -> Value {
        Value::Array(self.records.iter().map(|r| Value::Object(r.to_json(fields))).collect())
    }
}

fn bad(record: &KnownRecord, reason: impl Into<String>) -> DatasetError {
    DatasetError::InvalidRecord { id: record.id.clone(), reason: reason.into() }
}

fn int_list(record: &KnownRecord, key: &str) -> Result<Option<Vec<usize>>, DatasetError> {
    let Some(v) = record.extra.get(key) else {
        return Ok(None);
    };
    let arr = v.as_array().ok_or_else(|| bad(record, format!("{key} is not an array")))?;
    arr.iter()
        .map(|x| x.as_u64().map(|n| n as usize).ok_or_else(|| bad(record, format!("{key} holds a non-integer {x}"))))
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

/// Builds the trace prompt for `record`.
///
/// Text prompts read `[T] w0 w1 ...`. Speech prompts read `[S] units... [T]`
/// and take their units from the `speech_tokens` and `text_token_map` extra
/// fields when both are present, otherwise from the lexicon's synthetic
/// speech expansion. The target is the attribute's text tokens.
pub fn record_prompt(
    record: &KnownRecord,
    lexicon: &Lexicon,
    model: &Model,
    modality: Modality,
) -> Result<TracePrompt, DatasetError> {
    let vocab = model.vocab();
    let target = lexicon.encode(&record.attribute);
    if target.is_empty() {
        return Err(bad(record, "attribute has no words"));
    }
    let text = lexicon.text_prompt(&record.prompt, vocab);
    let subject_words = words_covering(&text.word_spans, &record.subject_span);
    if subject_words.is_empty() {
        return Err(bad(record, "subject covers no words"));
    }
    let prompt = match modality {
        Modality::Text => {
            let positions = subject_words.start + 1..subject_words.end + 1;
            TracePrompt::text(record.id.clone(), text.seq, positions, target)
        }
        Modality::Speech => {
            let given = (int_list(record, "speech_tokens")?, int_list(record, "text_token_map")?);
            let (seq, map) = match given {
                (Some(units), Some(words)) => {
                    if units.len() != words.len() {
                        return Err(bad(record, "speech_tokens and text_token_map differ in length"));
                    }
                    if let Some(u) = units.iter().find(|u| !vocab.speech_tokens.contains(u)) {
                        return Err(bad(record, format!("speech token {u} outside the speech range")));
                    }
                    let seq = TokenSequence::from_segments(&[(Modality::Speech, &units), (Modality::Text, &[])], vocab);
                    let mut map = vec![None];
                    map.extend(words.into_iter().map(Some));
                    map.push(None);
                    (seq, map)
                }
                (None, None) => {
                    let sp = lexicon.speech_prompt(&record.prompt, vocab);
                    (sp.seq, sp.text_token_map)
                }
                _ => return Err(bad(record, "speech_tokens and text_token_map must be given together")),
            };
            TracePrompt::speech(record.id.clone(), seq, subject_words, target, map)
        }
    };
    prompt.validate(model)?;
    Ok(prompt)
}

/// Greedily completes every record and keeps those `rules` accept.
pub fn filter_dataset(
    model: &Model,
    lexicon: &Lexicon,
    records: &[KnownRecord],
    modality: Modality,
    max_new: usize,
    rules: &JudgeRules,
) -> Result<FilteredDataset, DatasetError> {
    if max_new == 0 {
        return Err(crate::model::ModelError::NothingToGenerate.into());
    }
    let judged: Vec<Result<FilteredRecord, DatasetError>> = records
        .par_iter()
        .map(|record| {
            let prompt = record_prompt(record, lexicon, model, modality)?;
            let generation = model.greedy_generate(&prompt.clean_tokens, max_new)?;
            let text = lexicon.decode(&generation.tokens);
            Ok(FilteredRecord { record: record.clone(), judgment: judge_with(&text, &record.attribute, rules) })
        })
        .collect();
    let mut kept = Vec::new();
    for r in judged {
        let r = r?;
        if rules.keeps(r.judgment.verdict) {
            kept.push(r);
        }
    }
    Ok(FilteredDataset { modality, records: kept, n_input: records.len() })
}
