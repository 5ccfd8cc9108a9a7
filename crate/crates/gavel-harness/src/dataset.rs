//! JSONL preference-dataset loaders.
//!
//! Two record formats share one schema: `pairwise_jsonl` for benchmark
//! pairs and `rationales_jsonl` for pairs re-annotated with a human
//! rationale (the rationale becomes mandatory). Loads are atomic: any bad
//! line fails the whole load with its line number.
//!
//! Importing public corpora is a field-renaming exercise: map the source's
//! prompt/chosen/rejected columns onto `prompt`, `answer_a`, `answer_b`,
//! set `preferred` to the side the chosen answer landed on, and carry the
//! category as `slice`.

use std::path::Path;

use gavel_core::{Choice, Slice};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    PairwiseJsonl,
    RationalesJsonl,
}

/// One preference pair: a prompt, two candidate answers, and the gold label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slice: Option<Slice>,
    pub prompt: String,
    pub answer_a: String,
    pub answer_b: String,
    pub preferred: Choice,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub human_rationale: Option<String>,
}

impl PreferenceRecord {
    pub fn preferred_answer(&self) -> &str {
        match self.preferred {
            Choice::A => &self.answer_a,
            Choice::B => &self.answer_b,
        }
    }

    pub fn rejected_answer(&self) -> &str {
        match self.preferred {
            Choice::A => &self.answer_b,
            Choice::B => &self.answer_a,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("duplicate id {id:?} (line {line})")]
    DuplicateId { id: String, line: usize },
    #[error("line {line}: missing field {field:?}")]
    MissingField { field: String, line: usize },
    #[error("io: {0}")]
    Io(String),
}

pub fn load_dataset(
    path: impl AsRef<Path>,
    format: DatasetFormat,
) -> Result<Vec<PreferenceRecord>, DatasetError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| DatasetError::Io(format!("{}: {e}", path.as_ref().display())))?;
    load_dataset_str(&text, format)
}

pub fn load_dataset_str(
    text: &str,
    format: DatasetFormat,
) -> Result<Vec<PreferenceRecord>, DatasetError> {
    let mut records = Vec::new();
    let mut seen_ids = std::collections::HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_record(line, line_no, format)?;
        if !seen_ids.insert(record.id.clone()) {
            return Err(DatasetError::DuplicateId {
                id: record.id,
                line: line_no,
            });
        }
        records.push(record);
    }
    Ok(records)
}

fn parse_record(
    line: &str,
    line_no: usize,
    format: DatasetFormat,
) -> Result<PreferenceRecord, DatasetError> {
    let malformed = |reason: String| DatasetError::MalformedLine {
        line: line_no,
        reason,
    };
    let missing = |field: &str| DatasetError::MissingField {
        field: field.to_string(),
        line: line_no,
    };

    let value: Value = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    let Value::Object(fields) = value else {
        return Err(malformed("record is not a JSON object".to_string()));
    };

    let string_field = |name: &str| -> Result<String, DatasetError> {
        match fields.get(name) {
            None | Some(Value::Null) => Err(missing(name)),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(malformed(format!("field {name:?} must be a string"))),
        }
    };

    let id = string_field("id")?;
    let prompt = string_field("prompt")?;
    let answer_a = string_field("answer_a")?;
    let answer_b = string_field("answer_b")?;
    let preferred = match fields.get("preferred") {
        None | Some(Value::Null) => return Err(missing("preferred")),
        Some(Value::String(s)) if s == "A" => Choice::A,
        Some(Value::String(s)) if s == "B" => Choice::B,
        Some(_) => {
            return Err(malformed(
                "field \"preferred\" must be \"A\" or \"B\"".into(),
            ))
        }
    };
    let slice = match fields.get("slice") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.parse::<Slice>().map_err(malformed)?),
        Some(_) => return Err(malformed("field \"slice\" must be a string".into())),
    };
    let human_rationale = match fields.get("human_rationale") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            return Err(malformed(
                "field \"human_rationale\" must be a string".into(),
            ))
        }
    };
    if format == DatasetFormat::RationalesJsonl && human_rationale.is_none() {
        return Err(missing("human_rationale"));
    }

    Ok(PreferenceRecord {
        id,
        slice,
        prompt,
        answer_a,
        answer_b,
        preferred,
        human_rationale,
    })
}
