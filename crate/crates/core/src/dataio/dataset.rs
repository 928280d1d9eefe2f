use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievedContext {
    pub text: String,
    /// Explicit gold/noisy flag; when absent the label is inferred from the text.
    #[serde(default)]
    pub gold: Option<bool>,
}

/// One line of a dataset file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QAExample {
    pub id: String,
    pub question: String,
    pub answers: Vec<String>,
    #[serde(default)]
    pub context: Option<RetrievedContext>,
    #[serde(default)]
    pub swapped_context: Option<String>,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub meta: Map<String, Value>,
}

impl QAExample {
    pub fn meta_str(&self, key: &str) -> Option<&str> {
        self.meta.get(key).and_then(Value::as_str)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.question.trim().is_empty() {
            return Err("field `question` is empty".into());
        }
        if self.answers.is_empty() {
            return Err("field `answers` is empty".into());
        }
        if self.answers.iter().any(|a| a.trim().is_empty()) {
            return Err("field `answers` contains an empty answer".into());
        }
        if let Some(ctx) = &self.context {
            if ctx.text.trim().is_empty() {
                return Err("field `context.text` is empty".into());
            }
        }
        Ok(())
    }
}

/// Few-shot exemplar rendered before the test question.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShot {
    pub question: String,
    pub answer: String,
}

#[derive(Deserialize)]
struct RawExample {
    #[serde(default)]
    id: Option<String>,
    question: String,
    answers: Vec<String>,
    #[serde(default)]
    context: Option<RetrievedContext>,
    #[serde(default)]
    swapped_context: Option<String>,
    #[serde(default)]
    meta: Option<Map<String, Value>>,
}

/// Parses JSON Lines text. Blank lines are skipped; a missing `id` becomes
/// `line-<n>` with the 1-based line number.
pub fn parse_dataset(text: &str) -> Result<Vec<QAExample>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(line).map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        let raw: RawExample =
            serde_json::from_value(value).map_err(|e| Error::Validation(format!("line {line_no}: {e}")))?;
        let example = QAExample {
            id: raw.id.unwrap_or_else(|| format!("line-{line_no}")),
            question: raw.question,
            answers: raw.answers,
            context: raw.context,
            swapped_context: raw.swapped_context,
            meta: raw.meta.unwrap_or_default(),
        };
        example.validate().map_err(|e| Error::Validation(format!("line {line_no}: {e}")))?;
        if !seen.insert(example.id.clone()) {
            return Err(Error::Validation(format!("line {line_no}: duplicate id {:?}", example.id)));
        }
        out.push(example);
    }
    Ok(out)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<QAExample>> {
    parse_dataset(&std::fs::read_to_string(path)?)
}

pub fn to_jsonl(examples: &[QAExample]) -> Result<String> {
    let mut out = String::new();
    for e in examples {
        out.push_str(&serde_json::to_string(e)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_dataset(path: impl AsRef<Path>, examples: &[QAExample]) -> Result<()> {
    std::fs::write(path, to_jsonl(examples)?)?;
    Ok(())
}

/// Reads few-shot exemplars from a dataset file, using each line's first answer.
pub fn load_fewshots(path: impl AsRef<Path>) -> Result<Vec<FewShot>> {
    Ok(load_dataset(path)?
        .into_iter()
        .map(|e| FewShot { question: e.question, answer: e.answers[0].clone() })
        .collect())
}
