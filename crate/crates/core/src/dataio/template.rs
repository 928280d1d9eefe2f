use std::path::Path;

use super::{FewShot, QAExample};
use crate::error::{invalid, Error, Result};

pub const FEWSHOTS_SLOT: &str = "<few-shots>";
pub const CONTEXT_SLOT: &str = "<context>";
pub const QUESTION_SLOT: &str = "<question>";
pub const ANSWER_SLOT: &str = "<answer>";

/// Closed- and open-book prompt layouts.
///
/// A prompt is `header`, a blank line, the few-shot exemplars separated by
/// blank lines (omitted when there are none), a blank line, then the body.
/// Exemplars never carry a context, in either mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    pub header: String,
    pub fewshot_block: String,
    pub body_closed: String,
    pub body_open: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            header: "Answer the following questions:".into(),
            fewshot_block: "Question: <question>\nAnswer: <answer>".into(),
            body_closed: "Question: <question>\nAnswer:".into(),
            body_open: "Context: <context>\nQuestion: <question>\nAnswer:".into(),
        }
    }
}

fn split_template(text: &str, name: &str) -> Result<(String, String)> {
    let (head, body) = text
        .split_once(FEWSHOTS_SLOT)
        .ok_or_else(|| Error::Validation(format!("{name} template lacks the {FEWSHOTS_SLOT} placeholder")))?;
    let body = body.trim();
    if !body.contains(QUESTION_SLOT) {
        return Err(Error::Validation(format!("{name} template lacks the {QUESTION_SLOT} placeholder")));
    }
    Ok((head.trim_end().to_string(), body.to_string()))
}

impl PromptTemplate {
    /// Builds a template from the text of closed- and open-book template
    /// files using `<few-shots>`, `<context>` and `<question>` placeholders.
    pub fn from_texts(closed: &str, open: &str) -> Result<Self> {
        let (header, body_closed) = split_template(closed, "closed-book")?;
        let (open_header, body_open) = split_template(open, "open-book")?;
        if header != open_header {
            return Err(Error::Validation("closed- and open-book templates have different headers".into()));
        }
        if !body_open.contains(CONTEXT_SLOT) {
            return Err(Error::Validation(format!("open-book template lacks the {CONTEXT_SLOT} placeholder")));
        }
        Ok(Self { header, body_closed, body_open, ..Self::default() })
    }

    pub fn from_files(closed: impl AsRef<Path>, open: impl AsRef<Path>) -> Result<Self> {
        Self::from_texts(&std::fs::read_to_string(closed)?, &std::fs::read_to_string(open)?)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PromptMode {
    Closed,
    /// Uses the example's own retrieved context.
    Open,
    /// Open-book layout with the given passage in place of the context.
    Adversarial(String),
}

/// Substitutes placeholders in one pass, so substituted values are never
/// re-scanned for placeholders.
fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    loop {
        let next = slots
            .iter()
            .filter_map(|(slot, value)| rest.find(slot).map(|at| (at, *slot, *value)))
            .min_by_key(|(at, _, _)| *at);
        match next {
            Some((at, slot, value)) => {
                out.push_str(&rest[..at]);
                out.push_str(value);
                rest = &rest[at + slot.len()..];
            }
            None => {
                out.push_str(rest);
                return out;
            }
        }
    }
}

pub fn render_prompt(
    template: &PromptTemplate,
    fewshots: &[FewShot],
    example: &QAExample,
    mode: &PromptMode,
) -> Result<String> {
    let question = example.question.trim();
    let body = match mode {
        PromptMode::Closed => fill(&template.body_closed, &[(QUESTION_SLOT, question)]),
        PromptMode::Open | PromptMode::Adversarial(_) => {
            let context = match mode {
                PromptMode::Adversarial(text) => text.as_str(),
                _ => example.context.as_ref().map(|c| c.text.as_str()).unwrap_or(""),
            };
            let context = context.trim();
            if context.is_empty() {
                return Err(invalid(format!("example {} has no context to render an open-book prompt", example.id)));
            }
            fill(&template.body_open, &[(CONTEXT_SLOT, context), (QUESTION_SLOT, question)])
        }
    };

    let mut out = template.header.clone();
    out.push_str("\n\n");
    for shot in fewshots {
        out.push_str(&fill(
            &template.fewshot_block,
            &[(QUESTION_SLOT, shot.question.trim()), (ANSWER_SLOT, shot.answer.trim())],
        ));
        out.push_str("\n\n");
    }
    out.push_str(&body);
    Ok(out)
}
