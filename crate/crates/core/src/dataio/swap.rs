use serde_json::Value;

use super::{QAExample, RetrievedContext};
use crate::error::{invalid, Error, Result};
use crate::evaluation::normalize_answer;

/// Metadata key holding the substituted entity of a swapped context.
pub const SWAP_ANSWER_KEY: &str = "swap_answer";

fn is_word_char(c: Option<char>) -> bool {
    c.is_some_and(char::is_alphanumeric)
}

/// Byte ranges of whole-word, ASCII-case-insensitive occurrences of `needle`.
fn find_spans(haystack: &str, needle: &str) -> Vec<(usize, usize)> {
    let (h, n) = (haystack.as_bytes(), needle.as_bytes());
    let mut spans = Vec::new();
    let mut i = 0;
    while i + n.len() <= h.len() {
        if haystack.is_char_boundary(i) && h[i..i + n.len()].eq_ignore_ascii_case(n) {
            let end = i + n.len();
            let before = haystack[..i].chars().next_back();
            let after = haystack[end..].chars().next();
            if !is_word_char(before) && !is_word_char(after) {
                spans.push((i, end));
                i = end;
                continue;
            }
        }
        i += 1;
    }
    spans
}

/// Replaces every whole-word occurrence of the gold answer span in `context`
/// with `replacement`.
pub fn swap_answer_entity(context: &str, gold_answer: &str, replacement: &str) -> Result<String> {
    let gold = gold_answer.trim();
    let replacement = replacement.trim();
    if gold.is_empty() || replacement.is_empty() {
        return Err(invalid("gold answer and replacement must be non-empty"));
    }
    let norm_gold = normalize_answer(gold);
    if normalize_answer(replacement) == norm_gold {
        return Err(invalid(format!("replacement {replacement:?} matches the gold answer")));
    }
    let spans = find_spans(context, gold);
    if spans.is_empty() {
        return Err(Error::NotApplicable(format!("answer {gold:?} does not occur in the context")));
    }
    let mut out = String::with_capacity(context.len());
    let mut last = 0;
    for (start, end) in spans {
        out.push_str(&context[last..start]);
        out.push_str(replacement);
        last = end;
    }
    out.push_str(&context[last..]);

    let padded = format!(" {} ", normalize_answer(&out));
    if padded.contains(&format!(" {norm_gold} ")) {
        return Err(Error::NotApplicable(format!("answer {gold:?} still occurs in the context after substitution")));
    }
    Ok(out)
}

/// Knowledge-conflict view of a dataset: each example carrying a swapped
/// context becomes one whose context is the swapped passage and whose answer
/// is the substituted entity. Examples without a swap are dropped.
pub fn knowledge_conflict_view(examples: &[QAExample]) -> Result<Vec<QAExample>> {
    let mut out = Vec::new();
    for e in examples {
        let Some(swapped) = &e.swapped_context else { continue };
        let answer = e.meta_str(SWAP_ANSWER_KEY).ok_or_else(|| {
            Error::Validation(format!("example {} has a swapped context but no {SWAP_ANSWER_KEY} entry", e.id))
        })?;
        let mut meta = e.meta.clone();
        meta.insert("original_answers".into(), Value::from(e.answers.clone()));
        out.push(QAExample {
            id: e.id.clone(),
            question: e.question.clone(),
            answers: vec![answer.to_string()],
            context: Some(RetrievedContext { text: swapped.clone(), gold: Some(true) }),
            swapped_context: None,
            meta,
        });
    }
    Ok(out)
}
