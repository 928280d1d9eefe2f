//! Deterministic toy language model with controllable knowledge.
//!
//! The model reads a rendered QA prompt, finds the final
//! `Question: … Answer:` block and the optional `Context: …` line right before
//! it, and predicts the next token of one *intended* answer:
//!
//! * no context: the believed answer, with confidence `κ`;
//! * a context that asserts an answer: that answer, with confidence `ρ`;
//! * a context that asserts nothing (or one the world does not know):
//!   a uniform distribution.
//!
//! The distribution puts mass `p` on the intended token and spreads `1 − p`
//! uniformly over the rest, then adds `ε` to every entry and renormalizes.
//! Once the intended answer is exhausted, the intended token is end-of-sequence.
//! Tokenization is whitespace splitting over a closed vocabulary.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LogitBackend, TokenId, TokenSequence, Vocabulary};
use crate::error::{invalid, Error, Result};
use crate::numerics::LogitVector;

pub const QUESTION_MARKER: &str = "Question:";
pub const ANSWER_MARKER: &str = "Answer:";
pub const CONTEXT_MARKER: &str = "Context:";
pub const DEFAULT_EOS: &str = "<eos>";
pub const DEFAULT_SMOOTHING: f64 = 1e-6;
pub const MODEL_NAME: &str = "toy-world";

fn default_eos() -> String {
    DEFAULT_EOS.to_string()
}

fn default_smoothing() -> f64 {
    DEFAULT_SMOOTHING
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyQuestion {
    pub id: String,
    pub text: String,
    pub gold_answer: String,
}

/// What the model believes without context, and how strongly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyBelief {
    pub answer: String,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyContext {
    pub id: String,
    pub text: String,
    pub asserted_answer: Option<String>,
    pub relevance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyWorldConfig {
    /// Token texts; the position is the token id.
    pub vocabulary: Vec<String>,
    #[serde(default = "default_eos")]
    pub eos_token: String,
    pub questions: Vec<ToyQuestion>,
    /// Keyed by question id.
    #[serde(default)]
    pub knowledge: BTreeMap<String, ToyBelief>,
    #[serde(default)]
    pub contexts: Vec<ToyContext>,
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
}

impl ToyWorldConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Intent {
    answer: Vec<TokenId>,
    confidence: f64,
}

/// In-process [`LogitBackend`] realizing a [`ToyWorldConfig`].
#[derive(Clone, Debug)]
pub struct ToyBackend {
    vocab: Vocabulary,
    word_ids: HashMap<String, TokenId>,
    question_marker: TokenId,
    answer_marker: TokenId,
    context_marker: TokenId,
    /// Question token sequence -> belief (absent when the world holds none).
    beliefs: HashMap<Vec<TokenId>, Option<Intent>>,
    /// Context token sequence -> asserted answer (absent when it asserts nothing).
    contexts: HashMap<Vec<TokenId>, Option<Intent>>,
    smoothing: f64,
}

impl ToyBackend {
    pub fn new(config: &ToyWorldConfig) -> Result<Self> {
        let size = config.vocabulary.len();
        if size < 2 {
            return Err(Error::Validation("toy vocabulary needs at least two tokens".into()));
        }
        if !(config.smoothing > 0.0 && config.smoothing.is_finite()) {
            return Err(Error::Validation(format!("smoothing must be positive, got {}", config.smoothing)));
        }
        let mut word_ids = HashMap::with_capacity(size);
        for (i, word) in config.vocabulary.iter().enumerate() {
            if word.is_empty() || word.chars().any(char::is_whitespace) {
                return Err(Error::Validation(format!("vocabulary entry {i} is not a single word: {word:?}")));
            }
            if word_ids.insert(word.clone(), i as TokenId).is_some() {
                return Err(Error::Validation(format!("duplicate vocabulary entry {word:?}")));
            }
        }
        let lookup = |word: &str| {
            word_ids
                .get(word)
                .copied()
                .ok_or_else(|| Error::Validation(format!("vocabulary lacks required token {word:?}")))
        };
        let eos_id = lookup(&config.eos_token)?;
        let question_marker = lookup(QUESTION_MARKER)?;
        let answer_marker = lookup(ANSWER_MARKER)?;
        let context_marker = lookup(CONTEXT_MARKER)?;

        let encode = |text: &str, what: &str| -> Result<Vec<TokenId>> {
            text.split_whitespace()
                .map(|w| {
                    word_ids
                        .get(w)
                        .copied()
                        .ok_or_else(|| Error::Validation(format!("{what}: word {w:?} is not in the vocabulary")))
                })
                .collect()
        };

        let mut question_ids = HashSet::new();
        let mut beliefs = HashMap::new();
        for q in &config.questions {
            if !question_ids.insert(q.id.as_str()) {
                return Err(Error::Validation(format!("duplicate question id {:?}", q.id)));
            }
            let key = encode(&q.text, &format!("question {}", q.id))?;
            if key.is_empty() {
                return Err(Error::Validation(format!("question {} has empty text", q.id)));
            }
            encode(&q.gold_answer, &format!("gold answer of {}", q.id))?;
            let belief = match config.knowledge.get(&q.id) {
                Some(b) => {
                    if !(b.confidence > 0.0 && b.confidence < 1.0) {
                        return Err(Error::Validation(format!(
                            "confidence for {} must lie in (0, 1), got {}",
                            q.id, b.confidence
                        )));
                    }
                    Some(Intent {
                        answer: encode(&b.answer, &format!("belief for {}", q.id))?,
                        confidence: b.confidence,
                    })
                }
                None => None,
            };
            if beliefs.insert(key, belief).is_some() {
                return Err(Error::Validation(format!("question text of {} is not unique", q.id)));
            }
        }
        if let Some(id) = config.knowledge.keys().find(|k| !question_ids.contains(k.as_str())) {
            return Err(Error::Validation(format!("knowledge refers to unknown question {id:?}")));
        }

        let mut contexts = HashMap::new();
        for c in &config.contexts {
            if !(0.0..=1.0).contains(&c.relevance) {
                return Err(Error::Validation(format!(
                    "relevance of context {} must lie in [0, 1], got {}",
                    c.id, c.relevance
                )));
            }
            let key = encode(&c.text, &format!("context {}", c.id))?;
            let asserted = match &c.asserted_answer {
                Some(a) => Some(Intent {
                    answer: encode(a, &format!("answer asserted by {}", c.id))?,
                    confidence: c.relevance,
                }),
                None => None,
            };
            if contexts.insert(key, asserted).is_some() {
                return Err(Error::Validation(format!("context text of {} is not unique", c.id)));
            }
        }

        let vocab = Vocabulary {
            size,
            eos_id,
            newline_id: None,
            model_name: MODEL_NAME.to_string(),
            token_texts: config.vocabulary.clone(),
        };
        Ok(Self {
            vocab,
            word_ids,
            question_marker,
            answer_marker,
            context_marker,
            beliefs,
            contexts,
            smoothing: config.smoothing,
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(&ToyWorldConfig::load(path)?)
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Which answer the model is steering towards after `ids`, if any.
    fn intent(&self, ids: &[TokenId]) -> Option<(TokenId, f64)> {
        let answer_at = ids.iter().rposition(|&t| t == self.answer_marker)?;
        let question_at = ids[..answer_at].iter().rposition(|&t| t == self.question_marker)?;
        let generated = ids.len() - answer_at - 1;

        let mut context = None;
        for i in (0..question_at).rev() {
            let t = ids[i];
            if t == self.context_marker {
                context = Some(&ids[i + 1..question_at]);
                break;
            }
            if t == self.answer_marker || t == self.question_marker {
                break;
            }
        }

        let intent = match context {
            Some(text) => self.contexts.get(text)?.as_ref()?,
            None => self.beliefs.get(&ids[question_at + 1..answer_at])?.as_ref()?,
        };
        let token = intent.answer.get(generated).copied().unwrap_or(self.vocab.eos_id);
        Some((token, intent.confidence))
    }

    fn logits_for(&self, ids: &[TokenId]) -> Vec<f64> {
        let size = self.vocab.size;
        match self.intent(ids) {
            None => vec![-(size as f64).ln(); size],
            Some((token, p)) => {
                let eps = self.smoothing;
                let norm = 1.0 + size as f64 * eps;
                let rest = ((1.0 - p) / (size - 1) as f64 + eps) / norm;
                let mut out = vec![rest.ln(); size];
                out[token as usize] = ((p + eps) / norm).ln();
                out
            }
        }
    }
}

impl LogitBackend for ToyBackend {
    fn model_info(&self) -> Result<Vocabulary> {
        Ok(self.vocab.clone())
    }

    fn tokenize(&self, text: &str) -> Result<TokenSequence> {
        text.split_whitespace()
            .map(|w| {
                self.word_ids
                    .get(w)
                    .copied()
                    .ok_or_else(|| Error::Tokenization(format!("word {w:?} is not in the toy vocabulary")))
            })
            .collect::<Result<Vec<_>>>()
            .map(TokenSequence::new)
    }

    fn detokenize(&self, ids: &TokenSequence) -> Result<String> {
        ids.check(self.vocab.size)?;
        let words: Vec<&str> = ids.ids().iter().map(|&i| self.vocab.token_texts[i as usize].as_str()).collect();
        Ok(words.join(" "))
    }

    fn next_logits(&self, prefixes: &[TokenSequence]) -> Result<Vec<LogitVector>> {
        prefixes
            .iter()
            .map(|p| {
                if p.is_empty() {
                    return Err(invalid("prefix is empty"));
                }
                p.check(self.vocab.size)?;
                LogitVector::new(self.logits_for(p.ids()))
            })
            .collect()
    }
}
