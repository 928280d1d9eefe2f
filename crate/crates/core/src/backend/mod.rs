//! Next-token logit providers.
//!
//! A [`LogitBackend`] turns token prefixes into full-vocabulary logits. The
//! [`toy::ToyBackend`] is a deterministic in-process model used as a test
//! oracle; [`remote::RemoteBackend`] drives any server speaking the JSON wire
//! protocol in [`protocol`].

pub mod protocol;
pub mod remote;
pub mod toy;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::LogitVector;

pub use remote::{RemoteBackend, REMOTE_URL_ENV};
pub use toy::{ToyBackend, ToyWorldConfig};

pub type TokenId = u32;

/// Token ids are dense in `[0, size)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub size: usize,
    pub eos_id: TokenId,
    pub newline_id: Option<TokenId>,
    pub model_name: String,
    /// Surface text per id. Empty when the backend does not publish it.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub token_texts: Vec<String>,
}

impl Vocabulary {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(invalid("vocabulary is empty"));
        }
        if self.eos_id as usize >= self.size {
            return Err(invalid(format!("eos id {} outside vocabulary of {}", self.eos_id, self.size)));
        }
        if let Some(nl) = self.newline_id {
            if nl as usize >= self.size {
                return Err(invalid(format!("newline id {nl} outside vocabulary of {}", self.size)));
            }
        }
        if !self.token_texts.is_empty() && self.token_texts.len() != self.size {
            return Err(invalid("token text table does not match vocabulary size"));
        }
        Ok(())
    }

    pub fn token_text(&self, id: TokenId) -> Option<&str> {
        self.token_texts.get(id as usize).map(String::as_str)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence(Vec<TokenId>);

impl TokenSequence {
    pub fn new(ids: Vec<TokenId>) -> Self {
        Self(ids)
    }

    pub fn ids(&self) -> &[TokenId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, id: TokenId) {
        self.0.push(id);
    }

    pub fn into_inner(self) -> Vec<TokenId> {
        self.0
    }

    /// Fails if any id falls outside a vocabulary of `vocab_size`.
    pub fn check(&self, vocab_size: usize) -> Result<()> {
        match self.0.iter().find(|&&id| id as usize >= vocab_size) {
            Some(id) => Err(invalid(format!("token id {id} outside vocabulary of {vocab_size}"))),
            None => Ok(()),
        }
    }
}

impl From<Vec<TokenId>> for TokenSequence {
    fn from(ids: Vec<TokenId>) -> Self {
        Self(ids)
    }
}

/// Source of last-position logits for arbitrary prefixes.
///
/// Implementations must be stateless across calls: the same prefixes always
/// yield the same logits. Handles are shared between evaluation workers, so
/// they either serialize internally or are reentrant.
pub trait LogitBackend: Send + Sync {
    fn model_info(&self) -> Result<Vocabulary>;

    fn tokenize(&self, text: &str) -> Result<TokenSequence>;

    fn detokenize(&self, ids: &TokenSequence) -> Result<String>;

    /// One logit vector per prefix, in request order.
    fn next_logits(&self, prefixes: &[TokenSequence]) -> Result<Vec<LogitVector>>;
}

impl<B: LogitBackend + ?Sized> LogitBackend for &B {
    fn model_info(&self) -> Result<Vocabulary> {
        (**self).model_info()
    }
    fn tokenize(&self, text: &str) -> Result<TokenSequence> {
        (**self).tokenize(text)
    }
    fn detokenize(&self, ids: &TokenSequence) -> Result<String> {
        (**self).detokenize(ids)
    }
    fn next_logits(&self, prefixes: &[TokenSequence]) -> Result<Vec<LogitVector>> {
        (**self).next_logits(prefixes)
    }
}

impl<B: LogitBackend + ?Sized> LogitBackend for Box<B> {
    fn model_info(&self) -> Result<Vocabulary> {
        (**self).model_info()
    }
    fn tokenize(&self, text: &str) -> Result<TokenSequence> {
        (**self).tokenize(text)
    }
    fn detokenize(&self, ids: &TokenSequence) -> Result<String> {
        (**self).detokenize(ids)
    }
    fn next_logits(&self, prefixes: &[TokenSequence]) -> Result<Vec<LogitVector>> {
        (**self).next_logits(prefixes)
    }
}

impl<B: LogitBackend + ?Sized> LogitBackend for Arc<B> {
    fn model_info(&self) -> Result<Vocabulary> {
        (**self).model_info()
    }
    fn tokenize(&self, text: &str) -> Result<TokenSequence> {
        (**self).tokenize(text)
    }
    fn detokenize(&self, ids: &TokenSequence) -> Result<String> {
        (**self).detokenize(ids)
    }
    fn next_logits(&self, prefixes: &[TokenSequence]) -> Result<Vec<LogitVector>> {
        (**self).next_logits(prefixes)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CallCounts {
    /// Number of `next_logits` requests.
    pub requests: usize,
    /// Total prefixes across all requests, i.e. forward passes.
    pub prefixes: usize,
}

/// Wraps a backend and counts `next_logits` traffic.
pub struct CountingBackend<B> {
    inner: B,
    requests: AtomicUsize,
    prefixes: AtomicUsize,
}

impl<B: LogitBackend> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self { inner, requests: AtomicUsize::new(0), prefixes: AtomicUsize::new(0) }
    }

    pub fn counts(&self) -> CallCounts {
        CallCounts { requests: self.requests.load(Ordering::SeqCst), prefixes: self.prefixes.load(Ordering::SeqCst) }
    }

    pub fn reset(&self) {
        self.requests.store(0, Ordering::SeqCst);
        self.prefixes.store(0, Ordering::SeqCst);
    }

    pub fn into_inner(self) -> B {
        self.inner
    }
}

impl<B: LogitBackend> LogitBackend for CountingBackend<B> {
    fn model_info(&self) -> Result<Vocabulary> {
        self.inner.model_info()
    }
    fn tokenize(&self, text: &str) -> Result<TokenSequence> {
        self.inner.tokenize(text)
    }
    fn detokenize(&self, ids: &TokenSequence) -> Result<String> {
        self.inner.detokenize(ids)
    }
    fn next_logits(&self, prefixes: &[TokenSequence]) -> Result<Vec<LogitVector>> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        self.prefixes.fetch_add(prefixes.len(), Ordering::SeqCst);
        self.inner.next_logits(prefixes)
    }
}
