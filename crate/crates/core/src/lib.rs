//! Adaptive contrastive decoding for retrieval-augmented question answering.
//!
//! At each greedy step the decoder mixes closed-book logits `z` and open-book
//! logits `z^c` as `softmax(z + α(z^c − z))`, with
//! `α = H(Y) / (H(Y) + H(Y^c))` taken from the entropies of the two
//! next-token distributions. Fixed-weight and rule-based baselines share the
//! same loop. Logits come from a [`backend::LogitBackend`]: the in-process
//! toy world or a remote server.
//!
//! ```
//! use acd::numerics::{adaptive_alpha, Entropy};
//!
//! let alpha = adaptive_alpha(Entropy::new(2.9160).unwrap(), Entropy::new(5.4562).unwrap());
//! assert!((alpha.value() - 0.3483).abs() < 1e-4);
//! ```

pub mod backend;
pub mod dataio;
pub mod decoding;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod numerics;

pub use backend::{CountingBackend, LogitBackend, RemoteBackend, TokenSequence, ToyBackend, Vocabulary};
pub use decoding::{decode, DecodeLimits, DecodeResult, Method, PromptSet, Strategy};
pub use error::{Error, Result};
pub use evaluation::{RunRecord, RunSummary};
