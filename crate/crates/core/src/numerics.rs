//! Numerical kernel shared by every decoding strategy.
//!
//! All math runs in `f64`. Backends that deliver `f32` logits are widened on
//! ingestion through [`LogitVector::from_f32`].

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Tolerance on the total mass of a [`ProbDist`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Raw next-token scores over a vocabulary. Non-empty, every entry finite.
#[derive(Clone, Debug, PartialEq)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(invalid("logit vector is empty"));
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(invalid(format!("logit {i} is not finite ({})", scores[i])));
        }
        Ok(Self(scores))
    }

    pub fn from_f32(scores: &[f32]) -> Result<Self> {
        Self::new(scores.iter().map(|&s| f64::from(s)).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Index of the highest score; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

/// A normalized distribution over the vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbDist(Vec<f64>);

impl ProbDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid("distribution is empty"));
        }
        if let Some(i) = probs.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid(format!("probability {i} is out of range ({})", probs[i])));
        }
        let total = sorted_sum(probs.clone());
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(invalid(format!("distribution sums to {total}, not 1")));
        }
        Ok(Self(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_prob(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    /// The `k` most probable entries, highest first, ties by lower index.
    pub fn top_k(&self, k: usize) -> Vec<(usize, f64)> {
        let mut idx: Vec<usize> = (0..self.0.len()).collect();
        idx.sort_by(|&a, &b| self.0[b].total_cmp(&self.0[a]).then(a.cmp(&b)));
        idx.into_iter().take(k).map(|i| (i, self.0[i])).collect()
    }
}

/// Shannon entropy in nats.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Entropy(f64);

impl Entropy {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(invalid(format!("entropy must be finite and non-negative, got {value}")));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Weight on the context-conditioned logits.
///
/// Adaptive weights stay in `[0, 1]`; fixed weights may exceed 1.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Alpha(f64);

impl Alpha {
    pub const HALF: Alpha = Alpha(0.5);

    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(invalid(format!("alpha must be finite and non-negative, got {value}")));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Index of the maximum; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

// Summing in ascending order makes the total independent of token order, so
// two distributions that are permutations of each other get bitwise-equal
// normalizers and entropies.
fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.into_iter().sum()
}

/// Max-shifted softmax.
pub fn softmax(logits: &LogitVector) -> ProbDist {
    let scores = logits.as_slice();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    // The max entry contributes exp(0) = 1, so the sum is at least 1.
    let total = sorted_sum(exps.clone());
    ProbDist(exps.into_iter().map(|e| e / total).collect())
}

pub fn entropy(dist: &ProbDist) -> Entropy {
    let terms: Vec<f64> = dist.probs().iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).collect();
    let max = (dist.len() as f64).ln();
    Entropy(sorted_sum(terms).clamp(0.0, max))
}

/// `H / (H + H_ctx)`: the share of total uncertainty carried by the
/// context-free distribution. Two zero entropies give 0.5.
pub fn adaptive_alpha(h_closed: Entropy, h_open: Entropy) -> Alpha {
    let total = h_closed.0 + h_open.0;
    if total == 0.0 {
        return Alpha::HALF;
    }
    Alpha((h_closed.0 / total).clamp(0.0, 1.0))
}

/// `z + alpha * (z_ctx - z)`, evaluated as `(1 - alpha) * z + alpha * z_ctx`
/// so that alpha = 0 and alpha = 1 reproduce `z` and `z_ctx` exactly.
pub fn combine_contrastive(z: &LogitVector, z_ctx: &LogitVector, alpha: Alpha) -> Result<LogitVector> {
    check_same_len(z, z_ctx)?;
    let a = alpha.0;
    let keep = 1.0 - a;
    let out = z.as_slice().iter().zip(z_ctx.as_slice()).map(|(&zi, &ci)| keep * zi + a * ci).collect();
    LogitVector::new(out)
}

/// `z_ctx + alpha * (z_ctx - z_ref)`: pushes away from the reference
/// distribution instead of interpolating towards the context.
pub fn amplify_contrastive(z_ctx: &LogitVector, z_ref: &LogitVector, alpha: Alpha) -> Result<LogitVector> {
    check_same_len(z_ctx, z_ref)?;
    let a = alpha.0;
    let out = z_ctx.as_slice().iter().zip(z_ref.as_slice()).map(|(&ci, &ri)| ci + a * (ci - ri)).collect();
    LogitVector::new(out)
}

fn check_same_len(a: &LogitVector, b: &LogitVector) -> Result<()> {
    if a.len() != b.len() {
        return Err(invalid(format!("logit vectors have different vocabulary sizes ({} vs {})", a.len(), b.len())));
    }
    Ok(())
}
