//! Greedy decoding with regular, contrastive and adaptive strategies.
//!
//! Every strategy runs the same loop: request logits for each prompt the
//! strategy needs in a single batched backend call, score the step, pick the
//! argmax (lowest id on ties), append the token to every prompt, and stop on
//! end-of-sequence, on the vocabulary's newline token, or at `max_tokens`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backend::{LogitBackend, TokenId, TokenSequence};
use crate::dataio::{render_prompt, FewShot, PromptMode, PromptTemplate, QAExample};
use crate::error::{invalid, Error, Result};
use crate::numerics::{
    adaptive_alpha, amplify_contrastive, combine_contrastive, entropy, softmax, Alpha, Entropy, LogitVector, ProbDist,
};

pub const DEFAULT_MAX_TOKENS: usize = 32;
/// Entries kept per side in each trace step.
pub const TRACE_TOP_K: usize = 5;

/// Decoding methods selectable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RegCls,
    RegOpn,
    Cad,
    MicdF,
    MicdD,
    Acd,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::RegCls, Method::RegOpn, Method::Cad, Method::MicdF, Method::MicdD, Method::Acd];

    pub fn label(self) -> &'static str {
        match self {
            Method::RegCls => "reg-cls",
            Method::RegOpn => "reg-opn",
            Method::Cad => "cad",
            Method::MicdF => "micd-f",
            Method::MicdD => "micd-d",
            Method::Acd => "acd",
        }
    }

    /// CAD and fixed MICD take a user-supplied weight.
    pub fn takes_fixed_alpha(self) -> bool {
        matches!(self, Method::Cad | Method::MicdF)
    }

    pub fn needs_adversarial(self) -> bool {
        matches!(self, Method::MicdF | Method::MicdD)
    }

    pub fn uses_context(self) -> bool {
        self != Method::RegCls
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.label() == s).ok_or_else(|| invalid(format!("unknown method {s:?}")))
    }
}

/// Which prompt a logit vector was computed from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Closed,
    Open,
    Adversarial,
}

/// Reference distribution subtracted by the amplify form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reference {
    /// Question-only logits (CAD).
    ClosedBook,
    /// Logits under a fixed irrelevant passage (MICD).
    Adversarial,
}

/// How a fixed weight combines the two logit vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Formula {
    /// `z + α(z_ctx − z)`.
    Interpolate,
    /// `z_ctx + α(z_ctx − z_ref)`.
    Amplify(Reference),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Strategy {
    RegCls,
    RegOpn,
    Cad {
        alpha: Alpha,
    },
    MicdF {
        alpha: Alpha,
    },
    MicdD,
    Acd,
    /// Fixed-weight interpolation, as used by the alpha sweep.
    Interpolate {
        alpha: Alpha,
    },
}

impl Strategy {
    /// Builds the strategy for a command-line method; fixed-weight methods
    /// require `alpha` and the others reject it.
    pub fn from_method(method: Method, alpha: Option<f64>) -> Result<Self> {
        match (method.takes_fixed_alpha(), alpha) {
            (true, None) => Err(invalid(format!("method {method} requires an alpha"))),
            (false, Some(_)) => Err(invalid(format!("method {method} does not take a fixed alpha"))),
            (true, Some(a)) => {
                let alpha = Alpha::new(a)?;
                Ok(match method {
                    Method::Cad => Strategy::Cad { alpha },
                    _ => Strategy::MicdF { alpha },
                })
            }
            (false, None) => Ok(match method {
                Method::RegCls => Strategy::RegCls,
                Method::RegOpn => Strategy::RegOpn,
                Method::MicdD => Strategy::MicdD,
                _ => Strategy::Acd,
            }),
        }
    }

    pub fn interpolate(alpha: f64) -> Result<Self> {
        Ok(Strategy::Interpolate { alpha: Alpha::new(alpha)? })
    }

    pub fn label(&self) -> String {
        match self {
            Strategy::RegCls => "reg-cls".into(),
            Strategy::RegOpn => "reg-opn".into(),
            Strategy::Cad { .. } => "cad".into(),
            Strategy::MicdF { .. } => "micd-f".into(),
            Strategy::MicdD => "micd-d".into(),
            Strategy::Acd => "acd".into(),
            Strategy::Interpolate { alpha } => format!("fixed-{}", alpha.value()),
        }
    }

    pub fn fixed_alpha(&self) -> Option<Alpha> {
        match self {
            Strategy::Cad { alpha } | Strategy::MicdF { alpha } | Strategy::Interpolate { alpha } => Some(*alpha),
            _ => None,
        }
    }

    /// Strategies whose weight changes per step.
    pub fn is_adaptive(&self) -> bool {
        matches!(self, Strategy::Acd | Strategy::MicdD)
    }

    pub fn uses_context(&self) -> bool {
        !matches!(self, Strategy::RegCls)
    }

    /// Prompts submitted per step, in request order.
    pub fn sides(&self) -> &'static [Side] {
        match self {
            Strategy::RegCls => &[Side::Closed],
            Strategy::RegOpn => &[Side::Open],
            Strategy::Cad { .. } | Strategy::Acd | Strategy::Interpolate { .. } => &[Side::Closed, Side::Open],
            Strategy::MicdF { .. } | Strategy::MicdD => &[Side::Closed, Side::Open, Side::Adversarial],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecodeLimits {
    pub max_tokens: usize,
}

impl Default for DecodeLimits {
    fn default() -> Self {
        Self { max_tokens: DEFAULT_MAX_TOKENS }
    }
}

/// Tokenized prompts for one example.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PromptSet {
    /// Question only.
    pub closed: TokenSequence,
    /// Retrieved context plus question.
    pub open: Option<TokenSequence>,
    /// Fixed irrelevant passage plus question.
    pub adversarial: Option<TokenSequence>,
}

impl PromptSet {
    /// Renders and tokenizes every prompt the example supports.
    pub fn for_example(
        backend: &dyn LogitBackend,
        template: &PromptTemplate,
        fewshots: &[FewShot],
        example: &QAExample,
        adversarial_passage: Option<&str>,
    ) -> Result<Self> {
        let closed = backend.tokenize(&render_prompt(template, fewshots, example, &PromptMode::Closed)?)?;
        let open = match &example.context {
            Some(_) => Some(backend.tokenize(&render_prompt(template, fewshots, example, &PromptMode::Open)?)?),
            None => None,
        };
        let adversarial = match adversarial_passage {
            Some(text) => Some(backend.tokenize(&render_prompt(
                template,
                fewshots,
                example,
                &PromptMode::Adversarial(text.to_string()),
            )?)?),
            None => None,
        };
        Ok(Self { closed, open, adversarial })
    }

    fn get(&self, side: Side) -> Result<&TokenSequence> {
        match side {
            Side::Closed => Ok(&self.closed),
            Side::Open => self
                .open
                .as_ref()
                .ok_or_else(|| invalid("strategy needs an open-book prompt but the example has no context")),
            Side::Adversarial => self
                .adversarial
                .as_ref()
                .ok_or_else(|| invalid("strategy needs an adversarial prompt but no adversarial context was given")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Eos,
    Newline,
    MaxTokens,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopToken {
    pub id: TokenId,
    pub prob: f64,
}

/// Diagnostics recorded at each generated position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaTraceStep {
    pub step: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_closed: Option<Entropy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_open: Option<Entropy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Alpha>,
    pub chosen_token: TokenId,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub top_closed: Vec<TopToken>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub top_open: Vec<TopToken>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    /// Generated answer without the stop token.
    pub text: String,
    /// Every chosen token, including a terminating eos/newline.
    pub token_ids: TokenSequence,
    pub trace: Vec<AlphaTraceStep>,
    pub strategy: String,
    pub stop_reason: StopReason,
}

/// Scores for a single step, before token selection.
#[derive(Clone, Debug, PartialEq)]
pub struct StepScores {
    pub scores: LogitVector,
    pub h_closed: Option<Entropy>,
    pub h_open: Option<Entropy>,
    pub alpha: Option<Alpha>,
    pub closed: Option<ProbDist>,
    pub open: Option<ProbDist>,
}

impl StepScores {
    pub fn choose(&self) -> TokenId {
        self.scores.argmax() as TokenId
    }
}

/// MICD's dynamic weight: the with-context max probability when it beats the
/// context-free one, else one minus the context-free max probability.
pub fn micd_dynamic_alpha(max_p_with_ctx: f64, max_p_without_ctx: f64) -> Result<Alpha> {
    for (name, p) in [("with context", max_p_with_ctx), ("without context", max_p_without_ctx)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("max probability {name} must lie in [0, 1], got {p}")));
        }
    }
    if max_p_with_ctx > max_p_without_ctx {
        Alpha::new(max_p_with_ctx)
    } else {
        Alpha::new(1.0 - max_p_without_ctx)
    }
}

/// Scores one step from logits ordered as [`Strategy::sides`].
pub fn score_step(strategy: &Strategy, logits: &[LogitVector]) -> Result<StepScores> {
    let sides = strategy.sides();
    if logits.len() != sides.len() {
        return Err(invalid(format!(
            "strategy {} expects {} logit vectors, got {}",
            strategy.label(),
            sides.len(),
            logits.len()
        )));
    }
    if logits.iter().any(|l| l.len() != logits[0].len()) {
        return Err(invalid("logit vectors differ in vocabulary size"));
    }

    if let Strategy::RegCls | Strategy::RegOpn = strategy {
        let dist = softmax(&logits[0]);
        let h = Some(entropy(&dist));
        let closed_side = matches!(strategy, Strategy::RegCls);
        return Ok(StepScores {
            scores: logits[0].clone(),
            h_closed: if closed_side { h } else { None },
            h_open: if closed_side { None } else { h },
            alpha: None,
            closed: closed_side.then(|| dist.clone()),
            open: (!closed_side).then_some(dist),
        });
    }

    let (z, z_ctx) = (&logits[0], &logits[1]);
    let p = softmax(z);
    let p_ctx = softmax(z_ctx);
    let h = entropy(&p);
    let h_ctx = entropy(&p_ctx);

    let (alpha, scores) = match *strategy {
        Strategy::Acd => {
            let alpha = adaptive_alpha(h, h_ctx);
            (alpha, combine_contrastive(z, z_ctx, alpha)?)
        }
        Strategy::Interpolate { alpha } => (alpha, combine_contrastive(z, z_ctx, alpha)?),
        Strategy::Cad { alpha } => (alpha, amplify_contrastive(z_ctx, z, alpha)?),
        Strategy::MicdF { alpha } => (alpha, amplify_contrastive(z_ctx, &logits[2], alpha)?),
        Strategy::MicdD => {
            let alpha = micd_dynamic_alpha(p_ctx.max_prob(), p.max_prob())?;
            (alpha, amplify_contrastive(z_ctx, &logits[2], alpha)?)
        }
        Strategy::RegCls | Strategy::RegOpn => unreachable!("handled above"),
    };
    Ok(StepScores {
        scores,
        h_closed: Some(h),
        h_open: Some(h_ctx),
        alpha: Some(alpha),
        closed: Some(p),
        open: Some(p_ctx),
    })
}

fn top_tokens(dist: Option<&ProbDist>) -> Vec<TopToken> {
    dist.map(|d| d.top_k(TRACE_TOP_K).into_iter().map(|(id, prob)| TopToken { id: id as TokenId, prob }).collect())
        .unwrap_or_default()
}

/// Greedy decoding under `strategy`.
pub fn decode(
    backend: &dyn LogitBackend,
    prompts: &PromptSet,
    strategy: &Strategy,
    limits: DecodeLimits,
) -> Result<DecodeResult> {
    if limits.max_tokens == 0 {
        return Err(invalid("max_tokens must be at least 1"));
    }
    let vocab = backend.model_info()?;
    let mut prefixes = Vec::with_capacity(strategy.sides().len());
    for &side in strategy.sides() {
        let prompt = prompts.get(side)?;
        if prompt.is_empty() {
            return Err(invalid(format!("{side:?} prompt is empty")));
        }
        prompt.check(vocab.size)?;
        prefixes.push(prompt.clone());
    }

    let mut generated = TokenSequence::default();
    let mut trace = Vec::new();
    let mut stop_reason = StopReason::MaxTokens;
    for step in 0..limits.max_tokens {
        let logits = backend.next_logits(&prefixes)?;
        if let Some(bad) = logits.iter().find(|l| l.len() != vocab.size) {
            return Err(Error::Backend(format!(
                "logit vector of length {} for vocabulary of {}",
                bad.len(),
                vocab.size
            )));
        }
        let scored = score_step(strategy, &logits)?;
        let token = scored.choose();
        trace.push(AlphaTraceStep {
            step,
            h_closed: scored.h_closed,
            h_open: scored.h_open,
            alpha: scored.alpha,
            chosen_token: token,
            top_closed: top_tokens(scored.closed.as_ref()),
            top_open: top_tokens(scored.open.as_ref()),
        });
        generated.push(token);
        for prefix in &mut prefixes {
            prefix.push(token);
        }
        if token == vocab.eos_id {
            stop_reason = StopReason::Eos;
            break;
        }
        if vocab.newline_id == Some(token) {
            stop_reason = StopReason::Newline;
            break;
        }
    }

    let answer_len = match stop_reason {
        StopReason::MaxTokens => generated.len(),
        _ => generated.len() - 1,
    };
    let answer = TokenSequence::new(generated.ids()[..answer_len].to_vec());
    let text = backend.detokenize(&answer)?.trim().to_string();
    Ok(DecodeResult { text, token_ids: generated, trace, strategy: strategy.label(), stop_reason })
}

/// Adaptive contrastive decoding.
pub fn decode_acd(backend: &dyn LogitBackend, prompts: &PromptSet, limits: DecodeLimits) -> Result<DecodeResult> {
    decode(backend, prompts, &Strategy::Acd, limits)
}

/// Plain greedy decoding of the closed- or open-book prompt.
pub fn decode_regular(
    backend: &dyn LogitBackend,
    prompts: &PromptSet,
    side: Side,
    limits: DecodeLimits,
) -> Result<DecodeResult> {
    let strategy = match side {
        Side::Closed => Strategy::RegCls,
        Side::Open => Strategy::RegOpn,
        Side::Adversarial => return Err(invalid("regular decoding runs on the closed or open prompt")),
    };
    decode(backend, prompts, &strategy, limits)
}

/// Fixed-weight contrastive decoding. The amplify form against the closed
/// book is CAD; against the adversarial prompt it is fixed MICD.
pub fn decode_fixed_contrast(
    backend: &dyn LogitBackend,
    prompts: &PromptSet,
    alpha: Alpha,
    formula: Formula,
    limits: DecodeLimits,
) -> Result<DecodeResult> {
    let strategy = match formula {
        Formula::Interpolate => Strategy::Interpolate { alpha },
        Formula::Amplify(Reference::ClosedBook) => Strategy::Cad { alpha },
        Formula::Amplify(Reference::Adversarial) => {
            if prompts.adversarial.is_none() {
                return Err(invalid("the adversarial amplify form needs an adversarial prompt"));
            }
            Strategy::MicdF { alpha }
        }
    };
    decode(backend, prompts, &strategy, limits)
}
