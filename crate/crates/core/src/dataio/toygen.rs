//! Seeded generator for toy-world QA fixtures.
//!
//! Each example independently falls into one of four quadrants:
//! known/unknown (does the model believe the gold answer without context?)
//! × gold/noisy (does the retrieved context support the gold answer?).
//! The generated [`ToyWorldConfig`] realizes those labels in the toy model.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

use super::{
    knowledge_conflict_view, swap_answer_entity, to_jsonl, FewShot, PromptTemplate, QAExample, RetrievedContext,
    SWAP_ANSWER_KEY,
};
use crate::backend::toy::{
    ToyBelief, ToyContext, ToyQuestion, ANSWER_MARKER, CONTEXT_MARKER, DEFAULT_EOS, QUESTION_MARKER,
};
use crate::backend::{ToyBackend, ToyWorldConfig};
use crate::error::{Error, Result};

pub const QUADRANT_KEY: &str = "quadrant";

pub const DEFAULT_ADVERSARIAL_PASSAGE: &str = "The Great Barrier Reef is the largest coral reef system in the world .";

const FIRST_NAMES: &[&str] = &[
    "ada", "bram", "cleo", "dara", "egon", "faye", "gus", "hana", "ivo", "juno", "kai", "lena", "milo", "nora", "otto",
    "pia",
];

const LAST_NAMES: &[&str] = &[
    "abbott", "barlow", "castle", "dorsey", "ellery", "finch", "garner", "hollis", "irwin", "jessup", "kendal",
    "lowry", "marsh", "nolan", "orwell", "pryce", "quill", "rowan", "sutton", "thorne", "upton", "vance", "wilder",
    "yates",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quadrant {
    KnownGold,
    KnownNoisy,
    UnknownGold,
    UnknownNoisy,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] =
        [Quadrant::KnownGold, Quadrant::KnownNoisy, Quadrant::UnknownGold, Quadrant::UnknownNoisy];

    pub fn new(known: bool, gold: bool) -> Self {
        match (known, gold) {
            (true, true) => Quadrant::KnownGold,
            (true, false) => Quadrant::KnownNoisy,
            (false, true) => Quadrant::UnknownGold,
            (false, false) => Quadrant::UnknownNoisy,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Quadrant::KnownGold => "known-gold",
            Quadrant::KnownNoisy => "known-noisy",
            Quadrant::UnknownGold => "unknown-gold",
            Quadrant::UnknownNoisy => "unknown-noisy",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|q| q.label() == label)
    }

    pub fn of(example: &QAExample) -> Option<Self> {
        example.meta_str(QUADRANT_KEY).and_then(Self::from_label)
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Generation parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyWorldSpec {
    pub examples: usize,
    pub fraction_known: f64,
    pub fraction_gold: f64,
    /// Closed-book confidence on the gold answer for known questions.
    pub known_confidence: f64,
    /// Closed-book confidence on a wrong answer for unknown questions.
    pub unknown_confidence: f64,
    /// Confidence a gold context induces in the gold answer.
    pub gold_relevance: f64,
    /// Range for the confidence a noisy context induces in its wrong answer.
    pub noisy_relevance: (f64, f64),
    /// Share of noisy contexts that assert no answer at all.
    pub uninformative_fraction: f64,
    /// Confidence a swapped context induces in the substituted entity.
    pub swap_relevance: f64,
    pub fewshots: usize,
    pub first_names: Vec<String>,
    pub last_names: Vec<String>,
    pub adversarial_passage: String,
    pub smoothing: f64,
}

impl Default for ToyWorldSpec {
    fn default() -> Self {
        Self {
            examples: 400,
            fraction_known: 0.5,
            fraction_gold: 0.5,
            known_confidence: 0.95,
            unknown_confidence: 0.01,
            gold_relevance: 0.95,
            noisy_relevance: (0.05, 0.99),
            uninformative_fraction: 0.25,
            swap_relevance: 0.99,
            fewshots: 5,
            first_names: FIRST_NAMES.iter().map(|s| s.to_string()).collect(),
            last_names: LAST_NAMES.iter().map(|s| s.to_string()).collect(),
            adversarial_passage: DEFAULT_ADVERSARIAL_PASSAGE.to_string(),
            smoothing: crate::backend::toy::DEFAULT_SMOOTHING,
        }
    }
}

impl ToyWorldSpec {
    pub fn with_mix(mut self, fraction_known: f64, fraction_gold: f64) -> Self {
        self.fraction_known = fraction_known;
        self.fraction_gold = fraction_gold;
        self
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if self.examples == 0 {
            return bad("at least one example is required".into());
        }
        if self.first_names.is_empty() || self.last_names.is_empty() {
            return bad("name pools must be non-empty".into());
        }
        if self.first_names.len() * self.last_names.len() < 2 {
            return bad("name pools must allow at least two distinct answers".into());
        }
        for (name, v) in [
            ("fraction_known", self.fraction_known),
            ("fraction_gold", self.fraction_gold),
            ("uninformative_fraction", self.uninformative_fraction),
            ("gold_relevance", self.gold_relevance),
            ("swap_relevance", self.swap_relevance),
            ("noisy_relevance.0", self.noisy_relevance.0),
            ("noisy_relevance.1", self.noisy_relevance.1),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.noisy_relevance.0 > self.noisy_relevance.1 {
            return bad("noisy_relevance range is inverted".into());
        }
        for (name, v) in [("known_confidence", self.known_confidence), ("unknown_confidence", self.unknown_confidence)]
        {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        if self.adversarial_passage.trim().is_empty() {
            return bad("adversarial passage is empty".into());
        }
        Ok(())
    }
}

/// A generated dataset together with the world that realizes it.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyFixture {
    pub examples: Vec<QAExample>,
    pub fewshots: Vec<QAExample>,
    pub world: ToyWorldConfig,
    pub adversarial_passage: String,
}

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const FEWSHOTS_FILE: &str = "fewshots.jsonl";
pub const WORLD_FILE: &str = "toy_world.json";
pub const ADVERSARIAL_FILE: &str = "adversarial.txt";
/// Knowledge-conflict view: gold contexts with the answer entity swapped.
pub const SWAP_DATASET_FILE: &str = "dataset_swap.jsonl";

impl ToyFixture {
    pub fn backend(&self) -> Result<ToyBackend> {
        ToyBackend::new(&self.world)
    }

    pub fn fewshot_pairs(&self) -> Vec<FewShot> {
        self.fewshots.iter().map(|e| FewShot { question: e.question.clone(), answer: e.answers[0].clone() }).collect()
    }

    /// Writes `dataset.jsonl`, `dataset_swap.jsonl`, `fewshots.jsonl`,
    /// `toy_world.json` and `adversarial.txt` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(DATASET_FILE), to_jsonl(&self.examples)?)?;
        std::fs::write(dir.join(SWAP_DATASET_FILE), to_jsonl(&knowledge_conflict_view(&self.examples)?)?)?;
        std::fs::write(dir.join(FEWSHOTS_FILE), to_jsonl(&self.fewshots)?)?;
        self.world.save(dir.join(WORLD_FILE))?;
        std::fs::write(dir.join(ADVERSARIAL_FILE), format!("{}\n", self.adversarial_passage))?;
        Ok(())
    }
}

struct NamePool<'a> {
    first: &'a [String],
    last: &'a [String],
}

impl NamePool<'_> {
    fn draw(&self, rng: &mut ChaCha8Rng) -> String {
        let first = self.first.choose(rng).expect("non-empty pool");
        let last = self.last.choose(rng).expect("non-empty pool");
        format!("{first} {last}")
    }

    fn draw_other(&self, rng: &mut ChaCha8Rng, avoid: &str) -> String {
        loop {
            let name = self.draw(rng);
            if name != avoid {
                return name;
            }
        }
    }
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn meta(pairs: &[(&str, Value)]) -> Map<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Generates a fixture; identical `spec` and `seed` give identical output.
pub fn generate_toy_dataset(spec: &ToyWorldSpec, seed: u64) -> Result<ToyFixture> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = NamePool { first: &spec.first_names, last: &spec.last_names };
    let width = (spec.examples + spec.fewshots).to_string().len();

    let mut questions = Vec::new();
    let mut knowledge = BTreeMap::new();
    let mut contexts = Vec::new();
    let mut examples = Vec::with_capacity(spec.examples);

    for i in 0..spec.examples {
        let id = format!("toy-{i:0width$}");
        let subject = format!("land{i}");
        let question = format!("who founded {subject} ?");
        let known = rng.gen_bool(spec.fraction_known);
        let gold = rng.gen_bool(spec.fraction_gold);
        let answer = names.draw(&mut rng);

        let belief = if known {
            ToyBelief { answer: answer.clone(), confidence: spec.known_confidence }
        } else {
            ToyBelief { answer: names.draw_other(&mut rng, &answer), confidence: spec.unknown_confidence }
        };

        let (context_text, asserted, relevance) = if gold {
            (format!("{answer} founded {subject} ."), Some(answer.clone()), spec.gold_relevance)
        } else if rng.gen_bool(spec.uninformative_fraction) {
            (format!("{subject} lies beside a quiet river ."), None, 0.0)
        } else {
            let wrong = names.draw_other(&mut rng, &answer);
            let (lo, hi) = spec.noisy_relevance;
            let rho = round3(rng.gen_range(lo..=hi));
            (format!("{wrong} visited {subject} ."), Some(wrong), rho)
        };

        let mut example_meta =
            meta(&[(QUADRANT_KEY, Value::from(Quadrant::new(known, gold).label())), ("known", Value::from(known))]);
        let swapped_context = if gold {
            let replacement = names.draw_other(&mut rng, &answer);
            let swapped = swap_answer_entity(&context_text, &answer, &replacement)?;
            contexts.push(ToyContext {
                id: format!("{id}-swap"),
                text: swapped.clone(),
                asserted_answer: Some(replacement.clone()),
                relevance: spec.swap_relevance,
            });
            example_meta.insert(SWAP_ANSWER_KEY.into(), Value::from(replacement));
            Some(swapped)
        } else {
            None
        };

        contexts.push(ToyContext {
            id: format!("{id}-ctx"),
            text: context_text.clone(),
            asserted_answer: asserted,
            relevance,
        });
        questions.push(ToyQuestion { id: id.clone(), text: question.clone(), gold_answer: answer.clone() });
        knowledge.insert(id.clone(), belief);
        examples.push(QAExample {
            id,
            question,
            answers: vec![answer],
            context: Some(RetrievedContext { text: context_text, gold: Some(gold) }),
            swapped_context,
            meta: example_meta,
        });
    }

    let mut fewshots = Vec::with_capacity(spec.fewshots);
    for k in 0..spec.fewshots {
        let n = spec.examples + k;
        let id = format!("shot-{n:0width$}");
        let question = format!("who founded land{n} ?");
        let answer = names.draw(&mut rng);
        questions.push(ToyQuestion { id: id.clone(), text: question.clone(), gold_answer: answer.clone() });
        knowledge.insert(id.clone(), ToyBelief { answer: answer.clone(), confidence: spec.known_confidence });
        fewshots.push(QAExample {
            id,
            question,
            answers: vec![answer],
            context: None,
            swapped_context: None,
            meta: Map::new(),
        });
    }

    let template = PromptTemplate::default();
    let mut words = BTreeSet::new();
    for text in
        [template.header.as_str(), QUESTION_MARKER, ANSWER_MARKER, CONTEXT_MARKER, spec.adversarial_passage.as_str()]
    {
        words.extend(text.split_whitespace().map(String::from));
    }
    for name in spec.first_names.iter().chain(&spec.last_names) {
        words.insert(name.clone());
    }
    for text in questions.iter().map(|q| &q.text).chain(contexts.iter().map(|c| &c.text)) {
        words.extend(text.split_whitespace().map(String::from));
    }
    words.remove(DEFAULT_EOS);
    let vocabulary: Vec<String> = std::iter::once(DEFAULT_EOS.to_string()).chain(words).collect();

    let world = ToyWorldConfig {
        vocabulary,
        eos_token: DEFAULT_EOS.to_string(),
        questions,
        knowledge,
        contexts,
        smoothing: spec.smoothing,
    };
    // catches spec values the world itself would reject
    ToyBackend::new(&world)?;
    Ok(ToyFixture { examples, fewshots, world, adversarial_passage: spec.adversarial_passage.trim().to_string() })
}
