//! Exact-match scoring, subset labels, α statistics and AUROC.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataio::QAExample;
use crate::decoding::{AlphaTraceStep, DecodeResult, StopReason, Strategy};
use crate::error::{invalid, Error, Result};

/// Lowercases, strips ASCII punctuation, drops the articles a/an/the and
/// collapses whitespace.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let stripped: String = lowered.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    stripped.split_whitespace().filter(|w| !matches!(*w, "a" | "an" | "the")).collect::<Vec<_>>().join(" ")
}

pub fn exact_match(prediction: &str, answers: &[String]) -> Result<bool> {
    if answers.is_empty() {
        return Err(invalid("exact match needs at least one candidate answer"));
    }
    let pred = normalize_answer(prediction);
    Ok(answers.iter().any(|a| normalize_answer(a) == pred))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextLabel {
    Gold,
    Noisy,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeLabel {
    Known,
    Unknown,
}

/// Gold when the dataset says so or, without an explicit flag, when the
/// context contains a candidate answer as whole words after normalization.
pub fn label_context(example: &QAExample) -> ContextLabel {
    let Some(ctx) = &example.context else {
        return ContextLabel::None;
    };
    if let Some(gold) = ctx.gold {
        return if gold { ContextLabel::Gold } else { ContextLabel::Noisy };
    }
    let padded = format!(" {} ", normalize_answer(&ctx.text));
    let hit = example.answers.iter().any(|a| {
        let a = normalize_answer(a);
        !a.is_empty() && padded.contains(&format!(" {a} "))
    });
    if hit {
        ContextLabel::Gold
    } else {
        ContextLabel::Noisy
    }
}

/// Max, mean and first value of α over a generated sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaStats {
    pub max: f64,
    pub avg: f64,
    pub first: f64,
}

impl AlphaStats {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let (&first, _) = values.split_first().ok_or_else(|| invalid("α statistics need at least one step"))?;
        Ok(Self {
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            avg: values.iter().sum::<f64>() / values.len() as f64,
            first,
        })
    }

    pub fn get(&self, stat: AlphaStatistic) -> f64 {
        match stat {
            AlphaStatistic::Max => self.max,
            AlphaStatistic::Avg => self.avg,
            AlphaStatistic::First => self.first,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AlphaStatistic {
    Max,
    Avg,
    First,
}

impl AlphaStatistic {
    pub const ALL: [AlphaStatistic; 3] = [AlphaStatistic::Max, AlphaStatistic::Avg, AlphaStatistic::First];

    pub fn label(self) -> &'static str {
        match self {
            AlphaStatistic::Max => "Max",
            AlphaStatistic::Avg => "Avg.",
            AlphaStatistic::First => "First",
        }
    }
}

pub fn alpha_statistics(trace: &[AlphaTraceStep]) -> Result<AlphaStats> {
    let values = trace
        .iter()
        .map(|s| s.alpha.map(|a| a.value()).ok_or_else(|| invalid(format!("trace step {} carries no α", s.step))))
        .collect::<Result<Vec<_>>>()?;
    AlphaStats::from_values(&values)
}

/// Mann–Whitney AUROC: the probability that a random positive outscores a
/// random negative, ties counting one half. Uses mid-ranks, O(n log n).
pub fn auroc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(invalid(format!("{} scores but {} labels", scores.len(), positive.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(invalid("AUROC scores must be finite"));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!("AUROC needs both classes ({n_pos} positive, {n_neg} negative)")));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share their mean
        let mid_rank = (i + 1 + j) as f64 / 2.0;
        rank_sum_pos += mid_rank * order[i..j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// One decoded example, as written to `records.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub example_id: String,
    pub strategy: String,
    pub prediction: String,
    pub em_correct: bool,
    pub context_label: ContextLabel,
    #[serde(default)]
    pub knowledge_label: Option<KnowledgeLabel>,
    /// Present for adaptive strategies only.
    #[serde(default)]
    pub alpha_stats: Option<AlphaStats>,
    pub stop_reason: StopReason,
    pub trace: Vec<AlphaTraceStep>,
}

impl RunRecord {
    pub fn from_decode(example: &QAExample, strategy: &Strategy, result: DecodeResult) -> Result<Self> {
        let alpha_stats = if strategy.is_adaptive() { Some(alpha_statistics(&result.trace)?) } else { None };
        Ok(Self {
            example_id: example.id.clone(),
            strategy: result.strategy,
            em_correct: exact_match(&result.text, &example.answers)?,
            prediction: result.text,
            context_label: if strategy.uses_context() { label_context(example) } else { ContextLabel::None },
            knowledge_label: None,
            alpha_stats,
            stop_reason: result.stop_reason,
            trace: result.trace,
        })
    }

    pub fn is_known_noisy(&self) -> bool {
        self.knowledge_label == Some(KnowledgeLabel::Known) && self.context_label == ContextLabel::Noisy
    }

    pub fn is_unknown_gold(&self) -> bool {
        self.knowledge_label == Some(KnowledgeLabel::Unknown) && self.context_label == ContextLabel::Gold
    }
}

/// Known iff the closed-book run answered correctly.
pub fn label_knowledge(closed_book: &RunRecord) -> Result<KnowledgeLabel> {
    if closed_book.strategy != Strategy::RegCls.label() {
        return Err(invalid(format!("knowledge labels come from reg-cls records, got {}", closed_book.strategy)));
    }
    Ok(if closed_book.em_correct { KnowledgeLabel::Known } else { KnowledgeLabel::Unknown })
}

/// Sets `knowledge_label` on every record that has a closed-book companion.
pub fn attach_knowledge(records: &mut [RunRecord], closed_book: &[RunRecord]) -> Result<()> {
    let mut labels = HashMap::with_capacity(closed_book.len());
    for r in closed_book {
        labels.insert(r.example_id.as_str(), label_knowledge(r)?);
    }
    for r in records {
        r.knowledge_label = labels.get(r.example_id.as_str()).copied();
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetCounts {
    pub total: usize,
    pub gold: usize,
    pub noisy: usize,
    pub no_context: usize,
    pub known: usize,
    pub unknown: usize,
    pub known_noisy: usize,
    pub unknown_gold: usize,
}

/// Aggregate metrics for one strategy over one dataset. EM values are
/// percentages rounded to two decimals; `None` marks an empty subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub strategy: String,
    pub counts: SubsetCounts,
    pub em_all: f64,
    pub em_gold_subset: Option<f64>,
    pub em_noisy_subset: Option<f64>,
    pub em_known_noisy: Option<f64>,
    pub em_unknown_gold: Option<f64>,
    /// Computed over Known-noisy ∪ Unknown-gold with gold as the positive class.
    pub auroc_max: Option<f64>,
    pub auroc_avg: Option<f64>,
    pub auroc_first: Option<f64>,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn em_percent<'a>(records: impl Iterator<Item = &'a RunRecord>) -> (usize, Option<f64>) {
    let (mut n, mut correct) = (0usize, 0usize);
    for r in records {
        n += 1;
        correct += usize::from(r.em_correct);
    }
    let em = (n > 0).then(|| round2(100.0 * correct as f64 / n as f64));
    (n, em)
}

/// AUROC of each α statistic for separating gold from noisy contexts,
/// restricted to the Known-noisy and Unknown-gold subsets.
pub fn alpha_auroc(records: &[RunRecord]) -> Result<Vec<(AlphaStatistic, f64)>> {
    let subset: Vec<&RunRecord> = records.iter().filter(|r| r.is_known_noisy() || r.is_unknown_gold()).collect();
    let mut stats = Vec::with_capacity(subset.len());
    for r in &subset {
        stats.push(
            r.alpha_stats
                .ok_or_else(|| invalid(format!("record {} ({}) has no α statistics", r.example_id, r.strategy)))?,
        );
    }
    let labels: Vec<bool> = subset.iter().map(|r| r.context_label == ContextLabel::Gold).collect();
    AlphaStatistic::ALL
        .into_iter()
        .map(|stat| {
            let scores: Vec<f64> = stats.iter().map(|s| s.get(stat)).collect();
            auroc(&scores, &labels).map(|a| (stat, a))
        })
        .collect()
}

pub fn summarize(records: &[RunRecord]) -> Result<RunSummary> {
    let first = records.first().ok_or_else(|| invalid("cannot summarize zero records"))?;
    if let Some(other) = records.iter().find(|r| r.strategy != first.strategy) {
        return Err(invalid(format!("records mix strategies {} and {}", first.strategy, other.strategy)));
    }

    let (total, em_all) = em_percent(records.iter());
    let (gold, em_gold) = em_percent(records.iter().filter(|r| r.context_label == ContextLabel::Gold));
    let (noisy, em_noisy) = em_percent(records.iter().filter(|r| r.context_label == ContextLabel::Noisy));
    let (known_noisy, em_known_noisy) = em_percent(records.iter().filter(|r| r.is_known_noisy()));
    let (unknown_gold, em_unknown_gold) = em_percent(records.iter().filter(|r| r.is_unknown_gold()));
    let counts = SubsetCounts {
        total,
        gold,
        noisy,
        no_context: records.iter().filter(|r| r.context_label == ContextLabel::None).count(),
        known: records.iter().filter(|r| r.knowledge_label == Some(KnowledgeLabel::Known)).count(),
        unknown: records.iter().filter(|r| r.knowledge_label == Some(KnowledgeLabel::Unknown)).count(),
        known_noisy,
        unknown_gold,
    };

    let aurocs = if records.iter().all(|r| r.alpha_stats.is_some()) { alpha_auroc(records).ok() } else { None };
    let pick = |stat| aurocs.as_ref().and_then(|v| v.iter().find(|(s, _)| *s == stat).map(|(_, a)| *a));

    Ok(RunSummary {
        strategy: first.strategy.clone(),
        counts,
        em_all: em_all.unwrap_or(0.0),
        em_gold_subset: em_gold,
        em_noisy_subset: em_noisy,
        em_known_noisy,
        em_unknown_gold,
        auroc_max: pick(AlphaStatistic::Max),
        auroc_avg: pick(AlphaStatistic::Avg),
        auroc_first: pick(AlphaStatistic::First),
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into())
}

fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String]| {
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(out, "{c:<w$}");
            } else {
                let _ = write!(out, "  {c:>w$}");
            }
        }
        out.push('\n');
    };
    line(&mut out, &header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    let rule: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    out.push_str(&"-".repeat(rule));
    out.push('\n');
    for row in rows {
        line(&mut out, row);
    }
    out
}

/// Plain-text EM table, one row per summary; `-` marks an empty subset.
pub fn format_summary_table(summaries: &[RunSummary]) -> String {
    let rows: Vec<Vec<String>> = summaries
        .iter()
        .map(|s| {
            vec![
                s.strategy.clone(),
                format!("{:.2}", s.em_all),
                cell(s.em_gold_subset),
                cell(s.em_noisy_subset),
                cell(s.em_known_noisy),
                cell(s.em_unknown_gold),
                s.counts.total.to_string(),
            ]
        })
        .collect();
    render_table(&["Method", "All", "Gold", "Noisy", "Known-noisy", "Unknown-gold", "N"], &rows)
}

/// A method name with its AUROC per α statistic.
pub type MethodAuroc = (String, Vec<(AlphaStatistic, f64)>);

/// AUROC table with one row per (statistic, method), values ×100.
pub fn format_auroc_table(methods: &[MethodAuroc]) -> String {
    let mut rows = Vec::new();
    for stat in AlphaStatistic::ALL {
        for (method, values) in methods {
            let v = values.iter().find(|(s, _)| *s == stat).map(|(_, a)| a * 100.0);
            rows.push(vec![stat.label().to_string(), method.clone(), cell(v)]);
        }
    }
    render_table(&["Stat", "Method", "AUROC"], &rows)
}
