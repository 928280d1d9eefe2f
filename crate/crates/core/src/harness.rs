//! Batch commands behind the `acd` binary: run, sweep, auroc, trace and
//! toy fixture generation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::backend::{LogitBackend, RemoteBackend, TokenId, ToyBackend, REMOTE_URL_ENV};
use crate::dataio::{
    generate_toy_dataset, load_dataset, load_fewshots, FewShot, PromptTemplate, QAExample, ToyFixture, ToyWorldSpec,
};
use crate::decoding::{decode, AlphaTraceStep, DecodeLimits, Method, PromptSet, Strategy, TopToken};
use crate::error::{invalid, Error, Result};
use crate::evaluation::{
    alpha_auroc, attach_knowledge, auroc, format_auroc_table, format_summary_table, summarize, AlphaStatistic,
    ContextLabel, MethodAuroc, RunRecord, RunSummary,
};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TABLE_FILE: &str = "summary.txt";
pub const CLOSED_BOOK_RECORDS_FILE: &str = "records_reg-cls.jsonl";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const SWEEP_SUMMARIES_FILE: &str = "sweep_summaries.json";

#[derive(Clone, Debug, PartialEq)]
pub enum BackendSpec {
    /// Path to a toy world JSON file.
    Toy(PathBuf),
    /// Base URL of a logit server; `None` falls back to `ACD_REMOTE_URL`.
    Remote(Option<String>),
}

/// Everything a batch command needs besides its own arguments.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub alpha: Option<f64>,
    pub data: PathBuf,
    pub fewshots: Option<PathBuf>,
    pub template_closed: Option<PathBuf>,
    pub template_open: Option<PathBuf>,
    pub backend: BackendSpec,
    pub adversarial_context: Option<PathBuf>,
    pub max_tokens: usize,
    pub workers: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Existing reg-cls records to label knowledge with instead of a paired run.
    pub closed_book_records: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(method: Method, data: impl Into<PathBuf>, backend: BackendSpec, out: impl Into<PathBuf>) -> Self {
        Self {
            method,
            alpha: None,
            data: data.into(),
            fewshots: None,
            template_closed: None,
            template_open: None,
            backend,
            adversarial_context: None,
            max_tokens: crate::decoding::DEFAULT_MAX_TOKENS,
            workers: 1,
            seed: 0,
            out: out.into(),
            closed_book_records: None,
        }
    }

    pub fn strategy(&self) -> Result<Strategy> {
        Strategy::from_method(self.method, self.alpha)
    }

    pub fn validate(&self) -> Result<()> {
        self.strategy()?;
        self.check_common()?;
        if self.method.needs_adversarial() && self.adversarial_context.is_none() {
            return Err(invalid(format!(
                "method {} needs an adversarial context file (--adversarial-context)",
                self.method
            )));
        }
        Ok(())
    }

    fn check_common(&self) -> Result<()> {
        if self.max_tokens == 0 {
            return Err(invalid("--max-tokens must be at least 1"));
        }
        if self.workers == 0 {
            return Err(invalid("--workers must be at least 1"));
        }
        if self.template_closed.is_some() != self.template_open.is_some() {
            return Err(invalid("--template-closed and --template-open must be given together"));
        }
        Ok(())
    }
}

pub fn build_backend(spec: &BackendSpec) -> Result<Box<dyn LogitBackend>> {
    match spec {
        BackendSpec::Toy(path) => Ok(Box::new(ToyBackend::from_path(path)?)),
        BackendSpec::Remote(url) => {
            let url = match url {
                Some(u) => u.clone(),
                None => std::env::var(REMOTE_URL_ENV)
                    .map_err(|_| invalid(format!("remote backend needs --remote-url or {REMOTE_URL_ENV}")))?,
            };
            let backend = RemoteBackend::new(url);
            // fail early when the server is unreachable
            backend.model_info()?;
            Ok(Box::new(backend))
        }
    }
}

/// A loaded dataset bound to a backend, ready to decode.
pub struct Workload {
    pub backend: Box<dyn LogitBackend>,
    pub template: PromptTemplate,
    pub fewshots: Vec<FewShot>,
    pub examples: Vec<QAExample>,
    pub adversarial: Option<String>,
    pub limits: DecodeLimits,
    pub workers: usize,
}

impl Workload {
    pub fn load(config: &RunConfig) -> Result<Self> {
        config.check_common()?;
        let template = match (&config.template_closed, &config.template_open) {
            (Some(c), Some(o)) => PromptTemplate::from_files(c, o)?,
            _ => PromptTemplate::default(),
        };
        let fewshots = match &config.fewshots {
            Some(p) => load_fewshots(p)?,
            None => Vec::new(),
        };
        let adversarial = match &config.adversarial_context {
            Some(p) => Some(fs::read_to_string(p)?.trim().to_string()),
            None => None,
        };
        Ok(Self {
            backend: build_backend(&config.backend)?,
            template,
            fewshots,
            examples: load_dataset(&config.data)?,
            adversarial,
            limits: DecodeLimits { max_tokens: config.max_tokens },
            workers: config.workers,
        })
    }

    /// Builds a workload from in-memory parts.
    pub fn from_parts(
        backend: Box<dyn LogitBackend>,
        fewshots: Vec<FewShot>,
        examples: Vec<QAExample>,
        adversarial: Option<String>,
    ) -> Self {
        Self {
            backend,
            template: PromptTemplate::default(),
            fewshots,
            examples,
            adversarial,
            limits: DecodeLimits::default(),
            workers: 1,
        }
    }

    /// Toy backend, examples, few-shots and adversarial passage of a fixture.
    pub fn from_fixture(fixture: &ToyFixture) -> Result<Self> {
        Ok(Self::from_parts(
            Box::new(fixture.backend()?),
            fixture.fewshot_pairs(),
            fixture.examples.clone(),
            Some(fixture.adversarial_passage.clone()),
        ))
    }

    fn example(&self, id: &str) -> Result<&QAExample> {
        self.examples.iter().find(|e| e.id == id).ok_or_else(|| invalid(format!("no example with id {id:?}")))
    }

    fn decode_one(&self, example: &QAExample, strategy: &Strategy) -> Result<RunRecord> {
        let adversarial = if strategy.sides().contains(&crate::decoding::Side::Adversarial) {
            Some(
                self.adversarial
                    .as_deref()
                    .ok_or_else(|| invalid(format!("{} needs an adversarial context", strategy.label())))?,
            )
        } else {
            None
        };
        let prompts =
            PromptSet::for_example(self.backend.as_ref(), &self.template, &self.fewshots, example, adversarial)?;
        let result =
            decode(self.backend.as_ref(), &prompts, strategy, self.limits).map_err(|e| annotate(e, &example.id))?;
        RunRecord::from_decode(example, strategy, result)
    }

    /// Decodes every example; records come back sorted by example id.
    pub fn evaluate(&self, strategy: &Strategy) -> Result<Vec<RunRecord>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
        let mut records = pool
            .install(|| self.examples.par_iter().map(|e| self.decode_one(e, strategy)).collect::<Result<Vec<_>>>())?;
        records.sort_by(|a, b| a.example_id.cmp(&b.example_id));
        Ok(records)
    }

    /// Decodes one example and renders its trace.
    pub fn trace(&self, id: &str, strategy: &Strategy) -> Result<(RunRecord, String)> {
        let record = self.decode_one(self.example(id)?, strategy)?;
        let text = format_trace(self.backend.as_ref(), &record)?;
        Ok((record, text))
    }
}

fn annotate(err: Error, id: &str) -> Error {
    match err {
        Error::InvalidInput(m) => Error::InvalidInput(format!("example {id}: {m}")),
        other => other,
    }
}

pub fn records_to_jsonl(records: &[RunRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() }))
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Records and summary of one `run`.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<RunRecord>,
    pub summary: RunSummary,
    pub table: String,
}

/// Closed-book records: loaded from `closed_book_records` when given,
/// otherwise decoded.
pub fn closed_book_records(workload: &Workload, config: &RunConfig) -> Result<Vec<RunRecord>> {
    match &config.closed_book_records {
        Some(path) => load_records(path),
        None => workload.evaluate(&Strategy::RegCls),
    }
}

/// Evaluates `strategy` and labels knowledge against `closed_book`.
pub fn run_with(workload: &Workload, strategy: &Strategy, closed_book: &[RunRecord]) -> Result<RunOutput> {
    let mut records = workload.evaluate(strategy)?;
    attach_knowledge(&mut records, closed_book)?;
    let summary = summarize(&records)?;
    let table = format_summary_table(std::slice::from_ref(&summary));
    Ok(RunOutput { records, summary, table })
}

/// `acd run`: writes `records.jsonl`, `summary.json` and `summary.txt`
/// (plus the paired closed-book records when they were decoded here).
pub fn cmd_run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let strategy = config.strategy()?;
    let workload = Workload::load(config)?;
    let closed = if strategy == Strategy::RegCls && config.closed_book_records.is_none() {
        None
    } else {
        Some(closed_book_records(&workload, config)?)
    };
    let output = match &closed {
        Some(c) => run_with(&workload, &strategy, c)?,
        None => {
            let mut records = workload.evaluate(&strategy)?;
            let companion = records.clone();
            attach_knowledge(&mut records, &companion)?;
            let summary = summarize(&records)?;
            let table = format_summary_table(std::slice::from_ref(&summary));
            RunOutput { records, summary, table }
        }
    };

    fs::create_dir_all(&config.out)?;
    fs::write(config.out.join(RECORDS_FILE), records_to_jsonl(&output.records)?)?;
    write_json(&config.out.join(SUMMARY_FILE), &output.summary)?;
    fs::write(config.out.join(TABLE_FILE), &output.table)?;
    if let (Some(c), None) = (&closed, &config.closed_book_records) {
        if strategy != Strategy::RegCls {
            fs::write(config.out.join(CLOSED_BOOK_RECORDS_FILE), records_to_jsonl(c)?)?;
        }
    }
    Ok(output)
}

/// One line of `sweep.csv`. The ACD row has no α and is the reference.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub label: String,
    pub alpha: Option<f64>,
    pub em_all: f64,
    pub em_gold: Option<f64>,
    pub em_noisy: Option<f64>,
}

impl SweepRow {
    fn from_summary(alpha: Option<f64>, s: &RunSummary) -> Self {
        Self {
            label: s.strategy.clone(),
            alpha,
            em_all: s.em_all,
            em_gold: s.em_gold_subset,
            em_noisy: s.em_noisy_subset,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub summaries: Vec<RunSummary>,
    /// Records per grid point, in grid order.
    pub records: Vec<Vec<RunRecord>>,
}

pub fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("the α grid is empty"));
    }
    if let Some(bad) = grid.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(invalid(format!("grid value {bad} is outside [0, 1]")));
    }
    Ok(())
}

/// Interpolated fixed-α runs over `grid`, followed by one ACD reference run.
pub fn sweep_with(workload: &Workload, grid: &[f64], closed_book: &[RunRecord]) -> Result<SweepOutput> {
    check_grid(grid)?;
    let mut out = SweepOutput { rows: Vec::new(), summaries: Vec::new(), records: Vec::new() };
    for &alpha in grid {
        let run = run_with(workload, &Strategy::interpolate(alpha)?, closed_book)?;
        out.rows.push(SweepRow::from_summary(Some(alpha), &run.summary));
        out.summaries.push(run.summary);
        out.records.push(run.records);
    }
    let acd = run_with(workload, &Strategy::Acd, closed_book)?;
    out.rows.push(SweepRow::from_summary(None, &acd.summary));
    out.summaries.push(acd.summary);
    Ok(out)
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| invalid(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| invalid(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| invalid(format!("csv: {e}")))
}

/// `acd sweep`: writes `sweep.csv` and `sweep_summaries.json`.
pub fn cmd_sweep(config: &RunConfig, grid: &[f64]) -> Result<SweepOutput> {
    check_grid(grid)?;
    let workload = Workload::load(config)?;
    let closed = closed_book_records(&workload, config)?;
    let out = sweep_with(&workload, grid, &closed)?;
    fs::create_dir_all(&config.out)?;
    fs::write(config.out.join(SWEEP_FILE), sweep_csv(&out.rows)?)?;
    write_json(&config.out.join(SWEEP_SUMMARIES_FILE), &out.summaries)?;
    Ok(out)
}

/// AUROC per α statistic, one entry per strategy found in `records`.
pub fn auroc_by_strategy(records: &[RunRecord]) -> Result<Vec<MethodAuroc>> {
    let mut groups: BTreeMap<&str, Vec<RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.strategy.as_str()).or_default().push(r.clone());
    }
    groups
        .into_iter()
        .map(|(name, recs)| {
            alpha_auroc(&recs).map(|v| (name.to_string(), v)).map_err(|e| match e {
                Error::UndefinedMetric(m) => {
                    Error::UndefinedMetric(format!("{name}: {m} after restricting to Known-noisy and Unknown-gold"))
                }
                other => other,
            })
        })
        .collect()
}

/// Mean AUROC of `stat` after randomly permuting the gold/noisy labels of
/// every record with a context, over `permutations` seeded shuffles.
pub fn shuffled_label_auroc(
    records: &[RunRecord],
    stat: AlphaStatistic,
    permutations: usize,
    seed: u64,
) -> Result<f64> {
    if permutations == 0 {
        return Err(invalid("need at least one permutation"));
    }
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for r in records.iter().filter(|r| r.context_label != ContextLabel::None) {
        let s = r.alpha_stats.ok_or_else(|| invalid(format!("record {} has no α statistics", r.example_id)))?;
        scores.push(s.get(stat));
        labels.push(r.context_label == ContextLabel::Gold);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..permutations {
        labels.shuffle(&mut rng);
        total += auroc(&scores, &labels)?;
    }
    Ok(total / permutations as f64)
}

pub const DEFAULT_SHUFFLE_PERMUTATIONS: usize = 100;

#[derive(Clone, Debug)]
pub struct AurocReport {
    pub methods: Vec<MethodAuroc>,
    /// Shuffled-label control per method, on the first-step statistic.
    pub controls: Vec<(String, f64)>,
    pub table: String,
}

/// `acd auroc`: AUROC table over one or more record files.
pub fn cmd_auroc(paths: &[PathBuf], shuffle_permutations: Option<usize>, seed: u64) -> Result<AurocReport> {
    if paths.is_empty() {
        return Err(invalid("auroc needs at least one records file"));
    }
    let mut records = Vec::new();
    for p in paths {
        records.extend(load_records(p)?);
    }
    let methods = auroc_by_strategy(&records)?;
    let mut table = format_auroc_table(&methods);
    let mut controls = Vec::new();
    if let Some(n) = shuffle_permutations {
        for (name, _) in &methods {
            let recs: Vec<RunRecord> = records.iter().filter(|r| &r.strategy == name).cloned().collect();
            let v = shuffled_label_auroc(&recs, AlphaStatistic::First, n, seed)?;
            let _ = writeln!(table, "shuffled-label control ({name}, First, {n} permutations): {:.2}", v * 100.0);
            controls.push((name.clone(), v));
        }
    }
    Ok(AurocReport { methods, controls, table })
}

fn token_label(backend: &dyn LogitBackend, id: TokenId) -> String {
    let text = crate::backend::TokenSequence::new(vec![id]);
    match backend.detokenize(&text) {
        Ok(t) if !t.trim().is_empty() => t.trim().to_string(),
        _ => format!("#{id}"),
    }
}

fn format_top(backend: &dyn LogitBackend, top: &[TopToken]) -> String {
    top.iter().map(|t| format!("{}:{:.4}", token_label(backend, t.id), t.prob)).collect::<Vec<_>>().join(" ")
}

/// Per-step table. Entropy and α columns appear only when the strategy
/// produced them.
pub fn format_trace(backend: &dyn LogitBackend, record: &RunRecord) -> Result<String> {
    let steps: &[AlphaTraceStep] = &record.trace;
    let has_h = steps.iter().any(|s| s.h_closed.is_some() || s.h_open.is_some());
    let has_alpha = steps.iter().any(|s| s.alpha.is_some());
    let mut out = String::new();
    let _ = writeln!(
        out,
        "example {}  strategy {}  prediction {:?}  stop {:?}",
        record.example_id, record.strategy, record.prediction, record.stop_reason
    );
    let mut header = vec!["t"];
    if has_h {
        header.extend(["H", "Hc"]);
    }
    if has_alpha {
        header.push("alpha");
    }
    header.extend(["chosen", "top-5 closed", "top-5 open"]);
    let _ = writeln!(out, "{}", header.join("\t"));
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    for s in steps {
        let mut row = vec![s.step.to_string()];
        if has_h {
            row.push(opt(s.h_closed.map(|h| h.value())));
            row.push(opt(s.h_open.map(|h| h.value())));
        }
        if has_alpha {
            row.push(opt(s.alpha.map(|a| a.value())));
        }
        row.push(token_label(backend, s.chosen_token));
        row.push(format_top(backend, &s.top_closed));
        row.push(format_top(backend, &s.top_open));
        let _ = writeln!(out, "{}", row.join("\t"));
    }
    Ok(out)
}

/// `acd trace`: prints one example's decoding trace and saves it as
/// `trace_<id>.txt` in the output directory.
pub fn cmd_trace(config: &RunConfig, id: &str) -> Result<String> {
    config.validate()?;
    let workload = Workload::load(config)?;
    let (_, text) = workload.trace(id, &config.strategy()?)?;
    fs::create_dir_all(&config.out)?;
    fs::write(config.out.join(format!("trace_{id}.txt")), &text)?;
    Ok(text)
}

/// `acd generate-toy`: writes a fixture directory.
pub fn cmd_generate_toy(spec: &ToyWorldSpec, seed: u64, out: &Path) -> Result<ToyFixture> {
    let fixture = generate_toy_dataset(spec, seed)?;
    fixture.write_to(out)?;
    Ok(fixture)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ToyFixture {
        generate_toy_dataset(&ToyWorldSpec { examples: 24, ..Default::default() }, 3).unwrap()
    }

    #[test]
    fn grid_checks() {
        assert!(check_grid(&[]).is_err());
        assert!(check_grid(&[0.0, 1.2]).is_err());
        check_grid(&[0.0, 0.5, 1.0]).unwrap();
    }

    #[test]
    fn config_validation() {
        let mut c = RunConfig::new(Method::MicdF, "d", BackendSpec::Toy("w".into()), "o");
        c.alpha = Some(1.0);
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("adversarial"), "{err}");
        c.method = Method::Acd;
        assert!(c.validate().is_err(), "alpha is forbidden for acd");
        c.alpha = None;
        c.validate().unwrap();
        c.template_open = Some("x".into());
        assert!(c.validate().is_err());
    }

    #[test]
    fn sweep_shape_and_endpoints() {
        let f = small();
        let w = Workload::from_fixture(&f).unwrap();
        let closed = w.evaluate(&Strategy::RegCls).unwrap();
        let open = w.evaluate(&Strategy::RegOpn).unwrap();
        let out = sweep_with(&w, &[0.0, 0.5, 1.0], &closed).unwrap();
        assert_eq!(out.rows.len(), 4);
        assert_eq!(out.rows[3].label, "acd");
        assert_eq!(out.rows[3].alpha, None);
        let preds = |rs: &[RunRecord]| rs.iter().map(|r| r.prediction.clone()).collect::<Vec<_>>();
        assert_eq!(preds(&out.records[0]), preds(&closed));
        assert_eq!(preds(&out.records[2]), preds(&open));
        let csv = sweep_csv(&out.rows).unwrap();
        assert_eq!(csv.lines().next().unwrap(), "label,alpha,em_all,em_gold,em_noisy");
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn records_are_sorted_and_worker_count_is_irrelevant() {
        let f = small();
        let mut w = Workload::from_fixture(&f).unwrap();
        let one = w.evaluate(&Strategy::Acd).unwrap();
        w.workers = 4;
        let four = w.evaluate(&Strategy::Acd).unwrap();
        assert_eq!(one, four);
        assert!(one.windows(2).all(|p| p[0].example_id < p[1].example_id));
    }

    #[test]
    fn trace_columns() {
        let f = small();
        let w = Workload::from_fixture(&f).unwrap();
        let id = f.examples[0].id.clone();
        let (_, text) = w.trace(&id, &Strategy::RegCls).unwrap();
        assert!(!text.lines().nth(1).unwrap().contains("alpha"));
        let (_, text) = w.trace(&id, &Strategy::Acd).unwrap();
        assert!(text.lines().nth(1).unwrap().contains("alpha"));
        assert!(w.trace("missing", &Strategy::Acd).is_err());
    }

    #[test]
    fn remote_without_url_is_an_error() {
        if std::env::var(REMOTE_URL_ENV).is_err() {
            assert!(build_backend(&BackendSpec::Remote(None)).is_err());
        }
    }
}
