use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use acd::dataio::ToyWorldSpec;
use acd::decoding::{Method, DEFAULT_MAX_TOKENS};
use acd::harness::{self, BackendSpec, RunConfig};

#[derive(Parser)]
#[command(name = "acd", version, about = "Adaptive contrastive decoding for retrieval-augmented QA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode a dataset with one method and write records and a summary.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Reuse these reg-cls records for knowledge labels instead of a paired run.
        #[arg(long)]
        closed_book_records: Option<PathBuf>,
    },
    /// Fixed-α interpolation sweep plus an ACD reference row.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        closed_book_records: Option<PathBuf>,
    },
    /// AUROC of α statistics against context noisiness.
    Auroc {
        /// records.jsonl files from acd and/or micd-d runs.
        #[arg(long = "records", required = true)]
        records: Vec<PathBuf>,
        /// Also report a shuffled-label control averaged over N permutations.
        #[arg(long, num_args = 0..=1, default_missing_value = "100")]
        shuffle_control: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Per-step entropy, α and top tokens for one example.
    Trace {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        id: String,
    },
    /// Write a seeded toy-world fixture directory.
    GenerateToy {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 400)]
        examples: usize,
        #[arg(long, default_value_t = 0.5)]
        fraction_known: f64,
        #[arg(long, default_value_t = 0.5)]
        fraction_gold: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Toy,
    Remote,
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long)]
    method: Option<Method>,
    /// Fixed α for cad/micd-f; a comma-separated grid for sweep.
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    fewshots: Option<PathBuf>,
    #[arg(long)]
    template_closed: Option<PathBuf>,
    #[arg(long)]
    template_open: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "toy")]
    backend: BackendKind,
    #[arg(long)]
    toy_config: Option<PathBuf>,
    #[arg(long, env = "ACD_REMOTE_URL")]
    remote_url: Option<String>,
    #[arg(long)]
    adversarial_context: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_TOKENS)]
    max_tokens: usize,
    /// Defaults to the number of available cores.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl CommonArgs {
    fn config(self, method: Method, alpha: Option<f64>) -> anyhow::Result<RunConfig> {
        let backend = match self.backend {
            BackendKind::Toy => BackendSpec::Toy(self.toy_config.context("the toy backend needs --toy-config")?),
            BackendKind::Remote => BackendSpec::Remote(self.remote_url),
        };
        let workers = match self.workers {
            Some(n) => n,
            None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        };
        Ok(RunConfig {
            method,
            alpha,
            data: self.data,
            fewshots: self.fewshots,
            template_closed: self.template_closed,
            template_open: self.template_open,
            backend,
            adversarial_context: self.adversarial_context,
            max_tokens: self.max_tokens,
            workers,
            seed: self.seed,
            out: self.out,
            closed_book_records: None,
        })
    }

    fn single(self) -> anyhow::Result<RunConfig> {
        let Some(method) = self.method else { bail!("--method is required") };
        let alpha = match self.alpha.as_slice() {
            [] => None,
            [a] => Some(*a),
            _ => bail!("--alpha takes a single value outside sweep"),
        };
        self.config(method, alpha)
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { common, closed_book_records } => {
            let mut config = common.single()?;
            config.closed_book_records = closed_book_records;
            let out = harness::cmd_run(&config)?;
            print!("{}", out.table);
            println!("wrote {}", config.out.display());
        }
        Command::Sweep { common, closed_book_records } => {
            if common.method.is_some() {
                bail!("sweep always interpolates; drop --method");
            }
            let grid = common.alpha.clone();
            let mut config = common.config(Method::Acd, None)?;
            config.closed_book_records = closed_book_records;
            let out = harness::cmd_sweep(&config, &grid)?;
            print!("{}", acd::evaluation::format_summary_table(&out.summaries));
            println!("wrote {}", config.out.join(harness::SWEEP_FILE).display());
        }
        Command::Auroc { records, shuffle_control, seed } => {
            let report = harness::cmd_auroc(&records, shuffle_control, seed)?;
            print!("{}", report.table);
        }
        Command::Trace { common, id } => {
            let config = common.single()?;
            print!("{}", harness::cmd_trace(&config, &id)?);
        }
        Command::GenerateToy { seed, examples, fraction_known, fraction_gold, out } => {
            let spec = ToyWorldSpec { examples, ..Default::default() }.with_mix(fraction_known, fraction_gold);
            let fixture = harness::cmd_generate_toy(&spec, seed, &out)?;
            println!("wrote {} examples to {}", fixture.examples.len(), out.display());
        }
    }
    Ok(())
}
