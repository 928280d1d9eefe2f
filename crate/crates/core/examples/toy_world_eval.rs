//! Every decoding method on the shipped 400-example toy fixture.

use std::path::PathBuf;

use acd::evaluation::{attach_knowledge, format_summary_table, summarize};
use acd::harness::{BackendSpec, RunConfig, Workload};
use acd::{Method, Strategy};

fn main() -> acd::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy");
    let mut config = RunConfig::new(
        Method::Acd,
        dir.join("dataset.jsonl"),
        BackendSpec::Toy(dir.join("toy_world.json")),
        std::env::temp_dir(),
    );
    config.fewshots = Some(dir.join("fewshots.jsonl"));
    config.adversarial_context = Some(dir.join("adversarial.txt"));
    config.workers = 4;
    let workload = Workload::load(&config)?;

    let closed = workload.evaluate(&Strategy::RegCls)?;
    let mut summaries = Vec::new();
    for method in Method::ALL {
        let alpha = match method {
            Method::Cad => Some(0.5),
            Method::MicdF => Some(1.0),
            _ => None,
        };
        let mut records = workload.evaluate(&Strategy::from_method(method, alpha)?)?;
        attach_knowledge(&mut records, &closed)?;
        summaries.push(summarize(&records)?);
    }
    print!("{}", format_summary_table(&summaries));
    Ok(())
}
