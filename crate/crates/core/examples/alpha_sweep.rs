//! Fixed-α interpolation from closed book (0) to open book (1), with the
//! adaptive run as reference.

use std::path::PathBuf;

use acd::harness::{sweep_csv, sweep_with, BackendSpec, RunConfig, Workload};
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
    config.workers = 4;
    let workload = Workload::load(&config)?;
    let closed = workload.evaluate(&Strategy::RegCls)?;

    let grid: Vec<f64> = (0..=10).map(|i| f64::from(i) / 10.0).collect();
    let out = sweep_with(&workload, &grid, &closed)?;
    print!("{}", sweep_csv(&out.rows)?);
    Ok(())
}
