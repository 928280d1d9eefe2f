//! The adaptive weight from two entropies, then the same quantity read off a
//! live decoding step on the toy fixture.

use std::path::PathBuf;

use acd::harness::{BackendSpec, RunConfig, Workload};
use acd::numerics::{adaptive_alpha, combine_contrastive, softmax, Entropy, LogitVector};
use acd::{Method, Strategy};

fn main() -> acd::Result<()> {
    for (h, hc) in [(2.9160, 5.4562), (6.6748, 1.5628)] {
        let alpha = adaptive_alpha(Entropy::new(h)?, Entropy::new(hc)?);
        println!("H={h:.4}  Hc={hc:.4}  ->  alpha={:.4}", alpha.value());
    }

    // a confident closed-book guess against a hesitant context
    let z = LogitVector::new(vec![4.0, 1.0, 0.5, 0.0])?;
    let zc = LogitVector::new(vec![1.0, 1.2, 1.1, 1.0])?;
    let (p, pc) = (softmax(&z), softmax(&zc));
    let alpha = adaptive_alpha(acd::numerics::entropy(&p), acd::numerics::entropy(&pc));
    let mixed = softmax(&combine_contrastive(&z, &zc, alpha)?);
    println!("\nalpha={:.4}  mixed={:?}", alpha.value(), mixed.top_k(2));

    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy");
    let mut config = RunConfig::new(
        Method::Acd,
        dir.join("dataset.jsonl"),
        BackendSpec::Toy(dir.join("toy_world.json")),
        std::env::temp_dir(),
    );
    config.fewshots = Some(dir.join("fewshots.jsonl"));
    let workload = Workload::load(&config)?;
    let (record, table) = workload.trace("toy-003", &Strategy::Acd)?;
    println!("\n{table}");
    println!("alpha stats: {:?}", record.alpha_stats);
    Ok(())
}
