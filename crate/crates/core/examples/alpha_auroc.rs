//! How well each α statistic separates gold from noisy contexts, for the
//! adaptive weight and the MICD rule.

use acd::dataio::{generate_toy_dataset, ToyWorldSpec};
use acd::evaluation::{attach_knowledge, format_auroc_table, AlphaStatistic};
use acd::harness::{auroc_by_strategy, shuffled_label_auroc, Workload};
use acd::Strategy;

fn main() -> acd::Result<()> {
    let fixture = generate_toy_dataset(&ToyWorldSpec::default(), 7)?;
    let workload = Workload::from_fixture(&fixture)?;
    let closed = workload.evaluate(&Strategy::RegCls)?;

    let mut records = Vec::new();
    for strategy in [Strategy::Acd, Strategy::MicdD] {
        let mut r = workload.evaluate(&strategy)?;
        attach_knowledge(&mut r, &closed)?;
        records.extend(r);
    }
    print!("{}", format_auroc_table(&auroc_by_strategy(&records)?));

    let acd_only: Vec<_> = records.iter().filter(|r| r.strategy == "acd").cloned().collect();
    let control = shuffled_label_auroc(&acd_only, AlphaStatistic::First, 100, 7)?;
    println!("shuffled labels: {:.2}", control * 100.0);
    Ok(())
}
