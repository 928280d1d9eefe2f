//! Entity-swapped gold contexts: does decoding follow the passage or the
//! model's memory?

use acd::dataio::{generate_toy_dataset, knowledge_conflict_view, ToyWorldSpec};
use acd::evaluation::{format_summary_table, summarize};
use acd::harness::Workload;
use acd::Strategy;

fn main() -> acd::Result<()> {
    let fixture = generate_toy_dataset(&ToyWorldSpec { examples: 200, ..Default::default() }, 7)?;
    let mut workload = Workload::from_fixture(&fixture)?;
    workload.examples = knowledge_conflict_view(&fixture.examples)?;
    let e = &workload.examples[0];
    println!("{} -> {:?}  (was {})\n", e.context.as_ref().unwrap().text, e.answers, e.meta["original_answers"]);

    let mut summaries = Vec::new();
    for strategy in
        [Strategy::RegCls, Strategy::RegOpn, Strategy::from_method(acd::Method::Cad, Some(0.5))?, Strategy::Acd]
    {
        summaries.push(summarize(&workload.evaluate(&strategy)?)?);
    }
    print!("{}", format_summary_table(&summaries));
    Ok(())
}
