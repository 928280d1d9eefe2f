//! Step-by-step trace of one decode, driven directly through the decoding API.

use acd::dataio::{generate_toy_dataset, PromptTemplate, Quadrant, ToyWorldSpec};
use acd::decoding::{decode, DecodeLimits, PromptSet};
use acd::{LogitBackend, Strategy};

fn main() -> acd::Result<()> {
    let fixture = generate_toy_dataset(&ToyWorldSpec { examples: 40, ..Default::default() }, 7)?;
    let backend = fixture.backend()?;
    // a known answer against a distractor the context barely commits to
    let weak = |id: &str| {
        fixture
            .world
            .contexts
            .iter()
            .any(|c| c.id == format!("{id}-ctx") && c.asserted_answer.is_some() && c.relevance < 0.5)
    };
    let example = fixture
        .examples
        .iter()
        .find(|e| Quadrant::of(e) == Some(Quadrant::KnownNoisy) && weak(&e.id))
        .expect("fixture has a known-noisy example");
    println!("Q: {}\nC: {}\ngold: {:?}\n", example.question, example.context.as_ref().unwrap().text, example.answers);

    let prompts =
        PromptSet::for_example(&backend, &PromptTemplate::default(), &fixture.fewshot_pairs(), example, None)?;
    for strategy in [Strategy::RegCls, Strategy::RegOpn, Strategy::Acd] {
        let out = decode(&backend, &prompts, &strategy, DecodeLimits::default())?;
        println!("{:8} {:?} ({:?})", out.strategy, out.text, out.stop_reason);
        for step in &out.trace {
            let word = backend.detokenize(&vec![step.chosen_token].into())?;
            match step.alpha {
                Some(a) => println!("  t={} alpha={:.4} -> {word}", step.step, a.value()),
                None => println!("  t={} -> {word}", step.step),
            }
        }
    }
    Ok(())
}
