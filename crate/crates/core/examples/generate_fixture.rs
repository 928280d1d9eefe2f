//! Writes a custom toy fixture: mostly unknown questions, mostly gold contexts.

use acd::dataio::{Quadrant, ToyWorldSpec};
use acd::harness::cmd_generate_toy;

fn main() -> acd::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "toy-fixture".into());
    let spec = ToyWorldSpec { examples: 100, ..Default::default() }.with_mix(0.2, 0.8);
    let fixture = cmd_generate_toy(&spec, 11, out.as_ref())?;
    for q in Quadrant::ALL {
        let n = fixture.examples.iter().filter(|e| Quadrant::of(e) == Some(q)).count();
        println!("{q}: {n}");
    }
    println!("wrote {out}");
    Ok(())
}
