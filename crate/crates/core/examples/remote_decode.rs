//! Adaptive decoding against a remote logit server.
//!
//! ```text
//! ACD_REMOTE_URL=http://127.0.0.1:8787 cargo run --example remote_decode -- \
//!     "who founded land49 ?" "juno ellery visited land49 ."
//! ```

use acd::backend::REMOTE_URL_ENV;
use acd::dataio::{PromptTemplate, QAExample, RetrievedContext};
use acd::decoding::{decode, DecodeLimits, PromptSet};
use acd::{LogitBackend, RemoteBackend, Strategy};

fn main() -> acd::Result<()> {
    let url = std::env::var(REMOTE_URL_ENV).unwrap_or_else(|_| "http://127.0.0.1:8787".into());
    let mut args = std::env::args().skip(1);
    let question = args.next().unwrap_or_else(|| "who founded land49 ?".into());
    let context = args.next().unwrap_or_else(|| "juno ellery visited land49 .".into());

    let backend = RemoteBackend::new(url);
    let info = backend.model_info()?;
    println!("{} ({} tokens)", info.model_name, info.size);

    let example = QAExample {
        id: "cli".into(),
        question,
        answers: vec!["?".into()],
        context: Some(RetrievedContext { text: context, gold: None }),
        swapped_context: None,
        meta: Default::default(),
    };
    let prompts = PromptSet::for_example(&backend, &PromptTemplate::default(), &[], &example, None)?;
    for strategy in [Strategy::RegCls, Strategy::RegOpn, Strategy::Acd] {
        let out = decode(&backend, &prompts, &strategy, DecodeLimits::default())?;
        let alphas: Vec<String> =
            out.trace.iter().filter_map(|s| s.alpha).map(|a| format!("{:.3}", a.value())).collect();
        println!("{:8} {:?} alpha=[{}]", out.strategy, out.text, alphas.join(", "));
    }
    Ok(())
}
