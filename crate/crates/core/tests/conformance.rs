//! One contract suite, run against the in-process toy backend and against
//! the remote client talking to that same backend over HTTP.

mod common;

use std::sync::Arc;

use acd::backend::{LogitBackend, TokenSequence};
use acd::dataio::{generate_toy_dataset, ToyWorldSpec};
use acd::harness::Workload;
use acd::{RemoteBackend, Strategy, ToyBackend};

fn toy() -> ToyBackend {
    ToyBackend::from_path(common::fixture_dir().join("toy_world.json")).unwrap()
}

const PROBE: &str = "Question: who founded land0 ? Answer:";

fn contract_suite(backend: &dyn LogitBackend) {
    let info = backend.model_info().unwrap();
    assert!(info.size > 0);
    assert!((info.eos_id as usize) < info.size);
    assert_eq!(info, backend.model_info().unwrap());

    let ids = backend.tokenize(PROBE).unwrap();
    assert!(!ids.is_empty());
    assert_eq!(backend.detokenize(&ids).unwrap(), PROBE);
    assert!(backend.tokenize("zzz-not-a-word").is_err());
    assert!(backend.detokenize(&TokenSequence::new(vec![info.size as u32])).is_err());

    let other = backend.tokenize("Context: a b Question: who founded land1 ? Answer:");
    let other = other.unwrap_or_else(|_| backend.tokenize("Question: who founded land1 ? Answer:").unwrap());
    let both = backend.next_logits(&[ids.clone(), other.clone()]).unwrap();
    assert_eq!(both.len(), 2);
    for l in &both {
        assert_eq!(l.len(), info.size);
        assert!(l.as_slice().iter().all(|x| x.is_finite()));
    }
    let first = backend.next_logits(std::slice::from_ref(&ids)).unwrap();
    let second = backend.next_logits(std::slice::from_ref(&other)).unwrap();
    assert_eq!(both[0], first[0], "batch order is preserved");
    assert_eq!(both[1], second[0]);
    assert_eq!(first, backend.next_logits(std::slice::from_ref(&ids)).unwrap(), "deterministic");

    assert!(backend.next_logits(&[TokenSequence::default()]).is_err());
    assert!(backend.next_logits(&[TokenSequence::new(vec![u32::MAX])]).is_err());
    assert!(backend.next_logits(&[]).unwrap().is_empty());
}

#[test]
fn toy_backend_meets_contract() {
    contract_suite(&toy());
}

#[test]
fn remote_client_meets_contract() {
    let url = common::serve(Arc::new(toy()));
    contract_suite(&RemoteBackend::new(url));
}

#[test]
fn remote_logits_are_bit_identical_to_local() {
    let local = toy();
    let url = common::serve(Arc::new(toy()));
    let remote = RemoteBackend::new(url);
    let info = local.model_info().unwrap();
    assert_eq!(remote.model_info().unwrap().size, info.size);
    let ids = local.tokenize(PROBE).unwrap();
    assert_eq!(remote.tokenize(PROBE).unwrap(), ids);
    assert_eq!(remote.next_logits(std::slice::from_ref(&ids)).unwrap(), local.next_logits(&[ids]).unwrap());
}

#[test]
fn decoding_through_the_wire_matches_local_decoding() {
    let spec = ToyWorldSpec { examples: 16, ..Default::default() };
    let fixture = generate_toy_dataset(&spec, 21).unwrap();
    let url = common::serve(Arc::new(fixture.backend().unwrap()));
    let local = Workload::from_fixture(&fixture).unwrap();
    let remote = Workload::from_parts(
        Box::new(RemoteBackend::new(url)),
        fixture.fewshot_pairs(),
        fixture.examples.clone(),
        Some(fixture.adversarial_passage.clone()),
    );
    for strategy in [Strategy::RegOpn, Strategy::Acd, Strategy::MicdD] {
        assert_eq!(local.evaluate(&strategy).unwrap(), remote.evaluate(&strategy).unwrap());
    }
}

#[test]
fn server_error_statuses_reach_the_client() {
    let url = common::serve(Arc::new(toy()));
    let remote = RemoteBackend::new(url);
    let err = remote.tokenize("zzz-not-a-word").unwrap_err().to_string();
    assert!(err.contains("422"), "{err}");
}
