//! Datasets, prompt templates, entity swapping and toy-world fixtures.

mod dataset;
mod swap;
mod template;
mod toygen;

pub use dataset::{
    load_dataset, load_fewshots, parse_dataset, to_jsonl, write_dataset, FewShot, QAExample, RetrievedContext,
};
pub use swap::{knowledge_conflict_view, swap_answer_entity, SWAP_ANSWER_KEY};
pub use template::{render_prompt, PromptMode, PromptTemplate};
pub use toygen::{
    generate_toy_dataset, Quadrant, ToyFixture, ToyWorldSpec, ADVERSARIAL_FILE, DATASET_FILE, FEWSHOTS_FILE,
    QUADRANT_KEY, SWAP_DATASET_FILE, WORLD_FILE,
};
