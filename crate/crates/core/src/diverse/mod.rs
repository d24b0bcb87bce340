//! Diverse-task transforms and the rephrasing pipeline.

pub mod http;
pub mod pipeline;
pub mod prompts;
pub mod rephrase;
pub mod transform;

pub use pipeline::{rephrase_samples, BenchmarkMode, RephraseConfig, RephraseReport};
pub use prompts::{PromptLibrary, PromptTask};
pub use rephrase::{extract_rephrase, ChatBackend, MockBackend, RephraseRequest, RephraseResult};
pub use transform::{transform, SourceRecord, TransformError};
