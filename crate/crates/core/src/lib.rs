//! Deterministic generation, rephrasing and evaluation of robust
//! instruction data for 3D scene-language models.

pub mod adversarial;
pub mod benchmark;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod dataset;
pub mod diverse;
pub mod engine;
pub mod metrics;
pub mod rap;
pub mod rng;
pub mod sample;
pub mod scene;
pub mod sequence;
pub mod synth;
