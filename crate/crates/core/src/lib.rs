//! Album storytelling engine.
//!
//! Turns an ordered photo album into a story by alternating story-aware
//! captioning with chat-model revision until the story stops changing, then
//! stitches the per-photo chunks into one narrative. Also ships the
//! evaluation toolkit (exact earth mover's distance between image and
//! sentence embeddings, LLM-judge metrics, BLEU/ROUGE-L/CIDEr) and dataset
//! tooling for the story-aware captioner.

pub mod backends;
pub mod dataset;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod prompt;
pub mod scalar;

pub use scalar::{FloatScalar, Scalar};

/// Embedding vector in double precision, the type every backend returns.
pub type Embedding = backends::EmbeddingVector<f64>;
/// Transport instance in double precision.
pub type TransportProblemF64 = metrics::TransportProblem<f64>;
pub type TransportPlanF64 = metrics::TransportPlan<f64>;
/// Single-precision variants.
pub type TransportProblemF32 = metrics::TransportProblem<f32>;
pub type TransportPlanF32 = metrics::TransportPlan<f32>;
/// Exact rational transport, solved without any tolerance.
pub type ExactTransportProblem = metrics::TransportProblem<num_rational::Rational64>;
pub type ExactTransportPlan = metrics::TransportPlan<num_rational::Rational64>;
