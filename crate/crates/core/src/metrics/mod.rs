//! Story evaluation: exact EMD between image and sentence embeddings, LLM
//! judge metrics, and n-gram caption metrics.

mod caption;
mod emd;
mod evaluate;
mod judge;
mod report;
mod sentences;
mod transport;

pub use caption::{caption_metrics, cider, corpus_bleu, rouge_l, tokenize, CaptionMetricError, CaptionScores};
pub use emd::{cosine_cost, cost_matrix, emd_from_embeddings, emd_score, CostMode, EmdError, EmdResult};
pub use evaluate::{album_from_trace, story_sentences, Evaluator, MetricSelection};
pub use judge::{Judge, MetricOutcome};
pub use report::{aggregate, render_table, trend_diagnostic, EvalReport, EvalSettings, EvalStage, StageSummary};
pub use sentences::{split_sentences, EmptyText};
pub use transport::{solve_transport, SolverError, TransportPlan, TransportProblem};
