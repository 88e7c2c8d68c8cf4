//! Mini-batch training and evaluation metrics.

mod config;
mod eval;
mod metrics;
mod trainer;

pub use config::TrainConfig;
pub use eval::{decode, evaluate, EvalReport};
pub use metrics::{entity_f1, entity_scores, entity_spans, token_metrics, EntityScores, Prf, Span, TokenMetrics};
pub use trainer::{train_model, train_model_with, EpochRecord, Trained};

#[cfg(test)]
mod tests;
