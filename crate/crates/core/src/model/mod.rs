//! The five tagger architectures: two single-task baselines and three
//! multi-task variants sharing a word-level BiLSTM trunk.

mod config;
mod network;

pub use config::{CharEncoderKind, ModelConfig, Variant};
pub use network::{count_params, joint_loss, Losses, Network, Predictions, TaskOutputs, VocabSizes};

#[cfg(test)]
mod tests;
