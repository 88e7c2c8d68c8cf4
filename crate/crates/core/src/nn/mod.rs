//! Numeric core: tensors, layers with hand-written backward passes, losses,
//! the CRF output layer, Adam and a finite-difference gradient checker.
//!
//! Everything is generic over [`Scalar`] so the same code runs in 32-bit for
//! training/inference and in 64-bit for gradient checking.

#![allow(clippy::needless_range_loop)]

mod adam;
mod conv;
mod crf;
mod dense;
mod dropout;
mod embedding;
mod gradcheck;
mod init;
mod loss;
mod lstm;
mod params;
mod rng;
mod tensor;

pub use adam::{adam_step, AdamConfig};
pub use conv::{char_cnn_backward, char_cnn_encode, CnnTrace};
pub use crf::{
    crf_log_partition, crf_nll, crf_nll_backward, crf_path_score, crf_viterbi, iob_transition_mask,
    CrfGrads, INVALID_TRANSITION,
};
pub use dense::{dense, dense_backward, softmax_rows, Activation};
pub use dropout::{dropout, DropoutKind, Mask};
pub use embedding::{embedding_backward, embedding_lookup};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, REL_ERROR_FLOOR};
pub use init::{glorot_uniform, uniform};
pub use loss::{masked_cross_entropy, masked_cross_entropy_backward, softmax_cross_entropy};
pub use lstm::{
    bilstm, bilstm_backward, char_lstm_backward, char_lstm_encode, lstm_sequence,
    lstm_sequence_backward, lstm_step, BiLstmTrace, Direction, LstmGrads, LstmTrace, LstmWeights,
};
pub use params::{Gradients, ParamId, ParamStore};
pub use rng::RngState;
pub use tensor::{Scalar, Tensor};
