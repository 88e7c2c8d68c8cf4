use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::eval::{evaluate, EvalReport};
use crate::data::{EncodedExample, Vocab};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Network};
use crate::nn::{adam_step, AdamConfig, Gradients, ParamStore, RngState};

/// Offset separating the initialisation stream from the training stream.
const TRAIN_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

/// One line of training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean joint loss over the epoch's batches.
    pub loss: f64,
    pub ner_loss: Option<f64>,
    pub pos_loss: Option<f64>,
    pub eval: Option<EvalReport>,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub network: Network,
    pub params: ParamStore<f32>,
    pub history: Vec<EpochRecord>,
}

/// Initialises a model from `tconfig.seed` and trains it on `corpus`.
pub fn train_model(
    corpus: &[EncodedExample],
    vocab: &Vocab,
    config: &ModelConfig,
    tconfig: &TrainConfig,
) -> Result<Trained> {
    train_model_with(corpus, vocab, config, tconfig, None, |_| {})
}

/// [`train_model`] with an optional evaluation set (defaults to the training
/// corpus when `eval_each_epoch` is set) and a per-epoch callback.
pub fn train_model_with(
    corpus: &[EncodedExample],
    vocab: &Vocab,
    config: &ModelConfig,
    tconfig: &TrainConfig,
    eval_set: Option<&[EncodedExample]>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<Trained> {
    tconfig.validate()?;
    let (network, mut params) = Network::init::<f32>(config, vocab, &mut RngState::new(tconfig.seed))?;
    let mut history = Vec::with_capacity(tconfig.epochs);
    if tconfig.epochs == 0 {
        return Ok(Trained { network, params, history });
    }
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("training corpus is empty".into()));
    }
    let adam = AdamConfig {
        lr: tconfig.lr,
        ..AdamConfig::default()
    };
    let mut rng = RngState::new(tconfig.seed ^ TRAIN_STREAM);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut grads = Gradients::zeros_like(&params);
    for epoch in 0..tconfig.epochs {
        if tconfig.shuffle {
            rng.shuffle(&mut order);
        }
        let mut sums = (0.0, 0.0, 0.0);
        let mut batches = 0;
        for (b, chunk) in order.chunks(tconfig.batch_size).enumerate() {
            let batch: Vec<&EncodedExample> = chunk.iter().map(|&i| &corpus[i]).collect();
            grads.zero();
            let l = network.batch_loss_and_grads(&params, &batch, Some(&mut rng), &mut grads)?;
            if !l.joint.is_finite() || !grads.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    loss: l.joint,
                });
            }
            params.accumulate(&grads);
            adam_step(&mut params, &adam);
            sums.0 += l.joint;
            sums.1 += l.ner.unwrap_or(0.0);
            sums.2 += l.pos.unwrap_or(0.0);
            batches += 1;
        }
        let n = batches as f64;
        let eval = if tconfig.eval_each_epoch {
            Some(evaluate(&network, &params, eval_set.unwrap_or(corpus), vocab)?)
        } else {
            None
        };
        let record = EpochRecord {
            epoch: epoch + 1,
            loss: sums.0 / n,
            ner_loss: config.variant.has_ner().then_some(sums.1 / n),
            pos_loss: config.variant.has_pos().then_some(sums.2 / n),
            eval,
        };
        on_epoch(&record);
        history.push(record);
    }
    Ok(Trained { network, params, history })
}
