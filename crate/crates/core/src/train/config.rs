use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Variant;

/// Optimisation schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub shuffle: bool,
    pub eval_each_epoch: bool,
}

impl TrainConfig {
    pub fn for_variant(variant: Variant) -> Self {
        let (batch_size, epochs) = match variant {
            Variant::PosInd => (32, 17),
            _ => (64, 95),
        };
        TrainConfig {
            batch_size,
            epochs,
            lr: 1e-3,
            seed: 42,
            shuffle: true,
            eval_each_epoch: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("lr = {} must be positive", self.lr)));
        }
        Ok(())
    }
}
