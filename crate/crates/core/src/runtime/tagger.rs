use std::path::Path;

use super::checkpoint::{self, Checkpoint, Metadata};
use crate::data::{encode_tokens, EncodedExample, Vocab};
use crate::error::Result;
use crate::model::{ModelConfig, Network, Predictions};
use crate::nn::ParamStore;

/// A bound, ready-to-run model.
#[derive(Debug, Clone)]
pub struct Tagger {
    pub network: Network,
    pub params: ParamStore<f32>,
    pub vocab: Vocab,
    pub metadata: Metadata,
}

/// One output line of [`Tagger::tag`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedToken {
    pub token: String,
    pub ner: Option<String>,
    pub pos: Option<String>,
}

impl Tagger {
    pub fn new(network: Network, params: ParamStore<f32>, vocab: Vocab) -> Self {
        Tagger {
            network,
            params,
            vocab,
            metadata: Metadata::default(),
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        let network = Network::bind(&ck.config, &ck.vocab, &ck.params)?;
        Ok(Tagger {
            network,
            params: ck.params,
            vocab: ck.vocab,
            metadata: ck.metadata,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(checkpoint::load(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<u64> {
        checkpoint::save(path, &self.params, &self.vocab, self.config(), &self.metadata)
    }

    pub fn config(&self) -> &ModelConfig {
        self.network.config()
    }

    /// Encodes up to `max_seq` tokens with the model's limits.
    pub fn encode(&self, tokens: &[String]) -> Result<EncodedExample> {
        let c = self.config();
        encode_tokens(tokens, &self.vocab, c.max_seq, c.max_char)
    }

    pub fn predict(&self, ex: &EncodedExample) -> Result<Predictions> {
        let out = self.network.forward(&self.params, ex, None)?;
        self.network.decode(&self.params, &out)
    }

    /// Labels every token; sentences longer than `max_seq` are processed in
    /// consecutive windows.
    pub fn tag(&self, tokens: &[String]) -> Result<Vec<TaggedToken>> {
        let mut out = Vec::with_capacity(tokens.len());
        for window in tokens.chunks(self.config().max_seq) {
            let p = self.predict(&self.encode(window)?)?;
            let name = |ids: &Option<Vec<u32>>, labels: &[String], i: usize| {
                ids.as_ref().map(|v| labels[v[i] as usize].clone())
            };
            for (i, tok) in window.iter().enumerate() {
                out.push(TaggedToken {
                    token: tok.clone(),
                    ner: name(&p.ner, &self.vocab.ner_labels, i),
                    pos: name(&p.pos, &self.vocab.pos_labels, i),
                });
            }
        }
        Ok(out)
    }
}
