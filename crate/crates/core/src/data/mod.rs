//! Corpus ingestion, vocabularies and fixed-shape encoding.

mod conll;
mod encode;
pub mod synthetic;
mod vocab;

pub use conll::{merge_ptb_tags, parse_conll2003, parse_conllu_pos, write_conll2003, PTB_TAGS};
pub use encode::{encode, encode_tokens, encode_with_limits, EncodedExample, MAX_CHAR, MAX_SEQ};
pub use vocab::{build_vocab, Vocab, PAD_ID, UNK_ID};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether text is lower-cased before it reaches the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Casing {
    #[default]
    Cased,
    Uncased,
}

impl Casing {
    pub fn normalize(self, token: &str) -> String {
        match self {
            Casing::Cased => token.to_string(),
            Casing::Uncased => token.to_lowercase(),
        }
    }
}

/// One tokenized sentence with gold NER (IOB) and POS labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub ner_tags: Vec<String>,
    pub pos_tags: Vec<String>,
}

impl Sentence {
    pub fn new(tokens: Vec<String>, ner_tags: Vec<String>, pos_tags: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidArgument("sentence has no tokens".into()));
        }
        if tokens.len() != ner_tags.len() || tokens.len() != pos_tags.len() {
            return Err(Error::InvalidArgument(format!(
                "column lengths differ: {} tokens, {} NER tags, {} POS tags",
                tokens.len(),
                ner_tags.len(),
                pos_tags.len()
            )));
        }
        if tokens.iter().any(|t| t.is_empty()) {
            return Err(Error::InvalidArgument("empty token".into()));
        }
        Ok(Self {
            tokens,
            ner_tags,
            pos_tags,
        })
    }

    /// Sentence with unknown labels, used for tagging raw text.
    pub fn unlabeled(tokens: Vec<String>) -> Result<Self> {
        let n = tokens.len();
        Self::new(tokens, vec!["O".into(); n], vec!["O".into(); n])
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Applies [`merge_ptb_tags`] to every POS tag.
    pub fn with_merged_pos(mut self) -> Self {
        for tag in &mut self.pos_tags {
            *tag = merge_ptb_tags(tag);
        }
        self
    }
}
