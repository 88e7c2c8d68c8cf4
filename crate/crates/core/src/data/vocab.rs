use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Casing, Sentence};
use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;

const PAD: &str = "<pad>";
const UNK: &str = "<unk>";

/// Word, character and label inventories.
///
/// Ids 0 and 1 of both the word and the character maps are PAD and UNK.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocab {
    words: Vec<String>,
    chars: Vec<String>,
    word_to_id: HashMap<String, u32>,
    char_to_id: HashMap<char, u32>,
    pub ner_labels: Vec<String>,
    pub pos_labels: Vec<String>,
    pub casing: Casing,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    casing: Casing,
    words: Vec<String>,
    chars: Vec<String>,
    ner_labels: Vec<String>,
    pos_labels: Vec<String>,
}

impl From<VocabRepr> for Vocab {
    fn from(r: VocabRepr) -> Self {
        let word_to_id = r
            .words
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        let char_to_id = r
            .chars
            .iter()
            .enumerate()
            .skip(2)
            .filter_map(|(i, c)| c.chars().next().map(|ch| (ch, i as u32)))
            .collect();
        Vocab {
            words: r.words,
            chars: r.chars,
            word_to_id,
            char_to_id,
            ner_labels: r.ner_labels,
            pos_labels: r.pos_labels,
            casing: r.casing,
        }
    }
}

impl From<Vocab> for VocabRepr {
    fn from(v: Vocab) -> Self {
        VocabRepr {
            casing: v.casing,
            words: v.words,
            chars: v.chars,
            ner_labels: v.ner_labels,
            pos_labels: v.pos_labels,
        }
    }
}

impl Vocab {
    fn empty(casing: Casing) -> Self {
        Vocab {
            words: vec![PAD.into(), UNK.into()],
            chars: vec![PAD.into(), UNK.into()],
            word_to_id: HashMap::new(),
            char_to_id: HashMap::new(),
            ner_labels: Vec::new(),
            pos_labels: Vec::new(),
            casing,
        }
    }

    fn add_word(&mut self, word: String) {
        if !self.word_to_id.contains_key(&word) {
            self.word_to_id.insert(word.clone(), self.words.len() as u32);
            self.words.push(word);
        }
    }

    fn add_char(&mut self, ch: char) {
        if let std::collections::hash_map::Entry::Vacant(e) = self.char_to_id.entry(ch) {
            e.insert(self.chars.len() as u32);
            self.chars.push(ch.to_string());
        }
    }

    /// Vocabulary over an explicit word list and label inventories.
    pub fn from_words<'a>(
        words: impl IntoIterator<Item = &'a str>,
        ner_labels: Vec<String>,
        pos_labels: Vec<String>,
        casing: Casing,
    ) -> Self {
        let mut v = Vocab::empty(casing);
        for w in words {
            v.insert_word(w);
        }
        v.ner_labels = ner_labels;
        v.pos_labels = pos_labels;
        v
    }

    /// Adds a (casing-normalized) word and its characters.
    pub fn insert_word(&mut self, token: &str) {
        let norm = self.casing.normalize(token);
        for ch in norm.chars() {
            self.add_char(ch);
        }
        self.add_word(norm);
    }

    /// Number of word ids, PAD and UNK included.
    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    /// Number of character ids, PAD and UNK included.
    pub fn char_count(&self) -> usize {
        self.chars.len()
    }

    pub fn word_id(&self, token: &str) -> u32 {
        let norm = self.casing.normalize(token);
        self.word_to_id.get(&norm).copied().unwrap_or(UNK_ID)
    }

    /// Id of an already normalized character.
    pub fn char_id(&self, ch: char) -> u32 {
        self.char_to_id.get(&ch).copied().unwrap_or(UNK_ID)
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn char_str(&self, id: u32) -> Option<&str> {
        self.chars.get(id as usize).map(String::as_str)
    }

    pub fn contains_word(&self, word: &str) -> bool {
        self.word_to_id.contains_key(word)
    }

    /// Iterates the real (non PAD/UNK) words in id order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words[2..].iter().map(String::as_str)
    }

    pub fn ner_id(&self, label: &str) -> Result<u32> {
        position(&self.ner_labels, label, "NER")
    }

    pub fn pos_id(&self, label: &str) -> Result<u32> {
        position(&self.pos_labels, label, "POS")
    }
}

fn position(labels: &[String], label: &str, task: &'static str) -> Result<u32> {
    labels
        .iter()
        .position(|l| l == label)
        .map(|i| i as u32)
        .ok_or_else(|| Error::UnknownLabel {
            task,
            label: label.to_string(),
        })
}

/// Builds a vocabulary from training sentences.
///
/// Every distinct normalized word and character is kept (no frequency
/// cutoff); label lists keep first-seen order.
pub fn build_vocab(sentences: &[Sentence], casing: Casing) -> Result<Vocab> {
    if sentences.is_empty() {
        return Err(Error::Vocab("cannot build a vocabulary from zero sentences".into()));
    }
    let mut v = Vocab::empty(casing);
    for s in sentences {
        for tok in &s.tokens {
            v.insert_word(tok);
        }
        for t in &s.ner_tags {
            if !v.ner_labels.contains(t) {
                v.ner_labels.push(t.clone());
            }
        }
        for t in &s.pos_tags {
            if !v.pos_labels.contains(t) {
                v.pos_labels.push(t.clone());
            }
        }
    }
    Ok(v)
}
