use serde::{Deserialize, Serialize};

use super::{Sentence, Vocab, PAD_ID};
use crate::error::{Error, Result};

/// Default maximum number of tokens per sentence.
pub const MAX_SEQ: usize = 30;
/// Default maximum number of characters per token.
pub const MAX_CHAR: usize = 15;

/// A sentence as fixed-shape id arrays. Positions at or beyond `length` are PAD.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedExample {
    pub max_seq: usize,
    pub max_char: usize,
    pub word_ids: Vec<u32>,
    /// Row-major `[max_seq × max_char]`.
    pub char_ids: Vec<u32>,
    pub ner_ids: Vec<u32>,
    pub pos_ids: Vec<u32>,
    pub length: usize,
}

impl EncodedExample {
    /// Character ids of token `t`, PAD included.
    pub fn chars_of(&self, t: usize) -> &[u32] {
        &self.char_ids[t * self.max_char..(t + 1) * self.max_char]
    }

    /// Number of real characters of token `t`.
    pub fn char_len(&self, t: usize) -> usize {
        self.chars_of(t).iter().take_while(|&&c| c != PAD_ID).count()
    }

    pub fn ner(&self) -> &[u32] {
        &self.ner_ids[..self.length]
    }

    pub fn pos(&self) -> &[u32] {
        &self.pos_ids[..self.length]
    }
}

/// Encodes with the default 30-token / 15-character limits.
pub fn encode(sentence: &Sentence, vocab: &Vocab) -> Result<EncodedExample> {
    encode_with_limits(sentence, vocab, MAX_SEQ, MAX_CHAR)
}

pub fn encode_with_limits(
    sentence: &Sentence,
    vocab: &Vocab,
    max_seq: usize,
    max_char: usize,
) -> Result<EncodedExample> {
    let mut ex = encode_words(&sentence.tokens, vocab, max_seq, max_char)?;
    for t in 0..ex.length {
        ex.ner_ids[t] = vocab.ner_id(&sentence.ner_tags[t])?;
        ex.pos_ids[t] = vocab.pos_id(&sentence.pos_tags[t])?;
    }
    Ok(ex)
}

/// Encodes raw tokens without labels (label ids are left at 0).
pub fn encode_tokens(
    tokens: &[String],
    vocab: &Vocab,
    max_seq: usize,
    max_char: usize,
) -> Result<EncodedExample> {
    encode_words(tokens, vocab, max_seq, max_char)
}

fn encode_words(
    tokens: &[String],
    vocab: &Vocab,
    max_seq: usize,
    max_char: usize,
) -> Result<EncodedExample> {
    if tokens.is_empty() {
        return Err(Error::InvalidArgument("cannot encode an empty sentence".into()));
    }
    if max_seq == 0 || max_char == 0 {
        return Err(Error::InvalidArgument("sequence limits must be positive".into()));
    }
    let length = tokens.len().min(max_seq);
    let mut ex = EncodedExample {
        max_seq,
        max_char,
        word_ids: vec![PAD_ID; max_seq],
        char_ids: vec![PAD_ID; max_seq * max_char],
        ner_ids: vec![0; max_seq],
        pos_ids: vec![0; max_seq],
        length,
    };
    for (t, tok) in tokens.iter().take(length).enumerate() {
        if tok.is_empty() {
            return Err(Error::InvalidArgument(format!("empty token at position {t}")));
        }
        ex.word_ids[t] = vocab.word_id(tok);
        let norm = vocab.casing.normalize(tok);
        for (j, ch) in norm.chars().take(max_char).enumerate() {
            ex.char_ids[t * max_char + j] = vocab.char_id(ch);
        }
    }
    Ok(ex)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_vocab, Casing, UNK_ID};

    fn labeled(n: usize) -> Sentence {
        let tokens = (0..n).map(|i| format!("w{i}")).collect();
        Sentence::new(tokens, vec!["O".into(); n], vec!["NN".into(); n]).unwrap()
    }

    #[test]
    fn long_sentence_is_truncated_to_30() {
        let s = labeled(35);
        let v = build_vocab(std::slice::from_ref(&s), Casing::Cased).unwrap();
        let ex = encode(&s, &v).unwrap();
        assert_eq!(ex.length, 30);
        assert_ne!(ex.word_ids[29], 0);
        assert_eq!(ex.word_ids.len(), 30);
    }

    #[test]
    fn unseen_word_maps_to_unk() {
        let s = labeled(2);
        let v = build_vocab(std::slice::from_ref(&s), Casing::Cased).unwrap();
        let raw = Sentence::unlabeled(vec!["zzzzyx".into()]).unwrap();
        let ex = encode_tokens(&raw.tokens, &v, MAX_SEQ, MAX_CHAR).unwrap();
        assert_eq!(ex.word_ids[0], UNK_ID);
        // 'z' and 'y' never occur in "w0", "w1"
        assert_eq!(ex.chars_of(0)[0], UNK_ID);
    }

    #[test]
    fn short_sentence_is_padded() {
        let s = labeled(2);
        let v = build_vocab(std::slice::from_ref(&s), Casing::Cased).unwrap();
        let ex = encode(&s, &v).unwrap();
        assert_eq!(ex.length, 2);
        assert!(ex.word_ids[2..].iter().all(|&i| i == 0));
        assert!(ex.ner_ids[2..].iter().all(|&i| i == 0));
        assert!(ex.char_ids[2 * MAX_CHAR..].iter().all(|&i| i == 0));
    }

    #[test]
    fn chars_truncated_to_15() {
        let s = Sentence::new(vec!["abcdefghijklmnopqrst".into()], vec!["O".into()], vec!["NN".into()]).unwrap();
        let v = build_vocab(std::slice::from_ref(&s), Casing::Cased).unwrap();
        let ex = encode(&s, &v).unwrap();
        assert_eq!(ex.char_len(0), 15);
    }

    #[test]
    fn unknown_label_is_named() {
        let s = labeled(2);
        let v = build_vocab(std::slice::from_ref(&s), Casing::Cased).unwrap();
        let bad = Sentence::new(vec!["w0".into()], vec!["B-LOC".into()], vec!["NN".into()]).unwrap();
        let err = encode(&bad, &v).unwrap_err();
        assert!(err.to_string().contains("B-LOC"), "{err}");
    }
}
