//! Bundled and generated corpora used when real CoNLL data is not at hand.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{parse_conll2003, merge_ptb_tags, Casing, Sentence, Vocab, PTB_TAGS};

const OVERFIT20: &str = include_str!("../../fixtures/overfit20.conll");

/// The nine CoNLL-2003 NER labels.
pub const CONLL_NER_LABELS: [&str; 9] = [
    "O", "B-PER", "I-PER", "B-LOC", "I-LOC", "B-ORG", "I-ORG", "B-MISC", "I-MISC",
];

/// Word-type count of a CoNLL-2003-sized training vocabulary.
pub const CONLL_SCALE_WORDS: usize = 21_000;

/// The bundled 20-sentence corpus with PTB POS tags merged.
pub fn overfit_corpus() -> Vec<Sentence> {
    parse_conll2003(OVERFIT20)
        .expect("bundled fixture parses")
        .into_iter()
        .map(Sentence::with_merged_pos)
        .collect()
}

/// The 36 merged PTB tags, in first-seen order over [`PTB_TAGS`].
pub fn merged_ptb_labels() -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for t in PTB_TAGS {
        let m = merge_ptb_tags(t);
        if !out.contains(&m) {
            out.push(m);
        }
    }
    out
}

const ONSETS: [&str; 24] = [
    "b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "z",
    "br", "ch", "st", "tr", "sh", "pl",
];
const NUCLEI: [&str; 8] = ["a", "e", "i", "o", "u", "ea", "ou", "y"];
const CODAS: [&str; 10] = ["", "", "n", "r", "s", "t", "l", "nd", "ck", "ng"];

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.gen_range(1..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(rng).unwrap());
        w.push_str(NUCLEI.choose(rng).unwrap());
        w.push_str(CODAS.choose(rng).unwrap());
    }
    match rng.gen_range(0..20) {
        0 => w.push_str(&rng.gen_range(0..100).to_string()),
        1 => w.push('-'),
        _ => {}
    }
    w
}

/// Generates `n` distinct word types whose lower-case forms are also distinct.
///
/// Roughly a third are title-cased, a few are all caps, mimicking news text.
pub fn conll_scale_words(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w = pseudo_word(&mut rng);
        if !seen.insert(w.clone()) {
            continue;
        }
        let styled = match rng.gen_range(0..10) {
            0..=2 => {
                let mut cs = w.chars();
                let first = cs.next().unwrap().to_uppercase().collect::<String>();
                first + cs.as_str()
            }
            3 => w.to_uppercase(),
            _ => w,
        };
        out.push(styled);
    }
    out
}

/// A vocabulary the size of the CoNLL-2003 training set, with the CoNLL NER
/// labels and the merged PTB tagset.
pub fn conll_scale_vocab(casing: Casing) -> Vocab {
    vocab_from_words(&conll_scale_words(CONLL_SCALE_WORDS, 2003), casing)
}

pub fn vocab_from_words(words: &[String], casing: Casing) -> Vocab {
    let ner = CONLL_NER_LABELS.iter().map(|s| s.to_string()).collect();
    Vocab::from_words(words.iter().map(String::as_str), ner, merged_ptb_labels(), casing)
}

/// Random labeled sentences over the real words of `vocab`.
pub fn random_sentences(vocab: &Vocab, count: usize, length: usize, seed: u64) -> Vec<Sentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words: Vec<&str> = vocab.words().collect();
    (0..count)
        .map(|_| {
            let tokens: Vec<String> = (0..length)
                .map(|_| words.choose(&mut rng).unwrap().to_string())
                .collect();
            let ner = (0..length)
                .map(|_| vocab.ner_labels.choose(&mut rng).unwrap().clone())
                .collect();
            let pos = (0..length)
                .map(|_| vocab.pos_labels.choose(&mut rng).unwrap().clone())
                .collect();
            Sentence::new(tokens, ner, pos).expect("generated sentence is well-formed")
        })
        .collect()
}
