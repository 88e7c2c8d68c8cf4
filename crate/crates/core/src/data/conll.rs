use std::fmt::Write as _;

use super::Sentence;
use crate::error::{Error, Result};

/// The 45-tag Penn Treebank part-of-speech inventory.
pub const PTB_TAGS: [&str; 45] = [
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD", "NN", "NNS", "NNP", "NNPS",
    "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP", "SYM", "TO", "UH", "VB", "VBD", "VBG",
    "VBN", "VBP", "VBZ", "WDT", "WP", "WP$", "WRB", "#", "$", ".", ",", ":", "(", ")", "``", "''",
];

/// Tag that all punctuation and symbol tags collapse into.
pub const PUNCT: &str = "PUNCT";

/// Collapses PTB punctuation and symbol tags into a single `PUNCT` tag.
///
/// Bracket and quote spellings used by real treebank files (`-LRB-`, `-RRB-`,
/// `"`) are treated as the same tags as `(`, `)` and `''`. Anything else is
/// returned unchanged, so the function is idempotent.
pub fn merge_ptb_tags(tag: &str) -> String {
    match tag {
        "``" | "''" | "\"" | "(" | ")" | "-LRB-" | "-RRB-" | "," | "." | ":" | "#" | "$"
        | "SYM" => PUNCT.to_string(),
        other => other.to_string(),
    }
}

/// Parses CoNLL-2003 column text.
///
/// First column is the token, second the POS tag, last the NER tag.
/// `-DOCSTART-` lines and the blank line following them are skipped.
pub fn parse_conll2003(text: &str) -> Result<Vec<Sentence>> {
    let mut out = Vec::new();
    let mut tokens = Vec::new();
    let mut pos = Vec::new();
    let mut ner = Vec::new();

    let mut flush = |tokens: &mut Vec<String>, pos: &mut Vec<String>, ner: &mut Vec<String>| {
        if !tokens.is_empty() {
            out.push(Sentence {
                tokens: std::mem::take(tokens),
                ner_tags: std::mem::take(ner),
                pos_tags: std::mem::take(pos),
            });
        }
    };

    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            flush(&mut tokens, &mut pos, &mut ner);
            continue;
        }
        if line.starts_with("-DOCSTART-") {
            flush(&mut tokens, &mut pos, &mut ner);
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() < 2 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected at least 2 columns, found {}", cols.len()),
            });
        }
        tokens.push(cols[0].to_string());
        pos.push(cols[1].to_string());
        ner.push(cols[cols.len() - 1].to_string());
    }
    flush(&mut tokens, &mut pos, &mut ner);
    Ok(out)
}

/// Writes sentences back in four-column CoNLL-2003 layout (chunk column `O`).
pub fn write_conll2003(sentences: &[Sentence]) -> String {
    let mut s = String::new();
    for sent in sentences {
        for ((tok, pos), ner) in sent.tokens.iter().zip(&sent.pos_tags).zip(&sent.ner_tags) {
            let _ = writeln!(s, "{tok} {pos} O {ner}");
        }
        s.push('\n');
    }
    s
}

/// Parses CoNLL-U text, keeping FORM and XPOS (merged through
/// [`merge_ptb_tags`]). NER tags are all `O`.
pub fn parse_conllu_pos(text: &str) -> Result<Vec<Sentence>> {
    let mut out = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut pos: Vec<String> = Vec::new();

    let mut flush = |tokens: &mut Vec<String>, pos: &mut Vec<String>| {
        if !tokens.is_empty() {
            let n = tokens.len();
            out.push(Sentence {
                tokens: std::mem::take(tokens),
                ner_tags: vec!["O".to_string(); n],
                pos_tags: std::mem::take(pos),
            });
        }
    };

    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            flush(&mut tokens, &mut pos);
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        let id = cols[0];
        // multiword ranges ("3-4") and empty nodes ("5.1") carry no tag of their own
        if id.contains('-') || id.contains('.') {
            continue;
        }
        if cols[1].is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                message: "empty FORM column".into(),
            });
        }
        tokens.push(cols[1].to_string());
        pos.push(merge_ptb_tags(cols[4]));
    }
    flush(&mut tokens, &mut pos);
    Ok(out)
}
