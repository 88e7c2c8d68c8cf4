use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Precision, recall and F1.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// From true-positive, false-positive and false-negative counts; empty
    /// denominators give 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf { precision, recall, f1 }
    }
}

/// A typed entity span, `start..=end` in token positions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub kind: String,
    pub start: usize,
    pub end: usize,
}

fn split_tag(tag: &str) -> Result<Option<(char, &str)>> {
    if tag == "O" {
        return Ok(None);
    }
    match tag.split_once('-') {
        Some((p @ ("B" | "I"), kind)) if !kind.is_empty() => Ok(Some((p.chars().next().unwrap(), kind))),
        _ => Err(Error::TagScheme(format!("unrecognised tag {tag:?}"))),
    }
}

/// Entity spans under conlleval chunking: `B-` opens a span, `I-` continues
/// a span of the same type and otherwise opens one.
pub fn entity_spans<S: AsRef<str>>(tags: &[S]) -> Result<Vec<Span>> {
    let mut spans = Vec::new();
    let mut open: Option<Span> = None;
    for (i, tag) in tags.iter().enumerate() {
        let parsed = split_tag(tag.as_ref())?;
        let continues = matches!(
            (&open, parsed),
            (Some(s), Some(('I', kind))) if s.kind == kind
        );
        if continues {
            open.as_mut().unwrap().end = i;
            continue;
        }
        spans.extend(open.take());
        if let Some((_, kind)) = parsed {
            open = Some(Span {
                kind: kind.to_string(),
                start: i,
                end: i,
            });
        }
    }
    spans.extend(open);
    Ok(spans)
}

/// Corpus-level entity metrics plus a per-type breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityScores {
    pub overall: Prf,
    pub per_type: BTreeMap<String, Prf>,
}

fn check_aligned<A, B>(gold: &[A], pred: &[B], what: &str) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::InvalidArgument(format!(
            "{what}: {} gold vs {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    Ok(())
}

pub fn entity_scores<S: AsRef<str>>(gold: &[Vec<S>], pred: &[Vec<S>]) -> Result<EntityScores> {
    check_aligned(gold, pred, "sentence counts")?;
    let mut counts: BTreeMap<String, [usize; 3]> = BTreeMap::new();
    for (g, p) in gold.iter().zip(pred) {
        check_aligned(g, p, "token counts")?;
        let gs: HashSet<Span> = entity_spans(g)?.into_iter().collect();
        let ps: HashSet<Span> = entity_spans(p)?.into_iter().collect();
        for s in &ps {
            counts.entry(s.kind.clone()).or_default()[if gs.contains(s) { 0 } else { 1 }] += 1;
        }
        for s in gs.difference(&ps) {
            counts.entry(s.kind.clone()).or_default()[2] += 1;
        }
    }
    let mut total = [0; 3];
    let per_type = counts
        .into_iter()
        .map(|(k, c)| {
            for i in 0..3 {
                total[i] += c[i];
            }
            (k, Prf::from_counts(c[0], c[1], c[2]))
        })
        .collect();
    Ok(EntityScores {
        overall: Prf::from_counts(total[0], total[1], total[2]),
        per_type,
    })
}

/// Micro-averaged entity-level `(precision, recall, f1)`.
pub fn entity_f1<S: AsRef<str>>(gold: &[Vec<S>], pred: &[Vec<S>]) -> Result<(f64, f64, f64)> {
    let p = entity_scores(gold, pred)?.overall;
    Ok((p.precision, p.recall, p.f1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenMetrics {
    pub accuracy: f64,
    pub micro_f1: f64,
    pub correct: usize,
    pub total: usize,
    pub per_label: BTreeMap<u32, Prf>,
}

/// Token accuracy and per-label micro-F1 over positions where `mask` is true.
pub fn token_metrics(gold: &[u32], pred: &[u32], mask: &[bool]) -> Result<TokenMetrics> {
    check_aligned(gold, pred, "token counts")?;
    check_aligned(gold, mask, "mask length")?;
    let mut counts: BTreeMap<u32, [usize; 3]> = BTreeMap::new();
    let (mut correct, mut total) = (0, 0);
    for ((&g, &p), _) in gold.iter().zip(pred).zip(mask).filter(|(_, &m)| m) {
        total += 1;
        if g == p {
            correct += 1;
            counts.entry(g).or_default()[0] += 1;
        } else {
            counts.entry(p).or_default()[1] += 1;
            counts.entry(g).or_default()[2] += 1;
        }
    }
    let mut sum = [0; 3];
    let per_label = counts
        .into_iter()
        .map(|(k, c)| {
            for i in 0..3 {
                sum[i] += c[i];
            }
            (k, Prf::from_counts(c[0], c[1], c[2]))
        })
        .collect();
    Ok(TokenMetrics {
        accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        micro_f1: Prf::from_counts(sum[0], sum[1], sum[2]).f1,
        correct,
        total,
        per_label,
    })
}
