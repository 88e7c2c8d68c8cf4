use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::{entity_scores, token_metrics, Prf};
use crate::data::{EncodedExample, Vocab};
use crate::error::Result;
use crate::model::{Network, Predictions, TaskOutputs};
use crate::nn::{ParamStore, Scalar};

/// Argmax (softmax heads) or Viterbi (CRF heads) over the true length.
pub fn decode<T: Scalar>(outputs: &TaskOutputs<T>, params: &ParamStore<T>, network: &Network) -> Result<Predictions> {
    network.decode(params, outputs)
}

/// Scores on a labelled set. Fields for a task the variant lacks are `None`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub ner_f1_entity: Option<f64>,
    pub ner_precision_entity: Option<f64>,
    pub ner_recall_entity: Option<f64>,
    pub ner_f1_token_micro: Option<f64>,
    pub ner_accuracy: Option<f64>,
    pub pos_accuracy: Option<f64>,
    /// Keys are `NER:<entity type>` and `POS:<tag>`.
    pub per_label_prf: BTreeMap<String, Prf>,
    pub token_count: usize,
}

fn labels(ids: &[u32], names: &[String]) -> Vec<String> {
    ids.iter()
        .map(|&i| names.get(i as usize).cloned().unwrap_or_else(|| "O".into()))
        .collect()
}

/// Runs inference over `examples` and scores both tasks.
pub fn evaluate<T: Scalar>(
    network: &Network,
    params: &ParamStore<T>,
    examples: &[EncodedExample],
    vocab: &Vocab,
) -> Result<EvalReport> {
    let mut ner_gold = Vec::new();
    let mut ner_pred = Vec::new();
    let (mut ner_g_ids, mut ner_p_ids) = (Vec::new(), Vec::new());
    let (mut pos_g, mut pos_p) = (Vec::new(), Vec::new());
    let mut tokens = 0;
    for ex in examples {
        let out = network.forward(params, ex, None)?;
        let p = network.decode(params, &out)?;
        tokens += ex.length;
        if let Some(ner) = p.ner {
            ner_gold.push(labels(ex.ner(), &vocab.ner_labels));
            ner_pred.push(labels(&ner, &vocab.ner_labels));
            ner_g_ids.extend_from_slice(ex.ner());
            ner_p_ids.extend(ner);
        }
        if let Some(pos) = p.pos {
            pos_g.extend_from_slice(ex.pos());
            pos_p.extend(pos);
        }
    }
    let mut report = EvalReport {
        token_count: tokens,
        ..EvalReport::default()
    };
    if network.config().variant.has_ner() {
        let ent = entity_scores(&ner_gold, &ner_pred)?;
        report.ner_f1_entity = Some(ent.overall.f1);
        report.ner_precision_entity = Some(ent.overall.precision);
        report.ner_recall_entity = Some(ent.overall.recall);
        for (k, v) in ent.per_type {
            report.per_label_prf.insert(format!("NER:{k}"), v);
        }
        let tm = token_metrics(&ner_g_ids, &ner_p_ids, &vec![true; ner_g_ids.len()])?;
        report.ner_f1_token_micro = Some(tm.micro_f1);
        report.ner_accuracy = Some(tm.accuracy);
    }
    if network.config().variant.has_pos() {
        let tm = token_metrics(&pos_g, &pos_p, &vec![true; pos_g.len()])?;
        report.pos_accuracy = Some(tm.accuracy);
        for (k, v) in tm.per_label {
            let name = vocab.pos_labels.get(k as usize).map_or("?", String::as_str);
            report.per_label_prf.insert(format!("POS:{name}"), v);
        }
    }
    Ok(report)
}
