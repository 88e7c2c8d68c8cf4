use super::*;
use crate::data::{build_vocab, encode, synthetic, Casing, EncodedExample, Vocab};
use crate::model::{ModelConfig, Network, TaskOutputs, Variant};
use crate::nn::{crf_path_score, ParamStore, RngState, Tensor};

fn setup() -> (Vocab, Vec<EncodedExample>) {
    let corpus = synthetic::overfit_corpus();
    let vocab = build_vocab(&corpus, Casing::Cased).unwrap();
    let exs = corpus.iter().map(|s| encode(s, &vocab).unwrap()).collect();
    (vocab, exs)
}

fn small(variant: Variant, epochs: usize) -> TrainConfig {
    TrainConfig {
        batch_size: 4,
        epochs,
        lr: 5e-3,
        ..TrainConfig::for_variant(variant)
    }
}

#[test]
fn zero_epochs_keeps_initialisation() {
    let (vocab, exs) = setup();
    let cfg = ModelConfig::for_variant(Variant::MtlLstm);
    let tc = small(Variant::MtlLstm, 0);
    let trained = train_model(&exs, &vocab, &cfg, &tc).unwrap();
    let (_, init) = Network::init::<f32>(&cfg, &vocab, &mut RngState::new(tc.seed)).unwrap();
    assert!(trained.history.is_empty());
    for ((_, a), (_, b)) in trained.params.iter().zip(init.iter()) {
        assert_eq!(a, b);
    }
}

#[test]
fn same_seed_gives_identical_parameters() {
    let (vocab, exs) = setup();
    let cfg = ModelConfig::for_variant(Variant::MtlCnnCrf);
    let tc = small(Variant::MtlCnnCrf, 2);
    let a = train_model(&exs, &vocab, &cfg, &tc).unwrap();
    let b = train_model(&exs, &vocab, &cfg, &tc).unwrap();
    for ((_, x), (_, y)) in a.params.iter().zip(b.params.iter()) {
        let bx: Vec<u32> = x.data().iter().map(|v| v.to_bits()).collect();
        let by: Vec<u32> = y.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(bx, by);
    }
    assert_eq!(a.history, b.history);
    let c = train_model(&exs, &vocab, &cfg, &TrainConfig { seed: 7, ..tc }).unwrap();
    assert_ne!(a.history, c.history);
}

#[test]
fn loss_drops_below_initial_after_five_epochs() {
    let (vocab, exs) = setup();
    for v in Variant::ALL {
        let cfg = ModelConfig::for_variant(v);
        let tc = TrainConfig {
            batch_size: 4,
            epochs: 6,
            ..TrainConfig::for_variant(v)
        };
        let t = train_model(&exs, &vocab, &cfg, &tc).unwrap();
        let first = t.history[0].loss;
        let last = t.history[5].loss;
        assert!(last < first, "{v:?}: {first} -> {last}");
    }
}

#[test]
fn history_records_eval_when_requested() {
    let (vocab, exs) = setup();
    let cfg = ModelConfig::for_variant(Variant::NerInd);
    let tc = TrainConfig {
        eval_each_epoch: true,
        ..small(Variant::NerInd, 1)
    };
    let mut lines = Vec::new();
    let t = train_model_with(&exs, &vocab, &cfg, &tc, None, |r| {
        lines.push(serde_json::to_string(r).unwrap())
    })
    .unwrap();
    let eval = t.history[0].eval.as_ref().unwrap();
    assert!(eval.ner_f1_entity.is_some() && eval.pos_accuracy.is_none());
    assert_eq!(eval.token_count, exs.iter().map(|e| e.length).sum::<usize>());
    assert_eq!(lines.len(), 1);
    assert!(lines[0].contains("\"epoch\":1"));
}

#[test]
fn empty_corpus_is_an_error() {
    let (vocab, _) = setup();
    let cfg = ModelConfig::for_variant(Variant::NerInd);
    assert!(train_model(&[], &vocab, &cfg, &small(Variant::NerInd, 1)).is_err());
}

#[test]
fn untrained_accuracy_is_near_chance() {
    // balanced random labels over a K-way softmax head
    let k = 6;
    let labels: Vec<String> = (0..k).map(|i| format!("T{i}")).collect();
    let words = synthetic::conll_scale_words(400, 5);
    let mut vocab = synthetic::vocab_from_words(&words, Casing::Cased);
    vocab.pos_labels = labels.clone();
    let mut rng = RngState::new(31);
    let mut sentences = synthetic::random_sentences(&vocab, 100, 20, 3);
    for s in &mut sentences {
        s.pos_tags = (0..s.len()).map(|_| labels[rng.below(k)].clone()).collect();
        s.ner_tags = vec!["O".into(); s.len()];
    }
    vocab.ner_labels = vec!["O".into()];
    let exs: Vec<_> = sentences.iter().map(|s| encode(s, &vocab).unwrap()).collect();
    let (net, params) = Network::init::<f32>(&ModelConfig::for_variant(Variant::PosInd), &vocab, &mut RngState::new(1)).unwrap();
    let r = evaluate(&net, &params, &exs, &vocab).unwrap();
    let n = r.token_count as f64;
    let p = 1.0 / k as f64;
    let sigma = (p * (1.0 - p) / n).sqrt();
    let acc = r.pos_accuracy.unwrap();
    assert!((acc - p).abs() < 3.0 * sigma, "accuracy {acc} vs chance {p}");
}

fn outputs(scores: Tensor<f64>, length: usize) -> TaskOutputs<f64> {
    TaskOutputs {
        ner_scores: Some(scores),
        pos_scores: None,
        length,
    }
}

fn ner_net(variant: Variant) -> (Network, ParamStore<f64>) {
    let (vocab, _) = setup();
    Network::init(&ModelConfig::for_variant(variant), &vocab, &mut RngState::new(0)).unwrap()
}

#[test]
fn uniform_scores_decode_to_label_zero() {
    let (net, params) = ner_net(Variant::NerInd);
    let k = net.sizes().ner_labels;
    let out = outputs(Tensor::from_fn(&[30, k], |_| 1.0 / k as f64), 7);
    assert_eq!(decode(&out, &params, &net).unwrap().ner.unwrap(), vec![0; 7]);
}

#[test]
fn zero_transition_crf_decodes_like_argmax() {
    let (net, mut params) = ner_net(Variant::MtlCnnCrf);
    let id = params.id("ner_crf/transitions").unwrap();
    params.value_mut(id).fill(0.0);
    let k = net.sizes().ner_labels;
    let mut rng = RngState::new(4);
    let s = Tensor::from_fn(&[30, k], |_| rng.uniform(-2.0, 2.0));
    let expected: Vec<u32> = (0..9)
        .map(|t| {
            let row = s.row(t);
            (0..k).fold(0, |b, j| if row[j] > row[b] { j } else { b }) as u32
        })
        .collect();
    let got = decode(&outputs(s, 9), &params, &net).unwrap().ner.unwrap();
    assert_eq!(got, expected);
}

#[test]
fn crf_decode_matches_enumeration() {
    let (net, params) = ner_net(Variant::MtlCnnCrf);
    let k = net.sizes().ner_labels;
    let trans = params.value(params.id("ner_crf/transitions").unwrap()).clone();
    let mut rng = RngState::new(9);
    let len = 3;
    let s = Tensor::from_fn(&[30, k], |_| rng.uniform(-1.0, 1.0));
    let mut best = (f64::NEG_INFINITY, vec![]);
    for code in 0..k.pow(len as u32) {
        let path: Vec<u32> = (0..len).map(|t| ((code / k.pow(t as u32)) % k) as u32).collect();
        let score = crf_path_score(&s, &path, len, &trans).unwrap();
        if score > best.0 {
            best = (score, path);
        }
    }
    let got = decode(&outputs(s, len), &params, &net).unwrap().ner.unwrap();
    assert_eq!(got, best.1);
}
