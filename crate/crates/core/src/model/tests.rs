use super::*;
use crate::data::{build_vocab, encode, synthetic, Casing, EncodedExample, Vocab};
use crate::nn::{grad_check, Gradients, ParamStore, RngState, Tensor};

fn corpus_vocab(casing: Casing) -> Vocab {
    build_vocab(&synthetic::overfit_corpus(), casing).unwrap()
}

fn examples(vocab: &Vocab, n: usize) -> Vec<EncodedExample> {
    synthetic::overfit_corpus()
        .iter()
        .take(n)
        .map(|s| encode(s, vocab).unwrap())
        .collect()
}

fn tiny(variant: Variant) -> ModelConfig {
    ModelConfig {
        char_emb_dim: 3,
        word_emb_dim: 4,
        char_encoder_dim: 3,
        shared_bilstm_units: 3,
        ner_task_bilstm_units: 2,
        cnn_filters: 4,
        ..ModelConfig::for_variant(variant)
    }
}

fn build<T: crate::nn::Scalar>(config: &ModelConfig, vocab: &Vocab, seed: u64) -> (Network, ParamStore<T>) {
    Network::init(config, vocab, &mut RngState::new(seed)).unwrap()
}

#[test]
fn representation_width_and_padding() {
    let vocab = corpus_vocab(Casing::Cased);
    let ex = &examples(&vocab, 1)[0];
    for v in Variant::ALL {
        let cfg = ModelConfig::for_variant(v);
        let (net, store) = build::<f32>(&cfg, &vocab, 1);
        let repr = net.word_representation(&store, ex, None).unwrap();
        let enc = if v.char_encoder() == CharEncoderKind::Cnn { cfg.cnn_filters } else { cfg.char_encoder_dim };
        assert_eq!(repr.shape(), &[30, cfg.word_emb_dim + enc]);
        for t in ex.length..30 {
            assert!(repr.row(t).iter().all(|&x| x == 0.0));
        }
    }
}

#[test]
fn representation_halves_match_components() {
    use crate::nn::{char_cnn_encode, char_lstm_encode, embedding_lookup, LstmWeights};
    let vocab = corpus_vocab(Casing::Cased);
    let ex = &examples(&vocab, 1)[0];
    for v in [Variant::MtlLstm, Variant::MtlCnn] {
        let (net, store) = build::<f64>(&ModelConfig::for_variant(v), &vocab, 3);
        let repr = net.word_representation(&store, ex, None).unwrap();
        let dw = net.config().word_emb_dim;
        let p = |n: &str| store.value(store.id(n).unwrap());
        for t in 0..ex.length {
            let w = embedding_lookup(p("word_embedding"), &[ex.word_ids[t]]).unwrap();
            assert_eq!(&repr.row(t)[..dw], w.row(0));
            let ids = &ex.chars_of(t)[..ex.char_len(t)];
            let ce = embedding_lookup(p("char_embedding"), ids).unwrap();
            let enc = if v == Variant::MtlLstm {
                let w = LstmWeights {
                    kernel: p("char_lstm/kernel"),
                    recurrent: p("char_lstm/recurrent_kernel"),
                    bias: p("char_lstm/bias"),
                };
                char_lstm_encode(&ce, ids.len(), &w, None).unwrap().0
            } else {
                char_cnn_encode(&ce, ids.len(), p("char_cnn/filters"), p("char_cnn/bias")).unwrap().0
            };
            assert_eq!(&repr.row(t)[dw..], &enc[..]);
        }
    }
}

#[test]
fn independent_heads_have_task_widths() {
    let labels = synthetic::merged_ptb_labels();
    let ner: Vec<String> = synthetic::CONLL_NER_LABELS.iter().map(|s| s.to_string()).collect();
    let mut vocab = corpus_vocab(Casing::Cased);
    vocab.ner_labels = ner;
    vocab.pos_labels = labels;
    let ex = &examples(&vocab, 1)[0];

    let (net, store) = build::<f32>(&ModelConfig::for_variant(Variant::NerInd), &vocab, 1);
    let out = net.forward_independent(&store, ex, None).unwrap();
    assert_eq!(out.ner_scores.as_ref().unwrap().shape(), &[30, 9]);
    assert!(out.pos_scores.is_none());

    let (net, store) = build::<f32>(&ModelConfig::for_variant(Variant::PosInd), &vocab, 1);
    let out = net.forward_independent(&store, ex, None).unwrap();
    assert_eq!(out.pos_scores.as_ref().unwrap().shape(), &[30, 36]);
    assert!(out.ner_scores.is_none());
    assert!(net.forward_litemul(&store, ex, None).is_err());

    for v in [Variant::MtlLstm, Variant::MtlCnn, Variant::MtlCnnCrf] {
        let (net, store) = build::<f32>(&ModelConfig::for_variant(v), &vocab, 1);
        let out = net.forward_litemul(&store, ex, None).unwrap();
        assert_eq!(out.ner_scores.unwrap().shape(), &[30, 9]);
        assert_eq!(out.pos_scores.unwrap().shape(), &[30, 36]);
        assert!(net.forward_independent(&store, ex, None).is_err());
    }
}

#[test]
fn softmax_rows_sum_to_one() {
    let vocab = corpus_vocab(Casing::Cased);
    let ex = &examples(&vocab, 3)[2];
    let (net, store) = build::<f32>(&ModelConfig::for_variant(Variant::MtlLstm), &vocab, 4);
    let out = net.forward(&store, ex, None).unwrap();
    for s in [out.ner_scores.unwrap(), out.pos_scores.unwrap()] {
        for t in 0..out.length {
            let sum: f32 = s.row(t).iter().sum();
            assert!((sum - 1.0).abs() < 1e-5);
        }
    }
}

#[test]
fn zeroing_ner_branch_leaves_pos_unchanged() {
    let vocab = corpus_vocab(Casing::Cased);
    let ex = &examples(&vocab, 1)[0];
    for v in [Variant::MtlLstm, Variant::MtlCnnCrf] {
        let (net, mut store) = build::<f32>(&ModelConfig::for_variant(v), &vocab, 5);
        let before = net.forward(&store, ex, None).unwrap();
        for id in net.ner_branch_params() {
            store.value_mut(id).fill(0.0);
        }
        let after = net.forward(&store, ex, None).unwrap();
        assert_eq!(before.pos_scores, after.pos_scores);
        assert_ne!(before.ner_scores, after.ner_scores);
    }
}

#[test]
fn encoders_differ_only_in_char_half() {
    let vocab = corpus_vocab(Casing::Cased);
    let mut ex = examples(&vocab, 1).remove(0);
    ex.char_ids.iter_mut().for_each(|c| *c = crate::data::PAD_ID);
    let (lstm_net, lstm) = build::<f32>(&ModelConfig::for_variant(Variant::MtlLstm), &vocab, 8);
    let (cnn_net, mut cnn) = build::<f32>(&ModelConfig::for_variant(Variant::MtlCnn), &vocab, 9);
    let wid = cnn.id("word_embedding").unwrap();
    *cnn.value_mut(wid) = lstm.value(lstm.id("word_embedding").unwrap()).clone();
    let a = lstm_net.word_representation(&lstm, &ex, None).unwrap();
    let b = cnn_net.word_representation(&cnn, &ex, None).unwrap();
    let dw = 12;
    for t in 0..30 {
        assert_eq!(a.row(t)[..dw], b.row(t)[..dw]);
        assert!(a.row(t)[dw..].iter().all(|&x| x == 0.0));
        assert!(b.row(t)[dw..].iter().all(|&x| x == 0.0));
    }
    assert_eq!(a.cols() - dw, 10);
    assert_eq!(b.cols() - dw, 30);
}

#[test]
fn joint_loss_is_weighted_sum() {
    let cfg = ModelConfig::for_variant(Variant::MtlLstm);
    assert_eq!(joint_loss(0.0, 0.0, &cfg), 0.0);
    assert_eq!(joint_loss(2.0, 4.0, &cfg), 8.0);
    let d = joint_loss(2.0, 5.0, &cfg) - joint_loss(2.0, 4.0, &cfg);
    assert_eq!(d, 1.5);
}

#[test]
fn count_params_of_lone_dense() {
    let mut s = ParamStore::<f32>::new();
    s.insert("k", Tensor::zeros(&[4, 3])).unwrap();
    s.insert("b", Tensor::zeros(&[3])).unwrap();
    assert_eq!(count_params(&s), 15);
}

#[test]
fn crf_adds_transition_params() {
    let vocab = corpus_vocab(Casing::Cased);
    let (_, plain) = build::<f32>(&ModelConfig::for_variant(Variant::MtlCnn), &vocab, 1);
    let (_, crf) = build::<f32>(&ModelConfig::for_variant(Variant::MtlCnnCrf), &vocab, 1);
    let k_ner = vocab.ner_labels.len() + 2;
    let k_pos = vocab.pos_labels.len() + 2;
    assert_eq!(count_params(&crf) - count_params(&plain), k_ner * k_ner + k_pos * k_pos);
}

#[test]
fn inference_is_pure_and_shapes_ignore_content() {
    let vocab = corpus_vocab(Casing::Cased);
    let exs = examples(&vocab, 5);
    let (net, store) = build::<f32>(&ModelConfig::for_variant(Variant::MtlCnnCrf), &vocab, 2);
    let a = net.forward(&store, &exs[0], None).unwrap();
    let b = net.forward(&store, &exs[0], None).unwrap();
    assert_eq!(a, b);
    for ex in &exs {
        let o = net.forward(&store, ex, None).unwrap();
        assert_eq!(o.ner_scores.unwrap().shape(), a.ner_scores.as_ref().unwrap().shape());
    }
}

#[test]
fn training_mode_is_seeded() {
    let vocab = corpus_vocab(Casing::Cased);
    let ex = &examples(&vocab, 1)[0];
    let (net, store) = build::<f32>(&ModelConfig::for_variant(Variant::MtlLstm), &vocab, 2);
    let a = net.forward(&store, ex, Some(&mut RngState::new(7))).unwrap();
    let b = net.forward(&store, ex, Some(&mut RngState::new(7))).unwrap();
    let c = net.forward(&store, ex, None).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn argmax_ignores_logit_shift() {
    let vocab = corpus_vocab(Casing::Cased);
    let ex = &examples(&vocab, 1)[0];
    let (net, mut store) = build::<f64>(&ModelConfig::for_variant(Variant::NerInd), &vocab, 2);
    let before = net.decode(&store, &net.forward(&store, ex, None).unwrap()).unwrap();
    let id = store.id("ner_dense/bias").unwrap();
    store.value_mut(id).data_mut().iter_mut().for_each(|b| *b += 3.25);
    let after = net.decode(&store, &net.forward(&store, ex, None).unwrap()).unwrap();
    assert_eq!(before, after);
}

#[test]
fn bind_rejects_mismatched_store() {
    let vocab = corpus_vocab(Casing::Cased);
    let (_, store) = build::<f32>(&ModelConfig::for_variant(Variant::MtlLstm), &vocab, 2);
    assert!(Network::bind(&ModelConfig::for_variant(Variant::MtlCnn), &vocab, &store).is_err());
    assert!(Network::bind(&ModelConfig::for_variant(Variant::MtlLstm), &vocab, &store).is_ok());
}

fn check_variant(cfg: &ModelConfig, seed: Option<u64>) -> f64 {
    let vocab = corpus_vocab(Casing::Cased);
    let exs = examples(&vocab, 2);
    let batch: Vec<&EncodedExample> = exs.iter().collect();
    let (net, mut store) = build::<f64>(cfg, &vocab, 11);
    let rng = || seed.map(RngState::new);
    let mut grads = Gradients::zeros_like(&store);
    let mut r = rng();
    net.batch_loss_and_grads(&store, &batch, r.as_mut(), &mut grads).unwrap();
    store.accumulate(&grads);
    let report = grad_check(
        |s| {
            let mut g = Gradients::zeros_like(s);
            let mut r = rng();
            net.batch_loss_and_grads(s, &batch, r.as_mut(), &mut g).unwrap().joint
        },
        &mut store,
        1e-4,
        25,
    );
    assert!(report.checked > 100);
    report.max_rel_error
}

#[test]
fn full_variant_gradients_match_finite_differences() {
    for v in Variant::ALL {
        let err = check_variant(&tiny(v).without_dropout(), None);
        assert!(err < 1e-4, "{v:?}: {err}");
    }
}

#[test]
fn gradients_with_fixed_dropout_masks() {
    for v in [Variant::PosInd, Variant::MtlLstm, Variant::MtlCnnCrf] {
        let err = check_variant(&tiny(v), Some(99));
        assert!(err < 1e-4, "{v:?}: {err}");
    }
}

#[test]
fn ner_branch_gradient_ignores_pos_weight() {
    let vocab = corpus_vocab(Casing::Cased);
    let exs = examples(&vocab, 2);
    let batch: Vec<&EncodedExample> = exs.iter().collect();
    let grads_for = |w_pos: f64| {
        let cfg = ModelConfig { w_pos, ..tiny(Variant::MtlCnnCrf) };
        let (net, store) = build::<f64>(&cfg, &vocab, 3);
        let mut g = Gradients::zeros_like(&store);
        net.batch_loss_and_grads(&store, &batch, None, &mut g).unwrap();
        (net, g)
    };
    let (net, a) = grads_for(1.5);
    let (_, b) = grads_for(4.0);
    for id in net.ner_branch_params() {
        assert_eq!(a.get(id), b.get(id));
    }
    for id in net.pos_branch_params() {
        let (x, y) = (a.get(id).data(), b.get(id).data());
        for (p, q) in x.iter().zip(y) {
            assert!((q - p * 4.0 / 1.5).abs() < 1e-12);
        }
    }
}
