use serde::{Deserialize, Serialize};

use super::config::{CharEncoderKind, ModelConfig, Variant};
use crate::data::{EncodedExample, Vocab, PAD_ID};
use crate::error::{Error, Result};
use crate::nn::{
    bilstm, bilstm_backward, char_cnn_backward, char_cnn_encode, char_lstm_backward,
    char_lstm_encode, crf_nll_backward, crf_viterbi, dense, dense_backward, dropout,
    embedding_backward, embedding_lookup, glorot_uniform, iob_transition_mask, softmax_cross_entropy,
    softmax_rows, uniform, Activation, BiLstmTrace, CnnTrace, DropoutKind, Gradients, LstmGrads,
    LstmTrace, LstmWeights, Mask, ParamId, ParamStore, RngState, Scalar, Tensor,
};

const EMBEDDING_INIT: f64 = 0.05;

/// Inventory sizes that fix every parameter shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabSizes {
    pub words: usize,
    pub chars: usize,
    pub ner_labels: usize,
    pub pos_labels: usize,
}

impl VocabSizes {
    pub fn of(vocab: &Vocab) -> Self {
        VocabSizes {
            words: vocab.word_count(),
            chars: vocab.char_count(),
            ner_labels: vocab.ner_labels.len(),
            pos_labels: vocab.pos_labels.len(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Init {
    Embedding,
    Glorot { fan_in: usize, fan_out: usize },
    Zeros,
    LstmBias,
}

struct Slot {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

fn lstm_slots(out: &mut Vec<Slot>, prefix: &str, d_in: usize, h: usize) {
    out.push(Slot {
        name: format!("{prefix}/kernel"),
        shape: vec![d_in, 4 * h],
        init: Init::Glorot { fan_in: d_in, fan_out: 4 * h },
    });
    out.push(Slot {
        name: format!("{prefix}/recurrent_kernel"),
        shape: vec![h, 4 * h],
        init: Init::Glorot { fan_in: h, fan_out: 4 * h },
    });
    out.push(Slot {
        name: format!("{prefix}/bias"),
        shape: vec![4 * h],
        init: Init::LstmBias,
    });
}

fn head_slots(out: &mut Vec<Slot>, prefix: &str, d_in: usize, k: usize, crf: bool) {
    out.push(Slot {
        name: format!("{prefix}_dense/kernel"),
        shape: vec![d_in, k],
        init: Init::Glorot { fan_in: d_in, fan_out: k },
    });
    out.push(Slot {
        name: format!("{prefix}_dense/bias"),
        shape: vec![k],
        init: Init::Zeros,
    });
    if crf {
        out.push(Slot {
            name: format!("{prefix}_crf/transitions"),
            shape: vec![k + 2, k + 2],
            init: Init::Glorot { fan_in: k + 2, fan_out: k + 2 },
        });
    }
}

fn trunk_name(variant: Variant) -> &'static str {
    if variant.is_multitask() {
        "shared_bilstm"
    } else {
        "bilstm"
    }
}

fn layout(c: &ModelConfig, s: &VocabSizes) -> Vec<Slot> {
    let mut out = vec![
        Slot {
            name: "word_embedding".into(),
            shape: vec![s.words, c.word_emb_dim],
            init: Init::Embedding,
        },
        Slot {
            name: "char_embedding".into(),
            shape: vec![s.chars, c.char_emb_dim],
            init: Init::Embedding,
        },
    ];
    match c.variant.char_encoder() {
        CharEncoderKind::Lstm => lstm_slots(&mut out, "char_lstm", c.char_emb_dim, c.char_encoder_dim),
        CharEncoderKind::Cnn => {
            let (k, d, f) = (c.cnn_kernel, c.char_emb_dim, c.cnn_filters);
            out.push(Slot {
                name: "char_cnn/filters".into(),
                shape: vec![k, d, f],
                init: Init::Glorot { fan_in: k * d, fan_out: k * f },
            });
            out.push(Slot {
                name: "char_cnn/bias".into(),
                shape: vec![f],
                init: Init::Zeros,
            });
        }
    }
    let trunk = trunk_name(c.variant);
    let h = c.shared_bilstm_units;
    for dir in ["fwd", "bwd"] {
        lstm_slots(&mut out, &format!("{trunk}/{dir}"), c.repr_dim(), h);
    }
    if c.variant.has_ner() {
        let mut d_in = 2 * h;
        if c.variant.is_multitask() {
            for dir in ["fwd", "bwd"] {
                lstm_slots(&mut out, &format!("ner_bilstm/{dir}"), 2 * h, c.ner_task_bilstm_units);
            }
            d_in = 2 * c.ner_task_bilstm_units;
        }
        head_slots(&mut out, "ner", d_in, s.ner_labels, c.ner_uses_crf());
    }
    if c.variant.has_pos() {
        head_slots(&mut out, "pos", 2 * h, s.pos_labels, c.pos_uses_crf());
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct LstmIds {
    kernel: ParamId,
    recurrent: ParamId,
    bias: ParamId,
}

impl LstmIds {
    fn weights<'a, T: Scalar>(&self, s: &'a ParamStore<T>) -> LstmWeights<'a, T> {
        LstmWeights {
            kernel: s.value(self.kernel),
            recurrent: s.value(self.recurrent),
            bias: s.value(self.bias),
        }
    }

    fn add<T: Scalar>(&self, grads: &mut Gradients<T>, g: &LstmGrads<T>) {
        grads.add(self.kernel, &g.kernel);
        grads.add(self.recurrent, &g.recurrent);
        grads.add(self.bias, &g.bias);
    }
}

#[derive(Debug, Clone, Copy)]
struct BiIds {
    fwd: LstmIds,
    bwd: LstmIds,
}

#[derive(Debug, Clone, Copy)]
enum CharIds {
    Lstm(LstmIds),
    Cnn { filters: ParamId, bias: ParamId },
}

#[derive(Debug, Clone)]
struct HeadIds {
    bilstm: Option<BiIds>,
    kernel: ParamId,
    bias: ParamId,
    transitions: Option<ParamId>,
    /// Additive constraint mask for the transitions.
    constraint: Option<Tensor<f64>>,
}

/// Per-task network outputs for one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskOutputs<T = f32> {
    /// Probabilities for a softmax head, raw emissions for a CRF head.
    pub ner_scores: Option<Tensor<T>>,
    pub pos_scores: Option<Tensor<T>>,
    pub length: usize,
}

/// Decoded label ids over the true length.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Predictions {
    pub ner: Option<Vec<u32>>,
    pub pos: Option<Vec<u32>>,
}

/// Unweighted per-task losses and their weighted combination.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Losses {
    pub ner: Option<f64>,
    pub pos: Option<f64>,
    pub joint: f64,
}

/// `w_ner·ner_loss + w_pos·pos_loss`.
pub fn joint_loss(ner_loss: f64, pos_loss: f64, config: &ModelConfig) -> f64 {
    config.w_ner * ner_loss + config.w_pos * pos_loss
}

/// Total number of trainable scalars.
pub fn count_params<T: Scalar>(params: &ParamStore<T>) -> usize {
    params.num_elements()
}

enum CharEnc<T> {
    Empty,
    Lstm(LstmTrace<T>),
    Cnn(CnnTrace<T>),
}

struct CharStep<T> {
    ids: Vec<u32>,
    mask: Option<Mask<T>>,
    enc: CharEnc<T>,
}

struct BiStep<T> {
    in_mask: Option<Mask<T>>,
    trace: BiLstmTrace<T>,
}

struct HeadTrace<T> {
    bilstm: Option<BiStep<T>>,
    input: Tensor<T>,
    logits: Tensor<T>,
}

/// Word representation with its character traces and spatial mask.
type Repr<T> = (Tensor<T>, Vec<CharStep<T>>, Option<Mask<T>>);

struct Trace<T> {
    length: usize,
    chars: Vec<CharStep<T>>,
    spatial: Option<Mask<T>>,
    trunk: BiStep<T>,
    ner: Option<HeadTrace<T>>,
    pos: Option<HeadTrace<T>>,
}

fn maybe_dropout<T: Scalar>(
    x: Tensor<T>,
    rate: f64,
    kind: DropoutKind,
    rng: &mut Option<&mut RngState>,
) -> Result<(Tensor<T>, Option<Mask<T>>)> {
    match rng.as_deref_mut() {
        Some(r) => dropout(&x, rate, kind, r, true),
        None => Ok((x, None)),
    }
}

fn rec_mask<T: Scalar>(units: usize, rate: f64, rng: &mut Option<&mut RngState>) -> Option<Vec<T>> {
    rng.as_deref_mut().and_then(|r| Mask::recurrent(units, rate, r, true))
}

/// Index of the largest entry; the first one wins ties.
fn argmax<T: Scalar>(row: &[T]) -> u32 {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best as u32
}

/// Parameter layout of one variant, bound to a [`ParamStore`].
///
/// Passing `Some(rng)` to the forward functions enables training behaviour
/// (dropout); `None` is inference and is deterministic.
#[derive(Debug, Clone)]
pub struct Network {
    config: ModelConfig,
    sizes: VocabSizes,
    word_emb: ParamId,
    char_emb: ParamId,
    char_enc: CharIds,
    trunk: BiIds,
    ner: Option<HeadIds>,
    pos: Option<HeadIds>,
}

impl Network {
    /// Builds a freshly initialized parameter store and binds to it.
    pub fn init<T: Scalar>(config: &ModelConfig, vocab: &Vocab, rng: &mut RngState) -> Result<(Self, ParamStore<T>)> {
        config.validate()?;
        let sizes = VocabSizes::of(vocab);
        let mut store = ParamStore::new();
        for slot in layout(config, &sizes) {
            let t = match slot.init {
                Init::Embedding => uniform(&slot.shape, EMBEDDING_INIT, rng),
                Init::Glorot { fan_in, fan_out } => glorot_uniform(&slot.shape, fan_in, fan_out, rng),
                Init::Zeros => Tensor::zeros(&slot.shape),
                Init::LstmBias => {
                    let h = slot.shape[0] / 4;
                    Tensor::from_fn(&slot.shape, |i| if (h..2 * h).contains(&i) { T::one() } else { T::zero() })
                }
            };
            store.insert(&slot.name, t)?;
        }
        let net = Self::bind(config, vocab, &store)?;
        Ok((net, store))
    }

    /// Binds to an existing store, checking that every tensor is present with
    /// the expected shape and that nothing extra is there.
    pub fn bind<T: Scalar>(config: &ModelConfig, vocab: &Vocab, store: &ParamStore<T>) -> Result<Self> {
        config.validate()?;
        let sizes = VocabSizes::of(vocab);
        let slots = layout(config, &sizes);
        for slot in &slots {
            let id = store
                .id(&slot.name)
                .ok_or_else(|| Error::Shape(format!("missing parameter {}", slot.name)))?;
            store.value(id).require_shape(&slot.shape, &slot.name)?;
        }
        if store.len() != slots.len() {
            return Err(Error::Shape(format!(
                "expected {} parameter tensors, found {}",
                slots.len(),
                store.len()
            )));
        }
        let id = |n: &str| store.id(n).expect("checked above");
        let lstm = |p: &str| LstmIds {
            kernel: id(&format!("{p}/kernel")),
            recurrent: id(&format!("{p}/recurrent_kernel")),
            bias: id(&format!("{p}/bias")),
        };
        let bi = |p: &str| BiIds {
            fwd: lstm(&format!("{p}/fwd")),
            bwd: lstm(&format!("{p}/bwd")),
        };
        let char_enc = match config.variant.char_encoder() {
            CharEncoderKind::Lstm => CharIds::Lstm(lstm("char_lstm")),
            CharEncoderKind::Cnn => CharIds::Cnn {
                filters: id("char_cnn/filters"),
                bias: id("char_cnn/bias"),
            },
        };
        let head = |p: &str, bilstm: Option<BiIds>, crf: bool, constraint: Option<Tensor<f64>>| HeadIds {
            bilstm,
            kernel: id(&format!("{p}_dense/kernel")),
            bias: id(&format!("{p}_dense/bias")),
            transitions: crf.then(|| id(&format!("{p}_crf/transitions"))),
            constraint: constraint.filter(|_| crf),
        };
        let ner = config.variant.has_ner().then(|| {
            let b = config.variant.is_multitask().then(|| bi("ner_bilstm"));
            let mask = config
                .crf_iob_constraints
                .then(|| iob_transition_mask::<f64>(&vocab.ner_labels));
            head("ner", b, config.ner_uses_crf(), mask)
        });
        let pos = config
            .variant
            .has_pos()
            .then(|| head("pos", None, config.pos_uses_crf(), None));
        Ok(Network {
            config: config.clone(),
            sizes,
            word_emb: id("word_embedding"),
            char_emb: id("char_embedding"),
            char_enc,
            trunk: bi(trunk_name(config.variant)),
            ner,
            pos,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn sizes(&self) -> VocabSizes {
        self.sizes
    }

    /// Ids of every parameter that only the NER branch reads.
    pub fn ner_branch_params(&self) -> Vec<ParamId> {
        self.ner.as_ref().map(branch_ids).unwrap_or_default()
    }

    /// Ids of every parameter that only the POS branch reads.
    pub fn pos_branch_params(&self) -> Vec<ParamId> {
        self.pos.as_ref().map(branch_ids).unwrap_or_default()
    }

    fn check_example(&self, ex: &EncodedExample) -> Result<()> {
        if ex.length == 0 || ex.length > ex.max_seq {
            return Err(Error::InvalidArgument(format!(
                "example length {} outside 1..={}",
                ex.length, ex.max_seq
            )));
        }
        Ok(())
    }

    fn encode_chars<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        ids: Vec<u32>,
        rng: &mut Option<&mut RngState>,
    ) -> Result<(Vec<T>, CharStep<T>)> {
        let c = &self.config;
        if ids.is_empty() {
            let step = CharStep { ids, mask: None, enc: CharEnc::Empty };
            return Ok((vec![T::zero(); c.char_out_dim()], step));
        }
        let embs = embedding_lookup(store.value(self.char_emb), &ids)?;
        let (embs, mask) = maybe_dropout(embs, c.char_dropout_regular, DropoutKind::Regular, rng)?;
        let (out, enc) = match self.char_enc {
            CharIds::Lstm(l) => {
                let w = l.weights(store);
                let m = rec_mask(w.units(), c.char_dropout_recurrent, rng);
                let (o, tr) = char_lstm_encode(&embs, ids.len(), &w, m.as_deref())?;
                (o, CharEnc::Lstm(tr))
            }
            CharIds::Cnn { filters, bias } => {
                let (o, tr) = char_cnn_encode(&embs, ids.len(), store.value(filters), store.value(bias))?;
                (o, CharEnc::Cnn(tr))
            }
        };
        Ok((out, CharStep { ids, mask, enc }))
    }

    fn representation<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        ex: &EncodedExample,
        rng: &mut Option<&mut RngState>,
    ) -> Result<Repr<T>> {
        self.check_example(ex)?;
        let dw = self.config.word_emb_dim;
        let len = ex.length;
        let mut repr = Tensor::zeros(&[ex.max_seq, self.config.repr_dim()]);
        let words = embedding_lookup(store.value(self.word_emb), &ex.word_ids[..len])?;
        let mut chars = Vec::with_capacity(len);
        for t in 0..len {
            let ids = ex.chars_of(t)[..ex.char_len(t)].to_vec();
            let (enc, step) = self.encode_chars(store, ids, rng)?;
            let row = repr.row_mut(t);
            row[..dw].copy_from_slice(words.row(t));
            row[dw..].copy_from_slice(&enc);
            chars.push(step);
        }
        let (repr, spatial) = maybe_dropout(repr, self.config.dropout_spatial, DropoutKind::Spatial, rng)?;
        Ok((repr, chars, spatial))
    }

    /// Word embedding concatenated with the character encoding, per token.
    /// Rows past the sentence length are zero.
    pub fn word_representation<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        ex: &EncodedExample,
        rng: Option<&mut RngState>,
    ) -> Result<Tensor<T>> {
        let mut rng = rng;
        Ok(self.representation(store, ex, &mut rng)?.0)
    }

    fn run_bilstm<T: Scalar>(
        &self,
        ids: &BiIds,
        store: &ParamStore<T>,
        input: Tensor<T>,
        len: usize,
        rng: &mut Option<&mut RngState>,
    ) -> Result<(Tensor<T>, BiStep<T>)> {
        let c = &self.config;
        let (input, in_mask) = maybe_dropout(input, c.dropout_regular, DropoutKind::Regular, rng)?;
        let (wf, wb) = (ids.fwd.weights(store), ids.bwd.weights(store));
        let mf = rec_mask(wf.units(), c.dropout_recurrent, rng);
        let mb = rec_mask(wb.units(), c.dropout_recurrent, rng);
        let (out, trace) = bilstm(&input, len, &wf, &wb, (mf.as_deref(), mb.as_deref()))?;
        Ok((out, BiStep { in_mask, trace }))
    }

    fn run_head<T: Scalar>(
        &self,
        head: &HeadIds,
        store: &ParamStore<T>,
        trunk: &Tensor<T>,
        len: usize,
        rng: &mut Option<&mut RngState>,
    ) -> Result<HeadTrace<T>> {
        let (input, bilstm) = match &head.bilstm {
            Some(b) => {
                let (o, s) = self.run_bilstm(b, store, trunk.clone(), len, rng)?;
                (o, Some(s))
            }
            None => (trunk.clone(), None),
        };
        let logits = dense(&input, store.value(head.kernel), store.value(head.bias), Activation::None)?;
        Ok(HeadTrace { bilstm, input, logits })
    }

    fn forward_traced<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        ex: &EncodedExample,
        rng: Option<&mut RngState>,
    ) -> Result<Trace<T>> {
        let mut rng = rng;
        let (repr, chars, spatial) = self.representation(store, ex, &mut rng)?;
        let len = ex.length;
        let (trunk_out, trunk) = self.run_bilstm(&self.trunk, store, repr, len, &mut rng)?;
        let ner = match &self.ner {
            Some(h) => Some(self.run_head(h, store, &trunk_out, len, &mut rng)?),
            None => None,
        };
        let pos = match &self.pos {
            Some(h) => Some(self.run_head(h, store, &trunk_out, len, &mut rng)?),
            None => None,
        };
        Ok(Trace { length: len, chars, spatial, trunk, ner, pos })
    }

    fn outputs<T: Scalar>(&self, trace: &Trace<T>) -> TaskOutputs<T> {
        let scores = |head: &Option<HeadIds>, t: &Option<HeadTrace<T>>| {
            let (h, t) = (head.as_ref()?, t.as_ref()?);
            let mut s = t.logits.clone();
            if h.transitions.is_none() {
                softmax_rows(&mut s);
            }
            Some(s)
        };
        TaskOutputs {
            ner_scores: scores(&self.ner, &trace.ner),
            pos_scores: scores(&self.pos, &trace.pos),
            length: trace.length,
        }
    }

    /// Forward pass for any variant.
    pub fn forward<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        ex: &EncodedExample,
        rng: Option<&mut RngState>,
    ) -> Result<TaskOutputs<T>> {
        Ok(self.outputs(&self.forward_traced(store, ex, rng)?))
    }

    /// Forward pass of a single-task variant.
    pub fn forward_independent<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        ex: &EncodedExample,
        rng: Option<&mut RngState>,
    ) -> Result<TaskOutputs<T>> {
        if self.config.variant.is_multitask() {
            return Err(Error::Config(format!("{} is a multi-task variant", self.config.variant.name())));
        }
        self.forward(store, ex, rng)
    }

    /// Forward pass of a multi-task variant.
    pub fn forward_litemul<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        ex: &EncodedExample,
        rng: Option<&mut RngState>,
    ) -> Result<TaskOutputs<T>> {
        if !self.config.variant.is_multitask() {
            return Err(Error::Config(format!("{} is a single-task variant", self.config.variant.name())));
        }
        self.forward(store, ex, rng)
    }

    fn transitions<T: Scalar>(&self, head: &HeadIds, store: &ParamStore<T>) -> Option<Tensor<T>> {
        let id = head.transitions?;
        let mut t = store.value(id).clone();
        if let Some(m) = &head.constraint {
            for (v, &c) in t.data_mut().iter_mut().zip(m.data()) {
                *v += T::of(c);
            }
        }
        Some(t)
    }

    /// Argmax for softmax heads, Viterbi for CRF heads.
    pub fn decode<T: Scalar>(&self, store: &ParamStore<T>, out: &TaskOutputs<T>) -> Result<Predictions> {
        let len = out.length;
        let one = |head: &Option<HeadIds>, scores: &Option<Tensor<T>>| -> Result<Option<Vec<u32>>> {
            let (Some(h), Some(s)) = (head.as_ref(), scores.as_ref()) else {
                return Ok(None);
            };
            Ok(Some(match self.transitions(h, store) {
                Some(tr) => crf_viterbi(s, len, &tr)?.0,
                None => (0..len).map(|t| argmax(s.row(t))).collect(),
            }))
        };
        Ok(Predictions {
            ner: one(&self.ner, &out.ner_scores)?,
            pos: one(&self.pos, &out.pos_scores)?,
        })
    }

    /// Task weights applied to the per-task losses of this variant.
    fn weights(&self) -> (f64, f64) {
        if self.config.variant.is_multitask() {
            (self.config.w_ner, self.config.w_pos)
        } else {
            (1.0, 1.0)
        }
    }

    fn head_loss<T: Scalar>(
        &self,
        head: &HeadIds,
        store: &ParamStore<T>,
        trace: &HeadTrace<T>,
        tags: &[u32],
        len: usize,
    ) -> Result<(T, Tensor<T>, Option<Tensor<T>>)> {
        match self.transitions(head, store) {
            Some(tr) => {
                let (nll, g) = crf_nll_backward(&trace.logits, tags, len, &tr)?;
                Ok((nll, g.emissions, Some(g.transitions)))
            }
            None => {
                let (loss, _, d) = softmax_cross_entropy(&trace.logits, tags, len)?;
                Ok((loss, d, None))
            }
        }
    }

    /// Losses of one labelled example without gradients.
    pub fn loss<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        ex: &EncodedExample,
        rng: Option<&mut RngState>,
    ) -> Result<Losses> {
        let trace = self.forward_traced(store, ex, rng)?;
        let (wn, wp) = self.weights();
        let mut l = Losses::default();
        if let (Some(h), Some(t)) = (&self.ner, &trace.ner) {
            let v = self.head_loss(h, store, t, ex.ner(), ex.length)?.0.as_f64();
            l.ner = Some(v);
            l.joint += wn * v;
        }
        if let (Some(h), Some(t)) = (&self.pos, &trace.pos) {
            let v = self.head_loss(h, store, t, ex.pos(), ex.length)?.0.as_f64();
            l.pos = Some(v);
            l.joint += wp * v;
        }
        Ok(l)
    }

    /// Losses of one example; accumulates `scale · ∂joint/∂θ` into `grads`.
    pub fn loss_and_grads<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        ex: &EncodedExample,
        rng: Option<&mut RngState>,
        scale: f64,
        grads: &mut Gradients<T>,
    ) -> Result<Losses> {
        let trace = self.forward_traced(store, ex, rng)?;
        let (wn, wp) = self.weights();
        let len = ex.length;
        let mut l = Losses::default();
        let mut d_trunk = Tensor::zeros(&[ex.max_seq, 2 * self.config.shared_bilstm_units]);
        let tasks = [
            (&self.ner, &trace.ner, ex.ner(), wn, &mut l.ner),
            (&self.pos, &trace.pos, ex.pos(), wp, &mut l.pos),
        ];
        for (head, ht, tags, w, slot) in tasks {
            let (Some(h), Some(t)) = (head, ht) else { continue };
            let (loss, mut d_logits, d_trans) = self.head_loss(h, store, t, tags, len)?;
            let loss = loss.as_f64();
            *slot = Some(loss);
            l.joint += w * loss;
            let s = T::of(w * scale);
            d_logits.scale(s);
            if let (Some(id), Some(mut dt)) = (h.transitions, d_trans) {
                dt.scale(s);
                grads.add(id, &dt);
            }
            let kernel = store.value(h.kernel);
            let mut dk = Tensor::zeros(kernel.shape());
            let mut db = Tensor::zeros(store.value(h.bias).shape());
            let d_in = dense_backward(&t.input, &t.logits, &d_logits, kernel, Activation::None, &mut dk, &mut db);
            grads.add(h.kernel, &dk);
            grads.add(h.bias, &db);
            let d = match (&h.bilstm, &t.bilstm) {
                (Some(ids), Some(step)) => self.bilstm_backward(ids, step, store, &d_in, grads),
                _ => d_in,
            };
            d_trunk.add_assign(&d);
        }
        let mut d_repr = self.bilstm_backward(&self.trunk, &trace.trunk, store, &d_trunk, grads);
        if let Some(m) = &trace.spatial {
            d_repr = m.backward(&d_repr);
        }
        let dw = self.config.word_emb_dim;
        let mut d_words = Tensor::zeros(&[len, dw]);
        for t in 0..len {
            d_words.row_mut(t).copy_from_slice(&d_repr.row(t)[..dw]);
        }
        embedding_backward(grads.get_mut(self.word_emb), &ex.word_ids[..len], &d_words, PAD_ID);
        for (t, step) in trace.chars.iter().enumerate() {
            self.char_backward(step, store, &d_repr.row(t)[dw..], grads);
        }
        Ok(l)
    }

    fn bilstm_backward<T: Scalar>(
        &self,
        ids: &BiIds,
        step: &BiStep<T>,
        store: &ParamStore<T>,
        dout: &Tensor<T>,
        grads: &mut Gradients<T>,
    ) -> Tensor<T> {
        let (wf, wb) = (ids.fwd.weights(store), ids.bwd.weights(store));
        let mut gf = LstmGrads::zeros_like(&wf);
        let mut gb = LstmGrads::zeros_like(&wb);
        let dx = bilstm_backward(&step.trace, dout, &wf, &wb, &mut gf, &mut gb);
        ids.fwd.add(grads, &gf);
        ids.bwd.add(grads, &gb);
        match &step.in_mask {
            Some(m) => m.backward(&dx),
            None => dx,
        }
    }

    fn char_backward<T: Scalar>(
        &self,
        step: &CharStep<T>,
        store: &ParamStore<T>,
        d_enc: &[T],
        grads: &mut Gradients<T>,
    ) {
        let dx = match (&step.enc, self.char_enc) {
            (CharEnc::Lstm(tr), CharIds::Lstm(ids)) => {
                let w = ids.weights(store);
                let mut g = LstmGrads::zeros_like(&w);
                let dx = char_lstm_backward(tr, d_enc, &w, &mut g);
                ids.add(grads, &g);
                dx
            }
            (CharEnc::Cnn(tr), CharIds::Cnn { filters, bias }) => {
                let f = store.value(filters);
                let mut df = Tensor::zeros(f.shape());
                let mut db = Tensor::zeros(store.value(bias).shape());
                let dx = char_cnn_backward(tr, d_enc, f, &mut df, &mut db);
                grads.add(filters, &df);
                grads.add(bias, &db);
                dx
            }
            _ => return,
        };
        let dx = match &step.mask {
            Some(m) => m.backward(&dx),
            None => dx,
        };
        embedding_backward(grads.get_mut(self.char_emb), &step.ids, &dx, PAD_ID);
    }

    /// Mean losses over a batch; gradients of the mean joint loss are
    /// accumulated into `grads`.
    pub fn batch_loss_and_grads<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        batch: &[&EncodedExample],
        mut rng: Option<&mut RngState>,
        grads: &mut Gradients<T>,
    ) -> Result<Losses> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let scale = 1.0 / batch.len() as f64;
        let mut total = Losses::default();
        for ex in batch {
            let l = self.loss_and_grads(store, ex, rng.as_deref_mut(), scale, grads)?;
            total.joint += l.joint * scale;
            if let Some(v) = l.ner {
                *total.ner.get_or_insert(0.0) += v * scale;
            }
            if let Some(v) = l.pos {
                *total.pos.get_or_insert(0.0) += v * scale;
            }
        }
        Ok(total)
    }
}

fn branch_ids(h: &HeadIds) -> Vec<ParamId> {
    let mut v = Vec::new();
    if let Some(b) = h.bilstm {
        for l in [b.fwd, b.bwd] {
            v.extend([l.kernel, l.recurrent, l.bias]);
        }
    }
    v.extend([h.kernel, h.bias]);
    v.extend(h.transitions);
    v
}
