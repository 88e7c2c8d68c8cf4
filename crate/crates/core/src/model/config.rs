use serde::{Deserialize, Serialize};

use crate::data::{Casing, MAX_CHAR, MAX_SEQ};
use crate::error::{Error, Result};

/// The five tagger architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "NER_IND")]
    NerInd,
    #[serde(rename = "POS_IND")]
    PosInd,
    #[serde(rename = "MTL_LSTM")]
    MtlLstm,
    #[serde(rename = "MTL_CNN")]
    MtlCnn,
    #[serde(rename = "MTL_CNN_CRF")]
    MtlCnnCrf,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::NerInd,
        Variant::PosInd,
        Variant::MtlLstm,
        Variant::MtlCnn,
        Variant::MtlCnnCrf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::NerInd => "NER_IND",
            Variant::PosInd => "POS_IND",
            Variant::MtlLstm => "MTL_LSTM",
            Variant::MtlCnn => "MTL_CNN",
            Variant::MtlCnnCrf => "MTL_CNN_CRF",
        }
    }

    pub fn is_multitask(self) -> bool {
        matches!(self, Variant::MtlLstm | Variant::MtlCnn | Variant::MtlCnnCrf)
    }

    pub fn has_ner(self) -> bool {
        self != Variant::PosInd
    }

    pub fn has_pos(self) -> bool {
        self != Variant::NerInd
    }

    pub fn char_encoder(self) -> CharEncoderKind {
        match self {
            Variant::MtlCnn | Variant::MtlCnnCrf => CharEncoderKind::Cnn,
            _ => CharEncoderKind::Lstm,
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharEncoderKind {
    Lstm,
    Cnn,
}

/// Architecture and regularization hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    pub char_emb_dim: usize,
    pub word_emb_dim: usize,
    /// Units of the character LSTM (LSTM variants).
    pub char_encoder_dim: usize,
    /// Units per direction of the word-level (shared) BiLSTM.
    pub shared_bilstm_units: usize,
    /// Units per direction of the NER-specific BiLSTM (multi-task variants).
    pub ner_task_bilstm_units: usize,
    pub dropout_spatial: f64,
    pub dropout_recurrent: f64,
    /// Element-wise dropout on word-level BiLSTM inputs.
    pub dropout_regular: f64,
    /// Element-wise dropout on character embeddings.
    pub char_dropout_regular: f64,
    /// Recurrent dropout inside the character LSTM.
    pub char_dropout_recurrent: f64,
    pub w_ner: f64,
    pub w_pos: f64,
    pub casing: Casing,
    pub max_seq: usize,
    pub max_char: usize,
    pub cnn_kernel: usize,
    pub cnn_filters: usize,
    pub use_crf: bool,
    pub crf_on_pos: bool,
    /// Hard-mask IOB2-invalid transitions in CRF heads.
    pub crf_iob_constraints: bool,
}

impl ModelConfig {
    /// Defaults for CoNLL-2003 training of each variant.
    pub fn for_variant(variant: Variant) -> Self {
        let base = ModelConfig {
            variant,
            char_emb_dim: 6,
            word_emb_dim: 12,
            char_encoder_dim: 10,
            shared_bilstm_units: 20,
            ner_task_bilstm_units: 20,
            dropout_spatial: 0.3,
            dropout_recurrent: 0.6,
            dropout_regular: 0.0,
            char_dropout_regular: 0.0,
            char_dropout_recurrent: 0.0,
            w_ner: 1.0,
            w_pos: 1.5,
            casing: Casing::Cased,
            max_seq: MAX_SEQ,
            max_char: MAX_CHAR,
            cnn_kernel: 3,
            cnn_filters: 30,
            use_crf: false,
            crf_on_pos: true,
            crf_iob_constraints: false,
        };
        match variant {
            Variant::NerInd => base,
            Variant::PosInd => ModelConfig {
                word_emb_dim: 8,
                char_encoder_dim: 8,
                dropout_spatial: 0.1,
                dropout_recurrent: 0.2,
                dropout_regular: 0.2,
                ..base
            },
            Variant::MtlLstm | Variant::MtlCnn => ModelConfig {
                char_dropout_regular: 0.2,
                char_dropout_recurrent: 0.5,
                ..base
            },
            Variant::MtlCnnCrf => ModelConfig {
                char_dropout_regular: 0.2,
                char_dropout_recurrent: 0.5,
                use_crf: true,
                ..base
            },
        }
    }

    /// Width of the character encoder output.
    pub fn char_out_dim(&self) -> usize {
        match self.variant.char_encoder() {
            CharEncoderKind::Lstm => self.char_encoder_dim,
            CharEncoderKind::Cnn => self.cnn_filters,
        }
    }

    /// Width of one token's word representation.
    pub fn repr_dim(&self) -> usize {
        self.word_emb_dim + self.char_out_dim()
    }

    pub fn ner_uses_crf(&self) -> bool {
        self.variant.has_ner() && self.use_crf
    }

    pub fn pos_uses_crf(&self) -> bool {
        self.variant.has_pos() && self.use_crf && self.crf_on_pos
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("char_emb_dim", self.char_emb_dim),
            ("word_emb_dim", self.word_emb_dim),
            ("char_encoder_dim", self.char_encoder_dim),
            ("shared_bilstm_units", self.shared_bilstm_units),
            ("ner_task_bilstm_units", self.ner_task_bilstm_units),
            ("max_seq", self.max_seq),
            ("max_char", self.max_char),
            ("cnn_kernel", self.cnn_kernel),
            ("cnn_filters", self.cnn_filters),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        let rates = [
            ("dropout_spatial", self.dropout_spatial),
            ("dropout_recurrent", self.dropout_recurrent),
            ("dropout_regular", self.dropout_regular),
            ("char_dropout_regular", self.char_dropout_regular),
            ("char_dropout_recurrent", self.char_dropout_recurrent),
        ];
        for (name, r) in rates {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Config(format!("{name} = {r} is not in [0, 1)")));
            }
        }
        if !(self.w_ner > 0.0 && self.w_pos > 0.0) {
            return Err(Error::Config("loss weights w_ner and w_pos must be positive".into()));
        }
        Ok(())
    }

    /// Same architecture with every dropout rate set to zero.
    pub fn without_dropout(&self) -> Self {
        ModelConfig {
            dropout_spatial: 0.0,
            dropout_recurrent: 0.0,
            dropout_regular: 0.0,
            char_dropout_regular: 0.0,
            char_dropout_recurrent: 0.0,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conll_defaults() {
        let c = ModelConfig::for_variant(Variant::MtlLstm);
        assert_eq!((c.char_emb_dim, c.word_emb_dim, c.char_encoder_dim), (6, 12, 10));
        assert_eq!(c.shared_bilstm_units, 20);
        assert_eq!(c.dropout_recurrent, 0.6);
        assert_eq!((c.w_ner, c.w_pos), (1.0, 1.5));
        assert_eq!((c.max_seq, c.max_char), (30, 15));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn pos_defaults() {
        let c = ModelConfig::for_variant(Variant::PosInd);
        assert_eq!((c.char_emb_dim, c.word_emb_dim, c.char_encoder_dim), (6, 8, 8));
        assert_eq!(c.dropout_spatial, 0.1);
        assert_eq!((c.dropout_regular, c.dropout_recurrent), (0.2, 0.2));
    }

    #[test]
    fn crf_flags() {
        let c = ModelConfig::for_variant(Variant::MtlCnnCrf);
        assert!(c.ner_uses_crf() && c.pos_uses_crf());
        assert_eq!(c.char_out_dim(), 30);
        let c = ModelConfig { crf_on_pos: false, ..c };
        assert!(c.ner_uses_crf() && !c.pos_uses_crf());
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = ModelConfig::for_variant(Variant::NerInd);
        c.w_pos = 0.0;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::for_variant(Variant::NerInd);
        c.dropout_recurrent = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_json_keys_are_rejected() {
        let mut v = serde_json::to_value(ModelConfig::for_variant(Variant::NerInd)).unwrap();
        v["w_nerr"] = serde_json::json!(1.0);
        assert!(serde_json::from_value::<ModelConfig>(v).is_err());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(serde_json::to_string(&v).unwrap(), format!("\"{}\"", v.name()));
        }
    }
}
