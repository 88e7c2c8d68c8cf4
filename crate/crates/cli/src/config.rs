//! Run configuration: one JSON document with `model`, `train` and `data`
//! sections, layered over the per-variant defaults.

use std::path::{Path, PathBuf};

use litemul::model::{ModelConfig, Variant};
use litemul::train::TrainConfig;
use serde::Deserialize;
use serde_json::{Map, Value};

pub const SEED_ENV: &str = "LITEMUL_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Conll2003,
    Conllu,
}

impl CorpusFormat {
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("conllu") => CorpusFormat::Conllu,
            _ => CorpusFormat::Conll2003,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub format: Option<CorpusFormat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataPaths,
}

/// Overlays `patch` onto `base`, refusing keys `base` does not have.
fn overlay(base: &mut Map<String, Value>, patch: &Map<String, Value>, section: &str) -> Result<(), String> {
    for (k, v) in patch {
        match base.get_mut(k) {
            Some(slot) => *slot = v.clone(),
            None => return Err(format!("unknown key {section}.{k}")),
        }
    }
    Ok(())
}

fn object<'a>(v: &'a Value, section: &str) -> Result<&'a Map<String, Value>, String> {
    v.as_object().ok_or_else(|| format!("section {section:?} must be a JSON object"))
}

/// Parses `key=value`, reading the value as JSON and falling back to a string.
fn parse_override(s: &str) -> Result<(String, String, Value), String> {
    let (key, raw) = s.split_once('=').ok_or_else(|| format!("override {s:?} is not key=value"))?;
    let (section, field) = key
        .split_once('.')
        .ok_or_else(|| format!("override key {key:?} must be section.field"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((section.to_string(), field.to_string(), value))
}

impl RunConfig {
    /// Builds a configuration from an optional JSON document and `key=value`
    /// overrides such as `model.w_pos=2` or `train.epochs=5`.
    pub fn resolve(doc: Option<&str>, overrides: &[String], seed_env: Option<&str>) -> Result<Self, String> {
        let doc: Value = match doc {
            Some(text) => serde_json::from_str(text).map_err(|e| format!("config is not valid JSON: {e}"))?,
            None => Value::Object(Map::new()),
        };
        let mut sections = object(&doc, "root")?.clone();
        for k in sections.keys() {
            if !matches!(k.as_str(), "model" | "train" | "data") {
                return Err(format!("unknown top-level key {k:?}"));
            }
        }
        for o in overrides {
            let (section, field, value) = parse_override(o)?;
            if !matches!(section.as_str(), "model" | "train" | "data") {
                return Err(format!("unknown section {section:?} in override {o:?}"));
            }
            let entry = sections.entry(section.clone()).or_insert_with(|| Value::Object(Map::new()));
            entry
                .as_object_mut()
                .ok_or_else(|| format!("section {section:?} must be a JSON object"))?
                .insert(field, value);
        }
        let empty = Value::Object(Map::new());
        let model_patch = object(sections.get("model").unwrap_or(&empty), "model")?;
        let variant: Variant = match model_patch.get("variant") {
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| format!("model.variant: {e}"))?,
            None => Variant::MtlCnnCrf,
        };

        let mut model = serde_json::to_value(ModelConfig::for_variant(variant)).expect("serialisable");
        overlay(model.as_object_mut().unwrap(), model_patch, "model")?;
        let model: ModelConfig = serde_json::from_value(model).map_err(|e| format!("model: {e}"))?;
        model.validate().map_err(|e| e.to_string())?;

        let mut train = serde_json::to_value(TrainConfig::for_variant(variant)).expect("serialisable");
        overlay(
            train.as_object_mut().unwrap(),
            object(sections.get("train").unwrap_or(&empty), "train")?,
            "train",
        )?;
        let mut train: TrainConfig = serde_json::from_value(train).map_err(|e| format!("train: {e}"))?;
        if let Some(s) = seed_env {
            train.seed = s
                .trim()
                .parse()
                .map_err(|_| format!("{SEED_ENV}={s:?} is not an unsigned integer"))?;
        }
        train.validate().map_err(|e| e.to_string())?;

        let data: DataPaths = serde_json::from_value(sections.get("data").cloned().unwrap_or(empty))
            .map_err(|e| format!("data: {e}"))?;
        Ok(RunConfig { model, train, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::resolve(None, &[], None).unwrap();
        assert_eq!(c.model, ModelConfig::for_variant(Variant::MtlCnnCrf));
        assert_eq!(c.train, TrainConfig::for_variant(Variant::MtlCnnCrf));
    }

    #[test]
    fn variant_selects_its_defaults() {
        let c = RunConfig::resolve(Some(r#"{"model": {"variant": "POS_IND"}}"#), &[], None).unwrap();
        assert_eq!(c.model.word_emb_dim, 8);
        assert_eq!((c.train.batch_size, c.train.epochs), (32, 17));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::resolve(Some(r#"{"model": {"w_poss": 1}}"#), &[], None).is_err());
        assert!(RunConfig::resolve(Some(r#"{"trian": {}}"#), &[], None).is_err());
        assert!(RunConfig::resolve(Some(r#"{"data": {"dev2": "x"}}"#), &[], None).is_err());
        assert!(RunConfig::resolve(None, &["train.epoch=3".into()], None).is_err());
    }

    #[test]
    fn overrides_and_seed_env() {
        let c = RunConfig::resolve(
            Some(r#"{"train": {"epochs": 3, "seed": 1}}"#),
            &["train.epochs=5".into(), "model.casing=uncased".into(), "data.train=a.conll".into()],
            Some("77"),
        )
        .unwrap();
        assert_eq!(c.train.epochs, 5);
        assert_eq!(c.train.seed, 77);
        assert_eq!(c.model.casing, litemul::data::Casing::Uncased);
        assert_eq!(c.data.train, Some(PathBuf::from("a.conll")));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::resolve(None, &["model.w_ner=0".into()], None).is_err());
        assert!(RunConfig::resolve(None, &["nope".into()], None).is_err());
        assert!(RunConfig::resolve(None, &[], Some("abc")).is_err());
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(CorpusFormat::for_path(Path::new("en.conllu")), CorpusFormat::Conllu);
        assert_eq!(CorpusFormat::for_path(Path::new("eng.train")), CorpusFormat::Conll2003);
    }
}
