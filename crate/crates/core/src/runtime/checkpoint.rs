//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "LMUL" | u32 version | u32 header_len | header JSON
//! { u32 name_len | name | u32 rank | u32 dim × rank | f32 × Π dims }*
//! u32 CRC-32 of every preceding byte
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Vocab;
use crate::error::{CheckpointError, Error, Result};
use crate::model::ModelConfig;
use crate::nn::{ParamStore, Tensor};

pub const MAGIC: [u8; 4] = *b"LMUL";
pub const FORMAT_VERSION: u32 = 1;

/// Free-form provenance stored in the header.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Metadata {
    /// Seconds since the Unix epoch; `None` for reproducible output.
    pub created_unix: Option<u64>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
}

impl Metadata {
    pub fn stamped() -> Self {
        Metadata {
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .ok()
                .map(|d| d.as_secs()),
            ..Metadata::default()
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: Vocab,
    metadata: Metadata,
}

/// Contents of a checkpoint file.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: ParamStore<f32>,
    pub vocab: Vocab,
    pub config: ModelConfig,
    pub metadata: Metadata,
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn len_u32(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::InvalidArgument(format!("{what} too large for the checkpoint format")))
}

pub fn to_bytes(params: &ParamStore<f32>, vocab: &Vocab, config: &ModelConfig, metadata: &Metadata) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&Header {
        config: config.clone(),
        vocab: vocab.clone(),
        metadata: metadata.clone(),
    })
    .map_err(|e| Error::InvalidArgument(format!("header serialisation: {e}")))?;
    let mut buf = Vec::with_capacity(16 + header.len() + 4 * params.num_elements());
    buf.extend_from_slice(&MAGIC);
    put_u32(&mut buf, FORMAT_VERSION);
    put_u32(&mut buf, len_u32(header.len(), "header")?);
    buf.extend_from_slice(&header);
    for (name, t) in params.iter() {
        put_u32(&mut buf, len_u32(name.len(), "name")?);
        buf.extend_from_slice(name.as_bytes());
        put_u32(&mut buf, t.rank() as u32);
        for &d in t.shape() {
            put_u32(&mut buf, len_u32(d, "dimension")?);
        }
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    put_u32(&mut buf, crc);
    Ok(buf)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or(CheckpointError::Truncated(what))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    Ok(parse(bytes)?)
}

fn parse(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    if bytes.len() < 16 {
        return Err(CheckpointError::Truncated("header length"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(CheckpointError::CrcMismatch { stored, computed });
    }
    let mut r = Reader { buf: body, pos: 8 };
    let header_len = r.u32("header length")? as usize;
    let header: Header = serde_json::from_slice(r.take(header_len, "header")?)
        .map_err(|e| CheckpointError::Malformed(format!("header: {e}")))?;
    let mut params = ParamStore::new();
    while !r.done() {
        let n = r.u32("record name length")? as usize;
        let name = std::str::from_utf8(r.take(n, "record name")?)
            .map_err(|_| CheckpointError::Malformed("record name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32("record rank")? as usize;
        if !(1..=3).contains(&rank) {
            return Err(CheckpointError::Malformed(format!("{name}: rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("record shape")? as usize);
        }
        let count = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .and_then(|c| c.checked_mul(4))
            .ok_or_else(|| CheckpointError::Malformed(format!("{name}: shape overflow")))?;
        let data = r
            .take(count, "record values")?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::from_vec(&shape, data).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        params
            .insert(&name, t)
            .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
    }
    Ok(Checkpoint {
        params,
        vocab: header.vocab,
        config: header.config,
        metadata: header.metadata,
    })
}

/// Writes a checkpoint and returns its size in bytes.
pub fn save(
    path: impl AsRef<Path>,
    params: &ParamStore<f32>,
    vocab: &Vocab,
    config: &ModelConfig,
    metadata: &Metadata,
) -> Result<u64> {
    let bytes = to_bytes(params, vocab, config, metadata)?;
    std::fs::write(path.as_ref(), &bytes).map_err(|e| Error::io(path.as_ref(), e))?;
    Ok(bytes.len() as u64)
}

pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let bytes = std::fs::read(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    from_bytes(&bytes)
}

/// File size in units of 10⁶ bytes, rounded to two decimals.
pub fn model_size_mb(path: impl AsRef<Path>) -> Result<f64> {
    let len = std::fs::metadata(path.as_ref())
        .map_err(|e| Error::io(path.as_ref(), e))?
        .len();
    Ok((len as f64 / 1e6 * 100.0).round() / 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_vocab, synthetic, Casing};
    use crate::model::{count_params, Network, Variant};
    use crate::nn::RngState;

    fn fixture(variant: Variant) -> (ParamStore<f32>, Vocab, ModelConfig) {
        let vocab = build_vocab(&synthetic::overfit_corpus(), Casing::Uncased).unwrap();
        let cfg = ModelConfig::for_variant(variant);
        let (_, params) = Network::init(&cfg, &vocab, &mut RngState::new(3)).unwrap();
        (params, vocab, cfg)
    }

    fn bytes(variant: Variant) -> Vec<u8> {
        let (p, v, c) = fixture(variant);
        to_bytes(&p, &v, &c, &Metadata::default()).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (p, v, c) = fixture(Variant::MtlCnnCrf);
        let meta = Metadata { seed: Some(3), ..Metadata::default() };
        let back = from_bytes(&to_bytes(&p, &v, &c, &meta).unwrap()).unwrap();
        assert_eq!(back.config, c);
        assert_eq!(back.vocab, v);
        assert_eq!(back.metadata, meta);
        let a: Vec<_> = p.iter().collect();
        let b: Vec<_> = back.params.iter().collect();
        assert_eq!(a.len(), b.len());
        for ((na, ta), (nb, tb)) in a.into_iter().zip(b) {
            assert_eq!(na, nb);
            assert_eq!(ta.shape(), tb.shape());
            assert!(ta.data().iter().zip(tb.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn size_covers_float_payload() {
        let (p, v, c) = fixture(Variant::MtlLstm);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.lmul");
        let n = save(&path, &p, &v, &c, &Metadata::stamped()).unwrap();
        assert!(n as usize >= 4 * count_params(&p));
        assert_eq!(std::fs::metadata(&path).unwrap().len(), n);
    }

    #[test]
    fn every_single_byte_flip_is_rejected() {
        let good = bytes(Variant::NerInd);
        for i in (0..good.len()).step_by(97).chain([good.len() - 1]) {
            let mut bad = good.clone();
            bad[i] ^= 0x5A;
            assert!(from_bytes(&bad).is_err(), "flip at {i} accepted");
        }
    }

    #[test]
    fn payload_corruption_is_a_crc_error() {
        let mut b = bytes(Variant::NerInd);
        let i = b.len() - 10;
        b[i] ^= 1;
        assert!(matches!(
            from_bytes(&b),
            Err(Error::Checkpoint(CheckpointError::CrcMismatch { .. }))
        ));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut b = bytes(Variant::NerInd);
        b[..4].copy_from_slice(b"XXXX");
        assert!(matches!(from_bytes(&b), Err(Error::Checkpoint(CheckpointError::BadMagic(m))) if &m == b"XXXX"));
        let mut b = bytes(Variant::NerInd);
        b[4..8].copy_from_slice(&999u32.to_le_bytes());
        assert!(matches!(
            from_bytes(&b),
            Err(Error::Checkpoint(CheckpointError::UnsupportedVersion(999)))
        ));
    }

    #[test]
    fn truncation_is_reported() {
        let b = bytes(Variant::NerInd);
        assert!(matches!(
            from_bytes(&b[..6]),
            Err(Error::Checkpoint(CheckpointError::Truncated(_)))
        ));
        // a consistent CRC over a cut-short record stream
        let mut cut = b[..b.len() - 4 - 7].to_vec();
        let crc = crc32fast::hash(&cut);
        cut.extend_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            from_bytes(&cut),
            Err(Error::Checkpoint(CheckpointError::Truncated(_)))
        ));
    }

    #[test]
    fn size_in_mb() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a");
        std::fs::write(&p, vec![0u8; 1_000_000]).unwrap();
        assert_eq!(model_size_mb(&p).unwrap(), 1.00);
        std::fs::write(&p, b"").unwrap();
        assert_eq!(model_size_mb(&p).unwrap(), 0.00);
        assert!(model_size_mb(dir.path().join("missing")).is_err());
    }

    #[test]
    fn size_grows_with_vocabulary() {
        let cfg = ModelConfig::for_variant(Variant::PosInd);
        let mut prev = 0;
        for n in [100, 1000, 5000] {
            let words = synthetic::conll_scale_words(n, 1);
            let mut v = synthetic::vocab_from_words(&words, Casing::Uncased);
            v.pos_labels = synthetic::merged_ptb_labels();
            let (_, p) = Network::init(&cfg, &v, &mut RngState::new(0)).unwrap();
            let len = to_bytes(&p, &v, &cfg, &Metadata::default()).unwrap().len();
            assert!(len > prev);
            prev = len;
        }
    }
}
