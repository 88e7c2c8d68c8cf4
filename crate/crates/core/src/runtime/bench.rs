use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::tagger::Tagger;
use crate::data::EncodedExample;
use crate::error::{Error, Result};

pub const MIN_RUNS: usize = 30;
pub const MIN_WARMUP: usize = 5;

/// Single-sentence inference latency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub variant: String,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub min_ms: f64,
    pub runs: usize,
    pub warmup: usize,
    pub sequence_length: usize,
    pub decode: bool,
    pub host: String,
}

pub fn host_description() -> String {
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!("{}-{} ({cpus} logical cpus)", std::env::consts::OS, std::env::consts::ARCH)
}

/// Nearest-rank percentile of sorted samples.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Times `runs` forward passes (batch size 1), cycling through `sentences`,
/// after `warmup` unmeasured ones. With `decode`, each pass also decodes
/// (argmax or Viterbi).
pub fn bench_inference(
    tagger: &Tagger,
    sentences: &[EncodedExample],
    warmup: usize,
    runs: usize,
    decode: bool,
) -> Result<BenchReport> {
    if runs < MIN_RUNS {
        return Err(Error::InvalidArgument(format!("runs must be at least {MIN_RUNS}, got {runs}")));
    }
    if warmup < MIN_WARMUP {
        return Err(Error::InvalidArgument(format!("warmup must be at least {MIN_WARMUP}, got {warmup}")));
    }
    if sentences.is_empty() {
        return Err(Error::InvalidArgument("no sentences to benchmark".into()));
    }
    let pass = |ex: &EncodedExample| -> Result<()> {
        let out = tagger.network.forward(&tagger.params, ex, None)?;
        if decode {
            std::hint::black_box(tagger.network.decode(&tagger.params, &out)?);
        } else {
            std::hint::black_box(out);
        }
        Ok(())
    };
    for ex in sentences.iter().cycle().take(warmup) {
        pass(ex)?;
    }
    let mut times = Vec::with_capacity(runs);
    for ex in sentences.iter().cycle().take(runs) {
        let t0 = Instant::now();
        pass(ex)?;
        times.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    let mean = times.iter().sum::<f64>() / runs as f64;
    times.sort_by(f64::total_cmp);
    let lengths = sentences.iter().take(runs).map(|e| e.length).max().unwrap_or(0);
    Ok(BenchReport {
        variant: tagger.config().variant.name().to_string(),
        mean_ms: mean,
        p50_ms: percentile(&times, 50.0),
        p95_ms: percentile(&times, 95.0),
        min_ms: times[0],
        runs,
        warmup,
        sequence_length: lengths,
        decode,
        host: host_description(),
    })
}
