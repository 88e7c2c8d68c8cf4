//! Checkpoints, model-size accounting and latency measurement.

mod bench;
mod checkpoint;
mod tagger;

pub use bench::{bench_inference, host_description, BenchReport, MIN_RUNS, MIN_WARMUP};
pub use checkpoint::{from_bytes, load, model_size_mb, save, to_bytes, Checkpoint, Metadata, FORMAT_VERSION, MAGIC};
pub use tagger::{TaggedToken, Tagger};
