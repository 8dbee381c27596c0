//! Dataflow pipeline emulator for offloaded subgraphs.
//!
//! Each subgraph compiles to a fixed pipeline of stages joined by bounded
//! channels. Extraction stages tap the document character stream; tuple
//! streams enter through feeder stages and leave through collectors, one
//! per boundary output. Execution is cooperative: the scheduler sweeps the
//! stages in topological order, each stage runs until it blocks, and a
//! sweep that moves nothing with streams still undrained is a deadlock.
//!
//! Stages that need key order (join, consolidate, boundary collectors) sit
//! behind sorting buffers wherever the producer cannot guarantee canonical
//! order, and verify order on every consumed tuple regardless.

mod cost;
mod exec;
mod pipeline;

pub use cost::CostModel;
pub use exec::{DocResult, PackageItem, PackageResult, RunStats, StageTrace};
pub use pipeline::{Pipeline, PipelineConfig};

/// Parallel document lanes per emulated device.
pub const NUM_LANES: usize = 4;

/// Fixed per-document cost: state reset, stream header, result flush.
pub const SETUP_CYCLES: u64 = 64;

pub const DEFAULT_CHANNEL_CAPACITY: usize = 64;

pub const DEFAULT_SORT_BUFFER_CAPACITY: usize = 1024;
