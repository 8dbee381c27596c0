//! Host-side tooling around `spanforge-core`: file formats, corpus loading,
//! the batching dispatch layer, the software profiler, and report writers.
//! Everything that needs the OS lives here; the core crate stays pure.

pub mod config;
pub mod corpus;
pub mod demo;
pub mod dispatch;
pub mod estimate;
pub mod formats;
pub mod profiler;
pub mod report;
