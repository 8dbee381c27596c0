//! Text analytics over annotation spans: a rule language that compiles to a
//! graph of streaming operators, a partitioner that carves accelerable
//! subgraphs out of that graph, and a cycle-accurate emulator for running
//! those subgraphs as hardware-style dataflow pipelines.
//!
//! The crate is `no_std` (with `alloc`) so the operator algebra and the
//! emulator can be embedded anywhere; IO, file formats and the CLI live in
//! the companion `spanforge` crate.
//!
//! Data flows through three stages:
//!
//! 1. [`aql`] parses rule programs and lowers them to an [`graph::OperatorGraph`].
//! 2. [`partition`] classifies nodes against a [`partition::CapabilitySet`]
//!    and rewrites the graph into a host supergraph plus offloaded subgraphs.
//! 3. [`accel`] executes offloaded subgraphs as char/tuple-streaming
//!    pipelines with backpressure and cycle accounting; [`operators`] is the
//!    software reference implementation both sides are tested against.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod accel;
pub mod aql;
pub mod dict;
pub mod document;
pub mod error;
pub mod estimator;
pub mod graph;
pub mod operators;
pub mod partition;
pub mod predicate;
pub mod regex;
pub mod schema;
pub mod span;
pub mod table;
pub mod text;
