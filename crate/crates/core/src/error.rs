//! Error types for the compile, partition and execution stages.
//!
//! Each stage has its own enum so callers can match on exactly the failures
//! that stage can produce; the CLI crate wraps them for reporting.

use alloc::string::String;
use core::fmt;

use crate::graph::NodeId;

/// Regex compilation failures.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RegexError {
    /// Malformed pattern; `pos` is a char offset into the pattern.
    Syntax { pos: usize, msg: String },
    /// The DFA exceeded the state budget. `states` is a lower bound on the
    /// number of states the pattern needs.
    TooComplex { states: usize, budget: usize },
}

impl fmt::Display for RegexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegexError::Syntax { pos, msg } => {
                write!(f, "regex syntax error at offset {}: {}", pos, msg)
            }
            RegexError::TooComplex { states, budget } => write!(
                f,
                "pattern too complex: needs {} DFA states, budget is {}",
                states, budget
            ),
        }
    }
}

/// Structural graph failures that make a graph unusable (as opposed to
/// validation findings, which are diagnostics).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GraphError {
    Cycle,
    UnknownNode(NodeId),
    DuplicateNode(NodeId),
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::Cycle => write!(f, "operator graph contains a cycle"),
            GraphError::UnknownNode(id) => write!(f, "edge references unknown node {}", id),
            GraphError::DuplicateNode(id) => write!(f, "duplicate node id {}", id),
        }
    }
}

/// Schema inference failures; every variant names the offending node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SchemaError {
    UnknownColumn { node: NodeId, column: String },
    DuplicateColumn { node: NodeId, column: String },
    NotASpanColumn { node: NodeId, column: String },
    WrongColumnType { node: NodeId, column: String, expected: &'static str },
    UnionMismatch { node: NodeId, detail: String },
    ArityMismatch { node: NodeId, expected: usize, got: usize },
    MissingCallSchema { node: NodeId },
    NoSpanColumn { node: NodeId },
}

impl SchemaError {
    pub fn node(&self) -> NodeId {
        match self {
            SchemaError::UnknownColumn { node, .. }
            | SchemaError::DuplicateColumn { node, .. }
            | SchemaError::NotASpanColumn { node, .. }
            | SchemaError::WrongColumnType { node, .. }
            | SchemaError::UnionMismatch { node, .. }
            | SchemaError::ArityMismatch { node, .. }
            | SchemaError::MissingCallSchema { node }
            | SchemaError::NoSpanColumn { node } => *node,
        }
    }
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemaError::UnknownColumn { node, column } => {
                write!(f, "node {}: unknown column {:?}", node, column)
            }
            SchemaError::DuplicateColumn { node, column } => {
                write!(f, "node {}: column {:?} listed twice", node, column)
            }
            SchemaError::NotASpanColumn { node, column } => {
                write!(f, "node {}: column {:?} is not a span", node, column)
            }
            SchemaError::WrongColumnType { node, column, expected } => {
                write!(f, "node {}: column {:?} is not of type {}", node, column, expected)
            }
            SchemaError::UnionMismatch { node, detail } => {
                write!(f, "node {}: union inputs disagree: {}", node, detail)
            }
            SchemaError::ArityMismatch { node, expected, got } => {
                write!(f, "node {}: expected {} inputs, got {}", node, expected, got)
            }
            SchemaError::MissingCallSchema { node } => {
                write!(f, "node {}: subgraph call has no output schema", node)
            }
            SchemaError::NoSpanColumn { node } => {
                write!(f, "node {}: input has no span column", node)
            }
        }
    }
}

/// Failures while executing a graph in software.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExecError {
    Regex(RegexError),
    Graph(GraphError),
    Schema(SchemaError),
    /// Dictionary params still reference an external file; entries must be
    /// resolved before execution.
    UnresolvedDictionary { node: NodeId, path: String },
    /// The software executor met a subgraph call it cannot evaluate; calls
    /// are dispatched by the runtime, not evaluated inline.
    SubgraphCallInSoftware { node: NodeId },
}

impl fmt::Display for ExecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecError::Regex(e) => write!(f, "{}", e),
            ExecError::Graph(e) => write!(f, "{}", e),
            ExecError::Schema(e) => write!(f, "{}", e),
            ExecError::UnresolvedDictionary { node, path } => {
                write!(f, "node {}: dictionary file {:?} not resolved", node, path)
            }
            ExecError::SubgraphCallInSoftware { node } => {
                write!(f, "node {}: subgraph call cannot run in the software executor", node)
            }
        }
    }
}

impl From<RegexError> for ExecError {
    fn from(e: RegexError) -> Self {
        ExecError::Regex(e)
    }
}

impl From<GraphError> for ExecError {
    fn from(e: GraphError) -> Self {
        ExecError::Graph(e)
    }
}

impl From<SchemaError> for ExecError {
    fn from(e: SchemaError) -> Self {
        ExecError::Schema(e)
    }
}

/// Partition rewrite failures.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PartitionError {
    /// The candidate set has an outside node on a path between two members.
    NotConvex { witness: NodeId },
    /// The candidate set contains a node the capability set cannot run.
    NotAccelerable { node: NodeId },
    UnknownNode(NodeId),
    Overlap { node: NodeId },
    Graph(GraphError),
    Schema(SchemaError),
}

impl fmt::Display for PartitionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionError::NotConvex { witness } => {
                write!(f, "subgraph not convex: node {} lies between members", witness)
            }
            PartitionError::NotAccelerable { node } => {
                write!(f, "node {} is not accelerable", node)
            }
            PartitionError::UnknownNode(id) => write!(f, "unknown node {}", id),
            PartitionError::Overlap { node } => {
                write!(f, "node {} appears in more than one subgraph", node)
            }
            PartitionError::Graph(e) => write!(f, "{}", e),
            PartitionError::Schema(e) => write!(f, "{}", e),
        }
    }
}

impl From<GraphError> for PartitionError {
    fn from(e: GraphError) -> Self {
        PartitionError::Graph(e)
    }
}

impl From<SchemaError> for PartitionError {
    fn from(e: SchemaError) -> Self {
        PartitionError::Schema(e)
    }
}

/// Failures while building or running an emulated pipeline.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AccelError {
    /// Operator kind the pipeline builder has no stage for.
    Unsupported { node: NodeId, kind: &'static str },
    Regex { node: NodeId, err: RegexError },
    /// A sorting buffer was forced past capacity and the evicted watermark
    /// was later violated.
    ReorderOverflow { stage: String },
    /// The scheduler made no progress while data was still in flight.
    Deadlock { subgraph: u32 },
    /// A stage that requires sorted input observed a key inversion. This is
    /// an internal invariant; seeing it means buffer placement is wrong.
    SortViolation { stage: String },
    Exec(ExecError),
}

impl fmt::Display for AccelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AccelError::Unsupported { node, kind } => {
                write!(f, "node {}: operator {} has no pipeline stage", node, kind)
            }
            AccelError::Regex { node, err } => write!(f, "node {}: {}", node, err),
            AccelError::ReorderOverflow { stage } => {
                write!(f, "sorting buffer overflow in {}", stage)
            }
            AccelError::Deadlock { subgraph } => {
                write!(f, "pipeline deadlock in subgraph {}", subgraph)
            }
            AccelError::SortViolation { stage } => {
                write!(f, "unsorted stream reached {}", stage)
            }
            AccelError::Exec(e) => write!(f, "{}", e),
        }
    }
}

impl From<ExecError> for AccelError {
    fn from(e: ExecError) -> Self {
        AccelError::Exec(e)
    }
}

impl core::error::Error for RegexError {}
impl core::error::Error for GraphError {}
impl core::error::Error for SchemaError {}
impl core::error::Error for ExecError {}
impl core::error::Error for PartitionError {}
impl core::error::Error for AccelError {}
