//! The operator graph: a DAG of typed operator nodes connected by
//! (producer, consumer, input slot) edges.
//!
//! Graphs are built once (by the rule frontend, a deserializer, or a test)
//! and then treated as immutable. `validate` reports every invariant
//! violation as data; `topo_order` is the deterministic evaluation order
//! every executor uses.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::GraphError;
use crate::predicate::Predicate;
use crate::table::Schema;

pub type NodeId = u32;
pub type SubgraphId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OperatorKind {
    DocSource,
    RegexExtract,
    DictionaryExtract,
    Select,
    Project,
    Join,
    Union,
    Consolidate,
    Sink,
    SubgraphCall,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 10] = [
        OperatorKind::DocSource,
        OperatorKind::RegexExtract,
        OperatorKind::DictionaryExtract,
        OperatorKind::Select,
        OperatorKind::Project,
        OperatorKind::Join,
        OperatorKind::Union,
        OperatorKind::Consolidate,
        OperatorKind::Sink,
        OperatorKind::SubgraphCall,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            OperatorKind::DocSource => "DocSource",
            OperatorKind::RegexExtract => "RegexExtract",
            OperatorKind::DictionaryExtract => "DictionaryExtract",
            OperatorKind::Select => "Select",
            OperatorKind::Project => "Project",
            OperatorKind::Join => "Join",
            OperatorKind::Union => "Union",
            OperatorKind::Consolidate => "Consolidate",
            OperatorKind::Sink => "Sink",
            OperatorKind::SubgraphCall => "SubgraphCall",
        }
    }

    pub fn parse(s: &str) -> Option<OperatorKind> {
        Self::ALL.iter().copied().find(|k| k.name() == s)
    }

    /// Consumes the raw document character stream and produces spans.
    pub fn is_extraction(&self) -> bool {
        matches!(self, OperatorKind::RegexExtract | OperatorKind::DictionaryExtract)
    }

    /// Consumes tuples rather than characters.
    pub fn is_relational(&self) -> bool {
        matches!(
            self,
            OperatorKind::Select
                | OperatorKind::Project
                | OperatorKind::Join
                | OperatorKind::Union
                | OperatorKind::Consolidate
        )
    }
}

impl core::fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Dictionary parameterization: entries inline, or a reference to an
/// external newline-delimited file that a loader resolves before execution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DictParams {
    Inline { name: String, entries: Vec<String> },
    File { path: String },
}

impl DictParams {
    pub fn label(&self) -> &str {
        match self {
            DictParams::Inline { name, .. } => name,
            DictParams::File { path } => path,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConsolidatePolicy {
    ContainedWithin,
}

impl ConsolidatePolicy {
    pub fn name(&self) -> &'static str {
        match self {
            ConsolidatePolicy::ContainedWithin => "contained_within",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "contained_within" => Some(ConsolidatePolicy::ContainedWithin),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OpParams {
    DocSource,
    RegexExtract { pattern: String },
    DictionaryExtract { dict: DictParams },
    Select { predicate: Predicate },
    Project { columns: Vec<String> },
    Join { predicate: Predicate },
    Union,
    Consolidate { policy: ConsolidatePolicy },
    Sink { view: String },
    SubgraphCall { subgraph: SubgraphId },
}

impl OpParams {
    pub fn kind(&self) -> OperatorKind {
        match self {
            OpParams::DocSource => OperatorKind::DocSource,
            OpParams::RegexExtract { .. } => OperatorKind::RegexExtract,
            OpParams::DictionaryExtract { .. } => OperatorKind::DictionaryExtract,
            OpParams::Select { .. } => OperatorKind::Select,
            OpParams::Project { .. } => OperatorKind::Project,
            OpParams::Join { .. } => OperatorKind::Join,
            OpParams::Union => OperatorKind::Union,
            OpParams::Consolidate { .. } => OperatorKind::Consolidate,
            OpParams::Sink { .. } => OperatorKind::Sink,
            OpParams::SubgraphCall { .. } => OperatorKind::SubgraphCall,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OperatorNode {
    pub id: NodeId,
    pub params: OpParams,
    /// Populated by schema inference; `None` on freshly built graphs.
    pub schema: Option<Arc<Schema>>,
}

impl OperatorNode {
    pub fn new(id: NodeId, params: OpParams) -> Self {
        OperatorNode { id, params, schema: None }
    }

    pub fn kind(&self) -> OperatorKind {
        self.params.kind()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub producer: NodeId,
    pub consumer: NodeId,
    pub slot: u32,
}

/// How many input slots a kind expects.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputArity {
    Exactly(u32),
    AtLeast(u32),
}

pub fn input_arity(kind: OperatorKind) -> InputArity {
    match kind {
        OperatorKind::DocSource => InputArity::Exactly(0),
        OperatorKind::RegexExtract
        | OperatorKind::DictionaryExtract
        | OperatorKind::Select
        | OperatorKind::Project
        | OperatorKind::Consolidate
        | OperatorKind::Sink => InputArity::Exactly(1),
        OperatorKind::Join => InputArity::Exactly(2),
        OperatorKind::Union => InputArity::AtLeast(2),
        OperatorKind::SubgraphCall => InputArity::AtLeast(1),
    }
}

#[derive(Clone, Debug, Default)]
pub struct OperatorGraph {
    nodes: BTreeMap<NodeId, OperatorNode>,
    edges: Vec<Edge>,
}

impl OperatorGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, node: OperatorNode) -> Result<(), GraphError> {
        if self.nodes.contains_key(&node.id) {
            return Err(GraphError::DuplicateNode(node.id));
        }
        self.nodes.insert(node.id, node);
        Ok(())
    }

    /// Both endpoints must already exist.
    pub fn add_edge(&mut self, producer: NodeId, consumer: NodeId, slot: u32) -> Result<(), GraphError> {
        for id in [producer, consumer] {
            if !self.nodes.contains_key(&id) {
                return Err(GraphError::UnknownNode(id));
            }
        }
        self.edges.push(Edge { producer, consumer, slot });
        Ok(())
    }

    pub fn node(&self, id: NodeId) -> Option<&OperatorNode> {
        self.nodes.get(&id)
    }

    pub fn node_mut(&mut self, id: NodeId) -> Option<&mut OperatorNode> {
        self.nodes.get_mut(&id)
    }

    pub fn kind(&self, id: NodeId) -> Option<OperatorKind> {
        self.nodes.get(&id).map(|n| n.kind())
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = &OperatorNode> {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn max_node_id(&self) -> Option<NodeId> {
        self.nodes.keys().next_back().copied()
    }

    /// In-edges of `id`, sorted by slot.
    pub fn inputs_of(&self, id: NodeId) -> Vec<Edge> {
        let mut v: Vec<Edge> = self.edges.iter().copied().filter(|e| e.consumer == id).collect();
        v.sort_by_key(|e| e.slot);
        v
    }

    /// Out-edges of `id`, in insertion order.
    pub fn outputs_of(&self, id: NodeId) -> Vec<Edge> {
        self.edges.iter().copied().filter(|e| e.producer == id).collect()
    }

    pub fn doc_source(&self) -> Option<NodeId> {
        self.nodes
            .values()
            .find(|n| n.kind() == OperatorKind::DocSource)
            .map(|n| n.id)
    }

    pub fn sinks(&self) -> Vec<NodeId> {
        self.nodes
            .values()
            .filter(|n| n.kind() == OperatorKind::Sink)
            .map(|n| n.id)
            .collect()
    }

    /// Deterministic topological order: Kahn's algorithm with the ready set
    /// drained in ascending node id order.
    pub fn topo_order(&self) -> Result<Vec<NodeId>, GraphError> {
        let mut in_deg: BTreeMap<NodeId, usize> = self.nodes.keys().map(|&id| (id, 0)).collect();
        for e in &self.edges {
            *in_deg.get_mut(&e.consumer).ok_or(GraphError::UnknownNode(e.consumer))? += 1;
        }
        let mut ready: BTreeSet<NodeId> =
            in_deg.iter().filter(|(_, &d)| d == 0).map(|(&id, _)| id).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(&id) = ready.iter().next() {
            ready.remove(&id);
            order.push(id);
            for e in self.edges.iter().filter(|e| e.producer == id) {
                let d = in_deg.get_mut(&e.consumer).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(e.consumer);
                }
            }
        }
        if order.len() != self.nodes.len() {
            return Err(GraphError::Cycle);
        }
        Ok(order)
    }

    /// Ids of nodes left with unsatisfied in-degree by Kahn's algorithm,
    /// i.e. the nodes involved in (or downstream of) a cycle.
    fn cycle_witnesses(&self) -> Vec<NodeId> {
        let mut in_deg: BTreeMap<NodeId, usize> = self.nodes.keys().map(|&id| (id, 0)).collect();
        for e in &self.edges {
            if let Some(d) = in_deg.get_mut(&e.consumer) {
                *d += 1;
            }
        }
        let mut ready: BTreeSet<NodeId> =
            in_deg.iter().filter(|(_, &d)| d == 0).map(|(&id, _)| id).collect();
        while let Some(&id) = ready.iter().next() {
            ready.remove(&id);
            in_deg.remove(&id);
            for e in self.edges.iter().filter(|e| e.producer == id) {
                if let Some(d) = in_deg.get_mut(&e.consumer) {
                    *d -= 1;
                    if *d == 0 {
                        ready.insert(e.consumer);
                    }
                }
            }
        }
        in_deg.keys().copied().collect()
    }

    /// Check every structural invariant and report violations as findings.
    /// A clean report (zero findings) means the graph is executable: schema
    /// inference is run as the final step and its errors are included.
    pub fn validate(&self) -> ValidationReport {
        let mut findings = Vec::new();
        let mut finding = |node: Option<NodeId>, message: String| {
            findings.push(Finding { node, message });
        };

        let sources: Vec<NodeId> = self
            .nodes
            .values()
            .filter(|n| n.kind() == OperatorKind::DocSource)
            .map(|n| n.id)
            .collect();
        match sources.len() {
            0 => finding(None, "no DocSource node".to_string()),
            1 => {}
            _ => finding(None, format!("multiple DocSource nodes: {:?}", sources)),
        }

        // Slot bookkeeping per node.
        for node in self.nodes.values() {
            let inputs = self.inputs_of(node.id);
            let mut slots = BTreeSet::new();
            for e in &inputs {
                if !slots.insert(e.slot) {
                    finding(Some(node.id), format!("input slot {} of node {} connected twice", e.slot, node.id));
                }
            }
            let max_expected = match input_arity(node.kind()) {
                InputArity::Exactly(n) => n,
                InputArity::AtLeast(n) => (slots.len() as u32).max(n),
            };
            for s in 0..max_expected {
                if !slots.contains(&s) {
                    finding(Some(node.id), format!("input slot {} of node {} unconnected", s, node.id));
                }
            }
            for &s in slots.iter().filter(|&&s| s >= max_expected) {
                finding(Some(node.id), format!("unexpected input slot {} of node {}", s, node.id));
            }
            if node.kind() == OperatorKind::Sink && !self.outputs_of(node.id).is_empty() {
                finding(Some(node.id), format!("sink node {} has consumers", node.id));
            }
            if node.kind().is_extraction() {
                let from_source = inputs
                    .first()
                    .and_then(|e| self.kind(e.producer))
                    .map(|k| k == OperatorKind::DocSource)
                    .unwrap_or(false);
                if !from_source {
                    finding(
                        Some(node.id),
                        format!("extraction node {} must consume the document stream", node.id),
                    );
                }
            }
        }

        // Params sanity.
        let mut sink_views: BTreeMap<&str, NodeId> = BTreeMap::new();
        for node in self.nodes.values() {
            match &node.params {
                OpParams::RegexExtract { pattern } => {
                    if let Err(e) = crate::regex::parse_pattern(pattern) {
                        finding(Some(node.id), format!("node {}: {}", node.id, e));
                    }
                }
                OpParams::DictionaryExtract { dict: DictParams::Inline { name, entries } } => {
                    if name.is_empty() {
                        finding(Some(node.id), format!("node {}: empty dictionary name", node.id));
                    }
                    if entries.iter().any(|e| e.is_empty()) {
                        finding(Some(node.id), format!("node {}: empty dictionary entry", node.id));
                    }
                }
                OpParams::DictionaryExtract { dict: DictParams::File { path } } => {
                    if path.is_empty() {
                        finding(Some(node.id), format!("node {}: empty dictionary path", node.id));
                    }
                }
                OpParams::Project { columns } => {
                    if columns.is_empty() {
                        finding(Some(node.id), format!("node {}: project with no columns", node.id));
                    }
                }
                OpParams::Sink { view } => {
                    if let Some(&other) = sink_views.get(view.as_str()) {
                        finding(
                            Some(node.id),
                            format!("sink nodes {} and {} share view name {:?}", other, node.id, view),
                        );
                    } else {
                        sink_views.insert(view, node.id);
                    }
                }
                _ => {}
            }
        }

        // Cycle and connectivity.
        let acyclic = match self.topo_order() {
            Ok(_) => true,
            Err(_) => {
                finding(None, format!("cycle through nodes {:?}", self.cycle_witnesses()));
                false
            }
        };
        if sources.len() == 1 {
            let fwd = self.reachable_from(sources[0]);
            for &id in self.nodes.keys() {
                if !fwd.contains(&id) {
                    finding(Some(id), format!("node {} unreachable from DocSource", id));
                }
            }
        }
        {
            let back = self.reaching_sinks();
            for &id in self.nodes.keys() {
                if !back.contains(&id) {
                    finding(Some(id), format!("node {} reaches no Sink", id));
                }
            }
        }

        // Schema inference as the last gate, only on structurally sound graphs.
        if findings.is_empty() && acyclic {
            if let Err(e) = crate::schema::infer_schemas_ref(self) {
                findings.push(Finding { node: Some(e.node()), message: format!("{}", e) });
            }
        }

        ValidationReport { findings }
    }

    fn reachable_from(&self, start: NodeId) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        let mut stack = alloc::vec![start];
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            for e in self.edges.iter().filter(|e| e.producer == id) {
                stack.push(e.consumer);
            }
        }
        seen
    }

    fn reaching_sinks(&self) -> BTreeSet<NodeId> {
        let mut seen: BTreeSet<NodeId> = self.sinks().into_iter().collect();
        let mut stack: Vec<NodeId> = seen.iter().copied().collect();
        while let Some(id) = stack.pop() {
            for e in self.edges.iter().filter(|e| e.consumer == id) {
                if seen.insert(e.producer) {
                    stack.push(e.producer);
                }
            }
        }
        seen
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Finding {
    pub node: Option<NodeId>,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}
