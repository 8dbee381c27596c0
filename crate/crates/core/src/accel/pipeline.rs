//! Pipeline construction: subgraph definition in, stage/channel spec out.
//!
//! The builder compiles per-stage automata against the accelerator's
//! (tighter) resource budgets, propagates the order guarantee of every
//! stream, and splices a sorting buffer into any edge that enters an
//! order-dependent stage without a guarantee.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::dict::{AcAutomaton, Dictionary};
use crate::error::{AccelError, ExecError};
use crate::graph::{DictParams, NodeId, OpParams, OperatorGraph, OperatorKind, SubgraphId};
use crate::partition::{SubgraphDef, ACCEL_REGEX_STATE_BUDGET};
use crate::predicate::CompiledPredicate;
use crate::regex::CompiledRegex;
use crate::table::Schema;

use super::{DEFAULT_CHANNEL_CAPACITY, DEFAULT_SORT_BUFFER_CAPACITY};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PipelineConfig {
    pub channel_capacity: usize,
    pub sort_buffer_capacity: usize,
    pub regex_state_budget: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            channel_capacity: DEFAULT_CHANNEL_CAPACITY,
            sort_buffer_capacity: DEFAULT_SORT_BUFFER_CAPACITY,
            regex_state_budget: ACCEL_REGEX_STATE_BUDGET,
        }
    }
}

pub(crate) type ChanId = usize;

pub(crate) enum StageKind {
    /// Host-provided tuple stream for one outside producer.
    Feeder { producer: NodeId },
    Regex { re: Arc<CompiledRegex> },
    Dict { ac: Arc<AcAutomaton> },
    Select { pred: Arc<CompiledPredicate> },
    Project { indexes: Vec<usize> },
    Join { pred: Arc<CompiledPredicate>, schema: Arc<Schema> },
    Union,
    Consolidate,
    SortBuf { schema: Arc<Schema> },
    /// Boundary output accumulator for one member node's stream.
    Collect { output: NodeId },
}

pub(crate) struct StageSpec {
    pub name: String,
    pub kind: StageKind,
    /// Tuple input channels, slot-indexed. Empty for extraction stages,
    /// which tap the document character stream instead.
    pub inputs: Vec<ChanId>,
    pub input_schemas: Vec<Arc<Schema>>,
    pub outputs: Vec<ChanId>,
    /// Verify canonical order of every consumed tuple.
    pub requires_sorted: bool,
    /// Character consumption counts toward the document's busy cycles.
    pub counts_chars: bool,
    /// Tuple consumption counts toward the document's busy cycles.
    pub counts_tuples: bool,
}

/// Immutable execution plan for one subgraph. Shareable across threads;
/// all per-document state lives in the run, not here.
pub struct Pipeline {
    pub(crate) subgraph: SubgraphId,
    pub(crate) stages: Vec<StageSpec>,
    pub(crate) channel_count: usize,
    pub(crate) cfg: PipelineConfig,
    outputs: Vec<NodeId>,
    pub(crate) output_schemas: BTreeMap<NodeId, Arc<Schema>>,
}

/// Pre-splice endpoint of a logical stream edge.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum Key {
    Feed(NodeId),
    Node(NodeId),
    Coll(NodeId),
    /// Sorting buffer in front of (consumer key kind, consumer id, slot).
    Sort(NodeId, u32),
    SortColl(NodeId),
}

impl Pipeline {
    /// `graph` must carry inferred schemas (a `PartitionPlan` graph does).
    pub fn build(
        graph: &OperatorGraph,
        sg: &SubgraphDef,
        cfg: &PipelineConfig,
    ) -> Result<Pipeline, AccelError> {
        let schema_of = |id: NodeId| -> Arc<Schema> {
            Arc::clone(graph.node(id).unwrap().schema.as_ref().expect("schemas inferred"))
        };
        let members: BTreeSet<NodeId> = sg.nodes.iter().copied().collect();
        let doc_source = graph.doc_source().expect("validated graph");
        let topo_members: Vec<NodeId> = graph
            .topo_order()
            .map_err(|e| AccelError::Exec(ExecError::Graph(e)))?
            .into_iter()
            .filter(|id| members.contains(id))
            .collect();

        // Which member streams are canonically ordered by construction.
        // Regex emission is ordered (matches cannot overlap), dictionary
        // emission is end-ordered, projection permutes the key columns,
        // a union interleaves. Join and consolidate restore order.
        let mut sorted_out: BTreeMap<NodeId, bool> = BTreeMap::new();
        for &id in &topo_members {
            let guarantee = match graph.kind(id).unwrap() {
                OperatorKind::RegexExtract => true,
                OperatorKind::DictionaryExtract => false,
                OperatorKind::Select => {
                    let e = graph.inputs_of(id)[0];
                    if members.contains(&e.producer) {
                        sorted_out[&e.producer]
                    } else {
                        true // host feeds canonical streams
                    }
                }
                OperatorKind::Project => false,
                OperatorKind::Join => true,
                OperatorKind::Union => false,
                OperatorKind::Consolidate => true,
                other => {
                    return Err(AccelError::Unsupported { node: id, kind: other.name() })
                }
            };
            sorted_out.insert(id, guarantee);
        }
        let stream_sorted = |key: &Key| match key {
            Key::Feed(_) => true,
            Key::Node(id) => sorted_out[id],
            _ => true,
        };

        // Logical edges, before sorting buffers are spliced in.
        let mut ledges: Vec<(Key, Key, u32)> = Vec::new();
        for e in &sg.inputs {
            if e.producer == doc_source && graph.kind(e.consumer).unwrap().is_extraction() {
                continue; // character path, not a tuple stream
            }
            ledges.push((Key::Feed(e.producer), Key::Node(e.consumer), e.slot));
        }
        for e in &sg.edges {
            ledges.push((Key::Node(e.producer), Key::Node(e.consumer), e.slot));
        }
        for &o in &sg.outputs {
            ledges.push((Key::Node(o), Key::Coll(o), 0));
        }

        let needs_order = |key: &Key| match key {
            Key::Node(id) => matches!(
                graph.kind(*id).unwrap(),
                OperatorKind::Join | OperatorKind::Consolidate
            ),
            Key::Coll(_) => true,
            _ => false,
        };
        let mut final_edges: Vec<(Key, Key, u32)> = Vec::new();
        let mut sort_points: Vec<Key> = Vec::new();
        for (p, c, slot) in ledges {
            if needs_order(&c) && !stream_sorted(&p) {
                let sb = match c {
                    Key::Node(id) => Key::Sort(id, slot),
                    Key::Coll(id) => Key::SortColl(id),
                    _ => unreachable!(),
                };
                final_edges.push((p, sb, 0));
                final_edges.push((sb, c, slot));
                sort_points.push(sb);
            } else {
                final_edges.push((p, c, slot));
            }
        }

        // Stage construction, in scheduling order: feeders, members in
        // topological order each preceded by its sorting buffers, then
        // collectors likewise.
        fn push(
            stages: &mut Vec<StageSpec>,
            index: &mut BTreeMap<Key, usize>,
            key: Key,
            spec: StageSpec,
        ) {
            index.insert(key, stages.len());
            stages.push(spec);
        }
        fn emit_sort_stage(
            stages: &mut Vec<StageSpec>,
            index: &mut BTreeMap<Key, usize>,
            sb: Key,
            schema: Arc<Schema>,
            name: String,
        ) {
            push(stages, index, sb, StageSpec {
                name,
                kind: StageKind::SortBuf { schema: Arc::clone(&schema) },
                inputs: Vec::new(),
                input_schemas: alloc::vec![schema],
                outputs: Vec::new(),
                requires_sorted: false,
                counts_chars: false,
                counts_tuples: true,
            });
        }
        let mut stages: Vec<StageSpec> = Vec::new();
        let mut index: BTreeMap<Key, usize> = BTreeMap::new();
        let tuple_arity = |id: NodeId| graph.inputs_of(id).len();
        let stream_schema = |key: &Key| -> Arc<Schema> {
            match key {
                Key::Feed(p) | Key::Node(p) => schema_of(*p),
                _ => unreachable!("buffers and collectors do not start streams"),
            }
        };

        for &p in &sg.tuple_inputs {
            push(&mut stages, &mut index, Key::Feed(p), StageSpec {
                name: format!("feed_{}", p),
                kind: StageKind::Feeder { producer: p },
                inputs: Vec::new(),
                input_schemas: Vec::new(),
                outputs: Vec::new(),
                requires_sorted: false,
                counts_chars: false,
                counts_tuples: false,
            });
        }
        for &id in &topo_members {
            for (p, c, _slot) in &final_edges {
                match c {
                    Key::Sort(target, s) if *target == id => {
                        emit_sort_stage(
                            &mut stages,
                            &mut index,
                            *c,
                            stream_schema(p),
                            format!("sort_{}_{}", target, s),
                        );
                    }
                    _ => {}
                }
            }
            let node = graph.node(id).unwrap();
            let kind = match &node.params {
                OpParams::RegexExtract { pattern } => {
                    let re = CompiledRegex::compile(pattern, cfg.regex_state_budget)
                        .map_err(|err| AccelError::Regex { node: id, err })?;
                    StageKind::Regex { re: Arc::new(re) }
                }
                OpParams::DictionaryExtract { dict } => match dict {
                    DictParams::Inline { name, entries } => {
                        let d = Dictionary::new(name.clone(), entries.iter());
                        StageKind::Dict { ac: Arc::new(AcAutomaton::build(&d)) }
                    }
                    DictParams::File { path } => {
                        return Err(AccelError::Exec(ExecError::UnresolvedDictionary {
                            node: id,
                            path: path.clone(),
                        }))
                    }
                },
                OpParams::Select { predicate } => {
                    // A select's output schema equals its input schema.
                    let pred = predicate
                        .compile(&schema_of(id), id)
                        .map_err(|e| AccelError::Exec(ExecError::Schema(e)))?;
                    StageKind::Select { pred: Arc::new(pred) }
                }
                OpParams::Project { columns } => {
                    let input = schema_of(graph.inputs_of(id)[0].producer);
                    let indexes = columns
                        .iter()
                        .map(|c| input.index_of(c).expect("validated columns"))
                        .collect();
                    StageKind::Project { indexes }
                }
                OpParams::Join { predicate } => {
                    let schema = schema_of(id);
                    let pred = predicate
                        .compile(&schema, id)
                        .map_err(|e| AccelError::Exec(ExecError::Schema(e)))?;
                    StageKind::Join { pred: Arc::new(pred), schema }
                }
                OpParams::Union => StageKind::Union,
                OpParams::Consolidate { .. } => StageKind::Consolidate,
                other => {
                    return Err(AccelError::Unsupported {
                        node: id,
                        kind: other.kind().name(),
                    })
                }
            };
            let node_kind = node.kind();
            let arity = if node_kind.is_extraction() { 0 } else { tuple_arity(id) };
            push(&mut stages, &mut index, Key::Node(id), StageSpec {
                name: format!("{}_{}", stage_label(node_kind), id),
                kind,
                inputs: alloc::vec![usize::MAX; arity],
                input_schemas: alloc::vec![schema_of(id); arity], // placeholder, fixed below
                outputs: Vec::new(),
                requires_sorted: matches!(
                    node_kind,
                    OperatorKind::Join | OperatorKind::Consolidate
                ),
                counts_chars: node_kind.is_extraction(),
                counts_tuples: node_kind.is_relational(),
            });
        }
        for &o in &sg.outputs {
            if sort_points.contains(&Key::SortColl(o)) {
                let producer = final_edges
                    .iter()
                    .find(|(_, c, _)| *c == Key::SortColl(o))
                    .map(|(p, _, _)| *p)
                    .unwrap();
                emit_sort_stage(
                    &mut stages,
                    &mut index,
                    Key::SortColl(o),
                    stream_schema(&producer),
                    format!("sort_{}_out", o),
                );
            }
            push(&mut stages, &mut index, Key::Coll(o), StageSpec {
                name: format!("collect_{}", o),
                kind: StageKind::Collect { output: o },
                inputs: alloc::vec![usize::MAX],
                input_schemas: alloc::vec![schema_of(o)],
                outputs: Vec::new(),
                requires_sorted: true,
                counts_chars: false,
                counts_tuples: false,
            });
        }

        // Channel wiring. Input slots were pre-sized; sorting buffers get
        // their single input here.
        let mut channel_count = 0;
        for (p, c, slot) in &final_edges {
            let chan = channel_count;
            channel_count += 1;
            let pi = index[p];
            stages[pi].outputs.push(chan);
            let schema = match p {
                Key::Feed(n) | Key::Node(n) => schema_of(*n),
                Key::Sort(..) | Key::SortColl(_) => {
                    Arc::clone(&stages[pi].input_schemas[0])
                }
                Key::Coll(_) => unreachable!(),
            };
            let ci = index[c];
            let slot = *slot as usize;
            match c {
                Key::Sort(..) | Key::SortColl(_) => {
                    stages[ci].inputs = alloc::vec![chan];
                    stages[ci].input_schemas = alloc::vec![schema];
                }
                _ => {
                    stages[ci].inputs[slot] = chan;
                    stages[ci].input_schemas[slot] = schema;
                }
            }
        }
        debug_assert!(stages.iter().all(|s| s.inputs.iter().all(|&c| c != usize::MAX)));

        let output_schemas = sg.outputs.iter().map(|&o| (o, schema_of(o))).collect();
        Ok(Pipeline {
            subgraph: sg.id,
            stages,
            channel_count,
            cfg: *cfg,
            outputs: sg.outputs.clone(),
            output_schemas,
        })
    }

    pub fn subgraph_id(&self) -> SubgraphId {
        self.subgraph
    }

    pub fn outputs(&self) -> &[NodeId] {
        &self.outputs
    }

    pub fn stage_names(&self) -> impl Iterator<Item = &str> {
        self.stages.iter().map(|s| s.name.as_str())
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }
}

fn stage_label(kind: OperatorKind) -> &'static str {
    match kind {
        OperatorKind::RegexExtract => "regex",
        OperatorKind::DictionaryExtract => "dict",
        OperatorKind::Select => "select",
        OperatorKind::Project => "project",
        OperatorKind::Join => "join",
        OperatorKind::Union => "union",
        OperatorKind::Consolidate => "consolidate",
        other => other.name(),
    }
}
