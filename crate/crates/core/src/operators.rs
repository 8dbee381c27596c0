//! Reference (software) semantics for every operator, plus the per-document
//! graph executor.
//!
//! These implementations favor being obviously correct over being fast;
//! they are the oracle the streaming engine is tested against, and the code
//! path host-resident nodes take at runtime. [`PreparedGraph`] front-loads
//! the expensive parts (regex compilation, dictionary automata, predicate
//! resolution) so per-document evaluation stays allocation-light.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::dict::Dictionary;
use crate::document::DocText;
use crate::error::{ExecError, SchemaError};
use crate::graph::{DictParams, NodeId, OpParams, OperatorGraph, OperatorKind};
use crate::predicate::{CompiledPredicate, Predicate};
use crate::regex::{CompiledRegex, SOFTWARE_STATE_BUDGET};
use crate::schema::{extract_schema, join_output_columns};
use crate::table::{AnnotationSet, ColumnType, Schema, Tuple, Value};

pub fn regex_extract(re: &CompiledRegex, doc: &DocText) -> AnnotationSet {
    let schema = Arc::new(extract_schema());
    let tuples = re
        .find_leftmost_longest(&doc.chars)
        .into_iter()
        .map(|s| alloc::vec![Value::Span(s)])
        .collect();
    AnnotationSet::from_tuples(schema, tuples)
}

pub fn dictionary_extract(dict: &Dictionary, doc: &DocText) -> AnnotationSet {
    let schema = Arc::new(extract_schema());
    let tuples = dict
        .find_matches(&doc.chars)
        .into_iter()
        .map(|s| alloc::vec![Value::Span(s)])
        .collect();
    AnnotationSet::from_tuples(schema, tuples)
}

/// Tuples satisfying the predicate, input order preserved.
pub fn select(input: &AnnotationSet, predicate: &Predicate) -> Result<AnnotationSet, SchemaError> {
    let compiled = predicate.compile(input.schema(), 0)?;
    Ok(select_compiled(input, &compiled))
}

fn select_compiled(input: &AnnotationSet, predicate: &CompiledPredicate) -> AnnotationSet {
    let tuples = input.tuples().iter().filter(|t| predicate.eval(t)).cloned().collect();
    AnnotationSet::from_tuples(Arc::clone(input.schema()), tuples)
}

/// Selected columns in requested order, canonically re-sorted.
pub fn project(input: &AnnotationSet, columns: &[String]) -> Result<AnnotationSet, SchemaError> {
    let (schema, indexes) = project_plan(input.schema(), columns, 0)?;
    Ok(project_indexed(input, &schema, &indexes))
}

fn project_plan(
    input: &Schema,
    columns: &[String],
    node: NodeId,
) -> Result<(Arc<Schema>, Vec<usize>), SchemaError> {
    let mut cols = Vec::with_capacity(columns.len());
    let mut indexes = Vec::with_capacity(columns.len());
    for name in columns {
        let idx = input
            .index_of(name)
            .ok_or_else(|| SchemaError::UnknownColumn { node, column: name.clone() })?;
        if cols.iter().any(|(n, _): &(String, ColumnType)| n == name) {
            return Err(SchemaError::DuplicateColumn { node, column: name.clone() });
        }
        cols.push((name.clone(), input.column_type(idx)));
        indexes.push(idx);
    }
    Ok((Arc::new(Schema::new(cols)), indexes))
}

fn project_indexed(input: &AnnotationSet, schema: &Arc<Schema>, indexes: &[usize]) -> AnnotationSet {
    let tuples = input
        .tuples()
        .iter()
        .map(|t| indexes.iter().map(|&i| t[i].clone()).collect())
        .collect();
    let mut out = AnnotationSet::from_tuples(Arc::clone(schema), tuples);
    out.sort_canonical();
    out
}

/// Nested-loop join filtered by the predicate; output schema is the
/// concatenation with right columns renamed on collision; canonical sort.
pub fn span_join(
    left: &AnnotationSet,
    right: &AnnotationSet,
    predicate: &Predicate,
) -> Result<AnnotationSet, SchemaError> {
    let schema = Arc::new(Schema::new(join_output_columns(left.schema(), right.schema())));
    let compiled = predicate.compile(&schema, 0)?;
    Ok(join_compiled(left, right, &schema, &compiled))
}

fn join_compiled(
    left: &AnnotationSet,
    right: &AnnotationSet,
    schema: &Arc<Schema>,
    predicate: &CompiledPredicate,
) -> AnnotationSet {
    let mut out = AnnotationSet::new(Arc::clone(schema));
    let mut scratch: Tuple = Vec::with_capacity(schema.len());
    for l in left.tuples() {
        for r in right.tuples() {
            scratch.clear();
            scratch.extend(l.iter().cloned());
            scratch.extend(r.iter().cloned());
            if predicate.eval(&scratch) {
                out.push(scratch.clone());
            }
        }
    }
    out.sort_canonical();
    out
}

/// Bag union, canonically re-sorted. All inputs must share a schema.
pub fn union_all(inputs: &[&AnnotationSet]) -> Result<AnnotationSet, SchemaError> {
    let first = inputs.first().expect("union of zero inputs");
    for (i, s) in inputs.iter().enumerate().skip(1) {
        if s.schema().columns() != first.schema().columns() {
            return Err(SchemaError::UnionMismatch {
                node: 0,
                detail: alloc::format!("input {} schema differs", i),
            });
        }
    }
    let mut out = AnnotationSet::new(Arc::clone(first.schema()));
    for set in inputs {
        for t in set.tuples() {
            out.push(t.clone());
        }
    }
    out.sort_canonical();
    Ok(out)
}

/// Remove every tuple whose first-column span is strictly contained in
/// another tuple's span; identical spans all survive. Order preserved.
pub fn consolidate(input: &AnnotationSet) -> Result<AnnotationSet, SchemaError> {
    let first_is_span = input
        .schema()
        .columns()
        .first()
        .map(|(_, t)| *t == ColumnType::Span)
        .unwrap_or(false);
    if !first_is_span {
        return Err(SchemaError::NoSpanColumn { node: 0 });
    }
    let spans: Vec<crate::span::Span> =
        input.tuples().iter().map(|t| t[0].as_span().unwrap()).collect();
    let tuples = input
        .tuples()
        .iter()
        .zip(&spans)
        .filter(|(_, s)| !spans.iter().any(|other| other.strictly_contains(s)))
        .map(|(t, _)| t.clone())
        .collect();
    Ok(AnnotationSet::from_tuples(Arc::clone(input.schema()), tuples))
}

/// Per-node state built once per graph and shared across documents.
enum PreparedOp {
    DocSource { schema: Arc<Schema> },
    Regex(CompiledRegex),
    Dict(Dictionary),
    Select(CompiledPredicate),
    Project { schema: Arc<Schema>, indexes: Vec<usize> },
    Join { schema: Arc<Schema>, predicate: CompiledPredicate },
    Union,
    Consolidate,
    Sink,
    SubgraphCall,
}

/// A validated graph with inferred schemas, node ops compiled, and the topo
/// order fixed. Immutable and shareable across threads.
pub struct PreparedGraph {
    graph: OperatorGraph,
    topo: Vec<NodeId>,
    ops: BTreeMap<NodeId, PreparedOp>,
}

impl PreparedGraph {
    /// Infers schemas (idempotent) and compiles per-node state. The graph
    /// must be structurally valid; dictionary file references must have been
    /// resolved to inline entries by the loader.
    pub fn new(graph: OperatorGraph) -> Result<Self, ExecError> {
        let graph = crate::schema::infer_schemas(graph)?;
        let topo = graph.topo_order()?;
        let mut ops = BTreeMap::new();
        for node in graph.nodes() {
            let schema = Arc::clone(node.schema.as_ref().expect("inferred above"));
            let input_schema = |slot: usize| -> Arc<Schema> {
                let edge = graph.inputs_of(node.id)[slot];
                Arc::clone(graph.node(edge.producer).unwrap().schema.as_ref().unwrap())
            };
            let op = match &node.params {
                OpParams::DocSource => PreparedOp::DocSource { schema },
                OpParams::RegexExtract { pattern } => PreparedOp::Regex(
                    CompiledRegex::compile(pattern, SOFTWARE_STATE_BUDGET)
                        .map_err(ExecError::Regex)?,
                ),
                OpParams::DictionaryExtract { dict } => match dict {
                    DictParams::Inline { name, entries } => {
                        PreparedOp::Dict(Dictionary::new(name.clone(), entries.iter()))
                    }
                    DictParams::File { path } => {
                        return Err(ExecError::UnresolvedDictionary {
                            node: node.id,
                            path: path.clone(),
                        })
                    }
                },
                OpParams::Select { predicate } => {
                    PreparedOp::Select(predicate.compile(&input_schema(0), node.id)?)
                }
                OpParams::Project { columns } => {
                    let (schema, indexes) = project_plan(&input_schema(0), columns, node.id)?;
                    PreparedOp::Project { schema, indexes }
                }
                OpParams::Join { predicate } => {
                    let predicate = predicate.compile(&schema, node.id)?;
                    PreparedOp::Join { schema, predicate }
                }
                OpParams::Union => PreparedOp::Union,
                OpParams::Consolidate { .. } => PreparedOp::Consolidate,
                OpParams::Sink { .. } => PreparedOp::Sink,
                OpParams::SubgraphCall { .. } => PreparedOp::SubgraphCall,
            };
            ops.insert(node.id, op);
        }
        Ok(PreparedGraph { graph, topo, ops })
    }

    pub fn graph(&self) -> &OperatorGraph {
        &self.graph
    }

    pub fn topo(&self) -> &[NodeId] {
        &self.topo
    }
}

/// Evaluation state for one document: node results materialize in topo
/// order. The runtime drives this node by node so it can time each one and
/// swap in accelerator results at SubgraphCall nodes.
pub struct GraphRun<'g> {
    prepared: &'g PreparedGraph,
    doc: &'g DocText,
    results: BTreeMap<NodeId, AnnotationSet>,
}

impl<'g> GraphRun<'g> {
    pub fn new(prepared: &'g PreparedGraph, doc: &'g DocText) -> Self {
        GraphRun { prepared, doc, results: BTreeMap::new() }
    }

    /// Provide a node's output from outside (accelerator results).
    pub fn inject(&mut self, id: NodeId, set: AnnotationSet) {
        self.results.insert(id, set);
    }

    pub fn result(&self, id: NodeId) -> Option<&AnnotationSet> {
        self.results.get(&id)
    }

    /// Evaluate one node; inputs must already be materialized.
    pub fn eval_node(&mut self, id: NodeId) -> Result<(), ExecError> {
        let graph = &self.prepared.graph;
        let inputs: Vec<&AnnotationSet> = graph
            .inputs_of(id)
            .iter()
            .map(|e| self.results.get(&e.producer).expect("inputs evaluated (topo order)"))
            .collect();
        let out = match self.prepared.ops.get(&id).expect("prepared node") {
            PreparedOp::DocSource { schema } => {
                let mut set = AnnotationSet::new(Arc::clone(schema));
                set.push(alloc::vec![Value::Text(Arc::clone(&self.doc.text))]);
                set
            }
            PreparedOp::Regex(re) => regex_extract(re, self.doc),
            PreparedOp::Dict(dict) => dictionary_extract(dict, self.doc),
            PreparedOp::Select(pred) => select_compiled(inputs[0], pred),
            PreparedOp::Project { schema, indexes } => project_indexed(inputs[0], schema, indexes),
            PreparedOp::Join { schema, predicate } => {
                join_compiled(inputs[0], inputs[1], schema, predicate)
            }
            PreparedOp::Union => union_all(&inputs)?,
            PreparedOp::Consolidate => consolidate(inputs[0])?,
            PreparedOp::Sink => (*inputs[0]).clone(),
            PreparedOp::SubgraphCall => {
                if self.results.contains_key(&id) {
                    return Ok(()); // injected by the dispatcher
                }
                return Err(ExecError::SubgraphCallInSoftware { node: id });
            }
        };
        self.results.insert(id, out);
        Ok(())
    }

    /// Sink outputs keyed by view name.
    pub fn take_sink_views(mut self) -> BTreeMap<String, AnnotationSet> {
        let mut out = BTreeMap::new();
        for node in self.prepared.graph.nodes() {
            if let OpParams::Sink { view } = &node.params {
                if let Some(set) = self.results.remove(&node.id) {
                    out.insert(view.clone(), set);
                }
            }
        }
        out
    }

    pub fn into_results(self) -> BTreeMap<NodeId, AnnotationSet> {
        self.results
    }
}

/// Evaluate the whole graph in software; returns sink outputs by view name.
/// The system-wide oracle.
pub fn execute_graph_software(
    prepared: &PreparedGraph,
    doc: &DocText,
) -> Result<BTreeMap<String, AnnotationSet>, ExecError> {
    let mut run = GraphRun::new(prepared, doc);
    for &id in prepared.topo() {
        run.eval_node(id)?;
    }
    Ok(run.take_sink_views())
}

/// Evaluate the whole graph and keep every node's output; used by tests
/// that compare accelerator boundary streams against interior nodes.
pub fn execute_graph_all_nodes(
    prepared: &PreparedGraph,
    doc: &DocText,
) -> Result<BTreeMap<NodeId, AnnotationSet>, ExecError> {
    let mut run = GraphRun::new(prepared, doc);
    for &id in prepared.topo() {
        run.eval_node(id)?;
    }
    Ok(run.into_results())
}

pub fn kind_of(params: &OpParams) -> OperatorKind {
    params.kind()
}
