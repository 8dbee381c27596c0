//! Schema inference over operator graphs.
//!
//! Every node's output schema is a pure function of its params and its
//! inputs' schemas, so one pass in topological order settles the whole
//! graph. Inference is idempotent: re-running it reproduces the same
//! schemas.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::SchemaError;
use crate::graph::{NodeId, OpParams, OperatorGraph};
use crate::table::{ColumnType, Schema};

/// Schema of the document stream: one text column holding the document.
pub fn doc_source_schema() -> Schema {
    Schema::new(alloc::vec![("text".to_string(), ColumnType::Text)])
}

/// Schema of both extraction kinds: a single span per match.
pub fn extract_schema() -> Schema {
    Schema::new(alloc::vec![("match".to_string(), ColumnType::Span)])
}

/// Output columns of a join: left columns unchanged, right columns renamed
/// on collision by appending `_2`, `_3`, ... until unique. The rule frontend
/// uses the same function to resolve alias-qualified predicate columns, so
/// the two stay consistent by construction.
pub fn join_output_columns(left: &Schema, right: &Schema) -> Vec<(String, ColumnType)> {
    let mut out: Vec<(String, ColumnType)> = left.columns().to_vec();
    for (name, ty) in right.columns() {
        let mut candidate = name.clone();
        let mut n = 2usize;
        while out.iter().any(|(taken, _)| taken == &candidate) {
            candidate = format!("{}_{}", name, n);
            n += 1;
        }
        out.push((candidate, *ty));
    }
    out
}

/// Output name of the right-side column `index` in a join of these schemas.
pub fn join_right_output_name(left: &Schema, right: &Schema, index: usize) -> String {
    join_output_columns(left, right)[left.len() + index].0.clone()
}

/// Infer all output schemas without mutating the graph.
pub fn infer_schemas_ref(
    graph: &OperatorGraph,
) -> Result<BTreeMap<NodeId, Arc<Schema>>, SchemaError> {
    let order = graph.topo_order().map_err(|_| SchemaError::ArityMismatch {
        node: 0,
        expected: 0,
        got: 0,
    })?;
    let mut schemas: BTreeMap<NodeId, Arc<Schema>> = BTreeMap::new();
    for id in order {
        let node = graph.node(id).unwrap();
        let inputs: Vec<Arc<Schema>> = graph
            .inputs_of(id)
            .iter()
            .map(|e| Arc::clone(schemas.get(&e.producer).expect("topo order")))
            .collect();
        let expect_arity = |n: usize| -> Result<(), SchemaError> {
            if inputs.len() != n {
                return Err(SchemaError::ArityMismatch { node: id, expected: n, got: inputs.len() });
            }
            Ok(())
        };
        let schema = match &node.params {
            OpParams::DocSource => {
                expect_arity(0)?;
                Arc::new(doc_source_schema())
            }
            OpParams::RegexExtract { .. } | OpParams::DictionaryExtract { .. } => {
                expect_arity(1)?;
                Arc::new(extract_schema())
            }
            OpParams::Select { predicate } => {
                expect_arity(1)?;
                // Compile for column resolution only; result discarded.
                predicate.compile(&inputs[0], id)?;
                Arc::clone(&inputs[0])
            }
            OpParams::Project { columns } => {
                expect_arity(1)?;
                let mut cols = Vec::with_capacity(columns.len());
                for name in columns {
                    let idx = inputs[0]
                        .index_of(name)
                        .ok_or_else(|| SchemaError::UnknownColumn { node: id, column: name.clone() })?;
                    if cols.iter().any(|(n, _): &(String, ColumnType)| n == name) {
                        return Err(SchemaError::DuplicateColumn { node: id, column: name.clone() });
                    }
                    cols.push((name.clone(), inputs[0].column_type(idx)));
                }
                Arc::new(Schema::new(cols))
            }
            OpParams::Join { predicate } => {
                expect_arity(2)?;
                let schema = Schema::new(join_output_columns(&inputs[0], &inputs[1]));
                predicate.compile(&schema, id)?;
                Arc::new(schema)
            }
            OpParams::Union => {
                if inputs.len() < 2 {
                    return Err(SchemaError::ArityMismatch { node: id, expected: 2, got: inputs.len() });
                }
                for (i, s) in inputs.iter().enumerate().skip(1) {
                    if s.columns() != inputs[0].columns() {
                        return Err(SchemaError::UnionMismatch {
                            node: id,
                            detail: format!("input 0 is {:?}, input {} is {:?}", inputs[0].columns(), i, s.columns()),
                        });
                    }
                }
                Arc::clone(&inputs[0])
            }
            OpParams::Consolidate { .. } => {
                expect_arity(1)?;
                let first_is_span = inputs[0]
                    .columns()
                    .first()
                    .map(|(_, t)| *t == ColumnType::Span)
                    .unwrap_or(false);
                if !first_is_span {
                    return Err(SchemaError::NoSpanColumn { node: id });
                }
                Arc::clone(&inputs[0])
            }
            OpParams::Sink { .. } => {
                expect_arity(1)?;
                Arc::clone(&inputs[0])
            }
            OpParams::SubgraphCall { .. } => match &node.schema {
                Some(s) => Arc::clone(s),
                None => return Err(SchemaError::MissingCallSchema { node: id }),
            },
        };
        schemas.insert(id, schema);
    }
    Ok(schemas)
}

/// Infer and store output schemas on every node.
pub fn infer_schemas(mut graph: OperatorGraph) -> Result<OperatorGraph, SchemaError> {
    let schemas = infer_schemas_ref(&graph)?;
    for (id, schema) in schemas {
        graph.node_mut(id).unwrap().schema = Some(schema);
    }
    Ok(graph)
}
