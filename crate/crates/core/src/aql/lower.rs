//! Lowering from parsed statements to an operator graph.
//!
//! Node ids are deterministic: the document source is node 0, each `create
//! view` takes the next id in statement order, and sinks for `output view`
//! statements are appended after all views, in output order. Views must be
//! defined before use; dictionaries are inlined into the extraction nodes
//! that reference them, so the graph is self-contained unless a dictionary
//! comes from a file.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::aql::ast::*;
use crate::aql::AqlError;
use crate::graph::{DictParams, NodeId, OpParams, OperatorGraph, OperatorNode};
use crate::predicate::Predicate;
use crate::schema::{extract_schema, infer_schemas, join_output_columns, join_right_output_name};
use crate::table::Schema;

pub fn lower_to_aog(stmts: &[Statement]) -> Result<OperatorGraph, AqlError> {
    let mut g = OperatorGraph::new();
    g.add_node(OperatorNode::new(0, OpParams::DocSource))
        .map_err(AqlError::Graph)?;

    let mut dicts: BTreeMap<String, DictSource> = BTreeMap::new();
    let mut views: BTreeMap<String, NodeId> = BTreeMap::new();
    let mut schemas: BTreeMap<String, Arc<Schema>> = BTreeMap::new();
    let mut next_id: NodeId = 1;
    let mut sinks: Vec<(NodeId, String)> = Vec::new();
    let mut sink_names: BTreeSet<String> = BTreeSet::new();

    for stmt in stmts {
        match stmt {
            Statement::CreateDict { name, source } => {
                if dicts.contains_key(name) {
                    return Err(AqlError::DuplicateName { name: name.clone() });
                }
                dicts.insert(name.clone(), source.clone());
            }
            Statement::CreateView { name, body } => {
                if views.contains_key(name) {
                    return Err(AqlError::DuplicateName { name: name.clone() });
                }
                let id = next_id;
                next_id += 1;
                let (params, inputs, schema) = lower_body(name, body, &dicts, &views, &schemas)?;
                g.add_node(OperatorNode::new(id, params))
                    .map_err(AqlError::Graph)?;
                for (slot, producer) in inputs.iter().enumerate() {
                    g.add_edge(*producer, id, slot as u32)
                        .map_err(AqlError::Graph)?;
                }
                views.insert(name.clone(), id);
                schemas.insert(name.clone(), schema);
            }
            Statement::Output { view, alias } => {
                let &vid = views
                    .get(view)
                    .ok_or_else(|| AqlError::UnknownView { name: view.clone() })?;
                let sink_name = alias.clone().unwrap_or_else(|| view.clone());
                if !sink_names.insert(sink_name.clone()) {
                    return Err(AqlError::DuplicateName { name: sink_name });
                }
                sinks.push((vid, sink_name));
            }
        }
    }

    for (vid, name) in sinks {
        let id = next_id;
        next_id += 1;
        g.add_node(OperatorNode::new(id, OpParams::Sink { view: name }))
            .map_err(AqlError::Graph)?;
        g.add_edge(vid, id, 0).map_err(AqlError::Graph)?;
    }

    infer_schemas(g).map_err(AqlError::Schema)
}

fn lookup<'a>(
    views: &BTreeMap<String, NodeId>,
    schemas: &'a BTreeMap<String, Arc<Schema>>,
    name: &str,
) -> Result<(NodeId, &'a Arc<Schema>), AqlError> {
    match (views.get(name), schemas.get(name)) {
        (Some(&id), Some(schema)) => Ok((id, schema)),
        _ => Err(AqlError::UnknownView {
            name: name.to_string(),
        }),
    }
}

fn lower_body(
    view_name: &str,
    body: &ViewBody,
    dicts: &BTreeMap<String, DictSource>,
    views: &BTreeMap<String, NodeId>,
    schemas: &BTreeMap<String, Arc<Schema>>,
) -> Result<(OpParams, Vec<NodeId>, Arc<Schema>), AqlError> {
    match body {
        ViewBody::ExtractRegex { pattern } => Ok((
            OpParams::RegexExtract {
                pattern: pattern.clone(),
            },
            alloc::vec![0],
            Arc::new(extract_schema()),
        )),
        ViewBody::ExtractDict { dict } => {
            let source = dicts
                .get(dict)
                .ok_or_else(|| AqlError::UnknownDictionary { name: dict.clone() })?;
            let params = match source {
                DictSource::Inline(entries) => DictParams::Inline {
                    name: dict.clone(),
                    entries: entries.clone(),
                },
                DictSource::File(path) => DictParams::File { path: path.clone() },
            };
            Ok((
                OpParams::DictionaryExtract { dict: params },
                alloc::vec![0],
                Arc::new(extract_schema()),
            ))
        }
        ViewBody::Select { from, predicate } => {
            let (fid, schema) = lookup(views, schemas, from)?;
            let resolve = |c: &ColRef| -> Result<String, AqlError> {
                if let Some(q) = &c.qualifier {
                    if q != from {
                        return Err(AqlError::UnknownView { name: q.clone() });
                    }
                }
                if schema.index_of(&c.column).is_none() {
                    return Err(AqlError::UnknownColumn {
                        view: from.clone(),
                        column: c.column.clone(),
                    });
                }
                Ok(c.column.clone())
            };
            let predicate = map_pred(predicate, &resolve)?;
            Ok((
                OpParams::Select { predicate },
                alloc::vec![fid],
                Arc::clone(schema),
            ))
        }
        ViewBody::Project { columns, from } => {
            let (fid, schema) = lookup(views, schemas, from)?;
            let mut cols = Vec::with_capacity(columns.len());
            for name in columns {
                let idx = schema.index_of(name).ok_or_else(|| AqlError::UnknownColumn {
                    view: from.clone(),
                    column: name.clone(),
                })?;
                cols.push((name.clone(), schema.column_type(idx)));
            }
            Ok((
                OpParams::Project {
                    columns: columns.clone(),
                },
                alloc::vec![fid],
                Arc::new(Schema::new(cols)),
            ))
        }
        ViewBody::Join { left, right, predicate } => {
            let (lid, lschema) = lookup(views, schemas, &left.view)?;
            let (rid, rschema) = lookup(views, schemas, &right.view)?;
            let out = Arc::new(Schema::new(join_output_columns(lschema, rschema)));
            let (llabel, rlabel) = (left.label(), right.label());
            let resolve = |c: &ColRef| -> Result<String, AqlError> {
                match &c.qualifier {
                    Some(q) => {
                        let hits_left = q == llabel;
                        let hits_right = q == rlabel;
                        if hits_left && hits_right {
                            return Err(AqlError::AmbiguousColumn {
                                column: alloc::format!("{q}.{}", c.column),
                            });
                        }
                        if hits_left {
                            if lschema.index_of(&c.column).is_none() {
                                return Err(AqlError::UnknownColumn {
                                    view: llabel.to_string(),
                                    column: c.column.clone(),
                                });
                            }
                            Ok(c.column.clone())
                        } else if hits_right {
                            let idx = rschema.index_of(&c.column).ok_or_else(|| {
                                AqlError::UnknownColumn {
                                    view: rlabel.to_string(),
                                    column: c.column.clone(),
                                }
                            })?;
                            Ok(join_right_output_name(lschema, rschema, idx))
                        } else {
                            Err(AqlError::UnknownView { name: q.clone() })
                        }
                    }
                    None => {
                        if out.index_of(&c.column).is_none() {
                            return Err(AqlError::UnknownColumn {
                                view: view_name.to_string(),
                                column: c.column.clone(),
                            });
                        }
                        Ok(c.column.clone())
                    }
                }
            };
            let predicate = map_pred(predicate, &resolve)?;
            Ok((OpParams::Join { predicate }, alloc::vec![lid, rid], out))
        }
        ViewBody::UnionAll { inputs } => {
            let mut ids = Vec::with_capacity(inputs.len());
            let mut first: Option<Arc<Schema>> = None;
            for name in inputs {
                let (id, schema) = lookup(views, schemas, name)?;
                ids.push(id);
                if first.is_none() {
                    first = Some(Arc::clone(schema));
                }
            }
            // Schema agreement across inputs is checked by inference.
            Ok((OpParams::Union, ids, first.expect("arity checked by parser")))
        }
        ViewBody::Consolidate { from } => {
            let (fid, schema) = lookup(views, schemas, from)?;
            Ok((
                OpParams::Consolidate {
                    policy: crate::graph::ConsolidatePolicy::ContainedWithin,
                },
                alloc::vec![fid],
                Arc::clone(schema),
            ))
        }
    }
}

/// Rebuild the predicate tree with every column reference resolved to an
/// output-schema column name.
fn map_pred(
    expr: &PredExpr,
    resolve: &impl Fn(&ColRef) -> Result<String, AqlError>,
) -> Result<Predicate, AqlError> {
    Ok(match expr {
        PredExpr::Follows { left, right, min, max } => Predicate::Follows {
            left: resolve(left)?,
            right: resolve(right)?,
            min: *min,
            max: *max,
        },
        PredExpr::Contains { outer, inner } => Predicate::Contains {
            outer: resolve(outer)?,
            inner: resolve(inner)?,
        },
        PredExpr::Overlaps { a, b } => Predicate::Overlaps {
            a: resolve(a)?,
            b: resolve(b)?,
        },
        PredExpr::SpanLengthGreaterThan { column, length } => Predicate::SpanLengthGreaterThan {
            column: resolve(column)?,
            length: *length,
        },
        PredExpr::And(a, b) => {
            Predicate::And(Box::new(map_pred(a, resolve)?), Box::new(map_pred(b, resolve)?))
        }
        PredExpr::Or(a, b) => {
            Predicate::Or(Box::new(map_pred(a, resolve)?), Box::new(map_pred(b, resolve)?))
        }
        PredExpr::Not(p) => Predicate::Not(Box::new(map_pred(p, resolve)?)),
    })
}
