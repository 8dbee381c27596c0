//! On-disk formats: operator graphs, partition plans, capability sets,
//! profiles, and annotation output.
//!
//! Writers build the JSON by hand so the byte layout is stable: fixed key
//! order, fixed indentation, one node or edge per line. Readers go through
//! `serde_json` and accept any layout. Plan files carry the original graph
//! plus the node grouping; the supergraph and call wiring are rebuilt by
//! `rewrite` on load and cross-checked against the stored subgraph table.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::Value as Json;

use spanforge_core::graph::{
    ConsolidatePolicy, DictParams, Edge, NodeId, OpParams, OperatorGraph, OperatorKind,
    OperatorNode, SubgraphId,
};
use spanforge_core::partition::{rewrite, CapabilitySet, Location, PartitionPlan};
use spanforge_core::predicate::Predicate;
use spanforge_core::schema::infer_schemas;
use spanforge_core::table::{AnnotationSet, Value};

use crate::profiler::Profile;

pub const AOG_VERSION: u64 = 1;

fn esc(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization is infallible")
}

fn fnum(x: f64) -> String {
    // serde_json prints the shortest representation that round-trips.
    serde_json::to_string(&x).expect("finite float")
}

// ---------------------------------------------------------------------------
// Predicates: nested tagged arrays, e.g. ["and", ["follows", "a", "b", 0, 5],
// ["not", ["overlaps", "a", "b"]]].

fn predicate_json(p: &Predicate, out: &mut String) {
    match p {
        Predicate::Follows { left, right, min, max } => {
            let _ = write!(out, "[\"follows\", {}, {}, {}, {}]", esc(left), esc(right), min, max);
        }
        Predicate::Contains { outer, inner } => {
            let _ = write!(out, "[\"contains\", {}, {}]", esc(outer), esc(inner));
        }
        Predicate::Overlaps { a, b } => {
            let _ = write!(out, "[\"overlaps\", {}, {}]", esc(a), esc(b));
        }
        Predicate::SpanLengthGreaterThan { column, length } => {
            let _ = write!(out, "[\"span_length_greater_than\", {}, {}]", esc(column), length);
        }
        Predicate::And(a, b) => {
            out.push_str("[\"and\", ");
            predicate_json(a, out);
            out.push_str(", ");
            predicate_json(b, out);
            out.push(']');
        }
        Predicate::Or(a, b) => {
            out.push_str("[\"or\", ");
            predicate_json(a, out);
            out.push_str(", ");
            predicate_json(b, out);
            out.push(']');
        }
        Predicate::Not(a) => {
            out.push_str("[\"not\", ");
            predicate_json(a, out);
            out.push(']');
        }
    }
}

fn predicate_from_json(v: &Json) -> Result<Predicate> {
    let arr = v.as_array().ok_or_else(|| anyhow!("predicate must be an array"))?;
    let tag = arr
        .first()
        .and_then(Json::as_str)
        .ok_or_else(|| anyhow!("predicate array must start with a tag string"))?;
    let col = |i: usize| -> Result<String> {
        arr.get(i)
            .and_then(Json::as_str)
            .map(str::to_owned)
            .ok_or_else(|| anyhow!("predicate \"{tag}\": argument {i} must be a column name"))
    };
    let int = |i: usize| -> Result<i64> {
        arr.get(i)
            .and_then(Json::as_i64)
            .ok_or_else(|| anyhow!("predicate \"{tag}\": argument {i} must be an integer"))
    };
    let arity = |n: usize| -> Result<()> {
        if arr.len() == n + 1 {
            Ok(())
        } else {
            bail!("predicate \"{tag}\" takes {n} arguments, got {}", arr.len() - 1)
        }
    };
    match tag {
        "follows" => {
            arity(4)?;
            Ok(Predicate::Follows { left: col(1)?, right: col(2)?, min: int(3)?, max: int(4)? })
        }
        "contains" => {
            arity(2)?;
            Ok(Predicate::Contains { outer: col(1)?, inner: col(2)? })
        }
        "overlaps" => {
            arity(2)?;
            Ok(Predicate::Overlaps { a: col(1)?, b: col(2)? })
        }
        "span_length_greater_than" => {
            arity(2)?;
            let length = u32::try_from(int(2)?)
                .map_err(|_| anyhow!("span_length_greater_than: length out of range"))?;
            Ok(Predicate::SpanLengthGreaterThan { column: col(1)?, length })
        }
        "and" | "or" => {
            arity(2)?;
            let a = Box::new(predicate_from_json(&arr[1])?);
            let b = Box::new(predicate_from_json(&arr[2])?);
            Ok(if tag == "and" { Predicate::And(a, b) } else { Predicate::Or(a, b) })
        }
        "not" => {
            arity(1)?;
            Ok(Predicate::Not(Box::new(predicate_from_json(&arr[1])?)))
        }
        other => bail!("unknown predicate tag {other:?}"),
    }
}

// ---------------------------------------------------------------------------
// Operator graphs.

fn params_json(p: &OpParams) -> String {
    match p {
        OpParams::DocSource | OpParams::Union => "{}".to_owned(),
        OpParams::RegexExtract { pattern } => format!("{{\"pattern\": {}}}", esc(pattern)),
        OpParams::DictionaryExtract { dict } => match dict {
            DictParams::Inline { name, entries } => {
                let items: Vec<String> = entries.iter().map(|e| esc(e)).collect();
                format!("{{\"dict\": {}, \"entries\": [{}]}}", esc(name), items.join(", "))
            }
            DictParams::File { path } => format!("{{\"dict_file\": {}}}", esc(path)),
        },
        OpParams::Select { predicate } | OpParams::Join { predicate } => {
            let mut s = String::from("{\"predicate\": ");
            predicate_json(predicate, &mut s);
            s.push('}');
            s
        }
        OpParams::Project { columns } => {
            let items: Vec<String> = columns.iter().map(|c| esc(c)).collect();
            format!("{{\"columns\": [{}]}}", items.join(", "))
        }
        OpParams::Consolidate { policy } => format!("{{\"policy\": {}}}", esc(policy.name())),
        OpParams::Sink { view } => format!("{{\"view\": {}}}", esc(view)),
        OpParams::SubgraphCall { subgraph } => format!("{{\"subgraph\": {subgraph}}}"),
    }
}

fn params_from_json(kind: OperatorKind, params: &Json) -> Result<OpParams> {
    let obj = params.as_object().ok_or_else(|| anyhow!("\"params\" must be an object"))?;
    let str_field = |key: &str| -> Result<String> {
        obj.get(key)
            .and_then(Json::as_str)
            .map(str::to_owned)
            .ok_or_else(|| anyhow!("{kind} params need a string {key:?}"))
    };
    match kind {
        OperatorKind::DocSource => Ok(OpParams::DocSource),
        OperatorKind::Union => Ok(OpParams::Union),
        OperatorKind::RegexExtract => Ok(OpParams::RegexExtract { pattern: str_field("pattern")? }),
        OperatorKind::DictionaryExtract => {
            if let Some(path) = obj.get("dict_file") {
                let path = path
                    .as_str()
                    .ok_or_else(|| anyhow!("\"dict_file\" must be a string"))?
                    .to_owned();
                Ok(OpParams::DictionaryExtract { dict: DictParams::File { path } })
            } else {
                let name = str_field("dict")?;
                let entries = obj
                    .get("entries")
                    .and_then(Json::as_array)
                    .ok_or_else(|| anyhow!("dictionary params need an \"entries\" array"))?
                    .iter()
                    .map(|e| {
                        e.as_str()
                            .map(str::to_owned)
                            .ok_or_else(|| anyhow!("dictionary entries must be strings"))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(OpParams::DictionaryExtract {
                    dict: DictParams::Inline { name, entries },
                })
            }
        }
        OperatorKind::Select => {
            let p = obj.get("predicate").ok_or_else(|| anyhow!("select needs a predicate"))?;
            Ok(OpParams::Select { predicate: predicate_from_json(p)? })
        }
        OperatorKind::Join => {
            let p = obj.get("predicate").ok_or_else(|| anyhow!("join needs a predicate"))?;
            Ok(OpParams::Join { predicate: predicate_from_json(p)? })
        }
        OperatorKind::Project => {
            let columns = obj
                .get("columns")
                .and_then(Json::as_array)
                .ok_or_else(|| anyhow!("project needs a \"columns\" array"))?
                .iter()
                .map(|c| {
                    c.as_str()
                        .map(str::to_owned)
                        .ok_or_else(|| anyhow!("project columns must be strings"))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(OpParams::Project { columns })
        }
        OperatorKind::Consolidate => {
            let name = str_field("policy")?;
            let policy = ConsolidatePolicy::parse(&name)
                .ok_or_else(|| anyhow!("unknown consolidation policy {name:?}"))?;
            Ok(OpParams::Consolidate { policy })
        }
        OperatorKind::Sink => Ok(OpParams::Sink { view: str_field("view")? }),
        OperatorKind::SubgraphCall => {
            let subgraph = obj
                .get("subgraph")
                .and_then(Json::as_u64)
                .ok_or_else(|| anyhow!("subgraph call params need a \"subgraph\" id"))?;
            Ok(OpParams::SubgraphCall { subgraph: subgraph as SubgraphId })
        }
    }
}

fn sorted_edges(g: &OperatorGraph) -> Vec<Edge> {
    let mut edges = g.edges().to_vec();
    edges.sort_unstable_by_key(|e| (e.producer, e.consumer, e.slot));
    edges
}

fn write_graph_fields(g: &OperatorGraph, out: &mut String) {
    let _ = write!(out, "  \"aog_version\": {AOG_VERSION},\n  \"nodes\": [\n");
    let mut ids: Vec<NodeId> = g.node_ids().collect();
    ids.sort_unstable();
    for (i, id) in ids.iter().enumerate() {
        let node = g.node(*id).expect("listed id");
        let comma = if i + 1 < ids.len() { "," } else { "" };
        let _ = write!(
            out,
            "    {{\"id\": {}, \"kind\": {}, \"params\": {}}}{comma}\n",
            node.id,
            esc(node.kind().name()),
            params_json(&node.params),
        );
    }
    out.push_str("  ],\n  \"edges\": [\n");
    let edges = sorted_edges(g);
    for (i, e) in edges.iter().enumerate() {
        let comma = if i + 1 < edges.len() { "," } else { "" };
        let _ = write!(out, "    [{}, {}, {}]{comma}\n", e.producer, e.consumer, e.slot);
    }
    out.push_str("  ],\n  \"outputs\": [");
    let sinks = g.sinks();
    let items: Vec<String> = sinks.iter().map(|s| s.to_string()).collect();
    out.push_str(&items.join(", "));
    out.push(']');
}

pub fn aog_to_json(g: &OperatorGraph) -> String {
    let mut out = String::from("{\n");
    write_graph_fields(g, &mut out);
    out.push_str("\n}\n");
    out
}

fn graph_from_value(v: &Json) -> Result<OperatorGraph> {
    let obj = v.as_object().ok_or_else(|| anyhow!("top level must be an object"))?;
    let version = obj
        .get("aog_version")
        .and_then(Json::as_u64)
        .ok_or_else(|| anyhow!("missing \"aog_version\""))?;
    if version != AOG_VERSION {
        bail!("unsupported aog_version {version}, expected {AOG_VERSION}");
    }
    let mut g = OperatorGraph::new();
    let nodes = obj
        .get("nodes")
        .and_then(Json::as_array)
        .ok_or_else(|| anyhow!("missing \"nodes\" array"))?;
    for n in nodes {
        let nobj = n.as_object().ok_or_else(|| anyhow!("node entries must be objects"))?;
        let id = nobj
            .get("id")
            .and_then(Json::as_u64)
            .ok_or_else(|| anyhow!("node needs a numeric \"id\""))?;
        let kind_name = nobj
            .get("kind")
            .and_then(Json::as_str)
            .ok_or_else(|| anyhow!("node {id} needs a \"kind\" string"))?;
        let kind = OperatorKind::parse(kind_name)
            .ok_or_else(|| anyhow!("node {id}: unknown kind {kind_name:?}"))?;
        let params = nobj.get("params").cloned().unwrap_or(Json::Object(Default::default()));
        let params = params_from_json(kind, &params)
            .with_context(|| format!("node {id} ({kind_name})"))?;
        g.add_node(OperatorNode::new(id as NodeId, params))
            .map_err(|e| anyhow!("node {id}: {e}"))?;
    }
    let edges = obj
        .get("edges")
        .and_then(Json::as_array)
        .ok_or_else(|| anyhow!("missing \"edges\" array"))?;
    for e in edges {
        let triple = e.as_array().filter(|a| a.len() == 3).ok_or_else(|| {
            anyhow!("edges must be [producer, consumer, slot] triples")
        })?;
        let num = |i: usize| -> Result<u64> {
            triple[i].as_u64().ok_or_else(|| anyhow!("edge fields must be non-negative integers"))
        };
        g.add_edge(num(0)? as NodeId, num(1)? as NodeId, num(2)? as u32)
            .map_err(|e| anyhow!("edge: {e}"))?;
    }
    // "outputs" is informative; sinks are already determined by the nodes.
    if let Some(outputs) = obj.get("outputs").and_then(Json::as_array) {
        let listed: BTreeSet<u64> = outputs.iter().filter_map(Json::as_u64).collect();
        let actual: BTreeSet<u64> = g.sinks().iter().map(|&s| s as u64).collect();
        if listed != actual {
            bail!("\"outputs\" {listed:?} disagrees with sink nodes {actual:?}");
        }
    }
    Ok(g)
}

pub fn aog_from_json(s: &str) -> Result<OperatorGraph> {
    let v: Json = serde_json::from_str(s).context("operator graph is not valid JSON")?;
    graph_from_value(&v)
}

pub fn load_aog(path: &Path) -> Result<OperatorGraph> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut g = aog_from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    resolve_dictionaries(&mut g, base)?;
    Ok(g)
}

/// Replace file-backed dictionaries with their inline form. Entries are
/// non-empty trimmed lines; the file path is resolved relative to `base`.
pub fn resolve_dictionaries(g: &mut OperatorGraph, base: &Path) -> Result<()> {
    let ids: Vec<NodeId> = g.node_ids().collect();
    for id in ids {
        let node = g.node(id).expect("listed id");
        let path = match &node.params {
            OpParams::DictionaryExtract { dict: DictParams::File { path } } => path.clone(),
            _ => continue,
        };
        let full = base.join(&path);
        let text = fs::read_to_string(&full)
            .with_context(|| format!("reading dictionary {}", full.display()))?;
        let entries: Vec<String> =
            text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_owned).collect();
        if entries.is_empty() {
            bail!("dictionary {} is empty", full.display());
        }
        let node = g.node_mut(id).expect("listed id");
        node.params = OpParams::DictionaryExtract {
            dict: DictParams::Inline { name: path, entries },
        };
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Partition plans.

pub fn plan_to_json(plan: &PartitionPlan) -> String {
    let mut out = String::from("{\n");
    write_graph_fields(&plan.graph, &mut out);
    out.push_str(",\n  \"subgraphs\": [\n");
    for (i, sg) in plan.subgraphs.iter().enumerate() {
        let nodes: Vec<String> = sg.nodes.iter().map(|n| n.to_string()).collect();
        let fmt_edges = |edges: &[Edge]| -> String {
            let items: Vec<String> =
                edges.iter().map(|e| format!("[{}, {}, {}]", e.producer, e.consumer, e.slot)).collect();
            items.join(", ")
        };
        let outputs: Vec<String> = sg.outputs.iter().map(|n| n.to_string()).collect();
        let comma = if i + 1 < plan.subgraphs.len() { "," } else { "" };
        let _ = write!(
            out,
            "    {{\"id\": {}, \"nodes\": [{}], \"edges\": [{}], \"inputs\": [{}], \"outputs\": [{}]}}{comma}\n",
            sg.id,
            nodes.join(", "),
            fmt_edges(&sg.edges),
            fmt_edges(&sg.inputs),
            outputs.join(", "),
        );
    }
    out.push_str("  ],\n  \"location\": [");
    let mut rows: Vec<String> = Vec::new();
    for (&node, &loc) in &plan.location {
        if let Location::Accelerator(sg) = loc {
            rows.push(format!("[{node}, {sg}]"));
        }
    }
    out.push_str(&rows.join(", "));
    out.push_str("]\n}\n");
    out
}

pub fn plan_from_json(s: &str) -> Result<PartitionPlan> {
    let v: Json = serde_json::from_str(s).context("plan is not valid JSON")?;
    let graph = graph_from_value(&v)?;
    let graph = infer_schemas(graph).map_err(|e| anyhow!("plan graph: {e}"))?;
    let obj = v.as_object().expect("checked by graph_from_value");
    let subgraphs = obj
        .get("subgraphs")
        .and_then(Json::as_array)
        .ok_or_else(|| anyhow!("missing \"subgraphs\" array"))?;
    let mut sets: Vec<BTreeSet<NodeId>> = Vec::new();
    for sg in subgraphs {
        let nodes = sg
            .get("nodes")
            .and_then(Json::as_array)
            .ok_or_else(|| anyhow!("subgraph entries need a \"nodes\" array"))?;
        let set: BTreeSet<NodeId> = nodes
            .iter()
            .map(|n| {
                n.as_u64()
                    .map(|n| n as NodeId)
                    .ok_or_else(|| anyhow!("subgraph nodes must be integers"))
            })
            .collect::<Result<_>>()?;
        sets.push(set);
    }
    let plan = rewrite(&graph, &sets).map_err(|e| anyhow!("plan does not partition: {e}"))?;

    // The stored wiring is derived data. Rebuild and cross-check so a plan
    // edited by hand cannot silently disagree with itself.
    let stored = plan_to_json(&plan);
    let stored_v: Json = serde_json::from_str(&stored).expect("writer emits valid JSON");
    for key in ["subgraphs", "location"] {
        let written = stored_v.get(key);
        let loaded = obj.get(key).cloned().or_else(|| {
            // "location" may be omitted; treat absence as the rebuilt value.
            if key == "location" { written.cloned() } else { None }
        });
        if written != loaded.as_ref() {
            bail!("plan file {key:?} disagrees with the wiring derived from its graph");
        }
    }
    Ok(plan)
}

pub fn load_plan(path: &Path) -> Result<PartitionPlan> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    plan_from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

// ---------------------------------------------------------------------------
// Capability sets.

pub fn caps_to_json(caps: &CapabilitySet) -> String {
    let kinds: Vec<String> = caps.kinds().map(|k| esc(k.name())).collect();
    let max = match caps.max_subgraph_nodes {
        Some(n) => n.to_string(),
        None => "null".to_owned(),
    };
    format!(
        "{{\n  \"kinds\": [{}],\n  \"regex_state_budget\": {},\n  \"max_subgraph_nodes\": {}\n}}\n",
        kinds.join(", "),
        caps.regex_state_budget,
        max,
    )
}

pub fn caps_from_json(s: &str) -> Result<CapabilitySet> {
    let v: Json = serde_json::from_str(s).context("capability set is not valid JSON")?;
    let obj = v.as_object().ok_or_else(|| anyhow!("capability set must be an object"))?;
    let kinds = obj
        .get("kinds")
        .and_then(Json::as_array)
        .ok_or_else(|| anyhow!("missing \"kinds\" array"))?
        .iter()
        .map(|k| {
            let name = k.as_str().ok_or_else(|| anyhow!("kinds must be strings"))?;
            OperatorKind::parse(name).ok_or_else(|| anyhow!("unknown operator kind {name:?}"))
        })
        .collect::<Result<Vec<_>>>()?;
    let budget = obj
        .get("regex_state_budget")
        .and_then(Json::as_u64)
        .ok_or_else(|| anyhow!("missing \"regex_state_budget\""))?;
    let max = match obj.get("max_subgraph_nodes") {
        None | Some(Json::Null) => None,
        Some(v) => Some(
            v.as_u64().ok_or_else(|| anyhow!("\"max_subgraph_nodes\" must be an integer or null"))?
                as usize,
        ),
    };
    Ok(CapabilitySet::new(kinds, budget as usize, max))
}

pub fn load_caps(path: &Path) -> Result<CapabilitySet> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    caps_from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

// ---------------------------------------------------------------------------
// Profiles.

pub fn profile_to_json(p: &Profile) -> String {
    let mut out = String::from("{\n");
    let _ = write!(
        out,
        "  \"total_s\": {},\n  \"bytes\": {},\n  \"threads\": {},\n",
        fnum(p.total_s),
        p.bytes,
        p.threads,
    );
    out.push_str("  \"per_node\": {");
    let rows: Vec<String> =
        p.per_node.iter().map(|(id, s)| format!("\"{id}\": {}", fnum(*s))).collect();
    out.push_str(&rows.join(", "));
    out.push_str("},\n  \"per_kind\": {");
    let rows: Vec<String> =
        p.per_kind.iter().map(|(k, s)| format!("{}: {}", esc(k), fnum(*s))).collect();
    out.push_str(&rows.join(", "));
    out.push_str("}\n}\n");
    out
}

pub fn profile_from_json(s: &str) -> Result<Profile> {
    let v: Json = serde_json::from_str(s).context("profile is not valid JSON")?;
    let obj = v.as_object().ok_or_else(|| anyhow!("profile must be an object"))?;
    let f64_field = |key: &str| -> Result<f64> {
        obj.get(key).and_then(Json::as_f64).ok_or_else(|| anyhow!("missing numeric {key:?}"))
    };
    let total_s = f64_field("total_s")?;
    let bytes = obj
        .get("bytes")
        .and_then(Json::as_u64)
        .ok_or_else(|| anyhow!("missing numeric \"bytes\""))?;
    let threads = f64_field("threads")? as usize;
    let mut per_node = BTreeMap::new();
    for (k, v) in obj
        .get("per_node")
        .and_then(Json::as_object)
        .ok_or_else(|| anyhow!("missing \"per_node\" object"))?
    {
        let id: NodeId = k.parse().map_err(|_| anyhow!("per_node key {k:?} is not a node id"))?;
        let s = v.as_f64().ok_or_else(|| anyhow!("per_node values must be numbers"))?;
        per_node.insert(id, s);
    }
    let mut per_kind = BTreeMap::new();
    for (k, v) in obj
        .get("per_kind")
        .and_then(Json::as_object)
        .ok_or_else(|| anyhow!("missing \"per_kind\" object"))?
    {
        let s = v.as_f64().ok_or_else(|| anyhow!("per_kind values must be numbers"))?;
        per_kind.insert(k.clone(), s);
    }
    Ok(Profile { total_s, bytes, threads, per_node, per_kind })
}

pub fn load_profile(path: &Path) -> Result<Profile> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    profile_from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

// ---------------------------------------------------------------------------
// Annotation output: one JSON object per line, sorted by document id, view
// name, then canonical tuple order. Identical results serialize to identical
// bytes no matter which execution path or thread count produced them.

fn value_json(v: &Value, out: &mut String) {
    match v {
        Value::Span(s) => {
            let _ = write!(out, "[{}, {}]", s.begin, s.end);
        }
        Value::Text(t) => out.push_str(&esc(t)),
        Value::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Value::Float(f) => out.push_str(&fnum(*f)),
        Value::Bool(b) => {
            let _ = write!(out, "{b}");
        }
    }
}

pub fn annotations_to_jsonl(views: &BTreeMap<(String, String), AnnotationSet>) -> String {
    let mut out = String::new();
    for ((doc, view), set) in views {
        let mut set = set.clone();
        set.sort_canonical();
        for tuple in set.tuples() {
            let _ = write!(out, "{{\"doc\": {}, \"view\": {}, \"cols\": [", esc(doc), esc(view));
            for (i, v) in tuple.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                value_json(v, &mut out);
            }
            out.push_str("]}\n");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use spanforge_core::partition::plan_for_scenario;
    use spanforge_core::partition::Scenario;
    use spanforge_core::span::Span;
    use std::sync::Arc;

    fn demo_graph() -> OperatorGraph {
        let mut g = OperatorGraph::new();
        let mut add = |id: NodeId, params: OpParams| {
            g.add_node(OperatorNode::new(id, params)).unwrap();
        };
        add(0, OpParams::DocSource);
        add(1, OpParams::RegexExtract { pattern: "[A-Z][a-z]+".into() });
        add(
            2,
            OpParams::DictionaryExtract {
                dict: DictParams::Inline {
                    name: "cities".into(),
                    entries: vec!["york".into(), "boston".into()],
                },
            },
        );
        add(
            3,
            OpParams::Join {
                predicate: Predicate::And(
                    Box::new(Predicate::Follows {
                        left: "match".into(),
                        right: "match_2".into(),
                        min: 0,
                        max: 5,
                    }),
                    Box::new(Predicate::Not(Box::new(Predicate::Overlaps {
                        a: "match".into(),
                        b: "match_2".into(),
                    }))),
                ),
            },
        );
        add(4, OpParams::Select {
            predicate: Predicate::SpanLengthGreaterThan { column: "match".into(), length: 2 },
        });
        add(5, OpParams::Project { columns: vec!["match".into()] });
        add(6, OpParams::Consolidate { policy: ConsolidatePolicy::ContainedWithin });
        add(7, OpParams::Sink { view: "Out".into() });
        g.add_edge(0, 1, 0).unwrap();
        g.add_edge(0, 2, 0).unwrap();
        g.add_edge(1, 3, 0).unwrap();
        g.add_edge(2, 3, 1).unwrap();
        g.add_edge(3, 4, 0).unwrap();
        g.add_edge(4, 5, 0).unwrap();
        g.add_edge(5, 6, 0).unwrap();
        g.add_edge(6, 7, 0).unwrap();
        g
    }

    fn assert_same_graph(a: &OperatorGraph, b: &OperatorGraph) {
        let ids_a: Vec<NodeId> = a.node_ids().collect();
        let ids_b: Vec<NodeId> = b.node_ids().collect();
        assert_eq!(ids_a, ids_b);
        for id in ids_a {
            assert_eq!(a.node(id).unwrap().params, b.node(id).unwrap().params, "node {id}");
        }
        assert_eq!(sorted_edges(a), sorted_edges(b));
    }

    #[test]
    fn aog_round_trip_preserves_structure() {
        let g = demo_graph();
        let json = aog_to_json(&g);
        let back = aog_from_json(&json).unwrap();
        assert_same_graph(&g, &back);
        // Writing again gives identical bytes.
        assert_eq!(aog_to_json(&back), json);
    }

    #[test]
    fn aog_rejects_version_and_sink_mismatches() {
        let g = demo_graph();
        let json = aog_to_json(&g);
        let bad_version = json.replace("\"aog_version\": 1", "\"aog_version\": 2");
        assert!(aog_from_json(&bad_version).is_err());
        let bad_outputs = json.replace("\"outputs\": [7]", "\"outputs\": [6]");
        assert_ne!(bad_outputs, json);
        assert!(aog_from_json(&bad_outputs).is_err());
    }

    #[test]
    fn plan_round_trip_rebuilds_wiring() {
        let g = demo_graph();
        let plan = plan_for_scenario(&g, &CapabilitySet::standard(), Scenario::FullOffload).unwrap();
        assert!(!plan.subgraphs.is_empty());
        let json = plan_to_json(&plan);
        let back = plan_from_json(&json).unwrap();
        assert_same_graph(&plan.graph, &back.graph);
        assert_eq!(plan.location, back.location);
        assert_eq!(plan.subgraphs.len(), back.subgraphs.len());
        assert_eq!(plan_to_json(&back), json);
    }

    #[test]
    fn plan_load_rejects_tampered_wiring() {
        let g = demo_graph();
        let plan = plan_for_scenario(&g, &CapabilitySet::standard(), Scenario::FullOffload).unwrap();
        let json = plan_to_json(&plan);
        // Claim a different output list for the first subgraph.
        let tampered = json.replace("\"outputs\": [5]", "\"outputs\": [4]");
        if tampered != json {
            assert!(plan_from_json(&tampered).is_err());
        }
        // Drop a node from the grouping: rewrite may still succeed, but the
        // stored wiring will then disagree.
        let v: Json = serde_json::from_str(&json).unwrap();
        let nodes = v["subgraphs"][0]["nodes"].as_array().unwrap().clone();
        if nodes.len() > 1 {
            let victim = nodes.last().unwrap().clone();
            let json2 = json.replace(&format!(", {victim}]"), "]");
            assert!(plan_from_json(&json2).is_err());
        }
    }

    #[test]
    fn caps_round_trip() {
        let caps = CapabilitySet::standard();
        let json = caps_to_json(&caps);
        let back = caps_from_json(&json).unwrap();
        assert_eq!(caps, back);
        let caps = CapabilitySet::new(
            [OperatorKind::RegexExtract],
            128,
            Some(3),
        );
        let back = caps_from_json(&caps_to_json(&caps)).unwrap();
        assert_eq!(caps, back);
    }

    #[test]
    fn profile_round_trip() {
        let p = Profile {
            total_s: 1.25,
            bytes: 4096,
            threads: 4,
            per_node: BTreeMap::from([(0, 0.5), (1, 0.75)]),
            per_kind: BTreeMap::from([("RegexExtract".to_owned(), 1.25)]),
        };
        let back = profile_from_json(&profile_to_json(&p)).unwrap();
        assert_eq!(back.total_s, p.total_s);
        assert_eq!(back.bytes, p.bytes);
        assert_eq!(back.threads, p.threads);
        assert_eq!(back.per_node, p.per_node);
        assert_eq!(back.per_kind, p.per_kind);
    }

    #[test]
    fn annotation_lines_are_sorted_and_stable() {
        use spanforge_core::table::{ColumnType, Schema};
        let schema = Arc::new(Schema::new(vec![
            ("match".into(), ColumnType::Span),
            ("label".into(), ColumnType::Text),
        ]));
        let set = AnnotationSet::from_tuples(
            schema,
            vec![
                vec![Value::Span(Span::new(4, 9)), Value::Text("b".into())],
                vec![Value::Span(Span::new(0, 2)), Value::Text("a\"quote".into())],
            ],
        );
        let mut views = BTreeMap::new();
        views.insert(("d2".to_owned(), "V".to_owned()), set.clone());
        views.insert(("d1".to_owned(), "V".to_owned()), set);
        let out = annotations_to_jsonl(&views);
        let expected = concat!(
            "{\"doc\": \"d1\", \"view\": \"V\", \"cols\": [[0, 2], \"a\\\"quote\"]}\n",
            "{\"doc\": \"d1\", \"view\": \"V\", \"cols\": [[4, 9], \"b\"]}\n",
            "{\"doc\": \"d2\", \"view\": \"V\", \"cols\": [[0, 2], \"a\\\"quote\"]}\n",
            "{\"doc\": \"d2\", \"view\": \"V\", \"cols\": [[4, 9], \"b\"]}\n",
        );
        assert_eq!(out, expected);
    }

    #[test]
    fn predicate_json_round_trip() {
        let p = Predicate::Or(
            Box::new(Predicate::Follows {
                left: "a".into(),
                right: "b".into(),
                min: -3,
                max: 17,
            }),
            Box::new(Predicate::And(
                Box::new(Predicate::Contains { outer: "a".into(), inner: "b".into() }),
                Box::new(Predicate::Not(Box::new(Predicate::SpanLengthGreaterThan {
                    column: "a".into(),
                    length: 4,
                }))),
            )),
        );
        let mut s = String::new();
        predicate_json(&p, &mut s);
        let v: Json = serde_json::from_str(&s).unwrap();
        assert_eq!(predicate_from_json(&v).unwrap(), p);
    }
}
