//! Capability model, convex subgraph selection and the partition rewrite.
//!
//! A subgraph handed to the accelerator must be convex: no path between two
//! members may leave the set, otherwise the host and the pipeline would
//! have to ping-pong intermediate results mid-document. Selection works on
//! ancestor/descendant bitsets; the rewrite replaces each offloaded set
//! with one `SubgraphCall` node per boundary output stream.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{GraphError, PartitionError};
use crate::graph::{
    DictParams, Edge, NodeId, OpParams, OperatorGraph, OperatorKind, OperatorNode, SubgraphId,
};
use crate::regex::CompiledRegex;

/// DFA state budget a pipeline regex stage may use. Much tighter than the
/// software budget: state vectors cost on-chip memory per lane.
pub const ACCEL_REGEX_STATE_BUDGET: usize = 256;

/// Which operator kinds the accelerator build supports, plus per-stage
/// resource limits. `DocSource`, `Sink` and `SubgraphCall` are never
/// accelerable and are filtered out on construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CapabilitySet {
    kinds: BTreeSet<OperatorKind>,
    pub regex_state_budget: usize,
    pub max_subgraph_nodes: Option<usize>,
}

impl CapabilitySet {
    pub fn new(
        kinds: impl IntoIterator<Item = OperatorKind>,
        regex_state_budget: usize,
        max_subgraph_nodes: Option<usize>,
    ) -> Self {
        let kinds = kinds
            .into_iter()
            .filter(|k| k.is_extraction() || k.is_relational())
            .collect();
        CapabilitySet { kinds, regex_state_budget, max_subgraph_nodes }
    }

    /// The standard build: extraction plus streaming relational stages.
    /// Consolidate stays on the host; containment is a whole-stream
    /// operation and its buffering does not fit the per-stage window model.
    pub fn standard() -> Self {
        CapabilitySet::new(
            [
                OperatorKind::RegexExtract,
                OperatorKind::DictionaryExtract,
                OperatorKind::Select,
                OperatorKind::Project,
                OperatorKind::Join,
                OperatorKind::Union,
            ],
            ACCEL_REGEX_STATE_BUDGET,
            None,
        )
    }

    /// A build with only the two extraction stage types.
    pub fn extraction_only() -> Self {
        CapabilitySet::new(
            [OperatorKind::RegexExtract, OperatorKind::DictionaryExtract],
            ACCEL_REGEX_STATE_BUDGET,
            None,
        )
    }

    pub fn supports(&self, kind: OperatorKind) -> bool {
        self.kinds.contains(&kind)
    }

    pub fn kinds(&self) -> impl Iterator<Item = OperatorKind> + '_ {
        self.kinds.iter().copied()
    }

    /// Whether this node can run as a pipeline stage: supported kind, and
    /// its parameters fit the stage's resource limits.
    pub fn accelerable(&self, node: &OperatorNode) -> bool {
        if !self.supports(node.kind()) {
            return false;
        }
        match &node.params {
            OpParams::RegexExtract { pattern } => {
                CompiledRegex::compile(pattern, self.regex_state_budget).is_ok()
            }
            // File-backed dictionaries must be resolved before planning.
            OpParams::DictionaryExtract { dict } => matches!(dict, DictParams::Inline { .. }),
            _ => true,
        }
    }
}

impl Default for CapabilitySet {
    fn default() -> Self {
        CapabilitySet::standard()
    }
}

/// Node ids the capability set can run, in ascending order.
pub fn classify(graph: &OperatorGraph, caps: &CapabilitySet) -> BTreeSet<NodeId> {
    graph.nodes().filter(|n| caps.accelerable(n)).map(|n| n.id).collect()
}

#[derive(Clone, PartialEq, Eq)]
struct Bits {
    words: Vec<u64>,
}

impl Bits {
    fn new(len: usize) -> Self {
        Bits { words: alloc::vec![0; (len + 63) / 64] }
    }

    fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    fn or_assign(&mut self, other: &Bits) {
        for (w, o) in self.words.iter_mut().zip(&other.words) {
            *w |= o;
        }
    }

    /// Lowest index in `self & other & !mask`, if any.
    fn first_in_and_not(&self, other: &Bits, mask: &Bits) -> Option<usize> {
        for (i, ((a, b), m)) in self.words.iter().zip(&other.words).zip(&mask.words).enumerate() {
            let w = a & b & !m;
            if w != 0 {
                return Some(i * 64 + w.trailing_zeros() as usize);
            }
        }
        None
    }
}

/// Strict ancestor and descendant sets for every node, as bitsets over a
/// dense index. Built once per graph, queried by every convexity check.
pub struct Connectivity {
    ids: Vec<NodeId>,
    index: BTreeMap<NodeId, usize>,
    anc: Vec<Bits>,
    desc: Vec<Bits>,
}

impl Connectivity {
    pub fn new(graph: &OperatorGraph) -> Result<Self, GraphError> {
        let topo = graph.topo_order()?;
        let ids: Vec<NodeId> = graph.node_ids().collect();
        let index: BTreeMap<NodeId, usize> =
            ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let n = ids.len();
        let mut parents: Vec<Vec<usize>> = alloc::vec![Vec::new(); n];
        let mut children: Vec<Vec<usize>> = alloc::vec![Vec::new(); n];
        for e in graph.edges() {
            let (p, c) = (index[&e.producer], index[&e.consumer]);
            parents[c].push(p);
            children[p].push(c);
        }
        let mut anc = alloc::vec![Bits::new(n); n];
        for &id in &topo {
            let i = index[&id];
            for pi in 0..parents[i].len() {
                let p = parents[i][pi];
                let parent_bits = anc[p].clone();
                anc[i].or_assign(&parent_bits);
                anc[i].set(p);
            }
        }
        let mut desc = alloc::vec![Bits::new(n); n];
        for &id in topo.iter().rev() {
            let i = index[&id];
            for ci in 0..children[i].len() {
                let c = children[i][ci];
                let child_bits = desc[c].clone();
                desc[i].or_assign(&child_bits);
                desc[i].set(c);
            }
        }
        Ok(Connectivity { ids, index, anc, desc })
    }

    fn member_bits(&self, set: &BTreeSet<NodeId>) -> Bits {
        let mut bits = Bits::new(self.ids.len());
        for id in set {
            bits.set(self.index[id]);
        }
        bits
    }

    /// A node outside `set` that lies on a path between two members, i.e.
    /// proof the set is not convex.
    pub fn convexity_witness(&self, set: &BTreeSet<NodeId>) -> Option<NodeId> {
        let members = self.member_bits(set);
        let mut desc_all = Bits::new(self.ids.len());
        let mut anc_all = Bits::new(self.ids.len());
        for id in set {
            desc_all.or_assign(&self.desc[self.index[id]]);
            anc_all.or_assign(&self.anc[self.index[id]]);
        }
        desc_all.first_in_and_not(&anc_all, &members).map(|i| self.ids[i])
    }

    pub fn is_convex(&self, set: &BTreeSet<NodeId>) -> bool {
        self.convexity_witness(set).is_none()
    }

    /// The smallest convex superset: members plus every node reachable from
    /// one member and reaching another.
    pub fn convex_closure(&self, set: &BTreeSet<NodeId>) -> BTreeSet<NodeId> {
        let mut desc_all = Bits::new(self.ids.len());
        let mut anc_all = Bits::new(self.ids.len());
        for id in set {
            desc_all.or_assign(&self.desc[self.index[id]]);
            anc_all.or_assign(&self.anc[self.index[id]]);
        }
        let mut out = set.clone();
        for (i, id) in self.ids.iter().enumerate() {
            if desc_all.get(i) && anc_all.get(i) {
                out.insert(*id);
            }
        }
        out
    }
}

/// Greedy cover of the flagged nodes by disjoint convex sets.
///
/// Seeds are taken in topological order, extraction nodes first; each seed
/// grows by repeatedly sweeping the remaining flagged nodes in topological
/// order and adding any node that keeps the set convex, until a full sweep
/// adds nothing. Sets claim their nodes first come first served, so later
/// seeds grow around earlier sets. Singletons are always convex, so every
/// flagged node ends up in exactly one set.
pub fn maximal_convex_subgraphs(
    graph: &OperatorGraph,
    conn: &Connectivity,
    flagged: &BTreeSet<NodeId>,
    max_nodes: Option<usize>,
) -> Vec<BTreeSet<NodeId>> {
    let topo = match graph.topo_order() {
        Ok(t) => t,
        Err(_) => return Vec::new(),
    };
    let is_extraction =
        |id: &NodeId| graph.kind(*id).map(|k| k.is_extraction()).unwrap_or(false);
    let mut seeds: Vec<NodeId> =
        topo.iter().copied().filter(|id| flagged.contains(id) && is_extraction(id)).collect();
    seeds.extend(topo.iter().copied().filter(|id| flagged.contains(id) && !is_extraction(id)));

    let mut assigned: BTreeSet<NodeId> = BTreeSet::new();
    let mut out = Vec::new();
    for seed in seeds {
        if assigned.contains(&seed) {
            continue;
        }
        let mut set = BTreeSet::from([seed]);
        loop {
            let mut grew = false;
            for &cand in &topo {
                if max_nodes.is_some_and(|m| set.len() >= m) {
                    break;
                }
                if !flagged.contains(&cand) || assigned.contains(&cand) || set.contains(&cand) {
                    continue;
                }
                set.insert(cand);
                if conn.is_convex(&set) {
                    grew = true;
                } else {
                    set.remove(&cand);
                }
            }
            if !grew {
                break;
            }
        }
        assigned.extend(set.iter().copied());
        out.push(set);
    }
    out
}

/// Offload plan shapes, from most conservative to most aggressive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scenario {
    /// Each extraction operator becomes its own single-node subgraph.
    ExtractionOnly,
    /// All extraction operators fused into one subgraph (their convex
    /// closure), dispatched once per document.
    FusedExtraction,
    /// Greedy maximal cover of everything the capability set can run.
    FullOffload,
}

impl Scenario {
    pub const ALL: [Scenario; 3] =
        [Scenario::ExtractionOnly, Scenario::FusedExtraction, Scenario::FullOffload];

    pub fn number(&self) -> u8 {
        match self {
            Scenario::ExtractionOnly => 1,
            Scenario::FusedExtraction => 2,
            Scenario::FullOffload => 3,
        }
    }

    pub fn from_number(n: u8) -> Option<Scenario> {
        Scenario::ALL.iter().copied().find(|s| s.number() == n)
    }
}

/// The node sets a scenario offloads. May be empty when the capability set
/// cannot run anything in the graph.
pub fn scenario_sets(
    graph: &OperatorGraph,
    conn: &Connectivity,
    caps: &CapabilitySet,
    scenario: Scenario,
) -> Vec<BTreeSet<NodeId>> {
    let flags = classify(graph, caps);
    let ext: BTreeSet<NodeId> = flags
        .iter()
        .copied()
        .filter(|id| graph.kind(*id).map(|k| k.is_extraction()).unwrap_or(false))
        .collect();
    match scenario {
        Scenario::ExtractionOnly => ext.iter().map(|&id| BTreeSet::from([id])).collect(),
        Scenario::FusedExtraction => {
            if ext.is_empty() {
                return Vec::new();
            }
            let closure = conn.convex_closure(&ext);
            let fits = closure.is_subset(&flags)
                && caps.max_subgraph_nodes.is_none_or(|m| closure.len() <= m);
            if fits {
                return alloc::vec![closure];
            }
            // Extraction nodes have no ancestors besides the document
            // source, so in practice only the node cap lands here; the
            // subset check guards any future kind with tuple inputs. Fall
            // back to the largest set the full cover would offload.
            let all = maximal_convex_subgraphs(graph, conn, &flags, caps.max_subgraph_nodes);
            match all.into_iter().max_by_key(|s| s.len()) {
                Some(best) => alloc::vec![best],
                None => Vec::new(),
            }
        }
        Scenario::FullOffload => {
            maximal_convex_subgraphs(graph, conn, &flags, caps.max_subgraph_nodes)
        }
    }
}

/// Where a node of the original graph runs after partitioning.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Host,
    Accelerator(SubgraphId),
}

/// One offloaded subgraph, in original-graph coordinates.
#[derive(Clone, Debug)]
pub struct SubgraphDef {
    pub id: SubgraphId,
    /// Members, ascending.
    pub nodes: Vec<NodeId>,
    /// Edges with both endpoints inside.
    pub edges: Vec<Edge>,
    /// Edges from an outside producer to an inside consumer.
    pub inputs: Vec<Edge>,
    /// Members with at least one outside consumer, ascending. Each gets a
    /// `SubgraphCall` node; `call_nodes[i]` carries `outputs[i]`'s stream.
    pub outputs: Vec<NodeId>,
    pub call_nodes: Vec<NodeId>,
    /// Contains an extraction member, so the dispatcher streams the
    /// document text in addition to any tuple inputs.
    pub needs_doc: bool,
    /// Distinct outside producers feeding tuples in, ascending. Call node
    /// slots follow this order, after the document edge when present.
    pub tuple_inputs: Vec<NodeId>,
}

/// A partitioned query: the original graph, the host-side supergraph with
/// `SubgraphCall` placeholders, and the offloaded subgraph definitions.
#[derive(Clone, Debug)]
pub struct PartitionPlan {
    pub graph: OperatorGraph,
    pub supergraph: OperatorGraph,
    pub subgraphs: Vec<SubgraphDef>,
    pub location: BTreeMap<NodeId, Location>,
}

impl PartitionPlan {
    pub fn subgraph(&self, id: SubgraphId) -> Option<&SubgraphDef> {
        self.subgraphs.iter().find(|s| s.id == id)
    }

    /// Which (subgraph, original output node) stream a call node carries.
    pub fn call_stream(&self, call: NodeId) -> Option<(SubgraphId, NodeId)> {
        for sg in &self.subgraphs {
            if let Some(i) = sg.call_nodes.iter().position(|&c| c == call) {
                return Some((sg.id, sg.outputs[i]));
            }
        }
        None
    }
}

/// Split `graph` into a supergraph plus the given offloaded sets.
///
/// Checks structure only (membership kinds, disjointness, convexity);
/// whether a capability set can actually run the members is the planner's
/// concern. Keeps original node ids; call nodes get ids past the maximum.
pub fn rewrite(
    graph: &OperatorGraph,
    sets: &[BTreeSet<NodeId>],
) -> Result<PartitionPlan, PartitionError> {
    let graph = crate::schema::infer_schemas(graph.clone())?;
    let conn = Connectivity::new(&graph)?;
    let doc_source = graph.doc_source().ok_or(PartitionError::Graph(GraphError::Cycle))?;

    let mut owner: BTreeMap<NodeId, usize> = BTreeMap::new();
    for (k, set) in sets.iter().enumerate() {
        for &id in set {
            let kind = graph.kind(id).ok_or(PartitionError::UnknownNode(id))?;
            if !(kind.is_extraction() || kind.is_relational()) {
                return Err(PartitionError::NotAccelerable { node: id });
            }
            if owner.insert(id, k).is_some() {
                return Err(PartitionError::Overlap { node: id });
            }
        }
        if let Some(witness) = conn.convexity_witness(set) {
            return Err(PartitionError::NotConvex { witness });
        }
    }

    // Subgraph definitions and call node ids, assigned in subgraph order
    // then ascending output node order.
    let mut next_id = graph.max_node_id().unwrap_or(0) + 1;
    let mut subgraphs = Vec::with_capacity(sets.len());
    for (k, set) in sets.iter().enumerate() {
        let mut edges: Vec<Edge> = Vec::new();
        let mut inputs: Vec<Edge> = Vec::new();
        let mut outputs: BTreeSet<NodeId> = BTreeSet::new();
        for e in graph.edges() {
            match (set.contains(&e.producer), set.contains(&e.consumer)) {
                (true, true) => edges.push(*e),
                (false, true) => inputs.push(*e),
                (true, false) => {
                    outputs.insert(e.producer);
                }
                (false, false) => {}
            }
        }
        let sort_key = |e: &Edge| (e.consumer, e.slot, e.producer);
        edges.sort_by_key(sort_key);
        inputs.sort_by_key(sort_key);
        let needs_doc = set.iter().any(|&id| graph.kind(id).unwrap().is_extraction());
        let tuple_inputs: BTreeSet<NodeId> = inputs
            .iter()
            .filter(|e| {
                !(e.producer == doc_source && graph.kind(e.consumer).unwrap().is_extraction())
            })
            .map(|e| e.producer)
            .collect();
        let outputs: Vec<NodeId> = outputs.into_iter().collect();
        let call_nodes: Vec<NodeId> = outputs
            .iter()
            .map(|_| {
                let id = next_id;
                next_id += 1;
                id
            })
            .collect();
        subgraphs.push(SubgraphDef {
            id: k as SubgraphId,
            nodes: set.iter().copied().collect(),
            edges,
            inputs,
            outputs,
            call_nodes,
            needs_doc,
            tuple_inputs: tuple_inputs.into_iter().collect(),
        });
    }

    let call_for = |id: NodeId| -> Option<NodeId> {
        owner.get(&id).map(|&k| {
            let sg = &subgraphs[k];
            let i = sg.outputs.binary_search(&id).expect("outside consumer implies output");
            sg.call_nodes[i]
        })
    };

    let mut supergraph = OperatorGraph::new();
    for node in graph.nodes() {
        if !owner.contains_key(&node.id) {
            supergraph.add_node(node.clone())?;
        }
    }
    for sg in &subgraphs {
        for (i, &out) in sg.outputs.iter().enumerate() {
            let mut call = OperatorNode::new(
                sg.call_nodes[i],
                OpParams::SubgraphCall { subgraph: sg.id },
            );
            call.schema = Some(Arc::clone(graph.node(out).unwrap().schema.as_ref().unwrap()));
            supergraph.add_node(call)?;
        }
    }
    for e in graph.edges() {
        match (owner.contains_key(&e.producer), owner.contains_key(&e.consumer)) {
            (false, false) => supergraph.add_edge(e.producer, e.consumer, e.slot)?,
            (true, false) => {
                supergraph.add_edge(call_for(e.producer).unwrap(), e.consumer, e.slot)?
            }
            // Inside edges and edges into a subgraph become call wiring.
            _ => {}
        }
    }
    for sg in &subgraphs {
        let mut producers: Vec<NodeId> = Vec::new();
        if sg.needs_doc {
            producers.push(doc_source);
        }
        producers.extend(&sg.tuple_inputs);
        for &call in &sg.call_nodes {
            for (slot, &p) in producers.iter().enumerate() {
                let actual = call_for(p).unwrap_or(p);
                supergraph.add_edge(actual, call, slot as u32)?;
            }
        }
    }

    let mut location: BTreeMap<NodeId, Location> = BTreeMap::new();
    for id in graph.node_ids() {
        location.insert(
            id,
            match owner.get(&id) {
                Some(&k) => Location::Accelerator(k as SubgraphId),
                None => Location::Host,
            },
        );
    }

    debug_assert!(
        supergraph.validate().is_clean(),
        "{:?}",
        supergraph.validate().findings
    );
    Ok(PartitionPlan { graph, supergraph, subgraphs, location })
}

/// Partition `graph` for one scenario under the given capability set.
pub fn plan_for_scenario(
    graph: &OperatorGraph,
    caps: &CapabilitySet,
    scenario: Scenario,
) -> Result<PartitionPlan, PartitionError> {
    let graph = crate::schema::infer_schemas(graph.clone())?;
    let conn = Connectivity::new(&graph)?;
    let sets = scenario_sets(&graph, &conn, caps, scenario);
    rewrite(&graph, &sets)
}

pub fn scenario_plans(
    graph: &OperatorGraph,
    caps: &CapabilitySet,
) -> Result<[PartitionPlan; 3], PartitionError> {
    Ok([
        plan_for_scenario(graph, caps, Scenario::ExtractionOnly)?,
        plan_for_scenario(graph, caps, Scenario::FusedExtraction)?,
        plan_for_scenario(graph, caps, Scenario::FullOffload)?,
    ])
}
