//! Wall-clock profiling of all-software graph execution.
//!
//! Timing wraps each operator evaluation separately, so the per-node
//! breakdown can be folded into "what fraction of the run would this
//! partitioning remove from the host". Workers pull documents from a shared
//! cursor and keep thread-local accumulators; merging happens once at the
//! end, so the measurement overhead is one `Instant` pair per node per
//! document.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use anyhow::{anyhow, Result};

use spanforge_core::document::DocText;
use spanforge_core::estimator::relative_distribution;
use spanforge_core::graph::{NodeId, OperatorGraph};
use spanforge_core::operators::{GraphRun, PreparedGraph};

/// Aggregate timing for one profiled run.
#[derive(Clone, Debug)]
pub struct Profile {
    /// Wall-clock seconds for the whole run.
    pub total_s: f64,
    /// Total document payload processed.
    pub bytes: u64,
    pub threads: usize,
    /// Seconds spent inside each operator, summed over all threads.
    pub per_node: BTreeMap<NodeId, f64>,
    /// The same time keyed by operator kind name.
    pub per_kind: BTreeMap<String, f64>,
}

impl Profile {
    /// Fraction of attributed time per node. `None` when nothing was
    /// measured.
    pub fn node_fractions(&self) -> Option<BTreeMap<NodeId, f64>> {
        relative_distribution(&self.per_node)
    }

    pub fn kind_fractions(&self) -> Option<BTreeMap<String, f64>> {
        relative_distribution(&self.per_kind)
    }

    /// Measured software throughput in bytes per second.
    pub fn throughput(&self) -> f64 {
        self.bytes as f64 / self.total_s
    }
}

/// Run `graph` over the corpus with `threads` workers, timing every operator.
pub fn profile_graph(graph: &OperatorGraph, corpus: &[DocText], threads: usize) -> Result<Profile> {
    if threads == 0 {
        return Err(anyhow!("profiling needs at least one thread"));
    }
    let prepared = PreparedGraph::new(graph.clone()).map_err(|e| anyhow!("prepare: {e}"))?;
    let cursor = AtomicUsize::new(0);
    let start = Instant::now();

    let worker = |acc: &mut BTreeMap<NodeId, f64>| -> Result<()> {
        loop {
            let i = cursor.fetch_add(1, Ordering::Relaxed);
            let Some(doc) = corpus.get(i) else { return Ok(()) };
            let mut run = GraphRun::new(&prepared, doc);
            for &id in prepared.topo() {
                let t0 = Instant::now();
                run.eval_node(id).map_err(|e| anyhow!("doc {}: {e}", doc.id))?;
                *acc.entry(id).or_insert(0.0) += t0.elapsed().as_secs_f64();
            }
        }
    };

    let mut accs: Vec<BTreeMap<NodeId, f64>> = Vec::new();
    if threads == 1 {
        let mut acc = BTreeMap::new();
        worker(&mut acc)?;
        accs.push(acc);
    } else {
        let results = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|_| {
                    scope.spawn(|| {
                        let mut acc = BTreeMap::new();
                        worker(&mut acc).map(|()| acc)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("profiler worker panicked"))
                .collect::<Vec<_>>()
        });
        for r in results {
            accs.push(r?);
        }
    }
    let total_s = start.elapsed().as_secs_f64();

    let mut per_node: BTreeMap<NodeId, f64> = BTreeMap::new();
    for acc in accs {
        for (id, s) in acc {
            *per_node.entry(id).or_insert(0.0) += s;
        }
    }
    let mut per_kind: BTreeMap<String, f64> = BTreeMap::new();
    for (&id, &s) in &per_node {
        let kind = prepared.graph().kind(id).expect("profiled node exists");
        *per_kind.entry(kind.name().to_owned()).or_insert(0.0) += s;
    }
    let bytes = corpus.iter().map(|d| d.bytes as u64).sum();
    Ok(Profile { total_s, bytes, threads, per_node, per_kind })
}

#[cfg(test)]
mod tests {
    use super::*;
    use spanforge_core::graph::{OpParams, OperatorNode};

    fn tiny_graph() -> OperatorGraph {
        let mut g = OperatorGraph::new();
        g.add_node(OperatorNode::new(0, OpParams::DocSource)).unwrap();
        g.add_node(OperatorNode::new(1, OpParams::RegexExtract { pattern: "[a-z]+".into() }))
            .unwrap();
        g.add_node(OperatorNode::new(2, OpParams::Sink { view: "V".into() })).unwrap();
        g.add_edge(0, 1, 0).unwrap();
        g.add_edge(1, 2, 0).unwrap();
        g
    }

    fn tiny_corpus() -> Vec<DocText> {
        (0..32).map(|i| DocText::new(format!("d{i:03}"), "some words here")).collect()
    }

    #[test]
    fn fractions_sum_to_one_and_cover_all_nodes() {
        let p = profile_graph(&tiny_graph(), &tiny_corpus(), 1).unwrap();
        assert_eq!(p.per_node.len(), 3);
        let fr = p.node_fractions().unwrap();
        let total: f64 = fr.values().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(p.total_s > 0.0);
        assert_eq!(p.bytes, 32 * 15);
    }

    #[test]
    fn multi_threaded_profile_accounts_every_document() {
        let p = profile_graph(&tiny_graph(), &tiny_corpus(), 4).unwrap();
        assert_eq!(p.threads, 4);
        assert_eq!(p.bytes, 32 * 15);
        assert!(p.per_kind.contains_key("RegexExtract"));
    }
}
