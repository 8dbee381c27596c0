//! Serialization property: for randomly generated well-formed operator
//! graphs, graph -> JSON -> graph -> JSON is lossless, byte-stable, and
//! preserves structure exactly.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spanforge::formats::{aog_from_json, aog_to_json};
use spanforge_core::graph::{
    ConsolidatePolicy, DictParams, NodeId, OpParams, OperatorGraph, OperatorNode,
};
use spanforge_core::predicate::Predicate;

fn random_predicate(rng: &mut ChaCha8Rng, depth: usize) -> Predicate {
    let leaf = |rng: &mut ChaCha8Rng| {
        let cols = ["match", "match_2", "span", "a"];
        let col = |rng: &mut ChaCha8Rng| (*cols.choose(rng).unwrap()).to_string();
        match rng.gen_range(0..4) {
            0 => Predicate::Follows {
                left: col(rng),
                right: col(rng),
                min: rng.gen_range(-20..0),
                max: rng.gen_range(0..50),
            },
            1 => Predicate::Contains { outer: col(rng), inner: col(rng) },
            2 => Predicate::Overlaps { a: col(rng), b: col(rng) },
            _ => Predicate::SpanLengthGreaterThan { column: col(rng), length: rng.gen_range(0..9) },
        }
    };
    if depth == 0 || rng.gen_bool(0.6) {
        return leaf(rng);
    }
    match rng.gen_range(0..3) {
        0 => Predicate::And(
            Box::new(random_predicate(rng, depth - 1)),
            Box::new(random_predicate(rng, depth - 1)),
        ),
        1 => Predicate::Or(
            Box::new(random_predicate(rng, depth - 1)),
            Box::new(random_predicate(rng, depth - 1)),
        ),
        _ => Predicate::Not(Box::new(random_predicate(rng, depth - 1))),
    }
}

/// A structurally valid graph of at most 12 nodes: one DocSource,
/// extraction off the source, relational nodes over earlier tuple
/// producers, sinks on the loose ends. Oversized draws are rejected.
fn random_graph(rng: &mut ChaCha8Rng) -> OperatorGraph {
    loop {
        let g = try_random_graph(rng);
        if g.node_count() <= 12 {
            return g;
        }
    }
}

fn try_random_graph(rng: &mut ChaCha8Rng) -> OperatorGraph {
    let mut g = OperatorGraph::new();
    g.add_node(OperatorNode::new(0, OpParams::DocSource)).unwrap();
    let mut producers: Vec<NodeId> = Vec::new();
    let mut next = 1u32;

    let patterns = ["[A-Z][a-z]+", "[0-9]+", "a(b|c)*", "x{1,3}y?", "[^ ]+"];
    let n_extract = rng.gen_range(1..4);
    for _ in 0..n_extract {
        let params = if rng.gen_bool(0.5) {
            OpParams::RegexExtract { pattern: (*patterns.choose(rng).unwrap()).to_string() }
        } else if rng.gen_bool(0.2) {
            OpParams::DictionaryExtract {
                dict: DictParams::File { path: format!("dict_{next}.txt") },
            }
        } else {
            OpParams::DictionaryExtract {
                dict: DictParams::Inline {
                    name: format!("d{next}"),
                    entries: vec!["york".into(), "re\"no\nx".into(), "émi".into()],
                },
            }
        };
        g.add_node(OperatorNode::new(next, params)).unwrap();
        g.add_edge(0, next, 0).unwrap();
        producers.push(next);
        next += 1;
    }

    let n_relational = rng.gen_range(0..5);
    for _ in 0..n_relational {
        if next as usize >= 10 {
            break;
        }
        let pick = |rng: &mut ChaCha8Rng, producers: &[NodeId]| *producers.choose(rng).unwrap();
        let params = match rng.gen_range(0..5) {
            0 => OpParams::Select { predicate: random_predicate(rng, 2) },
            1 => OpParams::Project { columns: vec!["match".into()] },
            2 => OpParams::Join { predicate: random_predicate(rng, 1) },
            3 => OpParams::Union,
            _ => OpParams::Consolidate { policy: ConsolidatePolicy::ContainedWithin },
        };
        let inputs = match &params {
            OpParams::Join { .. } => 2,
            OpParams::Union => rng.gen_range(2..4),
            _ => 1,
        };
        g.add_node(OperatorNode::new(next, params)).unwrap();
        for slot in 0..inputs {
            g.add_edge(pick(rng, &producers), next, slot).unwrap();
        }
        producers.push(next);
        next += 1;
    }

    // Terminate every producer nothing consumes, so the graph has sinks.
    let consumed: Vec<NodeId> = g.edges().iter().map(|e| e.producer).collect();
    let open: Vec<NodeId> =
        producers.iter().copied().filter(|p| !consumed.contains(p)).collect();
    for p in open {
        g.add_node(OperatorNode::new(next, OpParams::Sink { view: format!("V{p}") })).unwrap();
        g.add_edge(p, next, 0).unwrap();
        next += 1;
    }
    g
}

#[test]
fn aog_json_round_trip_is_lossless_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for case in 0..1000 {
        let graph = random_graph(&mut rng);
        let json = aog_to_json(&graph);
        let back = aog_from_json(&json).unwrap_or_else(|e| panic!("case {case}: {e:#}"));

        let ids: Vec<NodeId> = graph.node_ids().collect();
        assert_eq!(back.node_ids().collect::<Vec<_>>(), ids, "case {case}");
        for id in ids {
            assert_eq!(back.node(id).unwrap().params, graph.node(id).unwrap().params,
                "case {case} node {id}");
        }
        // The writer canonicalizes edge order, so compare as sorted sets.
        let sorted = |g: &OperatorGraph| {
            let mut e: Vec<_> = g.edges().to_vec();
            e.sort_by_key(|e| (e.producer, e.consumer, e.slot));
            e
        };
        assert_eq!(sorted(&back), sorted(&graph), "case {case}");
        assert_eq!(aog_to_json(&back), json, "case {case}: reserialization drifted");
    }
}
