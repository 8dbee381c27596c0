//! Acceptance gate. Each criterion below exercises one end-to-end guarantee
//! of the system and prints a single PASS/FAIL line; the process exits
//! nonzero if any criterion fails. Runs without the libtest harness so the
//! lines are always visible.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use anyhow::{anyhow, ensure, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spanforge::demo::{compile_query, demo_corpus, queries};
use spanforge::dispatch::{run_plan, run_software, DispatchConfig, FlushReason};
use spanforge::estimate::{scenario_rows, PackageShape};
use spanforge::formats::annotations_to_jsonl;
use spanforge::profiler::profile_graph;
use spanforge_core::accel::{CostModel, Pipeline, PipelineConfig};
use spanforge_core::document::DocText;
use spanforge_core::estimator::{estimate_throughput, EstimateInput};
use spanforge_core::graph::{
    ConsolidatePolicy, DictParams, NodeId, OpParams, OperatorGraph, OperatorNode,
};
use spanforge_core::operators::{GraphRun, PreparedGraph};
use spanforge_core::partition::{
    maximal_convex_subgraphs, plan_for_scenario, CapabilitySet, Connectivity, Scenario,
};
use spanforge_core::predicate::Predicate;
use spanforge_core::table::AnnotationSet;

fn main() {
    let criteria: [(&str, fn() -> Result<String>); 8] = [
        ("oracle equivalence across offload scenarios", c1_oracle_equivalence),
        ("combined-throughput formula and bound", c2_estimator),
        ("package-size throughput model points", c3_model_points),
        ("projected speedups in the published range", c4_projections),
        ("greedy partitioner vs brute-force oracle", c5_partitioner),
        ("dispatch batching invariants under stress", c6_dispatch),
        ("streaming single-pass and sortedness", c7_streaming),
        ("fixture cost profiles match their design", c8_profiles),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        match run() {
            Ok(detail) => {
                println!("PASS {} {} ({:.1}s): {}", i + 1, name, start.elapsed().as_secs_f64(), detail);
            }
            Err(e) => {
                failed += 1;
                println!("FAIL {} {} ({:.1}s): {e:#}", i + 1, name, start.elapsed().as_secs_f64());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

/// 1. Every demo query over a 1,000-document corpus produces byte-identical
/// annotation output under all three offload scenarios and the software
/// reference.
fn c1_oracle_equivalence() -> Result<String> {
    let mut runs = 0;
    for q in &queries() {
        let graph = compile_query(q)?;
        let corpus = demo_corpus(q, 1000, 256);
        let want = annotations_to_jsonl(&run_software(&graph, &corpus)?);
        for scenario in Scenario::ALL {
            let plan = plan_for_scenario(&graph, &CapabilitySet::standard(), scenario)?;
            let report = run_plan(&plan, &corpus, &DispatchConfig::default())?;
            ensure!(
                annotations_to_jsonl(&report.views) == want,
                "{} diverged under scenario {}",
                q.name,
                scenario.number()
            );
            runs += 1;
        }
    }
    Ok(format!("{runs} offloaded runs byte-identical to the software reference"))
}

/// 2. The combined-throughput formula hits its closed-form point exactly and
/// never exceeds either of its own limits.
fn c2_estimator() -> Result<String> {
    let exact = estimate_throughput(EstimateInput { tp_sw: 10e6, tp_hw: 500e6, rt_sw: 0.18 })?;
    ensure!(exact == 50e6, "closed-form point: got {exact}");

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..100_000 {
        let tp_sw = 10f64.powf(rng.gen_range(3.0..10.0));
        let tp_hw = 10f64.powf(rng.gen_range(3.0..10.0));
        let rt_sw = if i % 1000 == 0 { 0.0 } else { rng.gen_range(0.0..=1.0) };
        let est = estimate_throughput(EstimateInput { tp_sw, tp_hw, rt_sw })?;
        let bound = tp_hw.min(tp_sw / rt_sw);
        // One ulp of slack: the bound itself is computed in floats.
        ensure!(
            est <= bound * (1.0 + 1e-12),
            "estimate {est} exceeds min({tp_hw}, {tp_sw}/{rt_sw}) = {bound}"
        );
    }
    Ok("closed-form point exact; bound held on 100000 random inputs".into())
}

/// 3. The package-size model reproduces its calibration points exactly.
fn c3_model_points() -> Result<String> {
    let model = CostModel::calibrated();
    let peak = 500e6;
    for (doc_bytes, want) in [(128.0, peak / 10.0), (256.0, peak / 5.0), (2048.0, peak), (65536.0, peak)] {
        let got = model.model_throughput(8.0, doc_bytes);
        ensure!(got == want, "8 docs of {doc_bytes} B: got {got}, want {want}");
    }
    Ok("peak/10 at 128 B, peak/5 at 256 B, peak from 2 kB up".into())
}

/// 4. Measured profiles plus the model land the headline projections: the
/// extraction-heavy fixture speeds up 8x to 32x under full offload on large
/// documents, and single-node offload barely moves the relational fixture.
fn c4_projections() -> Result<String> {
    let model = CostModel::calibrated();
    let caps = CapabilitySet::standard();
    let shape = PackageShape { docs_per_package: 8.0, avg_doc_bytes: 2048.0 };

    let t1 = &queries()[0];
    let g1 = compile_query(t1)?;
    let p1 = profile_graph(&g1, &demo_corpus(t1, 1000, 2048), 1)?;
    let rows1 = scenario_rows(&g1, &caps, &p1, shape, &model)?;
    let s3 = rows1
        .iter()
        .find(|r| r.scenario == 3)
        .ok_or_else(|| anyhow!("no scenario-3 row for {}", t1.name))?;
    ensure!(s3.rt_sw <= 0.2, "{} residual fraction {:.3} above 0.2", t1.name, s3.rt_sw);
    ensure!(
        (8.0..=32.0).contains(&s3.speedup),
        "{} full-offload speedup {:.2}x outside [8, 32]",
        t1.name,
        s3.speedup
    );

    let t5 = &queries()[4];
    let g5 = compile_query(t5)?;
    let p5 = profile_graph(&g5, &demo_corpus(t5, 1000, 2048), 1)?;
    let rows5 = scenario_rows(&g5, &caps, &p5, shape, &model)?;
    let s1 = rows5
        .iter()
        .find(|r| r.scenario == 1)
        .ok_or_else(|| anyhow!("no scenario-1 row for {}", t5.name))?;
    ensure!(
        s1.speedup < 2.0,
        "{} single-node-offload speedup {:.2}x should stay under 2x",
        t5.name,
        s1.speedup
    );
    Ok(format!(
        "{}: {:.1}x at residual {:.3}; {}: {:.2}x",
        t1.name, s3.speedup, s3.rt_sw, t5.name, s1.speedup
    ))
}

/// 5. On small random DAGs, the greedy cover agrees with a brute-force
/// oracle: sets are disjoint, cover every flagged node, are convex, and
/// cannot absorb any node that was still free when they were grown.
fn c5_partitioner() -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut cases = 0u64;
    for topology in 0..50 {
        let n = rng.gen_range(1..=8usize);
        let graph = random_dag(&mut rng, n);
        let conn = Connectivity::new(&graph)?;
        let reach = reachability(&graph, n);

        for mask in 0u32..(1 << n) {
            let flagged: BTreeSet<NodeId> =
                (0..n as u32).filter(|i| mask & (1 << i) != 0).collect();
            let sets = maximal_convex_subgraphs(&graph, &conn, &flagged, None);
            cases += 1;

            let mut seen: BTreeSet<NodeId> = BTreeSet::new();
            for s in &sets {
                for &id in s {
                    ensure!(seen.insert(id), "topology {topology} mask {mask}: node {id} assigned twice");
                }
            }
            ensure!(
                seen == flagged,
                "topology {topology} mask {mask}: cover {seen:?} != flagged {flagged:?}"
            );

            let mut available = flagged.clone();
            for s in &sets {
                ensure!(
                    oracle_convex(&reach, s),
                    "topology {topology} mask {mask}: {s:?} is not convex"
                );
                for &v in available.iter() {
                    if s.contains(&v) {
                        continue;
                    }
                    let mut bigger = s.clone();
                    bigger.insert(v);
                    ensure!(
                        !oracle_convex(&reach, &bigger),
                        "topology {topology} mask {mask}: {s:?} could still absorb {v}"
                    );
                }
                for id in s {
                    available.remove(id);
                }
            }
        }
    }
    Ok(format!("{cases} topology/flag cases matched the oracle"))
}

/// Random DAG with forward edges only; kinds mixed so the seed ordering
/// (extraction first) is exercised.
fn random_dag(rng: &mut ChaCha8Rng, n: usize) -> OperatorGraph {
    let mut g = OperatorGraph::new();
    for id in 0..n as u32 {
        let params = match rng.gen_range(0..6) {
            0 => OpParams::RegexExtract { pattern: "[a-z]+".into() },
            1 => OpParams::DictionaryExtract {
                dict: DictParams::Inline { name: "d".into(), entries: vec!["x".into()] },
            },
            2 => OpParams::Union,
            3 => OpParams::Consolidate { policy: ConsolidatePolicy::ContainedWithin },
            4 => OpParams::Project { columns: vec!["match".into()] },
            _ => OpParams::Select {
                predicate: Predicate::SpanLengthGreaterThan { column: "match".into(), length: 1 },
            },
        };
        g.add_node(OperatorNode::new(id, params)).unwrap();
    }
    for a in 0..n as u32 {
        for b in (a + 1)..n as u32 {
            if rng.gen_bool(0.3) {
                g.add_edge(a, b, 0).unwrap();
            }
        }
    }
    g
}

/// Transitive reachability computed independently of the partitioner's own
/// ancestor/descendant bitsets.
fn reachability(graph: &OperatorGraph, n: usize) -> Vec<Vec<bool>> {
    let mut reach = vec![vec![false; n]; n];
    for e in graph.edges() {
        reach[e.producer as usize][e.consumer as usize] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    reach
}

/// Convex iff no node outside the set sits on a path between two members.
fn oracle_convex(reach: &[Vec<bool>], set: &BTreeSet<NodeId>) -> bool {
    for &u in set {
        for &v in set {
            for w in 0..reach.len() as u32 {
                if set.contains(&w) {
                    continue;
                }
                if reach[u as usize][w as usize] && reach[w as usize][v as usize] {
                    return false;
                }
            }
        }
    }
    true
}

/// 6. A stress corpus of ten thousand documents with random sizes keeps the
/// dispatcher honest: every request answered exactly once, every size- or
/// count-triggered package at its threshold, and output independent of the
/// worker count.
fn c6_dispatch() -> Result<String> {
    let q = &queries()[0];
    let graph = compile_query(q)?;
    let plan = plan_for_scenario(&graph, &CapabilitySet::standard(), Scenario::FullOffload)?;

    let words = [
        "york", "boston", "Alice", "Walter", "42", "2048", "lorem", "tempor", "stone", "blue",
        "marble", "7",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let corpus: Vec<DocText> = (0..10_000)
        .map(|i| {
            let target = rng.gen_range(16..=4096usize);
            let mut text = String::new();
            loop {
                let w = *words.choose(&mut rng).unwrap();
                if text.len() + w.len() + usize::from(!text.is_empty()) > target {
                    break;
                }
                if !text.is_empty() {
                    text.push(' ');
                }
                text.push_str(w);
            }
            while text.len() < target {
                text.push(' ');
            }
            DocText::new(format!("s{i:05}"), text)
        })
        .collect();

    let want = annotations_to_jsonl(&run_software(&graph, &corpus)?);
    let mut packages = 0usize;
    for workers in [1usize, 4, 16] {
        let cfg = DispatchConfig { workers, ..DispatchConfig::default() };
        let report = run_plan(&plan, &corpus, &cfg)?;
        ensure!(report.docs == corpus.len(), "{workers} workers: {} docs", report.docs);
        ensure!(
            report.submits == report.replies,
            "{workers} workers: {} submits vs {} replies",
            report.submits,
            report.replies
        );
        let packaged: usize = report.packages.iter().map(|p| p.docs).sum();
        ensure!(
            packaged as u64 == report.submits,
            "{workers} workers: {packaged} docs packaged vs {} submitted",
            report.submits
        );
        for p in &report.packages {
            match p.reason {
                FlushReason::Bytes => ensure!(
                    p.payload_bytes > cfg.package_bytes,
                    "{workers} workers: bytes-flushed package of {} B",
                    p.payload_bytes
                ),
                FlushReason::Docs => ensure!(
                    p.docs == cfg.package_docs,
                    "{workers} workers: count-flushed package of {} docs",
                    p.docs
                ),
                FlushReason::Timeout | FlushReason::Drain => {}
            }
        }
        ensure!(
            annotations_to_jsonl(&report.views) == want,
            "{workers} workers: output diverged"
        );
        packages += report.packages.len();
    }
    Ok(format!("3 worker counts, {packages} packages, all outputs identical"))
}

/// 7. Streaming discipline, observed through the engine's own counters:
/// extraction stages consume each character exactly once, and every
/// order-requiring stage saw sorted input (violations abort the run).
fn c7_streaming() -> Result<String> {
    use spanforge_core::accel::PackageItem;

    struct Case {
        graph: OperatorGraph,
        plan: spanforge_core::partition::PartitionPlan,
    }
    let mut cases = Vec::new();
    for q in &queries() {
        let graph = compile_query(q)?;
        for scenario in Scenario::ALL {
            let plan = plan_for_scenario(&graph, &CapabilitySet::standard(), scenario)?;
            if !plan.subgraphs.is_empty() {
                cases.push(Case { graph: graph.clone(), plan });
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let words = ["york", "reno", "Alice", "Mallory", "42", "2048", "lorem", "blue", "tempor"];
    let mut checks = 0u64;
    let mut evictions = 0u64;
    for pair in 0..500 {
        let case = &cases[rng.gen_range(0..cases.len())];
        let sub = &case.plan.subgraphs[rng.gen_range(0..case.plan.subgraphs.len())];
        let n = rng.gen_range(0..200);
        let text: String =
            (0..n).map(|_| *words.choose(&mut rng).unwrap()).collect::<Vec<_>>().join(" ");
        let doc = DocText::new(format!("p{pair}"), text);

        // Host-side inputs for subgraphs that start mid-graph, produced by
        // the reference engine exactly as the dispatcher would.
        let prepared = PreparedGraph::new(case.graph.clone())?;
        let mut run = GraphRun::new(&prepared, &doc);
        for &id in prepared.topo() {
            if case.graph.kind(id) != Some(spanforge_core::graph::OperatorKind::SubgraphCall) {
                run.eval_node(id)?;
            }
        }
        let mut inputs: BTreeMap<NodeId, AnnotationSet> = BTreeMap::new();
        for &p in &sub.tuple_inputs {
            let mut set = run.result(p).ok_or_else(|| anyhow!("no result for input {p}"))?.clone();
            set.sort_canonical();
            inputs.insert(p, set);
        }

        let pipeline = Pipeline::build(&case.plan.graph, sub, &PipelineConfig::default())?;
        let result = pipeline.run_package(&[PackageItem { doc: &doc, tuple_inputs: inputs }])?;
        let chars = doc.char_len() as u64;
        for stage in &result.stats.stages {
            if stage.stage.starts_with("regex_") || stage.stage.starts_with("dict_") {
                ensure!(
                    stage.cycles == chars,
                    "pair {pair}: stage {} consumed {} of {} chars",
                    stage.stage,
                    stage.cycles,
                    chars
                );
            }
        }
        checks += result.stats.sorted_checks;
        evictions += result.stats.evictions;
    }
    ensure!(checks > 0, "no order-requiring stage was ever exercised");
    Ok(format!("500 pairs single-pass; {checks} order checks passed, {evictions} buffer evictions"))
}

/// 8. The fixtures have the cost shape they were designed to have: the four
/// extraction-leaning queries spend most of their time in extraction kinds,
/// the relational chain spends most of its time in relational kinds.
fn c8_profiles() -> Result<String> {
    let extraction = ["RegexExtract", "DictionaryExtract"];
    let relational = ["Select", "Project", "Join", "Union", "Consolidate"];
    let mut details = Vec::new();
    for (i, q) in queries().iter().enumerate() {
        let graph = compile_query(q)?;
        let profile = profile_graph(&graph, &demo_corpus(q, 1000, 2048), 1)?;
        let fractions = profile.kind_fractions().ok_or_else(|| anyhow!("empty profile"))?;
        let share = |kinds: &[&str]| -> f64 {
            kinds.iter().filter_map(|k| fractions.get(*k)).sum()
        };
        if i < 4 {
            let f = share(&extraction);
            ensure!(f > 0.5, "{}: extraction fraction {f:.3} not above 0.5", q.name);
            details.push(format!("{} ext {f:.2}", q.name));
        } else {
            let f = share(&relational);
            ensure!(f > 0.8, "{}: relational fraction {f:.3} not above 0.8", q.name);
            details.push(format!("{} rel {f:.2}", q.name));
        }
    }
    Ok(details.join(", "))
}
