//! Built-in demo queries spanning the operator mix: extraction-dominated
//! fans, a pure token scan, a join, a filtered consolidation, and a
//! relational-heavy pipeline. Each tier pairs a query with the corpus
//! density that makes its intended cost profile show up.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use spanforge_core::accel::CostModel;
use spanforge_core::aql;
use spanforge_core::document::DocText;
use spanforge_core::graph::OperatorGraph;
use spanforge_core::partition::{plan_for_scenario, CapabilitySet, Scenario};

use crate::corpus::{generate, GenSpec};
use crate::dispatch::{run_plan, run_software, DispatchConfig};
use crate::estimate::{scenario_rows, PackageShape};
use crate::formats;
use crate::profiler::profile_graph;
use crate::report::speedup_csv;

/// Document sizes every tier is exercised at, in bytes.
pub const DOC_SIZES: [usize; 3] = [128, 256, 2048];

pub struct DemoQuery {
    pub name: &'static str,
    pub label: &'static str,
    pub aql: &'static str,
    /// Probability of match-pool tokens in the generated corpus.
    pub hot: f64,
}

pub fn queries() -> [DemoQuery; 5] {
    [
        DemoQuery {
            name: "t1",
            label: "mention fan: four regexes, two dictionaries, union, consolidate",
            aql: "\
create dictionary Places as ('york', 'boston', 'austin', 'dallas', 'miami', 'reno', 'omaha', 'tulsa', 'salem', 'fargo');
create dictionary Fillers as ('tempor', 'marble', 'zephyr', 'bronze', 'mosaic');
create view Caps as extract regex /[A-Z][a-z]+/ on Document;
create view Nums as extract regex /[0-9]+/ on Document;
create view BigNums as extract regex /[0-9][0-9][0-9][0-9]+/ on Document;
create view Initials as extract regex /[A-Z][a-z]/ on Document;
create view Place as extract dictionary Places on Document;
create view Filler as extract dictionary Fillers on Document;
create view Mentions as union all Caps, Nums, BigNums, Initials, Place, Filler;
create view Distinct as consolidate Mentions;
output view Distinct;",
            hot: 0.12,
        },
        DemoQuery {
            name: "t2",
            label: "token scan: three regexes into a union",
            aql: "\
create view Caps as extract regex /[A-Z][a-z]+/ on Document;
create view Nums as extract regex /[0-9]+/ on Document;
create view Longword as extract regex /[a-z][a-z][a-z][a-z]+/ on Document;
create view Tokens as union all Caps, Nums, Longword;
output view Tokens;",
            hot: 0.12,
        },
        DemoQuery {
            name: "t3",
            label: "proximity join of names and places",
            aql: "\
create dictionary Places as ('york', 'boston', 'austin', 'dallas', 'miami', 'reno', 'omaha', 'tulsa', 'salem', 'fargo');
create view Name as extract regex /[A-Z][a-z]+/ on Document;
create view Place as extract dictionary Places on Document;
create view Visit as join Name n, Place p on follows(n.match, p.match, 0, 24);
output view Visit;",
            hot: 0.12,
        },
        DemoQuery {
            name: "t4",
            label: "filtered consolidation of mixed mentions",
            aql: "\
create dictionary Places as ('york', 'boston', 'austin', 'dallas', 'miami', 'reno', 'omaha', 'tulsa', 'salem', 'fargo');
create dictionary Fillers as ('lorem', 'ipsum', 'dolor', 'amet', 'tempor');
create view Place as extract dictionary Places on Document;
create view Filler as extract dictionary Fillers on Document;
create view Nums as extract regex /[0-9]+/ on Document;
create view Mixed as union all Place, Filler, Nums;
create view Spans as consolidate Mixed;
create view Long as select * from Spans where spanlengthgreaterthan(match, 4);
output view Long;",
            hot: 0.12,
        },
        DemoQuery {
            name: "t5",
            label: "relational chain: join, select, join, project, consolidate",
            aql: "\
create dictionary Places as ('york', 'boston', 'austin', 'dallas', 'miami', 'reno', 'omaha', 'tulsa', 'salem', 'fargo');
create view Name as extract regex /[A-Z][a-z]+/ on Document;
create view Place as extract dictionary Places on Document;
create view Near as join Name n, Place p on follows(n.match, p.match, -8, 40);
create view Wide as select * from Near where spanlengthgreaterthan(match, 2);
create view Twins as join Wide a, Near b on overlaps(a.match, b.match);
create view Anchor as project match from Twins;
create view Out as consolidate Anchor;
output view Out;",
            hot: 0.75,
        },
    ]
}

pub fn demo_corpus(q: &DemoQuery, docs: usize, doc_bytes: usize) -> Vec<DocText> {
    // One fixed seed per tier and size keeps every run comparable.
    let seed = 0x5f0_0d ^ (doc_bytes as u64) ^ ((q.name.len() as u64) << 32);
    generate(&GenSpec { docs, doc_bytes, seed, hot: q.hot })
}

pub fn compile_query(q: &DemoQuery) -> Result<OperatorGraph> {
    aql::compile(q.aql).map_err(|e| anyhow!("{}: {e}", q.name))
}

/// Run every tier end to end: verify the offloaded scenarios against the
/// software reference, write artifacts, and print one speedup table per
/// tier and document size.
pub fn run_demo(out_dir: &Path, quick: bool) -> Result<()> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let docs = if quick { 120 } else { 1000 };
    let sizes: &[usize] = if quick { &[256] } else { &DOC_SIZES };
    let caps = CapabilitySet::standard();
    let model = CostModel::calibrated();
    let mut summary = String::new();

    for q in queries() {
        let graph = compile_query(&q)?;
        let tier_dir = out_dir.join(q.name);
        fs::create_dir_all(&tier_dir)?;
        fs::write(tier_dir.join("query.aql"), format!("{}\n", q.aql))?;
        fs::write(tier_dir.join("aog.json"), formats::aog_to_json(&graph))?;
        println!("{}: {}", q.name, q.label);

        for &doc_bytes in sizes {
            let corpus = demo_corpus(&q, docs, doc_bytes);
            let reference = run_software(&graph, &corpus)?;
            let reference_bytes = formats::annotations_to_jsonl(&reference);

            for scenario in
                [Scenario::ExtractionOnly, Scenario::FusedExtraction, Scenario::FullOffload]
            {
                let plan = plan_for_scenario(&graph, &caps, scenario)
                    .map_err(|e| anyhow!("{} scenario {}: {e}", q.name, scenario.number()))?;
                let report = run_plan(&plan, &corpus, &DispatchConfig::default())?;
                let got = formats::annotations_to_jsonl(&report.views);
                if got != reference_bytes {
                    bail!(
                        "{} at {doc_bytes} B: scenario {} output differs from software",
                        q.name,
                        scenario.number(),
                    );
                }
                if doc_bytes == *sizes.last().unwrap() {
                    fs::write(
                        tier_dir.join(format!("plan_s{}.json", scenario.number())),
                        formats::plan_to_json(&plan),
                    )?;
                }
            }
            fs::write(tier_dir.join(format!("annotations_{doc_bytes}.jsonl")), &reference_bytes)?;

            let profile = profile_graph(&graph, &corpus, 1)?;
            let shape = PackageShape {
                docs_per_package: DispatchConfig::default().package_docs as f64,
                avg_doc_bytes: doc_bytes as f64,
            };
            let rows = scenario_rows(&graph, &caps, &profile, shape, &model)?;
            let csv = speedup_csv(&rows);
            fs::write(tier_dir.join(format!("speedup_{doc_bytes}.csv")), &csv)?;
            if doc_bytes == *sizes.last().unwrap() {
                fs::write(tier_dir.join("profile.json"), formats::profile_to_json(&profile))?;
            }

            println!("  {doc_bytes} B docs, all scenarios match software:");
            for row in &rows {
                let note = if row.no_benefit() { "  (no net benefit)" } else { "" };
                println!(
                    "    scenario {}: residual {:.3}, estimated {:.1} MB/s, speedup {:.2}x{note}",
                    row.scenario,
                    row.rt_sw,
                    row.tp_est / 1e6,
                    row.speedup,
                );
            }
            let _ = writeln!(
                summary,
                "{},{},{}",
                q.name,
                doc_bytes,
                rows.iter()
                    .map(|r| format!("{:.3}", r.speedup))
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
    }
    fs::write(out_dir.join("summary.csv"), summary)?;
    println!("artifacts written to {}", out_dir.display());
    Ok(())
}
