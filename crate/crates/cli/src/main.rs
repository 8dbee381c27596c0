use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Result};
use clap::{Args, Parser, Subcommand};

use spanforge::config::{self, Overrides};
use spanforge::corpus::{self, GenSpec};
use spanforge::demo;
use spanforge::dispatch::{run_plan, run_software};
use spanforge::estimate::{scenario_rows, PackageShape};
use spanforge::formats;
use spanforge::profiler::profile_graph;
use spanforge::report;

use spanforge_core::accel::CostModel;
use spanforge_core::aql;
use spanforge_core::partition::{plan_for_scenario, CapabilitySet, Scenario};

#[derive(Parser)]
#[command(name = "spanforge", version, about = "Rule-based text analytics with an emulated streaming accelerator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunFlags {
    /// TOML settings file; SPANFORGE_* variables and flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Flush a package once its payload exceeds this many bytes.
    #[arg(long)]
    package_bytes: Option<usize>,
    /// Flush a package once it holds this many documents.
    #[arg(long)]
    package_docs: Option<usize>,
    /// Maximum queueing delay before a package is flushed, in microseconds.
    #[arg(long)]
    flush_us: Option<u64>,
    #[arg(long)]
    channel_capacity: Option<usize>,
    #[arg(long)]
    sort_buffer_capacity: Option<usize>,
}

impl RunFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            workers: self.workers,
            package_bytes: self.package_bytes,
            package_docs: self.package_docs,
            flush_us: self.flush_us,
            channel_capacity: self.channel_capacity,
            sort_buffer_capacity: self.sort_buffer_capacity,
            seed: None,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile a rule file into an operator graph.
    Compile {
        /// Rule source file.
        query: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Partition an operator graph for an offload scenario.
    Partition {
        aog: PathBuf,
        /// 1 = extraction only, 2 = fused extraction, 3 = full offload.
        #[arg(long, short)]
        scenario: u8,
        /// Capability set JSON; defaults to the standard build.
        #[arg(long)]
        caps: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Execute a partition plan (or an unpartitioned graph) over a corpus.
    Run {
        /// Partition plan JSON. Mutually exclusive with --aog.
        #[arg(long, conflicts_with = "aog", required_unless_present = "aog")]
        plan: Option<PathBuf>,
        /// Operator graph JSON, executed entirely in software.
        #[arg(long)]
        aog: Option<PathBuf>,
        /// Corpus: a directory of .txt files or a .jsonl file.
        #[arg(long)]
        corpus: PathBuf,
        /// Annotation output (JSON lines).
        #[arg(long, short)]
        out: PathBuf,
        /// Device stage counters (CSV), plan runs only.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Time software execution per operator.
    Profile {
        aog: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Estimate offload throughput for the three scenarios.
    Estimate {
        aog: PathBuf,
        /// Profile JSON from the profile command.
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        caps: Option<PathBuf>,
        /// Corpus used to derive the average document size.
        #[arg(long, required_unless_present = "doc_bytes")]
        corpus: Option<PathBuf>,
        /// Average document size in bytes; overrides --corpus.
        #[arg(long)]
        doc_bytes: Option<f64>,
        /// Documents per package assumed by the device model.
        #[arg(long, default_value_t = 8.0)]
        package_docs: f64,
        /// Write the table here instead of stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic corpus as JSON lines.
    GenCorpus {
        #[arg(long, default_value_t = 1000)]
        docs: usize,
        #[arg(long, default_value_t = 256)]
        doc_bytes: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Fraction of tokens drawn from the matched word pools.
        #[arg(long, default_value_t = 0.15)]
        hot: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Compile, verify, and measure the built-in demo queries.
    Demo {
        #[arg(long, short, default_value = "demo-out")]
        out: PathBuf,
        /// Single document size and a small corpus.
        #[arg(long)]
        quick: bool,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Compile { query, out } => {
            let src = std::fs::read_to_string(&query)
                .map_err(|e| anyhow!("reading {}: {e}", query.display()))?;
            let graph = aql::compile(&src).map_err(|e| anyhow!("{}: {e}", query.display()))?;
            let graph = aql::optimize(graph);
            std::fs::write(&out, formats::aog_to_json(&graph))?;
            println!(
                "compiled {} nodes, {} output views, written to {}",
                graph.node_count(),
                graph.sinks().len(),
                out.display(),
            );
            Ok(())
        }
        Cmd::Partition { aog, scenario, caps, out } => {
            let graph = formats::load_aog(&aog)?;
            let caps = match caps {
                Some(path) => formats::load_caps(&path)?,
                None => CapabilitySet::standard(),
            };
            let scenario = Scenario::from_number(scenario)
                .ok_or_else(|| anyhow!("scenario must be 1, 2, or 3"))?;
            let plan = plan_for_scenario(&graph, &caps, scenario)
                .map_err(|e| anyhow!("partition: {e}"))?;
            std::fs::write(&out, formats::plan_to_json(&plan))?;
            let offloaded: usize = plan.subgraphs.iter().map(|sg| sg.nodes.len()).sum();
            println!(
                "{} subgraphs covering {offloaded} nodes, written to {}",
                plan.subgraphs.len(),
                out.display(),
            );
            Ok(())
        }
        Cmd::Run { plan, aog, corpus: corpus_path, out, trace, flags } => {
            let docs = corpus::load_corpus(&corpus_path)?;
            if let Some(plan_path) = plan {
                let settings = config::resolve(flags.config.as_deref(), flags.overrides())?;
                let plan = formats::load_plan(&plan_path)?;
                let report = run_plan(&plan, &docs, &settings.dispatch)?;
                std::fs::write(&out, formats::annotations_to_jsonl(&report.views))?;
                if let Some(trace_path) = trace {
                    std::fs::write(&trace_path, report::trace_csv(&report.accel_stats))?;
                }
                let mb = report.bytes as f64 / 1e6;
                println!(
                    "{} docs ({mb:.2} MB) in {:.3}s with {} workers: {:.2} MB/s",
                    report.docs,
                    report.wall_s,
                    settings.dispatch.workers,
                    mb / report.wall_s,
                );
                let mut by_reason: std::collections::BTreeMap<&str, usize> = Default::default();
                for p in &report.packages {
                    *by_reason.entry(p.reason.label()).or_default() += 1;
                }
                let parts: Vec<String> =
                    by_reason.iter().map(|(r, n)| format!("{n} by {r}")).collect();
                println!(
                    "{} packages ({}), {} requests",
                    report.packages.len(),
                    parts.join(", "),
                    report.submits,
                );
            } else {
                let graph = formats::load_aog(aog.as_ref().expect("clap enforces plan|aog"))?;
                if trace.is_some() {
                    bail!("--trace needs a plan run; software execution has no device stages");
                }
                let views = run_software(&graph, &docs)?;
                std::fs::write(&out, formats::annotations_to_jsonl(&views))?;
                println!("{} docs processed in software, written to {}", docs.len(), out.display());
            }
            Ok(())
        }
        Cmd::Profile { aog, corpus: corpus_path, threads, out } => {
            let graph = formats::load_aog(&aog)?;
            let docs = corpus::load_corpus(&corpus_path)?;
            let profile = profile_graph(&graph, &docs, threads)?;
            std::fs::write(&out, formats::profile_to_json(&profile))?;
            println!(
                "{:.3}s over {} bytes with {} threads: {:.2} MB/s",
                profile.total_s,
                profile.bytes,
                profile.threads,
                profile.throughput() / 1e6,
            );
            if let Some(fractions) = profile.kind_fractions() {
                for (kind, f) in fractions {
                    println!("  {kind}: {:.1}%", f * 100.0);
                }
            }
            Ok(())
        }
        Cmd::Estimate { aog, profile, caps, corpus: corpus_path, doc_bytes, package_docs, out } => {
            let graph = formats::load_aog(&aog)?;
            let profile = formats::load_profile(&profile)?;
            let caps = match caps {
                Some(path) => formats::load_caps(&path)?,
                None => CapabilitySet::standard(),
            };
            let avg_doc_bytes = match doc_bytes {
                Some(b) => b,
                None => {
                    let docs = corpus::load_corpus(
                        corpus_path.as_ref().expect("clap enforces corpus|doc_bytes"),
                    )?;
                    docs.iter().map(|d| d.bytes as f64).sum::<f64>() / docs.len() as f64
                }
            };
            let shape = PackageShape { docs_per_package: package_docs, avg_doc_bytes };
            let rows =
                scenario_rows(&graph, &caps, &profile, shape, &CostModel::calibrated())?;
            let csv = report::speedup_csv(&rows);
            match out {
                Some(path) => std::fs::write(&path, &csv)?,
                None => print!("{csv}"),
            }
            for row in &rows {
                if row.no_benefit() {
                    println!("scenario {}: no net benefit at this package shape", row.scenario);
                }
            }
            Ok(())
        }
        Cmd::GenCorpus { docs, doc_bytes, seed, hot, out } => {
            let spec = GenSpec { docs, doc_bytes, seed, hot };
            let generated = corpus::generate(&spec);
            std::fs::write(&out, corpus::corpus_to_jsonl(&generated))?;
            println!("{docs} documents of {doc_bytes} bytes written to {}", out.display());
            Ok(())
        }
        Cmd::Demo { out, quick } => demo::run_demo(&out, quick),
    }
}
