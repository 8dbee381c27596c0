//! Batched dispatch between host workers and the streaming device.
//!
//! Worker threads pull documents from a shared cursor and evaluate the
//! supergraph. When a worker reaches an offloaded call it submits a request
//! to the communication thread and blocks on a single-slot reply channel,
//! the same shape as a driver call into a DMA queue. The communication
//! thread batches requests per subgraph into packages and hands them to one
//! device thread; replies wake exactly the workers whose documents were in
//! the package.
//!
//! A package is flushed when its payload crosses the byte threshold, when
//! it reaches the document cap, when its oldest entry has waited out the
//! flush interval, or when the corpus is exhausted and nothing is left in
//! flight (the drain rule, which keeps the tail from waiting a full flush
//! interval).

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Result};

use spanforge_core::accel::{DocResult, PackageItem, Pipeline, PipelineConfig, RunStats};
use spanforge_core::document::DocText;
use spanforge_core::error::AccelError;
use spanforge_core::graph::{NodeId, SubgraphId};
use spanforge_core::operators::{GraphRun, PreparedGraph};
use spanforge_core::partition::{Location, PartitionPlan};
use spanforge_core::table::AnnotationSet;

#[derive(Clone, Debug)]
pub struct DispatchConfig {
    pub workers: usize,
    /// Flush a queue once its payload exceeds this many bytes.
    pub package_bytes: usize,
    /// Flush a queue once it holds this many documents.
    pub package_docs: usize,
    /// Maximum time a request may sit in a queue.
    pub flush: Duration,
    pub pipeline: PipelineConfig,
}

impl Default for DispatchConfig {
    fn default() -> Self {
        DispatchConfig {
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(4),
            package_bytes: 1000,
            package_docs: 8,
            flush: Duration::from_millis(1),
            pipeline: PipelineConfig::default(),
        }
    }
}

/// Why a package left its queue.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlushReason {
    Bytes,
    Docs,
    Timeout,
    Drain,
}

impl FlushReason {
    pub fn label(&self) -> &'static str {
        match self {
            FlushReason::Bytes => "bytes",
            FlushReason::Docs => "docs",
            FlushReason::Timeout => "timeout",
            FlushReason::Drain => "drain",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PackageMeta {
    pub subgraph: SubgraphId,
    pub docs: usize,
    pub payload_bytes: usize,
    pub reason: FlushReason,
}

#[derive(Debug)]
pub struct DispatchReport {
    /// Sink outputs keyed by (document id, view name).
    pub views: BTreeMap<(String, String), AnnotationSet>,
    /// Every package the communication thread issued, in issue order.
    pub packages: Vec<PackageMeta>,
    /// Device counters per subgraph.
    pub accel_stats: BTreeMap<SubgraphId, RunStats>,
    pub docs: usize,
    pub bytes: u64,
    pub wall_s: f64,
    /// Requests submitted by workers and replies they received. Equal in
    /// any completed run; tracked separately to make lost or duplicated
    /// wakeups observable.
    pub submits: u64,
    pub replies: u64,
}

struct Request<'a> {
    doc: &'a DocText,
    tuple_inputs: BTreeMap<NodeId, AnnotationSet>,
    payload_bytes: usize,
    reply: mpsc::SyncSender<Result<DocResult, AccelError>>,
}

enum CommMsg<'a> {
    Submit(SubgraphId, Request<'a>),
    /// A worker exited; no more submissions will come from it.
    WorkerDone,
    /// The device finished a package of n documents.
    Completed(usize),
}

struct Package<'a> {
    subgraph: SubgraphId,
    entries: Vec<Request<'a>>,
}

struct Queue<'a> {
    entries: Vec<Request<'a>>,
    bytes: usize,
    oldest: Instant,
}

fn flush_queue<'a>(
    queues: &mut BTreeMap<SubgraphId, Queue<'a>>,
    packages: &mut Vec<PackageMeta>,
    accel_tx: &mpsc::Sender<Package<'a>>,
    sg: SubgraphId,
    reason: FlushReason,
) {
    let q = queues.remove(&sg).expect("flushing a live queue");
    packages.push(PackageMeta {
        subgraph: sg,
        docs: q.entries.len(),
        payload_bytes: q.bytes,
        reason,
    });
    // The device thread outlives every queue entry; a send can only fail
    // during teardown after an error, where dropping the entries unblocks
    // the waiting workers via RecvError.
    let _ = accel_tx.send(Package { subgraph: sg, entries: q.entries });
}

fn payload_bytes(doc: &DocText, tuple_inputs: &BTreeMap<NodeId, AnnotationSet>) -> usize {
    // Documents travel as bytes; tuples as fixed eight-byte words per column.
    doc.bytes
        + tuple_inputs
            .values()
            .map(|set| set.len() * set.schema().len() * 8)
            .sum::<usize>()
}

/// Execute a partitioned plan over a corpus. Works for all-software plans
/// too: with no subgraphs the workers never submit anything.
pub fn run_plan<'a>(
    plan: &'a PartitionPlan,
    corpus: &'a [DocText],
    cfg: &DispatchConfig,
) -> Result<DispatchReport> {
    if cfg.workers == 0 {
        bail!("dispatch needs at least one worker");
    }
    let prepared =
        PreparedGraph::new(plan.supergraph.clone()).map_err(|e| anyhow!("supergraph: {e}"))?;
    let mut pipelines: BTreeMap<SubgraphId, Pipeline> = BTreeMap::new();
    for sg in &plan.subgraphs {
        let pl = Pipeline::build(&plan.graph, sg, &cfg.pipeline)
            .map_err(|e| anyhow!("subgraph {}: {e}", sg.id))?;
        pipelines.insert(sg.id, pl);
    }

    let cursor = AtomicUsize::new(0);
    let exhausted_flag = AtomicBool::new(false);
    let exhausted = &exhausted_flag;
    let (comm_tx, comm_rx) = mpsc::channel::<CommMsg<'a>>();
    let (accel_tx, accel_rx) = mpsc::channel::<Package<'a>>();
    let start = Instant::now();

    struct WorkerOut {
        views: Vec<(String, String, AnnotationSet)>,
        submits: u64,
        replies: u64,
    }

    let worker_docs = |out: &mut WorkerOut, comm_tx: &mpsc::Sender<CommMsg<'a>>| -> Result<()> {
        loop {
            let i = cursor.fetch_add(1, Ordering::Relaxed);
            let Some(doc) = corpus.get(i) else {
                exhausted.store(true, Ordering::Release);
                break;
            };
            let mut run = GraphRun::new(&prepared, doc);
            let mut sub_results: BTreeMap<SubgraphId, DocResult> = BTreeMap::new();
            for &id in prepared.topo() {
                if let Some((sg_id, orig)) = plan.call_stream(id) {
                    if !sub_results.contains_key(&sg_id) {
                        let def = plan.subgraph(sg_id).expect("call names a known subgraph");
                        let mut tuple_inputs = BTreeMap::new();
                        for &p in &def.tuple_inputs {
                            let mut set = match plan.location.get(&p) {
                                Some(Location::Accelerator(j)) => sub_results
                                    .get(j)
                                    .and_then(|r| r.outputs.get(&p))
                                    .cloned()
                                    .ok_or_else(|| {
                                        anyhow!("doc {}: subgraph {j} output {p} missing", doc.id)
                                    })?,
                                _ => run
                                    .result(p)
                                    .cloned()
                                    .ok_or_else(|| {
                                        anyhow!("doc {}: host stream {p} missing", doc.id)
                                    })?,
                            };
                            // The device expects canonically ordered input
                            // streams.
                            set.sort_canonical();
                            tuple_inputs.insert(p, set);
                        }
                        let payload = payload_bytes(doc, &tuple_inputs);
                        let (reply_tx, reply_rx) = mpsc::sync_channel(1);
                        comm_tx
                            .send(CommMsg::Submit(
                                sg_id,
                                Request {
                                    doc,
                                    tuple_inputs,
                                    payload_bytes: payload,
                                    reply: reply_tx,
                                },
                            ))
                            .map_err(|_| anyhow!("communication thread exited early"))?;
                        out.submits += 1;
                        let result = reply_rx
                            .recv()
                            .map_err(|_| anyhow!("reply channel closed without an answer"))?
                            .map_err(|e| anyhow!("doc {}: device: {e}", doc.id))?;
                        out.replies += 1;
                        sub_results.insert(sg_id, result);
                    }
                    let set = sub_results[&sg_id]
                        .outputs
                        .get(&orig)
                        .cloned()
                        .ok_or_else(|| anyhow!("subgraph {sg_id} produced no stream {orig}"))?;
                    run.inject(id, set);
                }
                run.eval_node(id).map_err(|e| anyhow!("doc {}: {e}", doc.id))?;
            }
            for (view, set) in run.take_sink_views() {
                out.views.push((doc.id.clone(), view, set));
            }
        }
        Ok(())
    };

    let worker = |comm_tx: mpsc::Sender<CommMsg<'a>>| -> Result<WorkerOut> {
        let mut out = WorkerOut { views: Vec::new(), submits: 0, replies: 0 };
        let result = worker_docs(&mut out, &comm_tx);
        // The communication thread counts WorkerDone messages to know when
        // submissions have stopped, so the message must go out on the error
        // path too or teardown hangs.
        let _ = comm_tx.send(CommMsg::WorkerDone);
        result.map(|()| out)
    };

    struct CommOut {
        packages: Vec<PackageMeta>,
    }

    let flush_interval = cfg.flush;
    let comm = move || -> CommOut {
        let mut queues: BTreeMap<SubgraphId, Queue<'a>> = BTreeMap::new();
        let mut packages: Vec<PackageMeta> = Vec::new();
        let mut submitted: u64 = 0;
        let mut completed: u64 = 0;
        let mut done_workers = 0usize;

        loop {
            // Wake early enough to honor the oldest entry's deadline.
            let deadline = queues.values().map(|q| q.oldest + flush_interval).min();
            let msg = match deadline {
                Some(d) => {
                    let timeout = d.saturating_duration_since(Instant::now());
                    match comm_rx.recv_timeout(timeout) {
                        Ok(m) => Some(m),
                        Err(mpsc::RecvTimeoutError::Timeout) => None,
                        Err(mpsc::RecvTimeoutError::Disconnected) => break,
                    }
                }
                None => match comm_rx.recv() {
                    Ok(m) => Some(m),
                    Err(_) => break,
                },
            };
            match msg {
                Some(CommMsg::Submit(sg, req)) => {
                    submitted += 1;
                    let q = queues.entry(sg).or_insert_with(|| Queue {
                        entries: Vec::new(),
                        bytes: 0,
                        oldest: Instant::now(),
                    });
                    q.bytes += req.payload_bytes;
                    q.entries.push(req);
                    if q.bytes > cfg.package_bytes {
                        flush_queue(&mut queues, &mut packages, &accel_tx, sg, FlushReason::Bytes);
                    } else if q.entries.len() >= cfg.package_docs {
                        flush_queue(&mut queues, &mut packages, &accel_tx, sg, FlushReason::Docs);
                    }
                }
                Some(CommMsg::WorkerDone) => done_workers += 1,
                Some(CommMsg::Completed(n)) => completed += n as u64,
                None => {}
            }
            let now = Instant::now();
            let due: Vec<SubgraphId> = queues
                .iter()
                .filter(|(_, q)| now.duration_since(q.oldest) >= flush_interval)
                .map(|(&sg, _)| sg)
                .collect();
            for sg in due {
                flush_queue(&mut queues, &mut packages, &accel_tx, sg, FlushReason::Timeout);
            }
            let queued: u64 = queues.values().map(|q| q.entries.len() as u64).sum();
            let in_flight = submitted - completed - queued;
            if exhausted.load(Ordering::Acquire) && in_flight == 0 && queued > 0 {
                // Nothing is running and nothing more is coming: waiting out
                // the timer would only stall the blocked workers.
                let due: Vec<SubgraphId> = queues.keys().copied().collect();
                for sg in due {
                    flush_queue(&mut queues, &mut packages, &accel_tx, sg, FlushReason::Drain);
                }
            }
            if done_workers == cfg.workers && queues.is_empty() && in_flight == 0 {
                break;
            }
        }
        // Drops accel_tx, which stops the device thread.
        CommOut { packages }
    };

    // Owns the package receiver and the built pipelines; exits when the
    // communication thread drops its sender.
    let accel = move |comm_tx: mpsc::Sender<CommMsg<'a>>| -> BTreeMap<SubgraphId, RunStats> {
        let mut stats: BTreeMap<SubgraphId, RunStats> = BTreeMap::new();
        while let Ok(mut pkg) = accel_rx.recv() {
            let pipeline = &pipelines[&pkg.subgraph];
            let items: Vec<PackageItem> = pkg
                .entries
                .iter_mut()
                .map(|r| PackageItem { doc: r.doc, tuple_inputs: std::mem::take(&mut r.tuple_inputs) })
                .collect();
            let n = pkg.entries.len();
            match pipeline.run_package(&items) {
                Ok(result) => {
                    for (req, doc_result) in pkg.entries.into_iter().zip(result.docs) {
                        let _ = req.reply.send(Ok(doc_result));
                    }
                    match stats.entry(pkg.subgraph) {
                        std::collections::btree_map::Entry::Vacant(v) => {
                            v.insert(result.stats);
                        }
                        std::collections::btree_map::Entry::Occupied(mut o) => {
                            o.get_mut().merge(&result.stats);
                        }
                    }
                }
                Err(e) => {
                    for req in pkg.entries {
                        let _ = req.reply.send(Err(e.clone()));
                    }
                }
            }
            let _ = comm_tx.send(CommMsg::Completed(n));
        }
        stats
    };

    let (worker_outs, comm_out, accel_stats) = std::thread::scope(|scope| {
        let comm_handle = scope.spawn(comm);
        let accel_handle = {
            let tx = comm_tx.clone();
            scope.spawn(move || accel(tx))
        };
        let worker = &worker;
        let worker_handles: Vec<_> = (0..cfg.workers)
            .map(|_| {
                let tx = comm_tx.clone();
                scope.spawn(move || worker(tx))
            })
            .collect();
        drop(comm_tx);
        let worker_outs: Vec<Result<WorkerOut>> =
            worker_handles.into_iter().map(|h| h.join().expect("worker panicked")).collect();
        let comm_out = comm_handle.join().expect("communication thread panicked");
        let accel_stats = accel_handle.join().expect("device thread panicked");
        (worker_outs, comm_out, accel_stats)
    });
    let wall_s = start.elapsed().as_secs_f64();

    let mut views: BTreeMap<(String, String), AnnotationSet> = BTreeMap::new();
    let mut submits = 0;
    let mut replies = 0;
    for out in worker_outs {
        let out = out?;
        submits += out.submits;
        replies += out.replies;
        for (doc, view, set) in out.views {
            if views.insert((doc.clone(), view.clone()), set).is_some() {
                bail!("document {doc:?} produced view {view:?} twice");
            }
        }
    }
    Ok(DispatchReport {
        views,
        packages: comm_out.packages,
        accel_stats,
        docs: corpus.len(),
        bytes: corpus.iter().map(|d| d.bytes as u64).sum(),
        wall_s,
        submits,
        replies,
    })
}

/// All-software reference run over the original graph, producing output in
/// the same shape as [`run_plan`].
pub fn run_software(
    graph: &spanforge_core::graph::OperatorGraph,
    corpus: &[DocText],
) -> Result<BTreeMap<(String, String), AnnotationSet>> {
    let prepared = PreparedGraph::new(graph.clone()).map_err(|e| anyhow!("prepare: {e}"))?;
    let mut views = BTreeMap::new();
    for doc in corpus {
        let mut run = GraphRun::new(&prepared, doc);
        for &id in prepared.topo() {
            run.eval_node(id).map_err(|e| anyhow!("doc {}: {e}", doc.id))?;
        }
        for (view, set) in run.take_sink_views() {
            views.insert((doc.id.clone(), view), set);
        }
    }
    Ok(views)
}
