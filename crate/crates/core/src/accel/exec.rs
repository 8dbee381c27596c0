//! Cooperative runtime for a built [`Pipeline`].
//!
//! Each document runs in isolation: fresh channel queues, fresh matcher
//! state, fresh buffers. The scheduler sweeps the stage list in topological
//! order and keeps sweeping until a full pass makes no progress. A stage
//! blocks when an output channel is full and yields when its inputs are
//! empty, which models the backpressure of the hardware queues without
//! threads. If the fixpoint is reached while some stage still holds work,
//! the configuration cannot drain and the run reports a deadlock rather
//! than spinning.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::accel::pipeline::{Pipeline, PipelineConfig, StageKind, StageSpec};
use crate::accel::{NUM_LANES, SETUP_CYCLES};
use crate::dict::DictStreamMatcher;
use crate::document::DocText;
use crate::error::AccelError;
use crate::graph::NodeId;
use crate::regex::StreamMatcher;
use crate::table::{canonical_cmp, AnnotationSet, Tuple, Value};

/// One document worth of work inside a dispatch package: the text plus the
/// host-computed tuple sets for every tuple input of the subgraph, keyed by
/// producer node id. Tuple input sets must be canonically sorted.
pub struct PackageItem<'a> {
    pub doc: &'a DocText,
    pub tuple_inputs: BTreeMap<NodeId, AnnotationSet>,
}

/// Per-document output: one annotation set per subgraph output node, plus
/// the busy cycle count charged to the lane that ran the document.
#[derive(Clone, Debug)]
pub struct DocResult {
    pub outputs: BTreeMap<NodeId, AnnotationSet>,
    pub busy_cycles: u64,
}

/// Aggregated per-stage counters for a run.
#[derive(Clone, Debug)]
pub struct StageTrace {
    pub stage: String,
    pub cycles: u64,
    pub tuples_in: u64,
    pub tuples_out: u64,
}

/// Counters for one or more packages executed on the same pipeline.
#[derive(Clone, Debug)]
pub struct RunStats {
    pub docs: u64,
    /// Busy cycles accumulated per lane; documents are assigned round robin.
    pub lane_busy: [u64; NUM_LANES],
    /// Total setup overhead included in the lane totals.
    pub setup_cycles: u64,
    pub stages: Vec<StageTrace>,
    /// Order checks performed by stages that require sorted input.
    pub sorted_checks: u64,
    /// Early evictions from sorting buffers (watermark advanced).
    pub evictions: u64,
}

impl RunStats {
    pub(crate) fn for_pipeline(pl: &Pipeline) -> RunStats {
        RunStats {
            docs: 0,
            lane_busy: [0; NUM_LANES],
            setup_cycles: 0,
            stages: pl
                .stages
                .iter()
                .map(|s| StageTrace {
                    stage: s.name.clone(),
                    cycles: 0,
                    tuples_in: 0,
                    tuples_out: 0,
                })
                .collect(),
            sorted_checks: 0,
            evictions: 0,
        }
    }

    /// Longest lane: the wall-clock cycle count of the run.
    pub fn makespan_cycles(&self) -> u64 {
        self.lane_busy.iter().copied().max().unwrap_or(0)
    }

    /// Sum over lanes: total work performed.
    pub fn total_busy_cycles(&self) -> u64 {
        self.lane_busy.iter().sum()
    }

    /// Fold another run of the same pipeline into this one. Stage rows are
    /// matched positionally; both sides must come from an identical build.
    pub fn merge(&mut self, other: &RunStats) {
        debug_assert_eq!(self.stages.len(), other.stages.len());
        self.docs += other.docs;
        for (l, r) in self.lane_busy.iter_mut().zip(other.lane_busy.iter()) {
            *l += r;
        }
        self.setup_cycles += other.setup_cycles;
        for (l, r) in self.stages.iter_mut().zip(other.stages.iter()) {
            debug_assert_eq!(l.stage, r.stage);
            l.cycles += r.cycles;
            l.tuples_in += r.tuples_in;
            l.tuples_out += r.tuples_out;
        }
        self.sorted_checks += other.sorted_checks;
        self.evictions += other.evictions;
    }
}

/// Result of running a whole package through the pipeline.
pub struct PackageResult {
    pub docs: Vec<DocResult>,
    pub stats: RunStats,
}

struct Chan {
    q: VecDeque<Tuple>,
    cap: usize,
    closed: bool,
}

/// Mutable counters and queues shared by every stage kind. Kept separate
/// from the kind-specific state so both can be borrowed at once.
struct StageIo {
    emit_q: VecDeque<Tuple>,
    closed_out: bool,
    collected: Vec<Tuple>,
    chars: u64,
    tin: u64,
    tout: u64,
    checks: u64,
    evictions: u64,
    /// Bumped on one-shot transitions (eof, close, flush) so the scheduler
    /// sees them as progress even when no tuple moved.
    events: u64,
    last_key: Vec<Option<Tuple>>,
}

impl StageIo {
    fn new(arity: usize) -> StageIo {
        StageIo {
            emit_q: VecDeque::new(),
            closed_out: false,
            collected: Vec::new(),
            chars: 0,
            tin: 0,
            tout: 0,
            checks: 0,
            evictions: 0,
            events: 0,
            last_key: alloc::vec![None; arity],
        }
    }
}

enum State<'p> {
    Feeder { q: VecDeque<Tuple> },
    Regex { m: StreamMatcher<'p>, cursor: usize, eof: bool },
    Dict { m: DictStreamMatcher<'p>, cursor: usize, eof: bool },
    /// Select, project and union carry no state beyond their counters.
    Stream,
    Join { bufs: [Vec<Tuple>; 2], computed: bool },
    Consolidate { buf: Vec<Tuple>, computed: bool },
    SortBuf { buf: Vec<Tuple>, watermark: Option<Tuple>, flushed: bool },
    Collect,
}

struct StageRun<'p> {
    state: State<'p>,
    io: StageIo,
}

fn can_emit(spec: &StageSpec, chans: &[Chan]) -> bool {
    spec.outputs.iter().all(|&c| chans[c].q.len() < chans[c].cap)
}

fn emit(spec: &StageSpec, io: &mut StageIo, chans: &mut [Chan], t: Tuple) {
    io.tout += 1;
    if let Some((&last, rest)) = spec.outputs.split_last() {
        for &c in rest {
            chans[c].q.push_back(t.clone());
        }
        chans[last].q.push_back(t);
    }
}

/// Move queued emissions into the output channels. Returns false when an
/// output is full; the remaining tuples stay queued for the next visit.
fn drain_emit(spec: &StageSpec, io: &mut StageIo, chans: &mut [Chan]) -> bool {
    while let Some(t) = io.emit_q.pop_front() {
        if can_emit(spec, chans) {
            emit(spec, io, chans, t);
        } else {
            io.emit_q.push_front(t);
            return false;
        }
    }
    true
}

fn pop_input(
    spec: &StageSpec,
    io: &mut StageIo,
    chans: &mut [Chan],
    slot: usize,
) -> Result<Option<Tuple>, AccelError> {
    let Some(t) = chans[spec.inputs[slot]].q.pop_front() else {
        return Ok(None);
    };
    io.tin += 1;
    if spec.requires_sorted {
        io.checks += 1;
        if let Some(prev) = &io.last_key[slot] {
            if canonical_cmp(&spec.input_schemas[slot], &t, prev) == Ordering::Less {
                return Err(AccelError::SortViolation {
                    stage: spec.name.clone(),
                });
            }
        }
        io.last_key[slot] = Some(t.clone());
    }
    Ok(Some(t))
}

fn input_finished(spec: &StageSpec, chans: &[Chan], slot: usize) -> bool {
    let c = &chans[spec.inputs[slot]];
    c.closed && c.q.is_empty()
}

fn close_outputs(spec: &StageSpec, io: &mut StageIo, chans: &mut [Chan]) {
    if io.closed_out {
        return;
    }
    for &c in &spec.outputs {
        chans[c].closed = true;
    }
    io.closed_out = true;
    io.events += 1;
}

/// Decide, for a run of tuples sorted by first-column span, which survive
/// containment consolidation. Walks begin groups once, carrying the maximum
/// end seen over strictly smaller begins.
fn consolidate_keep(buf: &[Tuple]) -> Vec<bool> {
    let span_of = |t: &Tuple| t[0].as_span().expect("first column is a span");
    let n = buf.len();
    let mut keep = alloc::vec![true; n];
    let mut prefix_max_end: Option<u32> = None;
    let mut i = 0;
    while i < n {
        let begin = span_of(&buf[i]).begin;
        let mut j = i;
        let mut group_max = 0u32;
        while j < n && span_of(&buf[j]).begin == begin {
            group_max = group_max.max(span_of(&buf[j]).end);
            j += 1;
        }
        for k in i..j {
            let end = span_of(&buf[k]).end;
            // A span is removed when a wider one starts earlier and reaches
            // at least as far, or when one with the same begin reaches
            // strictly further. Identical spans keep each other alive.
            if prefix_max_end.is_some_and(|m| m >= end) || group_max > end {
                keep[k] = false;
            }
        }
        prefix_max_end = Some(prefix_max_end.map_or(group_max, |m| m.max(group_max)));
        i = j;
    }
    keep
}

fn step_stage(
    spec: &StageSpec,
    state: &mut State<'_>,
    io: &mut StageIo,
    chans: &mut [Chan],
    doc_chars: &[char],
    cfg: &PipelineConfig,
) -> Result<(), AccelError> {
    match (state, &spec.kind) {
        (State::Feeder { q }, _) => loop {
            if !drain_emit(spec, io, chans) {
                break;
            }
            match q.pop_front() {
                Some(t) => io.emit_q.push_back(t),
                None => {
                    close_outputs(spec, io, chans);
                    break;
                }
            }
        },
        (State::Regex { m, cursor, eof }, _) => loop {
            if !drain_emit(spec, io, chans) {
                break;
            }
            if let Some(s) = m.pop_match() {
                io.emit_q.push_back(alloc::vec![Value::Span(s)]);
                continue;
            }
            if *cursor < doc_chars.len() {
                m.on_char(doc_chars[*cursor]);
                *cursor += 1;
                io.chars += 1;
            } else if !*eof {
                m.on_eof();
                *eof = true;
                io.events += 1;
            } else {
                close_outputs(spec, io, chans);
                break;
            }
        },
        (State::Dict { m, cursor, eof }, _) => loop {
            if !drain_emit(spec, io, chans) {
                break;
            }
            if let Some(s) = m.pop_match() {
                io.emit_q.push_back(alloc::vec![Value::Span(s)]);
                continue;
            }
            if *cursor < doc_chars.len() {
                m.on_char(doc_chars[*cursor]);
                *cursor += 1;
                io.chars += 1;
            } else if !*eof {
                m.on_eof();
                *eof = true;
                io.events += 1;
            } else {
                close_outputs(spec, io, chans);
                break;
            }
        },
        (State::Stream, StageKind::Select { pred }) => loop {
            if !drain_emit(spec, io, chans) {
                break;
            }
            match pop_input(spec, io, chans, 0)? {
                Some(t) => {
                    if pred.eval(&t) {
                        io.emit_q.push_back(t);
                    }
                }
                None => {
                    if input_finished(spec, chans, 0) {
                        close_outputs(spec, io, chans);
                    }
                    break;
                }
            }
        },
        (State::Stream, StageKind::Project { indexes }) => loop {
            if !drain_emit(spec, io, chans) {
                break;
            }
            match pop_input(spec, io, chans, 0)? {
                Some(t) => {
                    let out: Tuple = indexes.iter().map(|&i| t[i].clone()).collect();
                    io.emit_q.push_back(out);
                }
                None => {
                    if input_finished(spec, chans, 0) {
                        close_outputs(spec, io, chans);
                    }
                    break;
                }
            }
        },
        (State::Stream, StageKind::Union) => loop {
            if !drain_emit(spec, io, chans) {
                break;
            }
            // Greedy: forward from the first slot holding a tuple. Order
            // across slots is restored downstream by a sorting buffer.
            let mut got = false;
            for slot in 0..spec.inputs.len() {
                if let Some(t) = pop_input(spec, io, chans, slot)? {
                    io.emit_q.push_back(t);
                    got = true;
                    break;
                }
            }
            if !got {
                if (0..spec.inputs.len()).all(|s| input_finished(spec, chans, s)) {
                    close_outputs(spec, io, chans);
                }
                break;
            }
        },
        (State::Join { bufs, computed }, StageKind::Join { pred, schema }) => {
            // Blocking ingest on both sides; the cross product runs once
            // when both inputs have finished.
            for slot in 0..2 {
                while let Some(t) = pop_input(spec, io, chans, slot)? {
                    bufs[slot].push(t);
                }
            }
            if !*computed && (0..2).all(|s| input_finished(spec, chans, s)) {
                *computed = true;
                io.events += 1;
                let mut out: Vec<Tuple> = Vec::new();
                for l in &bufs[0] {
                    for r in &bufs[1] {
                        let mut t = l.clone();
                        t.extend(r.iter().cloned());
                        if pred.eval(&t) {
                            out.push(t);
                        }
                    }
                }
                out.sort_by(|a, b| canonical_cmp(schema, a, b));
                io.emit_q.extend(out);
            }
            if *computed && drain_emit(spec, io, chans) {
                close_outputs(spec, io, chans);
            }
        }
        (State::Consolidate { buf, computed }, StageKind::Consolidate) => {
            while let Some(t) = pop_input(spec, io, chans, 0)? {
                buf.push(t);
            }
            if !*computed && input_finished(spec, chans, 0) {
                *computed = true;
                io.events += 1;
                let keep = consolidate_keep(buf);
                io.emit_q.extend(
                    buf.drain(..)
                        .zip(keep)
                        .filter_map(|(t, k)| k.then_some(t)),
                );
            }
            if *computed && drain_emit(spec, io, chans) {
                close_outputs(spec, io, chans);
            }
        }
        (
            State::SortBuf {
                buf,
                watermark,
                flushed,
            },
            StageKind::SortBuf { schema },
        ) => {
            drain_emit(spec, io, chans);
            while let Some(t) = pop_input(spec, io, chans, 0)? {
                if let Some(w) = watermark {
                    if canonical_cmp(schema, &t, w) == Ordering::Less {
                        return Err(AccelError::ReorderOverflow {
                            stage: spec.name.clone(),
                        });
                    }
                }
                buf.push(t);
                if buf.len() > cfg.sort_buffer_capacity {
                    let mi = buf
                        .iter()
                        .enumerate()
                        .min_by(|(_, a), (_, b)| canonical_cmp(schema, a, b))
                        .map(|(i, _)| i)
                        .expect("buffer is nonempty");
                    // swap_remove is safe: canonically equal tuples are
                    // identical, so evicting any minimum is equivalent.
                    let evicted = buf.swap_remove(mi);
                    *watermark = Some(evicted.clone());
                    io.evictions += 1;
                    io.emit_q.push_back(evicted);
                }
            }
            if !*flushed && input_finished(spec, chans, 0) {
                *flushed = true;
                io.events += 1;
                buf.sort_by(|a, b| canonical_cmp(schema, a, b));
                io.emit_q.extend(buf.drain(..));
            }
            if *flushed && drain_emit(spec, io, chans) {
                close_outputs(spec, io, chans);
            }
        }
        (State::Collect, StageKind::Collect { .. }) => {
            while let Some(t) = pop_input(spec, io, chans, 0)? {
                io.collected.push(t);
            }
            if input_finished(spec, chans, 0) && !io.closed_out {
                io.closed_out = true;
                io.events += 1;
            }
        }
        _ => unreachable!("stage state matches stage kind"),
    }
    Ok(())
}

struct DocStats {
    /// Per stage, aligned with the pipeline stage list: (cycles, in, out).
    rows: Vec<(u64, u64, u64)>,
    checks: u64,
    evictions: u64,
}

fn exec_doc(
    pl: &Pipeline,
    doc: &DocText,
    tuple_inputs: &BTreeMap<NodeId, AnnotationSet>,
) -> Result<(DocResult, DocStats), AccelError> {
    let mut chans: Vec<Chan> = (0..pl.channel_count)
        .map(|_| Chan {
            q: VecDeque::new(),
            cap: pl.cfg.channel_capacity,
            closed: false,
        })
        .collect();
    let mut runs: Vec<StageRun<'_>> = pl
        .stages
        .iter()
        .map(|spec| {
            let state = match &spec.kind {
                StageKind::Feeder { producer } => {
                    let set = tuple_inputs
                        .get(producer)
                        .expect("dispatcher supplies every tuple input");
                    debug_assert!(set.is_canonically_sorted());
                    State::Feeder {
                        q: set.tuples().iter().cloned().collect(),
                    }
                }
                StageKind::Regex { re } => State::Regex {
                    m: re.matcher(),
                    cursor: 0,
                    eof: false,
                },
                StageKind::Dict { ac } => State::Dict {
                    m: ac.matcher(),
                    cursor: 0,
                    eof: false,
                },
                StageKind::Select { .. } | StageKind::Project { .. } | StageKind::Union => {
                    State::Stream
                }
                StageKind::Join { .. } => State::Join {
                    bufs: [Vec::new(), Vec::new()],
                    computed: false,
                },
                StageKind::Consolidate => State::Consolidate {
                    buf: Vec::new(),
                    computed: false,
                },
                StageKind::SortBuf { .. } => State::SortBuf {
                    buf: Vec::new(),
                    watermark: None,
                    flushed: false,
                },
                StageKind::Collect { .. } => State::Collect,
            };
            StageRun {
                state,
                io: StageIo::new(spec.inputs.len()),
            }
        })
        .collect();

    loop {
        let mut progress = false;
        for (spec, run) in pl.stages.iter().zip(runs.iter_mut()) {
            let before = (run.io.tin, run.io.tout, run.io.chars, run.io.events);
            step_stage(
                spec,
                &mut run.state,
                &mut run.io,
                &mut chans,
                &doc.chars,
                &pl.cfg,
            )?;
            let after = (run.io.tin, run.io.tout, run.io.chars, run.io.events);
            progress |= before != after;
        }
        if !progress {
            break;
        }
    }
    if !runs.iter().all(|r| r.io.closed_out) {
        return Err(AccelError::Deadlock {
            subgraph: pl.subgraph,
        });
    }

    // Extraction stages tap the character bus in parallel, so the scan side
    // costs one pass over the document regardless of how many taps exist.
    // The tuple side is bounded by its busiest stage.
    let mut char_cycles = 0u64;
    let mut tuple_cycles = 0u64;
    for (spec, run) in pl.stages.iter().zip(runs.iter()) {
        if spec.counts_chars {
            char_cycles = char_cycles.max(run.io.chars);
        }
        if spec.counts_tuples {
            tuple_cycles = tuple_cycles.max(run.io.tin);
        }
    }
    let busy = SETUP_CYCLES + char_cycles.max(tuple_cycles);

    let mut outputs = BTreeMap::new();
    let mut rows = Vec::with_capacity(pl.stages.len());
    let mut checks = 0u64;
    let mut evictions = 0u64;
    for (spec, run) in pl.stages.iter().zip(runs.into_iter()) {
        let cycles = if spec.counts_chars {
            run.io.chars
        } else if spec.counts_tuples {
            run.io.tin
        } else {
            0
        };
        rows.push((cycles, run.io.tin, run.io.tout));
        checks += run.io.checks;
        evictions += run.io.evictions;
        if let StageKind::Collect { output } = &spec.kind {
            let schema = Arc::clone(&pl.output_schemas[output]);
            outputs.insert(*output, AnnotationSet::from_tuples(schema, run.io.collected));
        }
    }
    Ok((
        DocResult {
            outputs,
            busy_cycles: busy,
        },
        DocStats {
            rows,
            checks,
            evictions,
        },
    ))
}

impl Pipeline {
    /// Run one document with the given host-side tuple inputs.
    pub fn run_doc(
        &self,
        doc: &DocText,
        tuple_inputs: &BTreeMap<NodeId, AnnotationSet>,
    ) -> Result<DocResult, AccelError> {
        exec_doc(self, doc, tuple_inputs).map(|(r, _)| r)
    }

    /// Run a batch of documents, spreading them round robin over the lanes
    /// and aggregating counters into a [`RunStats`].
    pub fn run_package(&self, items: &[PackageItem<'_>]) -> Result<PackageResult, AccelError> {
        let mut stats = RunStats::for_pipeline(self);
        let mut docs = Vec::with_capacity(items.len());
        for (idx, item) in items.iter().enumerate() {
            let (result, doc_stats) = exec_doc(self, item.doc, &item.tuple_inputs)?;
            stats.docs += 1;
            stats.lane_busy[idx % NUM_LANES] += result.busy_cycles;
            stats.setup_cycles += SETUP_CYCLES;
            for (row, (cycles, tin, tout)) in stats.stages.iter_mut().zip(doc_stats.rows) {
                row.cycles += cycles;
                row.tuples_in += tin;
                row.tuples_out += tout;
            }
            stats.sorted_checks += doc_stats.checks;
            stats.evictions += doc_stats.evictions;
            docs.push(result);
        }
        Ok(PackageResult { docs, stats })
    }
}
