//! Deterministic discrete-event simulation of a mapped process network.
//!
//! Every task fires repeatedly in three phases: read its input tokens,
//! compute, write its output tokens. Reads block while a FIFO holds too few
//! tokens and writes block while it lacks space. Tasks on one processor
//! share it round-robin, one phase at a time, without preemption. Token
//! traffic between processors additionally crosses the single shared bus,
//! which serves transfer requests first-come-first-served.
//!
//! A task keeps firing past the last measured frame while any task
//! connected to it through channels has not completed that frame, so the
//! measured frames see steady-state contention instead of a draining
//! pipeline. Unconnected parts (separate applications) stop independently.
//!
//! Events at equal times are ordered by (kind, processor, task declaration
//! order), so a run depends on nothing but its inputs.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::io::Write;

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{pusage, UsageVector};
use crate::model::{Cycles, Diagnostic, Mapping, ObjectiveKind, Problem, ProcId};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerPolicy {
    #[default]
    RoundRobin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default = "default_frames")]
    pub frames: u64,
    #[serde(default = "default_warmup")]
    pub warmup_frames: u64,
    /// Processed-event budget; a run still unfinished after this many events
    /// is reported as deadlocked.
    #[serde(default = "default_horizon")]
    pub deadlock_horizon: u64,
    #[serde(default)]
    pub scheduler: SchedulerPolicy,
    /// Check FIFO occupancy bounds after every token operation.
    #[serde(default)]
    pub check_invariants: bool,
}

fn default_frames() -> u64 {
    12
}

fn default_warmup() -> u64 {
    2
}

fn default_horizon() -> u64 {
    50_000_000
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            frames: default_frames(),
            warmup_frames: default_warmup(),
            deadlock_horizon: default_horizon(),
            scheduler: SchedulerPolicy::RoundRobin,
            check_invariants: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 || self.frames <= self.warmup_frames {
            return Err(Error::BadConfig(format!(
                "need frames > warmup_frames >= 0, got frames={} warmup_frames={}",
                self.frames, self.warmup_frames
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    /// Steady-state cycles per frame.
    pub fet: f64,
    /// Completion time of the last frame.
    pub tet: Cycles,
    /// Cycles between the end of warm-up and the end of the last frame.
    pub window: Cycles,
    pub usage: UsageVector,
    pub events: u64,
    pub deadlocked: bool,
}

impl EvalResult {
    /// Time to minimize; infinite for a deadlocked run.
    pub fn objective(&self, kind: ObjectiveKind) -> f64 {
        if self.deadlocked {
            return f64::INFINITY;
        }
        match kind {
            ObjectiveKind::Fet => self.fet,
            ObjectiveKind::Tet => self.tet as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TracePhase {
    ReadStart,
    ReadEnd,
    ComputeStart,
    ComputeEnd,
    WriteStart,
    BusRequest,
    BusGrant,
    WriteEnd,
}

impl TracePhase {
    pub fn as_str(self) -> &'static str {
        match self {
            TracePhase::ReadStart => "read_start",
            TracePhase::ReadEnd => "read_end",
            TracePhase::ComputeStart => "compute_start",
            TracePhase::ComputeEnd => "compute_end",
            TracePhase::WriteStart => "write_start",
            TracePhase::BusRequest => "bus_request",
            TracePhase::BusGrant => "bus_grant",
            TracePhase::WriteEnd => "write_end",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: Cycles,
    pub proc: ProcId,
    pub task: usize,
    pub phase: TracePhase,
    pub channel: Option<usize>,
}

pub trait TraceSink {
    fn record(&mut self, ev: TraceEvent);
}

/// Discards everything.
pub struct NoTrace;

impl TraceSink for NoTrace {
    #[inline]
    fn record(&mut self, _ev: TraceEvent) {}
}

impl TraceSink for Vec<TraceEvent> {
    fn record(&mut self, ev: TraceEvent) {
        self.push(ev);
    }
}

/// Writes the trace as CSV lines `time,processor,task,phase,channel`, with
/// a header line first. The channel column is empty for compute events and
/// bus events.
pub struct CsvTrace<'p, W: Write> {
    problem: &'p Problem,
    out: W,
    error: Option<std::io::Error>,
}

impl<'p, W: Write> CsvTrace<'p, W> {
    pub fn new(problem: &'p Problem, mut out: W) -> Self {
        let error = writeln!(out, "time,processor,task,phase,channel").err();
        CsvTrace { problem, out, error }
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> TraceSink for CsvTrace<'_, W> {
    fn record(&mut self, ev: TraceEvent) {
        if self.error.is_some() {
            return;
        }
        let channel = ev.channel.map(|c| self.problem.channel(c).name.as_str()).unwrap_or("");
        self.error = writeln!(
            self.out,
            "{},{},{},{},{}",
            ev.time,
            self.problem.proc_name(ev.proc),
            self.problem.task(ev.task).name,
            ev.phase.as_str(),
            channel
        )
        .err();
    }
}

pub fn simulate(problem: &Problem, mapping: &Mapping, cfg: &SimConfig) -> Result<EvalResult> {
    simulate_traced(problem, mapping, cfg, &mut NoTrace)
}

pub fn simulate_traced<T: TraceSink>(
    problem: &Problem,
    mapping: &Mapping,
    cfg: &SimConfig,
    trace: &mut T,
) -> Result<EvalResult> {
    cfg.validate()?;
    problem.check_mapping(mapping)?;
    let mut sim = Engine::new(problem, mapping, cfg, trace);
    sim.run();
    let events = sim.events;
    let deadlocked = sim.remaining > 0;
    let frame_end = sim.frame_end;
    let usage = pusage(problem, mapping);
    if deadlocked {
        return Ok(EvalResult {
            fet: 0.0,
            tet: sim.now,
            window: 0,
            usage,
            events,
            deadlocked,
        });
    }
    let (f, w) = (cfg.frames as usize, cfg.warmup_frames as usize);
    let window = frame_end[f] - frame_end[w];
    let result = EvalResult {
        fet: window as f64 / (f - w) as f64,
        tet: frame_end[f],
        window,
        usage,
        events,
        deadlocked,
    };
    debug_assert!(result.fet > 0.0);
    debug_assert!(result.tet as f64 >= result.fet);
    Ok(result)
}

/// Per-frame compute cycles of the busiest processor.
pub fn compute_bound(problem: &Problem, mapping: &Mapping) -> Cycles {
    let mut loads = vec![0; problem.num_procs()];
    for (i, t) in problem.tasks().iter().enumerate() {
        let p = mapping.get(i);
        loads[p.0] += t.frame_cost(p);
    }
    loads.into_iter().max().unwrap_or(0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Read,
    Compute,
    Write,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    PhaseEnd,
    BusDone,
    BusRequest,
}

impl EventKind {
    fn rank(self) -> u8 {
        match self {
            EventKind::PhaseEnd | EventKind::BusDone => 0,
            EventKind::BusRequest => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    time: Cycles,
    rank: u8,
    proc: usize,
    declared: usize,
    task: usize,
    kind: EventKind,
}

#[derive(Clone, Debug)]
struct TaskState {
    next: Phase,
    firings: u64,
    target: u64,
    busy: bool,
    bus_cycles: Cycles,
    component: usize,
}

struct Engine<'a, T: TraceSink> {
    problem: &'a Problem,
    mapping: &'a Mapping,
    check: bool,
    horizon: u64,
    trace: &'a mut T,
    tokens: Vec<u64>,
    occupied: Vec<u64>,
    tasks: Vec<TaskState>,
    proc_tasks: Vec<Vec<usize>>,
    proc_busy: Vec<bool>,
    rr: Vec<usize>,
    bus_busy: bool,
    bus_queue: VecDeque<usize>,
    queue: BinaryHeap<Reverse<Event>>,
    now: Cycles,
    frame_end: Vec<Cycles>,
    remaining: usize,
    /// Tasks short of the last frame, per connected component.
    pending: Vec<usize>,
    events: u64,
}

impl<'a, T: TraceSink> Engine<'a, T> {
    fn new(problem: &'a Problem, mapping: &'a Mapping, cfg: &SimConfig, trace: &'a mut T) -> Self {
        let mut proc_tasks = vec![Vec::new(); problem.num_procs()];
        for i in problem.declaration_order() {
            proc_tasks[mapping.get(i).0].push(i);
        }
        let mut uf = UnionFind::<usize>::new(problem.num_tasks());
        for c in problem.channels() {
            uf.union(c.src, c.dst);
        }
        let labels = uf.into_labeling();
        let mut pending = vec![0; problem.num_tasks()];
        for &l in &labels {
            pending[l] += 1;
        }
        let tasks = problem
            .tasks()
            .iter()
            .zip(&labels)
            .map(|(t, &component)| TaskState {
                next: if t.inputs.is_empty() {
                    Phase::Compute
                } else {
                    Phase::Read
                },
                firings: 0,
                target: t.firings * cfg.frames,
                busy: false,
                bus_cycles: 0,
                component,
            })
            .collect();
        Engine {
            problem,
            mapping,
            check: cfg.check_invariants,
            horizon: cfg.deadlock_horizon,
            trace,
            tokens: problem.channels().iter().map(|c| c.initial_tokens).collect(),
            occupied: problem.channels().iter().map(|c| c.initial_tokens).collect(),
            tasks,
            proc_busy: vec![false; problem.num_procs()],
            rr: vec![0; problem.num_procs()],
            proc_tasks,
            bus_busy: false,
            bus_queue: VecDeque::new(),
            queue: BinaryHeap::new(),
            now: 0,
            frame_end: vec![0; cfg.frames as usize + 1],
            remaining: problem.num_tasks(),
            pending,
            events: 0,
        }
    }

    fn run(&mut self) {
        self.dispatch();
        while let Some(&Reverse(first)) = self.queue.peek() {
            self.now = first.time;
            while let Some(&Reverse(ev)) = self.queue.peek() {
                if ev.time != self.now {
                    break;
                }
                self.queue.pop();
                self.events += 1;
                self.handle(ev);
            }
            if self.remaining == 0 || self.events > self.horizon {
                return;
            }
            self.grant_bus();
            self.dispatch();
        }
    }

    fn push(&mut self, time: Cycles, task: usize, kind: EventKind) {
        let ev = Event {
            time,
            rank: kind.rank(),
            proc: self.mapping.get(task).0,
            declared: self.problem.task(task).declared,
            task,
            kind,
        };
        self.queue.push(Reverse(ev));
    }

    fn emit(&mut self, task: usize, phase: TracePhase, channel: Option<usize>) {
        self.trace.record(TraceEvent {
            time: self.now,
            proc: self.mapping.get(task),
            task,
            phase,
            channel,
        });
    }

    fn ready(&self, task: usize) -> bool {
        let st = &self.tasks[task];
        if st.busy || (st.firings >= st.target && self.pending[st.component] == 0) {
            return false;
        }
        let t = self.problem.task(task);
        match st.next {
            Phase::Compute => true,
            Phase::Read => t
                .inputs
                .iter()
                .all(|&c| self.tokens[c] >= self.problem.channel(c).consume),
            Phase::Write => t.outputs.iter().all(|&c| {
                let ch = self.problem.channel(c);
                ch.capacity - self.occupied[c] >= ch.produce
            }),
        }
    }

    fn dispatch(&mut self) {
        for p in 0..self.proc_busy.len() {
            if self.proc_busy[p] {
                continue;
            }
            let n = self.proc_tasks[p].len();
            for k in 0..n {
                let slot = (self.rr[p] + k) % n;
                let task = self.proc_tasks[p][slot];
                if self.ready(task) {
                    self.rr[p] = (slot + 1) % n;
                    self.proc_busy[p] = true;
                    self.start(task);
                    break;
                }
            }
        }
    }

    fn token_cost(&self, c: usize, task: usize) -> Cycles {
        let ch = self.problem.channel(c);
        let peer = ch.peer(task);
        ch.token_cost(self.mapping.get(task), self.mapping.get(peer))
    }

    fn start(&mut self, task: usize) {
        let problem = self.problem;
        let t = problem.task(task);
        let here = self.mapping.get(task);
        self.tasks[task].busy = true;
        match self.tasks[task].next {
            Phase::Read => {
                let mut d = 0;
                for &c in &t.inputs {
                    let ch = problem.channel(c);
                    self.tokens[c] -= ch.consume;
                    d += ch.consume * self.token_cost(c, task);
                    self.emit(task, TracePhase::ReadStart, Some(c));
                    self.check_channel(c);
                }
                self.push(self.now + d, task, EventKind::PhaseEnd);
            }
            Phase::Compute => {
                self.emit(task, TracePhase::ComputeStart, None);
                self.push(self.now + t.cost[here.0], task, EventKind::PhaseEnd);
            }
            Phase::Write => {
                let bus_word = problem.platform().bus_word_cycles;
                let mut d = 0;
                let mut bus = 0;
                for &c in &t.outputs {
                    let ch = problem.channel(c);
                    self.occupied[c] += ch.produce;
                    d += ch.produce * self.token_cost(c, task);
                    if self.mapping.get(ch.dst) != here {
                        bus += ch.produce * ch.token_size * bus_word;
                    }
                    self.emit(task, TracePhase::WriteStart, Some(c));
                    self.check_channel(c);
                }
                self.tasks[task].bus_cycles = bus;
                let kind = if bus > 0 {
                    EventKind::BusRequest
                } else {
                    EventKind::PhaseEnd
                };
                self.push(self.now + d, task, kind);
            }
        }
    }

    fn handle(&mut self, ev: Event) {
        let task = ev.task;
        match ev.kind {
            EventKind::BusRequest => {
                self.emit(task, TracePhase::BusRequest, None);
                self.bus_queue.push_back(task);
            }
            EventKind::BusDone => {
                self.bus_busy = false;
                self.end_phase(task);
            }
            EventKind::PhaseEnd => self.end_phase(task),
        }
    }

    fn grant_bus(&mut self) {
        if self.bus_busy {
            return;
        }
        if let Some(task) = self.bus_queue.pop_front() {
            self.bus_busy = true;
            self.emit(task, TracePhase::BusGrant, None);
            let d = self.tasks[task].bus_cycles;
            self.push(self.now + d, task, EventKind::BusDone);
        }
    }

    fn end_phase(&mut self, task: usize) {
        let problem = self.problem;
        let t = problem.task(task);
        let p = self.mapping.get(task).0;
        self.proc_busy[p] = false;
        self.tasks[task].busy = false;
        match self.tasks[task].next {
            Phase::Read => {
                for &c in &t.inputs {
                    self.occupied[c] -= problem.channel(c).consume;
                    self.emit(task, TracePhase::ReadEnd, Some(c));
                    self.check_channel(c);
                }
                self.tasks[task].next = Phase::Compute;
            }
            Phase::Compute => {
                self.emit(task, TracePhase::ComputeEnd, None);
                if t.outputs.is_empty() {
                    self.finish_firing(task);
                } else {
                    self.tasks[task].next = Phase::Write;
                }
            }
            Phase::Write => {
                for &c in &t.outputs {
                    self.tokens[c] += problem.channel(c).produce;
                    self.emit(task, TracePhase::WriteEnd, Some(c));
                    self.check_channel(c);
                }
                self.finish_firing(task);
            }
        }
    }

    fn finish_firing(&mut self, task: usize) {
        let t = self.problem.task(task);
        let st = &mut self.tasks[task];
        st.firings += 1;
        st.next = if t.inputs.is_empty() {
            Phase::Compute
        } else {
            Phase::Read
        };
        if st.firings.is_multiple_of(t.firings) && st.firings <= st.target {
            let frame = (st.firings / t.firings) as usize;
            self.frame_end[frame] = self.frame_end[frame].max(self.now);
        }
        if st.firings == st.target {
            self.pending[st.component] -= 1;
            self.remaining -= 1;
        }
    }

    fn check_channel(&self, c: usize) {
        let ok = self.tokens[c] <= self.occupied[c] && self.occupied[c] <= self.problem.channel(c).capacity;
        if self.check {
            assert!(
                ok,
                "channel `{}` out of bounds at t={}: tokens={} occupied={}",
                self.problem.channel(c).name,
                self.now,
                self.tokens[c],
                self.occupied[c]
            );
        } else {
            debug_assert!(ok);
        }
    }
}

/// Warns about graphs that cannot complete one frame under their FIFO
/// capacities and initial tokens. Every task is fired as often as one frame
/// requires, whenever its inputs hold enough tokens and its outputs enough
/// space; tasks left short are reported. Each FIFO has one reader and one
/// writer, so firing order does not change the outcome.
pub fn check_deadlock_free(problem: &Problem) -> Vec<Diagnostic> {
    let chans = problem.channels();
    let mut tokens: Vec<u64> = chans.iter().map(|c| c.initial_tokens).collect();
    let mut left: Vec<u64> = problem.tasks().iter().map(|t| t.firings).collect();
    loop {
        let mut progress = false;
        for i in problem.declaration_order() {
            let t = problem.task(i);
            while left[i] > 0
                && t.inputs.iter().all(|&c| tokens[c] >= chans[c].consume)
                && t.outputs.iter().all(|&c| {
                    let ch = &chans[c];
                    let after_reads = tokens[c] - if ch.dst == i { ch.consume } else { 0 };
                    ch.capacity - after_reads >= ch.produce
                })
            {
                for &c in &t.inputs {
                    tokens[c] -= chans[c].consume;
                }
                for &c in &t.outputs {
                    tokens[c] += chans[c].produce;
                }
                left[i] -= 1;
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }
    let blocked: Vec<&str> = (0..problem.num_tasks())
        .filter(|&i| left[i] > 0)
        .map(|i| problem.task(i).name.as_str())
        .collect();
    if blocked.is_empty() {
        Vec::new()
    } else {
        vec![Diagnostic::warning(
            "W_POSSIBLE_DEADLOCK",
            format!(
                "tasks cannot complete one frame with the given capacities and initial tokens: {}",
                blocked.join(", ")
            ),
        )]
    }
}
