//! Application graphs, platforms, and mapping chromosomes.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;

use num_bigint::BigUint;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod schema;
mod validate;

pub use schema::{
    AppGraph, Arbitration, Channel, Platform, ProblemFile, Processor, Task, ValidationOptions, FORMAT_VERSION,
};
pub use validate::{has_errors, validate, Diagnostic, Severity};

/// Abstract time unit used for every cost and simulated duration.
pub type Cycles = u64;

/// Index of a processor in the platform's processor list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProcId(pub usize);

impl fmt::Display for ProcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A chromosome: one processor per task, in gene order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mapping {
    genes: Vec<ProcId>,
}

impl Mapping {
    pub fn new(genes: Vec<ProcId>) -> Self {
        Mapping { genes }
    }

    pub fn genes(&self) -> &[ProcId] {
        &self.genes
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn get(&self, task: usize) -> ProcId {
        self.genes[task]
    }

    pub fn set(&mut self, task: usize, proc: ProcId) {
        self.genes[task] = proc;
    }

    pub fn tasks_on(&self, proc: ProcId) -> impl Iterator<Item = usize> + '_ {
        self.genes
            .iter()
            .enumerate()
            .filter(move |(_, &p)| p == proc)
            .map(|(i, _)| i)
    }
}

/// A task of the compiled problem. Its index is its gene position.
#[derive(Clone, Debug)]
pub struct GeneTask {
    /// `app/task`.
    pub name: String,
    pub app: usize,
    /// Position in the concatenated declaration order of all apps.
    pub declared: usize,
    /// Cycles per firing on each processor, indexed by [`ProcId`].
    pub cost: Vec<Cycles>,
    pub firings: u64,
    pub pinned: Option<ProcId>,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
}

impl GeneTask {
    /// Compute cycles per frame on `proc`.
    pub fn frame_cost(&self, proc: ProcId) -> Cycles {
        self.cost[proc.0] * self.firings
    }

    /// Incident channels, outputs first. A self-loop appears twice.
    pub fn incident(&self) -> impl Iterator<Item = usize> + '_ {
        self.outputs.iter().chain(self.inputs.iter()).copied()
    }
}

#[derive(Clone, Debug)]
pub struct ChannelInfo {
    /// `app/channel`.
    pub name: String,
    pub src: usize,
    pub dst: usize,
    pub produce: u64,
    pub consume: u64,
    pub token_size: u64,
    pub capacity: u64,
    pub initial_tokens: u64,
    pub cost_local: Cycles,
    pub cost_shared: Cycles,
    /// Tokens through the channel per frame.
    pub volume: u64,
}

impl ChannelInfo {
    /// Cost per token for endpoints placed on `a` and `b`.
    pub fn token_cost(&self, a: ProcId, b: ProcId) -> Cycles {
        if a == b {
            self.cost_local
        } else {
            self.cost_shared
        }
    }

    pub fn peer(&self, task: usize) -> usize {
        if self.src == task {
            self.dst
        } else {
            self.src
        }
    }
}

/// Which simulated time the search minimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    /// Steady-state frame execution time (single application).
    Fet,
    /// Total execution time over all frames (several applications).
    Tet,
}

/// A validated mapping problem: applications merged onto one platform, tasks
/// arranged in chromosome order.
#[derive(Clone, Debug)]
pub struct Problem {
    file: ProblemFile,
    tasks: Vec<GeneTask>,
    channels: Vec<ChannelInfo>,
    free_procs: Vec<ProcId>,
    eligible: Vec<bool>,
}

impl Problem {
    /// Validates and compiles a problem description.
    pub fn from_file(file: ProblemFile) -> Result<Self> {
        if file.format != FORMAT_VERSION {
            return Err(Error::UnsupportedFormat(file.format));
        }
        let diags = validate(&file);
        if has_errors(&diags) {
            return Err(Error::InvalidProblem(
                diags.into_iter().filter(Diagnostic::is_error).collect(),
            ));
        }
        Ok(Self::compile(file))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_file(ProblemFile::load(path)?)
    }

    fn compile(file: ProblemFile) -> Self {
        let platform = &file.platform;
        let mut tasks = Vec::new();
        let mut channels = Vec::new();
        let mut declared = 0;
        for (app_idx, app) in file.apps.iter().enumerate() {
            let order = topological_order(app);
            let base = tasks.len();
            let mut gene_of: HashMap<&str, usize> = HashMap::new();
            for (pos, &local) in order.iter().enumerate() {
                gene_of.insert(app.tasks[local].id.as_str(), base + pos);
            }
            let decl_base = declared;
            for &local in &order {
                let t = &app.tasks[local];
                let cost = platform.processors.iter().map(|p| t.compute_cost[&p.kind]).collect();
                let pinned = t
                    .pinned_to
                    .as_ref()
                    .map(|id| ProcId(platform.index_of(id).expect("validated pin")));
                tasks.push(GeneTask {
                    name: format!("{}/{}", app.name, t.id),
                    app: app_idx,
                    declared: decl_base + local,
                    cost,
                    firings: t.firings_per_frame,
                    pinned,
                    inputs: Vec::new(),
                    outputs: Vec::new(),
                });
            }
            declared += app.tasks.len();
            for c in &app.channels {
                let src = gene_of[c.src.as_str()];
                let dst = gene_of[c.dst.as_str()];
                let idx = channels.len();
                tasks[src].outputs.push(idx);
                tasks[dst].inputs.push(idx);
                channels.push(ChannelInfo {
                    name: format!("{}/{}", app.name, c.id),
                    src,
                    dst,
                    produce: c.tokens_per_firing,
                    consume: c.consume(),
                    token_size: c.token_size,
                    capacity: c.capacity,
                    initial_tokens: c.initial_tokens,
                    cost_local: c.cost_local,
                    cost_shared: c.cost_shared,
                    volume: c.tokens_per_firing * tasks[src].firings,
                });
            }
        }
        let eligible: Vec<bool> = platform.processors.iter().map(|p| !p.reserved).collect();
        let free_procs = (0..eligible.len()).filter(|&i| eligible[i]).map(ProcId).collect();
        Problem {
            file,
            tasks,
            channels,
            free_procs,
            eligible,
        }
    }

    pub fn file(&self) -> &ProblemFile {
        &self.file
    }

    pub fn platform(&self) -> &Platform {
        &self.file.platform
    }

    pub fn apps(&self) -> &[AppGraph] {
        &self.file.apps
    }

    pub fn tasks(&self) -> &[GeneTask] {
        &self.tasks
    }

    pub fn task(&self, i: usize) -> &GeneTask {
        &self.tasks[i]
    }

    pub fn channels(&self) -> &[ChannelInfo] {
        &self.channels
    }

    pub fn channel(&self, c: usize) -> &ChannelInfo {
        &self.channels[c]
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn num_procs(&self) -> usize {
        self.file.platform.processors.len()
    }

    pub fn procs(&self) -> impl Iterator<Item = ProcId> {
        (0..self.num_procs()).map(ProcId)
    }

    /// Processors that may run unpinned tasks.
    pub fn free_procs(&self) -> &[ProcId] {
        &self.free_procs
    }

    pub fn is_eligible(&self, p: ProcId) -> bool {
        self.eligible[p.0]
    }

    /// Indices of tasks that are not pinned.
    pub fn free_tasks(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.tasks.len()).filter(|&i| self.tasks[i].pinned.is_none())
    }

    pub fn is_free(&self, task: usize) -> bool {
        self.tasks[task].pinned.is_none()
    }

    pub fn proc_name(&self, p: ProcId) -> &str {
        &self.file.platform.processors[p.0].id
    }

    pub fn objective_kind(&self) -> ObjectiveKind {
        if self.file.apps.len() > 1 {
            ObjectiveKind::Tet
        } else {
            ObjectiveKind::Fet
        }
    }

    /// Task indices sorted by declaration order.
    pub fn declaration_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.tasks.len()).collect();
        order.sort_by_key(|&i| self.tasks[i].declared);
        order
    }

    /// Checks length, processor range, pins and reserved processors.
    pub fn check_mapping(&self, m: &Mapping) -> Result<()> {
        if m.len() != self.tasks.len() {
            return Err(Error::BadMappingLength {
                expected: self.tasks.len(),
                actual: m.len(),
            });
        }
        for (gene, (&p, t)) in m.genes().iter().zip(&self.tasks).enumerate() {
            let reason = if p.0 >= self.num_procs() {
                format!("processor index {} is out of range", p.0)
            } else if let Some(pin) = t.pinned.filter(|&pin| pin != p) {
                format!(
                    "task `{}` is pinned to `{}`, not `{}`",
                    t.name,
                    self.proc_name(pin),
                    self.proc_name(p)
                )
            } else if t.pinned.is_none() && !self.is_eligible(p) {
                format!(
                    "task `{}` cannot run on reserved processor `{}`",
                    t.name,
                    self.proc_name(p)
                )
            } else {
                continue;
            };
            return Err(Error::BadMapping { gene, reason });
        }
        Ok(())
    }

    /// Parses comma-separated processor ids (or indices) in gene order.
    pub fn parse_mapping(&self, text: &str) -> Result<Mapping> {
        let tokens: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        let mut genes = Vec::with_capacity(tokens.len());
        for (gene, tok) in tokens.iter().enumerate() {
            let p = self
                .platform()
                .index_of(tok)
                .or_else(|| tok.parse::<usize>().ok().filter(|&i| i < self.num_procs()))
                .ok_or_else(|| Error::BadMapping {
                    gene,
                    reason: format!("unknown processor `{tok}`"),
                })?;
            genes.push(ProcId(p));
        }
        let m = Mapping::new(genes);
        self.check_mapping(&m)?;
        Ok(m)
    }

    pub fn format_mapping(&self, m: &Mapping) -> String {
        m.genes()
            .iter()
            .map(|&p| self.proc_name(p))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Forces pinned genes back onto their processors.
    pub fn repair(&self, m: &mut Mapping) {
        for (i, t) in self.tasks.iter().enumerate() {
            if let Some(pin) = t.pinned {
                m.set(i, pin);
            }
        }
    }
}

/// Merges applications onto one platform. Task ids are namespaced by
/// application name and genes are concatenated in declaration order.
pub fn merge_apps(apps: Vec<AppGraph>, platform: Platform) -> Result<Problem> {
    if apps.is_empty() {
        return Err(Error::EmptyApps);
    }
    for (i, a) in apps.iter().enumerate() {
        if apps[..i].iter().any(|b| b.name == a.name) {
            return Err(Error::DuplicateAppName(a.name.clone()));
        }
    }
    Problem::from_file(ProblemFile::new(apps, platform))
}

/// Number of distinct mappings: free processors to the power of free tasks.
pub fn mapping_space_size(problem: &Problem) -> BigUint {
    let free_tasks = problem.free_tasks().count() as u32;
    BigUint::from(problem.free_procs().len()).pow(free_tasks)
}

/// Draws every free gene uniformly over the free processors.
pub fn random_mapping<R: Rng + ?Sized>(problem: &Problem, rng: &mut R) -> Mapping {
    let free = problem.free_procs();
    Mapping::new(
        problem
            .tasks()
            .iter()
            .map(|t| t.pinned.unwrap_or_else(|| free[rng.gen_range(0..free.len())]))
            .collect(),
    )
}

/// Topological order over the strongly-connected-component condensation.
/// Components become ready in order of their lowest declaration index; tasks
/// inside a component keep declaration order.
fn topological_order(app: &AppGraph) -> Vec<usize> {
    let mut g = DiGraph::<usize, ()>::new();
    let nodes: Vec<_> = (0..app.tasks.len()).map(|i| g.add_node(i)).collect();
    let index: HashMap<&str, usize> = app.tasks.iter().enumerate().map(|(i, t)| (t.id.as_str(), i)).collect();
    for c in &app.channels {
        g.add_edge(nodes[index[c.src.as_str()]], nodes[index[c.dst.as_str()]], ());
    }

    let mut sccs: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .map(|comp| {
            let mut members: Vec<usize> = comp.into_iter().map(|n| g[n]).collect();
            members.sort_unstable();
            members
        })
        .collect();
    sccs.sort_by_key(|c| c[0]);
    let mut comp_of = vec![0; app.tasks.len()];
    for (ci, comp) in sccs.iter().enumerate() {
        for &t in comp {
            comp_of[t] = ci;
        }
    }

    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); sccs.len()];
    let mut indegree = vec![0usize; sccs.len()];
    for c in &app.channels {
        let (a, b) = (comp_of[index[c.src.as_str()]], comp_of[index[c.dst.as_str()]]);
        if a != b {
            succ[a].push(b);
            indegree[b] += 1;
        }
    }
    // components are numbered by lowest member, so the heap pops the earliest declared
    let mut ready: BinaryHeap<Reverse<usize>> = (0..sccs.len()).filter(|&c| indegree[c] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(app.tasks.len());
    while let Some(Reverse(c)) = ready.pop() {
        order.extend_from_slice(&sccs[c]);
        for &s in &succ[c] {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                ready.push(Reverse(s));
            }
        }
    }
    debug_assert_eq!(order.len(), app.tasks.len());
    order
}

#[cfg(test)]
pub(crate) mod testutil {
    use std::collections::BTreeMap;

    use super::*;

    pub fn costs(pairs: &[(&str, Cycles)]) -> BTreeMap<String, Cycles> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    pub fn task(id: &str, cost: Cycles) -> Task {
        Task {
            id: id.into(),
            compute_cost: costs(&[("risc", cost)]),
            pinned_to: None,
            firings_per_frame: 1,
        }
    }

    pub fn channel(id: &str, src: &str, dst: &str, local: Cycles, shared: Cycles, cap: u64) -> Channel {
        Channel {
            id: id.into(),
            src: src.into(),
            dst: dst.into(),
            tokens_per_firing: 1,
            consume_per_firing: None,
            token_size: 1,
            capacity: cap,
            initial_tokens: 0,
            cost_local: local,
            cost_shared: shared,
        }
    }

    pub fn homogeneous(n: usize) -> Platform {
        Platform {
            processors: (0..n)
                .map(|i| Processor {
                    id: format!("pe{i}"),
                    kind: "risc".into(),
                    reserved: false,
                })
                .collect(),
            bus_word_cycles: 0,
            arbitration: Arbitration::Fcfs,
        }
    }

    /// `a -> b` on two identical processors.
    pub fn pipeline2(ta: Cycles, tb: Cycles, local: Cycles, shared: Cycles, cap: u64) -> ProblemFile {
        ProblemFile::new(
            vec![AppGraph {
                name: "app".into(),
                tasks: vec![task("a", ta), task("b", tb)],
                channels: vec![channel("ab", "a", "b", local, shared, cap)],
            }],
            homogeneous(2),
        )
    }

    pub fn single_task(t: Cycles, procs: usize) -> ProblemFile {
        ProblemFile::new(
            vec![AppGraph {
                name: "app".into(),
                tasks: vec![task("a", t)],
                channels: vec![],
            }],
            homogeneous(procs),
        )
    }

    pub fn independent(costs_: &[Cycles], procs: usize) -> ProblemFile {
        ProblemFile::new(
            vec![AppGraph {
                name: "app".into(),
                tasks: costs_
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| task(&format!("t{i}"), c))
                    .collect(),
                channels: vec![],
            }],
            homogeneous(procs),
        )
    }

    pub fn problem(file: ProblemFile) -> Problem {
        Problem::from_file(file).expect("valid test problem")
    }

    pub fn mapping(genes: &[usize]) -> Mapping {
        Mapping::new(genes.iter().map(|&g| ProcId(g)).collect())
    }
}
