//! Analytic load metrics over a mapping.
//!
//! Channel costs are charged to both endpoints: the writer pays for writing
//! each token and the reader pays for reading it, at the local-memory rate
//! when the two tasks share a processor and the shared-memory rate
//! otherwise. All quantities are per frame, so a task firing twice per frame
//! contributes twice its per-firing compute cost.

use crate::error::{Error, Result};
use crate::model::{Cycles, Mapping, Problem, ProcId};

/// Per-processor load in cycles per frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UsageVector {
    loads: Vec<Cycles>,
    eligible: Vec<bool>,
}

impl UsageVector {
    pub fn new(loads: Vec<Cycles>, eligible: Vec<bool>) -> Self {
        assert_eq!(loads.len(), eligible.len());
        UsageVector { loads, eligible }
    }

    pub fn loads(&self) -> &[Cycles] {
        &self.loads
    }

    pub fn get(&self, p: ProcId) -> Cycles {
        self.loads[p.0]
    }

    pub fn total(&self) -> Cycles {
        self.loads.iter().sum()
    }

    pub fn makespan(&self) -> Cycles {
        self.loads.iter().copied().max().unwrap_or(0)
    }

    /// Most loaded processor; lowest index on ties.
    pub fn argmax(&self) -> ProcId {
        let mut best = 0;
        for (i, &l) in self.loads.iter().enumerate() {
            if l > self.loads[best] {
                best = i;
            }
        }
        ProcId(best)
    }

    /// Least loaded processor among those that accept free tasks.
    pub fn argmin_eligible(&self) -> Option<ProcId> {
        let mut best: Option<usize> = None;
        for (i, &l) in self.loads.iter().enumerate() {
            if self.eligible[i] && best.is_none_or(|b| l < self.loads[b]) {
                best = Some(i);
            }
        }
        best.map(ProcId)
    }

    fn eligible_loads(&self) -> impl Iterator<Item = Cycles> + '_ {
        self.loads
            .iter()
            .zip(&self.eligible)
            .filter(|(_, &e)| e)
            .map(|(&l, _)| l)
    }

    /// Spread (max - min) over the processors that accept free tasks.
    pub fn imbalance(&self) -> Cycles {
        let max = self.eligible_loads().max();
        let min = self.eligible_loads().min();
        match (max, min) {
            (Some(a), Some(b)) => a - b,
            _ => 0,
        }
    }

    /// Population variance over the processors that accept free tasks.
    pub fn variance(&self) -> f64 {
        let n = self.eligible_loads().count();
        if n == 0 {
            return 0.0;
        }
        let mean = self.eligible_loads().map(|l| l as f64).sum::<f64>() / n as f64;
        self.eligible_loads().map(|l| (l as f64 - mean).powi(2)).sum::<f64>() / n as f64
    }
}

pub fn makespan(usage: &UsageVector) -> Cycles {
    usage.makespan()
}

pub fn imbalance(usage: &UsageVector) -> Cycles {
    usage.imbalance()
}

/// Processor usage of a complete mapping.
pub fn pusage(problem: &Problem, mapping: &Mapping) -> UsageVector {
    let mut loads = vec![0; problem.num_procs()];
    for (i, t) in problem.tasks().iter().enumerate() {
        let p = mapping.get(i);
        loads[p.0] += t.frame_cost(p);
    }
    for c in problem.channels() {
        let (a, b) = (mapping.get(c.src), mapping.get(c.dst));
        let cost = c.volume * c.token_cost(a, b);
        loads[a.0] += cost;
        loads[b.0] += cost;
    }
    UsageVector::new(loads, eligibility(problem))
}

pub(crate) fn eligibility(problem: &Problem) -> Vec<bool> {
    problem.procs().map(|p| problem.is_eligible(p)).collect()
}

/// Cost of `task` if it ran on `at`, with every other task where `mapping`
/// puts it: compute plus the task's side of each incident channel.
pub fn placement_cost(problem: &Problem, mapping: &Mapping, task: usize, at: ProcId) -> Cycles {
    let t = problem.task(task);
    let mut cost = t.frame_cost(at);
    for c in t.incident() {
        let ch = problem.channel(c);
        let peer = ch.peer(task);
        let peer_at = if peer == task { at } else { mapping.get(peer) };
        cost += ch.volume * ch.token_cost(at, peer_at);
    }
    cost
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MigrationBenefit {
    pub task: usize,
    pub from: ProcId,
    pub to: ProcId,
    pub cost_from: Cycles,
    pub cost_to: Cycles,
    /// `cost_from - cost_to`; positive when the move makes the task cheaper.
    pub benefit: i64,
}

pub fn migration_benefit(
    problem: &Problem,
    mapping: &Mapping,
    task: usize,
    from: ProcId,
    to: ProcId,
) -> Result<MigrationBenefit> {
    if mapping.get(task) != from {
        return Err(Error::NotMappedOnFrom {
            task: problem.task(task).name.clone(),
            from: problem.proc_name(from).to_string(),
        });
    }
    if from == to {
        return Err(Error::SameProcessor(problem.proc_name(from).to_string()));
    }
    Ok(benefit_unchecked(problem, mapping, task, from, to))
}

pub(crate) fn benefit_unchecked(
    problem: &Problem,
    mapping: &Mapping,
    task: usize,
    from: ProcId,
    to: ProcId,
) -> MigrationBenefit {
    let cost_from = placement_cost(problem, mapping, task, from);
    let cost_to = placement_cost(problem, mapping, task, to);
    MigrationBenefit {
        task,
        from,
        to,
        cost_from,
        cost_to,
        benefit: cost_from as i64 - cost_to as i64,
    }
}

/// Usage after moving `task` to `to`, derived from `usage` without a full
/// recomputation. Besides the two endpoints of the move, every processor
/// hosting a peer of the task sees its side of the shared channel change
/// between the local and the shared rate.
pub fn usage_after_migration(
    problem: &Problem,
    mapping: &Mapping,
    usage: &UsageVector,
    task: usize,
    to: ProcId,
) -> UsageVector {
    let from = mapping.get(task);
    let mut next = usage.clone();
    if from == to {
        return next;
    }
    next.loads[from.0] -= placement_cost(problem, mapping, task, from);
    next.loads[to.0] += placement_cost(problem, mapping, task, to);
    for c in problem.task(task).incident() {
        let ch = problem.channel(c);
        let peer = ch.peer(task);
        if peer == task {
            continue;
        }
        let at = mapping.get(peer);
        let before = ch.volume * ch.token_cost(from, at);
        let after = ch.volume * ch.token_cost(to, at);
        next.loads[at.0] = next.loads[at.0] + after - before;
    }
    next
}

/// Load bookkeeping for constructors that place tasks one at a time. Only
/// channels whose two endpoints are placed are charged.
#[derive(Clone, Debug)]
pub struct LoadState {
    pub ready_time: Vec<Cycles>,
    placed: Vec<Option<ProcId>>,
}

impl LoadState {
    pub fn new(problem: &Problem) -> Self {
        LoadState {
            ready_time: vec![0; problem.num_procs()],
            placed: vec![None; problem.num_tasks()],
        }
    }

    pub fn placement(&self, task: usize) -> Option<ProcId> {
        self.placed[task]
    }

    /// Task cost on `at` counting compute and channels to placed peers only;
    /// with `with_comm = false` only compute counts.
    pub fn partial_cost(&self, problem: &Problem, task: usize, at: ProcId, with_comm: bool) -> Cycles {
        let t = problem.task(task);
        let mut cost = t.frame_cost(at);
        if with_comm {
            for c in t.incident() {
                let ch = problem.channel(c);
                let peer = ch.peer(task);
                let peer_at = if peer == task { Some(at) } else { self.placed[peer] };
                if let Some(q) = peer_at {
                    cost += ch.volume * ch.token_cost(at, q);
                }
            }
        }
        cost
    }

    /// Loads after hypothetically placing `task` on `at`.
    pub fn loads_if(&self, problem: &Problem, task: usize, at: ProcId) -> Vec<Cycles> {
        let mut loads = self.ready_time.clone();
        self.charge(problem, task, at, &mut loads);
        loads
    }

    pub fn place(&mut self, problem: &Problem, task: usize, at: ProcId) {
        let mut loads = std::mem::take(&mut self.ready_time);
        self.charge(problem, task, at, &mut loads);
        self.ready_time = loads;
        self.placed[task] = Some(at);
    }

    fn charge(&self, problem: &Problem, task: usize, at: ProcId, loads: &mut [Cycles]) {
        loads[at.0] += self.partial_cost(problem, task, at, true);
        for c in problem.task(task).incident() {
            let ch = problem.channel(c);
            let peer = ch.peer(task);
            if peer == task {
                continue;
            }
            if let Some(q) = self.placed[peer] {
                loads[q.0] += ch.volume * ch.token_cost(at, q);
            }
        }
    }

    pub fn into_mapping(self) -> Mapping {
        Mapping::new(self.placed.into_iter().map(|p| p.expect("every task placed")).collect())
    }
}
