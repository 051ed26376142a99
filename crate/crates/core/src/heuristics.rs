//! One-shot constructive mappers: MCT, MET, Min-Min and an ORB-style
//! balancer.
//!
//! Completion times follow the usage metric: a task's cost on a processor is
//! its compute time plus its side of every channel to an already placed
//! peer. Peers not yet placed are unknown and contribute nothing.

use serde::{Deserialize, Serialize};

use crate::metrics::LoadState;
use crate::model::{Cycles, Mapping, Problem, ProcId};

/// Whether completion-time estimates include channel costs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MctCost {
    #[default]
    WithCommunication,
    ComputeOnly,
}

impl MctCost {
    fn with_comm(self) -> bool {
        self == MctCost::WithCommunication
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    Mct,
    Met,
    #[serde(rename = "minmin")]
    MinMin,
    Orb,
}

impl Heuristic {
    pub fn name(self) -> &'static str {
        match self {
            Heuristic::Mct => "mct",
            Heuristic::Met => "met",
            Heuristic::MinMin => "minmin",
            Heuristic::Orb => "orb",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mct" => Some(Heuristic::Mct),
            "met" => Some(Heuristic::Met),
            "minmin" | "min_min" | "min-min" => Some(Heuristic::MinMin),
            "orb" => Some(Heuristic::Orb),
            _ => None,
        }
    }

    /// MCT runs over the gene order here.
    pub fn run(self, problem: &Problem) -> Mapping {
        match self {
            Heuristic::Mct => {
                let order: Vec<usize> = (0..problem.num_tasks()).collect();
                mct(problem, &order)
            }
            Heuristic::Met => met(problem),
            Heuristic::MinMin => min_min(problem),
            Heuristic::Orb => orb_like(problem),
        }
    }
}

/// Minimum completion time: walks `order` and puts each task where
/// `ready_time + cost` is smallest, lowest processor id on ties.
pub fn mct(problem: &Problem, order: &[usize]) -> Mapping {
    mct_with(problem, order, MctCost::WithCommunication)
}

pub fn mct_with(problem: &Problem, order: &[usize], cost: MctCost) -> Mapping {
    debug_assert!(is_permutation(order, problem.num_tasks()));
    let mut state = LoadState::new(problem);
    for &task in order {
        let at = best_completion(problem, &state, task, cost).0;
        state.place(problem, task, at);
    }
    state.into_mapping()
}

/// Best (processor, completion time) for `task` given the current loads.
fn best_completion(problem: &Problem, state: &LoadState, task: usize, cost: MctCost) -> (ProcId, Cycles) {
    let completion = |p: ProcId| state.ready_time[p.0] + state.partial_cost(problem, task, p, cost.with_comm());
    if let Some(pin) = problem.task(task).pinned {
        return (pin, completion(pin));
    }
    problem
        .free_procs()
        .iter()
        .map(|&p| (p, completion(p)))
        .min_by_key(|&(p, c)| (c, p))
        .expect("at least one free processor")
}

/// Minimum execution time: each task on its fastest processor, ignoring load.
pub fn met(problem: &Problem) -> Mapping {
    Mapping::new(
        problem
            .tasks()
            .iter()
            .map(|t| {
                t.pinned.unwrap_or_else(|| {
                    *problem
                        .free_procs()
                        .iter()
                        .min_by_key(|p| (t.cost[p.0], **p))
                        .expect("at least one free processor")
                })
            })
            .collect(),
    )
}

/// Repeatedly commits the unplaced task whose best completion time is the
/// smallest; ties go to the earlier declared task, then the lower processor.
pub fn min_min(problem: &Problem) -> Mapping {
    let mut state = LoadState::new(problem);
    let mut unplaced = problem.declaration_order();
    while !unplaced.is_empty() {
        let (slot, at, _) = unplaced
            .iter()
            .enumerate()
            .map(|(slot, &task)| {
                let (p, c) = best_completion(problem, &state, task, MctCost::WithCommunication);
                (slot, p, c)
            })
            .min_by_key(|&(slot, p, c)| (c, slot, p))
            .expect("non-empty");
        let task = unplaced.remove(slot);
        state.place(problem, task, at);
    }
    state.into_mapping()
}

/// Approximation of output-rate balancing. Walks the gene order and places
/// each task where the resulting bottleneck load (which bounds the output
/// rate) is lowest, then where the load spread over free processors is
/// lowest, then on the lowest id.
pub fn orb_like(problem: &Problem) -> Mapping {
    let mut state = LoadState::new(problem);
    for task in 0..problem.num_tasks() {
        let at = match problem.task(task).pinned {
            Some(pin) => pin,
            None => *problem
                .free_procs()
                .iter()
                .min_by_key(|&&p| {
                    let loads = state.loads_if(problem, task, p);
                    let max = loads.iter().copied().max().unwrap_or(0);
                    let free = problem.free_procs().iter().map(|q| loads[q.0]);
                    let spread = free.clone().max().unwrap_or(0) - free.min().unwrap_or(0);
                    (max, spread, p)
                })
                .expect("at least one free processor"),
        };
        state.place(problem, task, at);
    }
    state.into_mapping()
}

fn is_permutation(order: &[usize], n: usize) -> bool {
    let mut seen = vec![false; n];
    order.len() == n && order.iter().all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
}
