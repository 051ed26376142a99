//! Mutation operators.
//!
//! [`mutate_beg`] is the heuristic-guided operator: it first tries task
//! migrations off the busiest processor, then whole-processor task swaps,
//! and falls back to rebuilding the chromosome with MCT over a shuffled task
//! order.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::heuristics::{mct_with, MctCost};
use crate::metrics::{benefit_unchecked, placement_cost, pusage, usage_after_migration, UsageVector};
use crate::model::{Mapping, Problem, ProcId};

/// Redraws each free gene with probability `p_gene`.
pub fn mutate_gene_random<R: Rng + ?Sized>(problem: &Problem, m: &Mapping, p_gene: f64, rng: &mut R) -> Mapping {
    let free = problem.free_procs();
    let mut out = m.clone();
    for i in problem.free_tasks() {
        if rng.gen::<f64>() < p_gene {
            out.set(i, free[rng.gen_range(0..free.len())]);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BegBranch {
    /// At least one task migration was applied.
    Migration { moves: usize },
    /// Tasks of the busiest processor were exchanged with those of `with`.
    Switch { with: ProcId },
    /// Rebuilt with MCT over a shuffled order.
    Regenerated,
}

#[derive(Clone, Debug)]
pub struct BegOutcome {
    pub mapping: Mapping,
    pub branch: BegBranch,
}

/// Upper bound on migrations in one call.
pub fn migration_cap(problem: &Problem) -> usize {
    problem.num_tasks() * problem.num_procs()
}

pub fn mutate_beg<R: Rng + ?Sized>(problem: &Problem, m: &Mapping, rng: &mut R) -> BegOutcome {
    mutate_beg_with(problem, m, MctCost::WithCommunication, rng)
}

pub fn mutate_beg_with<R: Rng + ?Sized>(problem: &Problem, m: &Mapping, mct_cost: MctCost, rng: &mut R) -> BegOutcome {
    let usage = pusage(problem, m);
    let (migrated, moves) = migrate(problem, m, usage.clone());
    if moves > 0 {
        debug_assert!(pusage(problem, &migrated).makespan() <= usage.makespan());
        return BegOutcome {
            mapping: migrated,
            branch: BegBranch::Migration { moves },
        };
    }
    if let Some((switched, with)) = switch(problem, m, &usage) {
        debug_assert!(pusage(problem, &switched).makespan() <= usage.makespan());
        return BegOutcome {
            mapping: switched,
            branch: BegBranch::Switch { with },
        };
    }
    let mut order: Vec<usize> = (0..problem.num_tasks()).collect();
    order.shuffle(rng);
    BegOutcome {
        mapping: mct_with(problem, &order, mct_cost),
        branch: BegBranch::Regenerated,
    }
}

/// Repeatedly moves the task off the busiest processor with the largest
/// migration benefit among moves that do not raise the makespan.
///
/// A move that leaves the makespan unchanged without a positive benefit is a
/// plateau move. Each task may make at most one plateau move per call, and
/// the total number of moves is capped, so the loop always ends.
fn migrate(problem: &Problem, start: &Mapping, mut usage: UsageVector) -> (Mapping, usize) {
    let mut cur = start.clone();
    let cap = migration_cap(problem);
    let mut plateau_used = vec![false; problem.num_tasks()];
    let mut moves = 0;
    while moves < cap {
        let x = usage.argmax();
        let span = usage.makespan();
        let mut on_x: Vec<usize> = cur.tasks_on(x).filter(|&i| problem.is_free(i)).collect();
        on_x.sort_by_key(|&i| problem.task(i).declared);

        let mut best: Option<(i64, usize, ProcId, UsageVector, bool)> = None;
        for &task in &on_x {
            for &y in problem.free_procs() {
                if y == x {
                    continue;
                }
                let next = usage_after_migration(problem, &cur, &usage, task, y);
                let next_span = next.makespan();
                if next_span > span {
                    continue;
                }
                let benefit = benefit_unchecked(problem, &cur, task, x, y).benefit;
                let plateau = next_span == span && benefit <= 0;
                if plateau && plateau_used[task] {
                    continue;
                }
                if best.as_ref().is_none_or(|b| benefit > b.0) {
                    best = Some((benefit, task, y, next, plateau));
                }
            }
        }
        let Some((_, task, y, next, plateau)) = best else {
            break;
        };
        if plateau {
            plateau_used[task] = true;
        }
        cur.set(task, y);
        usage = next;
        moves += 1;
    }
    (cur, moves)
}

/// Exchanges the free tasks of the busiest processor with those of another
/// free processor, choosing the exchange with the lowest resulting makespan
/// among those that do not raise it. Pinned tasks stay put.
fn switch(problem: &Problem, m: &Mapping, usage: &UsageVector) -> Option<(Mapping, ProcId)> {
    let x = usage.argmax();
    if !problem.is_eligible(x) {
        return None;
    }
    let span = usage.makespan();
    let mut best: Option<(u64, ProcId, Mapping)> = None;
    for &y in problem.free_procs() {
        if y == x {
            continue;
        }
        let mut cand = m.clone();
        for i in problem.free_tasks() {
            if m.get(i) == x {
                cand.set(i, y);
            } else if m.get(i) == y {
                cand.set(i, x);
            }
        }
        if &cand == m {
            continue;
        }
        let next_span = pusage(problem, &cand).makespan();
        if next_span <= span && best.as_ref().is_none_or(|b| next_span < b.0) {
            best = Some((next_span, y, cand));
        }
    }
    best.map(|(_, y, cand)| (cand, y))
}

/// Sub-operators of the three-step mutation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThreeStepOp {
    /// One random free gene to a random free processor.
    Reassign,
    /// Two random free genes exchange processors.
    Swap,
    /// The costliest task of the busiest free processor moves to the least
    /// loaded free processor.
    Rebalance,
}

/// Approximation of a three-step mutation: one of three sub-operators chosen
/// uniformly at random.
pub fn mutate_three_step<R: Rng + ?Sized>(problem: &Problem, m: &Mapping, rng: &mut R) -> Mapping {
    let op = match rng.gen_range(0..3) {
        0 => ThreeStepOp::Reassign,
        1 => ThreeStepOp::Swap,
        _ => ThreeStepOp::Rebalance,
    };
    three_step_op(problem, m, op, rng)
}

pub fn three_step_op<R: Rng + ?Sized>(problem: &Problem, m: &Mapping, op: ThreeStepOp, rng: &mut R) -> Mapping {
    let free_tasks: Vec<usize> = problem.free_tasks().collect();
    let free = problem.free_procs();
    let mut out = m.clone();
    if free_tasks.is_empty() {
        return out;
    }
    match op {
        ThreeStepOp::Reassign => {
            let i = *free_tasks.choose(rng).expect("non-empty");
            out.set(i, free[rng.gen_range(0..free.len())]);
        }
        ThreeStepOp::Swap => {
            if free_tasks.len() >= 2 {
                let pair: Vec<usize> = free_tasks.choose_multiple(rng, 2).copied().collect();
                let (a, b) = (pair[0], pair[1]);
                out.set(a, m.get(b));
                out.set(b, m.get(a));
            }
        }
        ThreeStepOp::Rebalance => {
            let usage = pusage(problem, m);
            let busiest = free
                .iter()
                .copied()
                .max_by_key(|p| (usage.get(*p), std::cmp::Reverse(*p)));
            let idlest = usage.argmin_eligible();
            if let (Some(x), Some(y)) = (busiest, idlest) {
                if x != y {
                    let task = free_tasks
                        .iter()
                        .copied()
                        .filter(|&i| m.get(i) == x)
                        .max_by_key(|&i| (placement_cost(problem, m, i, x), std::cmp::Reverse(i)));
                    if let Some(i) = task {
                        out.set(i, y);
                    }
                }
            }
        }
    }
    out
}
