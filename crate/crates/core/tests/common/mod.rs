#![allow(dead_code)]

use std::collections::BTreeMap;

use mpsoc_dse::model::{AppGraph, Channel, Platform, Problem, ProblemFile, Processor, Task};
use rand::Rng;

pub struct Shape {
    pub max_tasks: usize,
    pub max_procs: usize,
    /// Allow several firings per frame.
    pub multirate: bool,
    /// Random pins and reserved processors.
    pub pins: bool,
    pub bus: bool,
}

pub const SMALL: Shape = Shape {
    max_tasks: 12,
    max_procs: 4,
    multirate: true,
    pins: true,
    bus: true,
};

/// A random valid problem: one connected application whose channels run from
/// earlier to later declared tasks, so the graph is acyclic.
pub fn random_file<R: Rng>(rng: &mut R, shape: &Shape) -> ProblemFile {
    let n_procs = rng.gen_range(1..=shape.max_procs);
    let n_types = rng.gen_range(1..=n_procs.min(3));
    let mut processors: Vec<Processor> = (0..n_procs)
        .map(|i| Processor {
            id: format!("p{i}"),
            kind: format!("k{}", rng.gen_range(0..n_types)),
            reserved: false,
        })
        .collect();
    if shape.pins && n_procs >= 2 && rng.gen_bool(0.3) {
        processors[n_procs - 1].reserved = true;
    }
    let types: Vec<String> = {
        let mut t: Vec<String> = processors.iter().map(|p| p.kind.clone()).collect();
        t.sort();
        t.dedup();
        t
    };

    let n_tasks = rng.gen_range(1..=shape.max_tasks);
    let mut tasks = Vec::new();
    for i in 0..n_tasks {
        let compute_cost: BTreeMap<String, u64> = types.iter().map(|t| (t.clone(), rng.gen_range(1..=100))).collect();
        let pinned_to = (shape.pins && rng.gen_bool(0.15)).then(|| processors[rng.gen_range(0..n_procs)].id.clone());
        let firings = if shape.multirate { rng.gen_range(1..=3) } else { 1 };
        tasks.push(Task {
            id: format!("t{i}"),
            compute_cost,
            pinned_to,
            firings_per_frame: firings,
        });
    }
    // a task left unpinned while every processor is reserved would be invalid
    if processors.iter().all(|p| p.reserved) {
        processors[0].reserved = false;
    }

    let mut channels = Vec::new();
    for d in 1..n_tasks {
        let mut srcs: Vec<usize> = (0..d).filter(|_| rng.gen_bool(0.3)).collect();
        if srcs.is_empty() {
            srcs.push(rng.gen_range(0..d));
        }
        for s in srcs {
            let k = rng.gen_range(1..=2);
            let produce = tasks[d].firings_per_frame * k;
            let consume = tasks[s].firings_per_frame * k;
            let cost_local = rng.gen_range(0..=5);
            // room for a whole frame keeps the graph live; tighter FIFOs may deadlock
            let floor = if rng.gen_bool(0.9) {
                produce * tasks[s].firings_per_frame
            } else {
                produce.max(consume)
            };
            channels.push(Channel {
                id: format!("c{s}_{d}"),
                src: tasks[s].id.clone(),
                dst: tasks[d].id.clone(),
                tokens_per_firing: produce,
                consume_per_firing: (consume != produce).then_some(consume),
                token_size: rng.gen_range(1..=4),
                capacity: floor + rng.gen_range(0..=3),
                initial_tokens: 0,
                cost_local,
                cost_shared: rng.gen_range(cost_local..=20),
            });
        }
    }
    let platform = Platform {
        processors,
        bus_word_cycles: if shape.bus { rng.gen_range(0..=3) } else { 0 },
        arbitration: Default::default(),
    };
    ProblemFile::new(
        vec![AppGraph {
            name: "r".into(),
            tasks,
            channels,
        }],
        platform,
    )
}

pub fn random_problem<R: Rng>(rng: &mut R, shape: &Shape) -> Problem {
    Problem::from_file(random_file(rng, shape)).expect("generator emits valid problems")
}
