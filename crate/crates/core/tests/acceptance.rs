//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line with
//! the measured values, then asserts.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::time::Instant;

use mpsoc_dse::ga::mutation::migration_cap;
use mpsoc_dse::ga::{evolve, evolve_observed, mutate_beg, BegBranch, GaConfig, Origin, Preset, SimEvaluator};
use mpsoc_dse::harness::{
    emit_results, exhaustive, preset, run_metadata, AlgorithmEntry, Experiment, ExperimentSpec, Seeds, Sweep,
};
use mpsoc_dse::metrics::{migration_benefit, pusage};
use mpsoc_dse::model::{
    random_mapping, AppGraph, Channel, Mapping, Platform, Problem, ProblemFile, ProcId, Processor, Task,
};
use mpsoc_dse::simulator::{simulate, SimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Writes to the process stdout directly so the line shows up even when the
/// test harness captures output.
fn report(n: u32, pass: bool, detail: String) {
    let line = format!("criterion {n}: {} ({detail})\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "criterion {n} failed: {detail}");
}

// ---------------------------------------------------------------- criterion 1

/// Usage written straight from the file: every task's compute on its
/// processor plus, for every channel, its per-frame tokens times the local
/// or shared rate charged to both endpoints.
fn oracle_usage(f: &ProblemFile, at: &HashMap<String, String>) -> BTreeMap<String, u64> {
    let kind: HashMap<&str, &str> = f
        .platform
        .processors
        .iter()
        .map(|p| (p.id.as_str(), p.kind.as_str()))
        .collect();
    let mut u: BTreeMap<String, u64> = f.platform.processors.iter().map(|p| (p.id.clone(), 0)).collect();
    for app in &f.apps {
        let fire: HashMap<&str, u64> = app.tasks.iter().map(|t| (t.id.as_str(), t.firings_per_frame)).collect();
        for t in &app.tasks {
            let p = &at[&t.id];
            *u.get_mut(p).unwrap() += t.compute_cost[kind[p.as_str()]] * t.firings_per_frame;
        }
        for c in &app.channels {
            let (ps, pd) = (&at[&c.src], &at[&c.dst]);
            let rate = if ps == pd { c.cost_local } else { c.cost_shared };
            let tokens = c.tokens_per_firing * fire[c.src.as_str()];
            *u.get_mut(ps).unwrap() += tokens * rate;
            *u.get_mut(pd).unwrap() += tokens * rate;
        }
    }
    u
}

/// Cost of `task` placed on `proc` with everything else where `at` says.
fn oracle_placement(f: &ProblemFile, at: &HashMap<String, String>, task: &str, proc: &str) -> u64 {
    let app = &f.apps[0];
    let kind = &f.platform.processors.iter().find(|p| p.id == proc).unwrap().kind;
    let t = app.tasks.iter().find(|t| t.id == task).unwrap();
    let mut m = t.compute_cost[kind] * t.firings_per_frame;
    for c in &app.channels {
        let peer = if c.src == task {
            &c.dst
        } else if c.dst == task {
            &c.src
        } else {
            continue;
        };
        let src_firings = app.tasks.iter().find(|x| x.id == c.src).unwrap().firings_per_frame;
        let rate = if at[peer] == proc { c.cost_local } else { c.cost_shared };
        m += c.tokens_per_firing * src_firings * rate;
    }
    m
}

fn placement_map(p: &Problem, m: &Mapping) -> HashMap<String, String> {
    p.tasks()
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let short = t.name.split_once('/').unwrap().1.to_string();
            (short, p.proc_name(m.get(i)).to_string())
        })
        .collect()
}

#[test]
fn criterion_1_usage_and_benefit_match_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut instances, mut benefits, mut mismatches) = (0, 0, 0);
    while instances < 1000 {
        let file = common::random_file(&mut rng, &common::SMALL);
        let p = Problem::from_file(file.clone()).unwrap();
        let m = random_mapping(&p, &mut rng);
        let at = placement_map(&p, &m);
        let want = oracle_usage(&file, &at);
        let got = pusage(&p, &m);
        for q in p.procs() {
            if got.get(q) != want[p.proc_name(q)] {
                mismatches += 1;
            }
        }
        for i in 0..p.num_tasks() {
            let from = m.get(i);
            for to in p.procs().filter(|&q| q != from) {
                let b = migration_benefit(&p, &m, i, from, to).unwrap();
                let short = p.task(i).name.split_once('/').unwrap().1;
                let mx = oracle_placement(&file, &at, short, p.proc_name(from));
                let my = oracle_placement(&file, &at, short, p.proc_name(to));
                if b.cost_from != mx || b.cost_to != my || b.benefit != mx as i64 - my as i64 {
                    mismatches += 1;
                }
                benefits += 1;
            }
        }
        instances += 1;
    }
    let secs = started.elapsed().as_secs_f64();
    report(
        1,
        mismatches == 0 && secs < 10.0,
        format!("{instances} instances, {benefits} benefits, {mismatches} mismatches, {secs:.2}s"),
    );
}

// ---------------------------------------------------------------- criterion 2

#[test]
fn criterion_2_beg_mutation_safety() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut calls, mut violations) = (0, 0);
    let mut branches = [0usize; 3];
    while calls < 10_000 {
        let p = common::random_problem(&mut rng, &common::SMALL);
        for _ in 0..10 {
            let m = random_mapping(&p, &mut rng);
            let before = pusage(&p, &m).makespan();
            let out = mutate_beg(&p, &m, &mut rng);
            if p.check_mapping(&out.mapping).is_err() {
                violations += 1;
            }
            let after = pusage(&p, &out.mapping).makespan();
            match out.branch {
                BegBranch::Migration { moves } => {
                    branches[0] += 1;
                    if moves > migration_cap(&p) || after > before {
                        violations += 1;
                    }
                }
                BegBranch::Switch { .. } => {
                    branches[1] += 1;
                    if after > before {
                        violations += 1;
                    }
                }
                BegBranch::Regenerated => branches[2] += 1,
            }
            calls += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    report(
        2,
        violations == 0 && secs < 60.0,
        format!(
            "{calls} calls, {violations} violations, branches migrate/switch/regenerate = {}/{}/{}, {secs:.2}s",
            branches[0], branches[1], branches[2]
        ),
    );
}

// ---------------------------------------------------------------- criterion 3

fn pipeline(local: u64, shared: u64, capacity: u64, procs: usize) -> Problem {
    let task = |id: &str| Task {
        id: id.into(),
        compute_cost: BTreeMap::from([("cpu".to_string(), 100)]),
        pinned_to: None,
        firings_per_frame: 1,
    };
    let platform = Platform {
        processors: (0..procs)
            .map(|i| Processor {
                id: format!("pe{i}"),
                kind: "cpu".into(),
                reserved: false,
            })
            .collect(),
        bus_word_cycles: 0,
        arbitration: Default::default(),
    };
    let app = AppGraph {
        name: "app".into(),
        tasks: vec![task("a"), task("b")],
        channels: vec![Channel {
            id: "ab".into(),
            src: "a".into(),
            dst: "b".into(),
            tokens_per_firing: 1,
            consume_per_firing: None,
            token_size: 1,
            capacity,
            initial_tokens: 0,
            cost_local: local,
            cost_shared: shared,
        }],
    };
    Problem::from_file(ProblemFile::new(vec![app], platform)).unwrap()
}

fn scaled(f: &ProblemFile, c: u64) -> ProblemFile {
    let mut g = f.clone();
    g.platform.bus_word_cycles *= c;
    for app in &mut g.apps {
        for t in &mut app.tasks {
            t.compute_cost.values_mut().for_each(|v| *v *= c);
        }
        for ch in &mut app.channels {
            ch.cost_local *= c;
            ch.cost_shared *= c;
        }
    }
    g
}

#[test]
fn criterion_3_simulator_ground_truth() {
    let started = Instant::now();
    let checked = SimConfig {
        check_invariants: true,
        ..SimConfig::default()
    };

    let mut single = pipeline(0, 0, 1, 1).file().clone();
    single.apps[0].tasks.truncate(1);
    single.apps[0].channels.clear();
    let single = Problem::from_file(single).unwrap();
    let cfg10 = SimConfig {
        frames: 10,
        warmup_frames: 0,
        ..checked
    };
    let r1 = simulate(&single, &Mapping::new(vec![ProcId(0)]), &cfg10).unwrap();
    let p2 = pipeline(2, 10, 16, 1);
    let r2 = simulate(&p2, &Mapping::new(vec![ProcId(0); 2]), &checked).unwrap();
    let p3 = pipeline(2, 10, 2, 2);
    let r3 = simulate(&p3, &Mapping::new(vec![ProcId(0), ProcId(1)]), &checked).unwrap();
    let examples = r1.fet == 100.0 && r1.tet == 1000 && r2.fet == 204.0 && r3.fet == 110.0;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut bound_violations, mut deadlocks, mut scale_violations, mut worst_gap) = (0, 0, 0, f64::INFINITY);
    for k in 0..1000 {
        let file = common::random_file(&mut rng, &common::SMALL);
        let p = Problem::from_file(file.clone()).unwrap();
        let m = random_mapping(&p, &mut rng);
        let r = simulate(&p, &m, &checked).unwrap();
        if r.deadlocked {
            deadlocks += 1;
            continue;
        }
        // busiest processor's compute per frame, summed from the file
        let at = placement_map(&p, &m);
        let mut compute: HashMap<&str, u64> = HashMap::new();
        for t in &file.apps[0].tasks {
            let proc = at[&t.id].as_str();
            let kind = &file.platform.processors.iter().find(|q| q.id == proc).unwrap().kind;
            *compute.entry(proc).or_default() += t.compute_cost[kind] * t.firings_per_frame;
        }
        let bound = *compute.values().max().unwrap() as f64;
        worst_gap = worst_gap.min(r.fet - bound);
        if r.fet < bound {
            bound_violations += 1;
        }
        if k % 5 == 0 {
            let q = Problem::from_file(scaled(&file, 7)).unwrap();
            let s = simulate(&q, &m, &checked).unwrap();
            if s.window != 7 * r.window || s.tet != 7 * r.tet || s.fet != 7.0 * r.window as f64 / 10.0 {
                scale_violations += 1;
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    report(
        3,
        examples && bound_violations == 0 && scale_violations == 0 && secs < 30.0,
        format!(
            "examples fet {}/{}/{} tet {}, lower-bound violations {bound_violations} (min slack {worst_gap}), \
             scaling violations {scale_violations}, deadlocked instances skipped {deadlocks}, {secs:.2}s",
            r1.fet, r2.fet, r3.fet, r1.tet
        ),
    );
}

// ---------------------------------------------------------------- criterion 4 and 6

fn tiny() -> Problem {
    Problem::from_file(preset("tiny8x3").unwrap()).unwrap()
}

#[test]
fn criterion_4_beg_reaches_the_optimum_on_tiny8x3() {
    let started = Instant::now();
    let p = tiny();
    let sim = SimConfig::default();
    let rep = exhaustive(&p, &sim, 1_000_000).unwrap();
    // independent odometer over all 3^8 assignments
    let mut genes = vec![0usize; p.num_tasks()];
    let mut brute = f64::INFINITY;
    let mut visited = 0;
    loop {
        let m = Mapping::new(genes.iter().map(|&g| ProcId(g)).collect());
        brute = brute.min(simulate(&p, &m, &sim).unwrap().fet);
        visited += 1;
        let Some(k) = genes.iter().rposition(|&g| g + 1 < p.num_procs()) else {
            break;
        };
        genes[k] += 1;
        genes[k + 1..].iter_mut().for_each(|g| *g = 0);
    }
    let mut within = 0;
    let mut max_evals = 0;
    let mut gaps = Vec::new();
    let mut below_optimum = false;
    for seed in 0..10 {
        let mut cfg = GaConfig::preset(Preset::Beg);
        cfg.max_generations = 64;
        cfg.seed = seed;
        let (_, log) = evolve(
            &p,
            &cfg,
            &SimEvaluator {
                problem: &p,
                config: sim,
            },
        )
        .unwrap();
        let gap = log.best_objective / rep.optimum_objective - 1.0;
        gaps.push(format!("{:.1}%", gap * 100.0));
        if gap <= 0.05 {
            within += 1;
        }
        below_optimum |= log.best_objective < rep.optimum_objective;
        max_evals = max_evals.max(log.evaluations);
    }
    let secs = started.elapsed().as_secs_f64();
    report(
        4,
        rep.records.len() == 6561
            && visited == 6561
            && rep.optimum_objective == brute
            && !below_optimum
            && within >= 9
            && max_evals < 6561
            && secs < 300.0,
        format!(
            "optimum {} over {} mappings, {within}/10 seeds within 5% (gaps {}), max evaluations {max_evals}, {secs:.1}s",
            rep.optimum_objective,
            rep.records.len(),
            gaps.join(" ")
        ),
    );
}

#[test]
fn criterion_6_makespan_tracks_simulated_time() {
    let started = Instant::now();
    let rep = exhaustive(&tiny(), &SimConfig::default(), 1_000_000).unwrap();
    let r = rep.pearson_r.unwrap_or(f64::NAN);
    let q = rep.quartile.clone().unwrap();
    let secs = started.elapsed().as_secs_f64();
    report(
        6,
        r > 0.5 && q.low_imbalance_mean <= q.high_imbalance_mean && secs < 600.0,
        format!(
            "r = {r:.3}; lowest-makespan quartile ({} mappings): low-imbalance mean {:.1}, high-imbalance mean {:.1}, {secs:.1}s",
            q.count, q.low_imbalance_mean, q.high_imbalance_mean
        ),
    );
}

// ---------------------------------------------------------------- criterion 5 and 7

fn table2_algorithms() -> Vec<AlgorithmEntry> {
    [("beg", Preset::Beg), ("eg", Preset::Eg), ("ga3sm", Preset::Ga3sm)]
        .into_iter()
        .map(|(n, p)| AlgorithmEntry::ga(n, p))
        .collect()
}

fn spec(benchmark: &str, algorithms: Vec<AlgorithmEntry>, reps: usize) -> ExperimentSpec {
    ExperimentSpec {
        format: 1,
        problem: None,
        benchmark: Some(benchmark.into()),
        algorithms,
        repetitions: reps,
        sim: SimConfig::default(),
        seeds: Seeds::Base { base: 1 },
        outputs: None,
    }
}

#[test]
fn criterion_5_beg_beats_baselines_on_mp3like() {
    let started = Instant::now();
    let s = spec("mp3like", table2_algorithms(), 10);
    let p = Problem::from_file(preset("mp3like").unwrap()).unwrap();
    let out = Experiment::from_spec(&s).unwrap().run(&p, &|_| {});
    let avg = |a: &str| out.table.row(a).unwrap().objective.unwrap().avg;
    let evals = |a: &str| out.table.row(a).unwrap().evaluations_avg;
    let failed: usize = out.table.rows.iter().map(|r| r.failed).sum();
    let secs = started.elapsed().as_secs_f64();
    report(
        5,
        failed == 0
            && avg("beg") <= avg("ga3sm")
            && avg("beg") <= avg("eg")
            && evals("beg") <= evals("eg")
            && secs < 1800.0,
        format!(
            "average fet beg {:.0}, ga3sm {:.0}, eg {:.0}; average evaluations beg {:.1}, eg {:.1}, ga3sm {:.1}; {secs:.1}s",
            avg("beg"),
            avg("ga3sm"),
            avg("eg"),
            evals("beg"),
            evals("eg"),
            evals("ga3sm")
        ),
    );
}

#[test]
fn criterion_7_multi_application_tet() {
    let started = Instant::now();
    let name = "mp3like+mjpeg8+sobel6";
    let algorithms = table2_algorithms().into_iter().take(2).collect();
    let s = spec(name, algorithms, 10);
    let p = Problem::from_file(preset(name).unwrap()).unwrap();
    let out = Experiment::from_spec(&s).unwrap().run(&p, &|_| {});
    let avg = |a: &str| out.table.row(a).unwrap().objective.unwrap().avg;
    let failed: usize = out.table.rows.iter().map(|r| r.failed).sum();
    let secs = started.elapsed().as_secs_f64();
    report(
        7,
        failed == 0 && out.runs.len() == 20 && avg("beg") <= avg("eg") && secs < 2700.0,
        format!(
            "{} tasks, average tet beg {:.0}, eg {:.0}; {secs:.1}s",
            p.num_tasks(),
            avg("beg"),
            avg("eg")
        ),
    );
}

// ---------------------------------------------------------------- criterion 8

#[test]
fn criterion_8_determinism_and_elitism() {
    let p = Problem::from_file(preset("mp3like").unwrap()).unwrap();
    let mut algorithms = table2_algorithms();
    algorithms.push(AlgorithmEntry::heuristic(
        "minmin",
        mpsoc_dse::heuristics::Heuristic::MinMin,
    ));
    let s = spec("mp3like", algorithms, 3);
    let exp = Experiment::from_spec(&s).unwrap();
    let tiny = tiny();
    let corr = exhaustive(&tiny, &SimConfig::default(), 10_000).unwrap();

    let emit = || {
        let dir = tempfile::tempdir().unwrap();
        let out = exp.run(&p, &|_| {});
        let meta = run_metadata(&p, Some(&exp), &out.runs, serde_json::Value::Null);
        emit_results(dir.path(), &out.runs, Some(&corr), &meta).unwrap();
        let files: Vec<Vec<u8>> = ["comparison.csv", "convergence.csv", "correlation.csv"]
            .iter()
            .map(|f| fs::read(dir.path().join(f)).unwrap())
            .collect();
        (files, out)
    };
    let (a, out) = emit();
    let (b, _) = emit();
    let identical = a == b;

    let monotone = out
        .runs
        .iter()
        .all(|r| r.convergence().windows(2).all(|w| w[1].1 <= w[0].1));

    let mut elitism_ok = true;
    for seed in 0..10 {
        let mut cfg = GaConfig::preset(if seed % 2 == 0 { Preset::Beg } else { Preset::Eg });
        cfg.seed = seed;
        cfg.max_generations = 32;
        let mut prev_best: Option<Mapping> = None;
        evolve_observed(
            &p,
            &cfg,
            &SimEvaluator {
                problem: &p,
                config: SimConfig::default(),
            },
            |v| {
                if v.generation > 0 {
                    let elites: Vec<_> = v.population.iter().filter(|i| i.origin == Origin::Elite).collect();
                    let fresh = v.population.iter().filter(|i| i.origin == Origin::Offspring).count();
                    elitism_ok &= elites.len() == 1 && fresh == cfg.pop_size - 1;
                    elitism_ok &= v.population[0].origin == Origin::Elite;
                    elitism_ok &= prev_best.as_ref() == Some(&elites[0].mapping);
                }
                let best = v
                    .population
                    .iter()
                    .min_by(|x, y| x.objective.total_cmp(&y.objective))
                    .unwrap();
                prev_best = Some(best.mapping.clone());
            },
        )
        .unwrap();
    }

    report(
        8,
        identical && monotone && elitism_ok,
        format!(
            "csv byte-identical {identical}, convergence non-increasing {monotone}, one elite + n-1 offspring in 10 runs {elitism_ok}"
        ),
    );
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn criterion_9_mutation_probability_sweep() {
    let mut entry = AlgorithmEntry::ga("beg", Preset::Beg);
    entry.sweep = Some(Sweep {
        param: "mutation_prob_chromosome".into(),
        values: vec![0.1.into(), 0.5.into(), 1.0.into()],
    });
    let seeds = 10;
    let s = spec("mp3like", vec![entry], seeds);
    let p = Problem::from_file(preset("mp3like").unwrap()).unwrap();
    let exp = Experiment::from_spec(&s).unwrap();
    let out = exp.run(&p, &|_| {});
    let dir = tempfile::tempdir().unwrap();
    emit_results(
        dir.path(),
        &out.runs,
        None,
        &run_metadata(&p, Some(&exp), &out.runs, serde_json::Value::Null),
    )
    .unwrap();
    let text = fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    let mut per_prob: BTreeMap<String, usize> = BTreeMap::new();
    for line in text.lines().skip(1) {
        let alg = line.split(',').next().unwrap().to_string();
        *per_prob.entry(alg).or_default() += 1;
    }
    let averages: Vec<String> = out
        .table
        .rows
        .iter()
        .map(|r| format!("{} avg {:.0}", r.algorithm, r.objective.unwrap().avg))
        .collect();
    report(
        9,
        per_prob.len() == 3 && per_prob.values().all(|&n| n == seeds) && out.table.rows.len() == 3,
        format!(
            "rows per probability {:?}; {}",
            per_prob.values().collect::<Vec<_>>(),
            averages.join(", ")
        ),
    );
}

#[test]
fn random_instances_are_nontrivial() {
    // guards the generator the criteria above rely on
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut channels = 0;
    for _ in 0..100 {
        channels += common::random_problem(&mut rng, &common::SMALL).channels().len();
    }
    assert!(channels > 200, "{channels}");
}
