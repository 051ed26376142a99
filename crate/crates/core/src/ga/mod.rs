//! Genetic search over mappings.
//!
//! One loop serves all three configurations (`beg`, `eg`, `ga3sm`); they
//! differ only in operators and initialization. Each generation keeps the
//! best individual of the current population and fills the remaining n-1
//! slots with fresh offspring.

pub mod crossover;
pub mod mutation;
pub mod selection;

use std::collections::HashMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristics::{min_min, MctCost};
use crate::metrics::pusage;
use crate::model::{random_mapping, Mapping, ObjectiveKind, Problem};
use crate::simulator::{simulate, EvalResult, SimConfig};

pub use crossover::{crossover_one_point, crossover_two_point, crossover_uniform};
pub use mutation::{mutate_beg, mutate_beg_with, mutate_gene_random, mutate_three_step, BegBranch, BegOutcome};
pub use selection::{select_random, select_roulette, select_tournament};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossoverKind {
    OnePoint,
    TwoPoint,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    Beg,
    GeneRandom,
    ThreeStep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionKind {
    Roulette,
    Random,
    Tournament,
}

/// Maps an objective time to a positive fitness.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessTransform {
    /// `1 / objective`; deadlocked mappings get the smallest positive value.
    #[default]
    Reciprocal,
}

impl FitnessTransform {
    pub fn apply(self, objective: f64) -> f64 {
        match self {
            FitnessTransform::Reciprocal => {
                if !objective.is_finite() {
                    f64::MIN_POSITIVE
                } else if objective <= 0.0 {
                    f64::MAX
                } else {
                    (1.0 / objective).max(f64::MIN_POSITIVE)
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Random,
    /// Random population whose worst member is replaced by the Min-Min
    /// mapping.
    SeededMinmin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Beg,
    Eg,
    Ga3sm,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Beg => "beg",
            Preset::Eg => "eg",
            Preset::Ga3sm => "ga3sm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "beg" => Some(Preset::Beg),
            "eg" => Some(Preset::Eg),
            "ga3sm" => Some(Preset::Ga3sm),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaConfig {
    pub pop_size: usize,
    pub max_generations: usize,
    /// Stop after this many generations without a strict improvement; 0
    /// disables the check.
    pub stall_generations: usize,
    pub crossover: CrossoverKind,
    pub crossover_prob: f64,
    pub mutation: MutationKind,
    pub mutation_prob_chromosome: f64,
    /// Per-gene redraw probability of `gene_random` mutation.
    pub mutation_prob_gene: f64,
    pub selection: SelectionKind,
    pub tournament_size: usize,
    pub seed: u64,
    pub fitness_transform: FitnessTransform,
    pub init: InitKind,
    /// Cost model of the MCT fallback in `beg` mutation.
    pub mct_cost: MctCost,
}

pub const DEFAULT_STALL_GENERATIONS: usize = 16;

impl GaConfig {
    pub fn preset(p: Preset) -> Self {
        let base = GaConfig {
            pop_size: 8,
            max_generations: 128,
            stall_generations: DEFAULT_STALL_GENERATIONS,
            crossover: CrossoverKind::OnePoint,
            crossover_prob: 0.7,
            mutation: MutationKind::Beg,
            mutation_prob_chromosome: 0.8,
            mutation_prob_gene: 0.05,
            selection: SelectionKind::Roulette,
            tournament_size: 2,
            seed: 0,
            fitness_transform: FitnessTransform::Reciprocal,
            init: InitKind::Random,
            mct_cost: MctCost::WithCommunication,
        };
        match p {
            Preset::Beg => base,
            Preset::Eg => GaConfig {
                mutation: MutationKind::GeneRandom,
                ..base
            },
            Preset::Ga3sm => GaConfig {
                mutation: MutationKind::ThreeStep,
                init: InitKind::SeededMinmin,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::BadConfig(msg));
        if self.pop_size < 2 {
            return bad(format!("pop_size must be at least 2, got {}", self.pop_size));
        }
        for (name, p) in [
            ("crossover_prob", self.crossover_prob),
            ("mutation_prob_chromosome", self.mutation_prob_chromosome),
            ("mutation_prob_gene", self.mutation_prob_gene),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if self.max_generations > 0 && self.stall_generations > self.max_generations {
            return bad(format!(
                "stall_generations ({}) exceeds max_generations ({})",
                self.stall_generations, self.max_generations
            ));
        }
        if self.selection == SelectionKind::Tournament
            && (self.tournament_size < 2 || self.tournament_size > self.pop_size)
        {
            return Err(Error::BadTournamentSize {
                k: self.tournament_size,
                pop: self.pop_size,
            });
        }
        Ok(())
    }
}

/// Turns a mapping into simulated (or estimated) times. Implementations must
/// be pure: the same mapping always yields the same result.
pub trait Evaluator: Sync {
    fn evaluate(&self, mapping: &Mapping) -> Result<EvalResult>;
}

impl<F> Evaluator for F
where
    F: Fn(&Mapping) -> Result<EvalResult> + Sync,
{
    fn evaluate(&self, mapping: &Mapping) -> Result<EvalResult> {
        self(mapping)
    }
}

/// Runs the simulator.
pub struct SimEvaluator<'a> {
    pub problem: &'a Problem,
    pub config: SimConfig,
}

impl Evaluator for SimEvaluator<'_> {
    fn evaluate(&self, mapping: &Mapping) -> Result<EvalResult> {
        simulate(self.problem, mapping, &self.config)
    }
}

/// Uses the usage makespan as both frame and total time. Cheap; meant for
/// tests and quick sweeps.
pub struct AnalyticEvaluator<'a> {
    pub problem: &'a Problem,
}

impl Evaluator for AnalyticEvaluator<'_> {
    fn evaluate(&self, mapping: &Mapping) -> Result<EvalResult> {
        self.problem.check_mapping(mapping)?;
        let usage = pusage(self.problem, mapping);
        let span = usage.makespan();
        Ok(EvalResult {
            fet: span as f64,
            tet: span,
            window: span,
            usage,
            events: 0,
            deadlocked: false,
        })
    }
}

/// Where an individual came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Initial,
    /// Carried over unchanged from the previous generation.
    Elite,
    Offspring,
}

#[derive(Clone, Debug)]
pub struct Individual {
    pub mapping: Mapping,
    pub eval: Option<EvalResult>,
    pub objective: f64,
    pub fitness: Option<f64>,
    pub origin: Origin,
}

impl Individual {
    fn new(mapping: Mapping, origin: Origin) -> Self {
        Individual {
            mapping,
            eval: None,
            objective: f64::INFINITY,
            fitness: None,
            origin,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_so_far: f64,
    /// Distinct mappings evaluated up to and including this generation.
    pub evaluations: u64,
    pub seconds: f64,
}

impl PartialEq for GenerationRecord {
    // wall time is not reproducible and is left out
    fn eq(&self, other: &Self) -> bool {
        self.generation == other.generation
            && self.best_so_far == other.best_so_far
            && self.evaluations == other.evaluations
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxGenerations,
    Stalled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub records: Vec<GenerationRecord>,
    pub best: Vec<usize>,
    pub best_objective: f64,
    pub best_found_at: usize,
    pub generations: usize,
    pub evaluations: u64,
    pub termination: Termination,
}

/// Snapshot handed to an observer after each generation is evaluated.
pub struct GenerationView<'a> {
    pub generation: usize,
    pub population: &'a [Individual],
}

pub fn evolve(problem: &Problem, cfg: &GaConfig, evaluator: &dyn Evaluator) -> Result<(Mapping, RunLog)> {
    evolve_observed(problem, cfg, evaluator, |_| {})
}

pub fn evolve_observed(
    problem: &Problem,
    cfg: &GaConfig,
    evaluator: &dyn Evaluator,
    mut observe: impl FnMut(&GenerationView),
) -> Result<(Mapping, RunLog)> {
    cfg.validate()?;
    let started = Instant::now();
    let kind = problem.objective_kind();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cache = Cache::default();
    let n = cfg.pop_size;

    // drawn first so every preset sees the same initial population per seed
    let mut pop: Vec<Individual> = (0..n)
        .map(|_| Individual::new(random_mapping(problem, &mut rng), Origin::Initial))
        .collect();
    cache.evaluate(problem, evaluator, kind, cfg.fitness_transform, &mut pop)?;
    if cfg.init == InitKind::SeededMinmin {
        let worst = worst_index(&pop);
        pop[worst] = Individual::new(min_min(problem), Origin::Initial);
        cache.evaluate(problem, evaluator, kind, cfg.fitness_transform, &mut pop)?;
    }

    let mut best = best_index(&pop);
    let mut best_objective = pop[best].objective;
    let mut best_found_at = 0;
    let mut records = vec![GenerationRecord {
        generation: 0,
        best_so_far: best_objective,
        evaluations: cache.evaluations,
        seconds: started.elapsed().as_secs_f64(),
    }];
    observe(&GenerationView {
        generation: 0,
        population: &pop,
    });

    let mut generation = 0;
    let mut stall = 0;
    let termination = loop {
        if generation >= cfg.max_generations {
            break Termination::MaxGenerations;
        }
        if cfg.stall_generations > 0 && stall >= cfg.stall_generations {
            break Termination::Stalled;
        }
        let fitness: Vec<f64> = pop.iter().map(|i| i.fitness.expect("evaluated")).collect();
        let mut next = Vec::with_capacity(n);
        let mut elite = pop[best].clone();
        elite.origin = Origin::Elite;
        next.push(elite);
        while next.len() < n {
            let a = select(cfg, &fitness, &mut rng)?;
            let b = select(cfg, &fitness, &mut rng)?;
            let (pa, pb) = (&pop[a].mapping, &pop[b].mapping);
            let (c1, c2) = if rng.gen::<f64>() < cfg.crossover_prob {
                cross(cfg.crossover, pa, pb, &mut rng)
            } else {
                (pa.clone(), pb.clone())
            };
            for mut child in [c1, c2] {
                if next.len() == n {
                    break;
                }
                if rng.gen::<f64>() < cfg.mutation_prob_chromosome {
                    child = mutate(problem, cfg, &child, &mut rng);
                }
                problem.repair(&mut child);
                next.push(Individual::new(child, Origin::Offspring));
            }
        }
        pop = next;
        cache.evaluate(problem, evaluator, kind, cfg.fitness_transform, &mut pop)?;
        generation += 1;

        best = best_index(&pop);
        if pop[best].objective < best_objective {
            best_objective = pop[best].objective;
            best_found_at = generation;
            stall = 0;
        } else {
            stall += 1;
        }
        records.push(GenerationRecord {
            generation,
            best_so_far: best_objective,
            evaluations: cache.evaluations,
            seconds: started.elapsed().as_secs_f64(),
        });
        observe(&GenerationView {
            generation,
            population: &pop,
        });
    };

    let mapping = pop[best].mapping.clone();
    let log = RunLog {
        records,
        best: mapping.genes().iter().map(|p| p.0).collect(),
        best_objective,
        best_found_at,
        generations: generation,
        evaluations: cache.evaluations,
        termination,
    };
    Ok((mapping, log))
}

/// Lowest objective; the earliest individual wins ties.
fn best_index(pop: &[Individual]) -> usize {
    (0..pop.len())
        .min_by(|&a, &b| pop[a].objective.total_cmp(&pop[b].objective))
        .expect("non-empty population")
}

/// Highest objective; the latest individual wins ties.
fn worst_index(pop: &[Individual]) -> usize {
    (0..pop.len())
        .max_by(|&a, &b| pop[a].objective.total_cmp(&pop[b].objective))
        .expect("non-empty population")
}

fn select(cfg: &GaConfig, fitness: &[f64], rng: &mut ChaCha8Rng) -> Result<usize> {
    match cfg.selection {
        SelectionKind::Roulette => select_roulette(fitness, rng),
        SelectionKind::Random => Ok(select_random(fitness.len(), rng)),
        SelectionKind::Tournament => select_tournament(fitness, cfg.tournament_size, rng),
    }
}

fn cross(kind: CrossoverKind, a: &Mapping, b: &Mapping, rng: &mut ChaCha8Rng) -> (Mapping, Mapping) {
    match kind {
        CrossoverKind::OnePoint => crossover_one_point(a, b, rng),
        CrossoverKind::TwoPoint => crossover_two_point(a, b, rng),
        CrossoverKind::Uniform => crossover_uniform(a, b, rng),
    }
}

fn mutate(problem: &Problem, cfg: &GaConfig, m: &Mapping, rng: &mut ChaCha8Rng) -> Mapping {
    match cfg.mutation {
        MutationKind::Beg => mutate_beg_with(problem, m, cfg.mct_cost, rng).mapping,
        MutationKind::GeneRandom => mutate_gene_random(problem, m, cfg.mutation_prob_gene, rng),
        MutationKind::ThreeStep => mutate_three_step(problem, m, rng),
    }
}

/// Evaluation results by mapping. A mapping is handed to the evaluator at
/// most once per run.
#[derive(Default)]
struct Cache {
    results: HashMap<Mapping, EvalResult>,
    evaluations: u64,
}

impl Cache {
    fn evaluate(
        &mut self,
        problem: &Problem,
        evaluator: &dyn Evaluator,
        kind: ObjectiveKind,
        transform: FitnessTransform,
        pop: &mut [Individual],
    ) -> Result<()> {
        let mut todo: Vec<&Mapping> = Vec::new();
        for ind in pop.iter() {
            if !self.results.contains_key(&ind.mapping) && !todo.contains(&&ind.mapping) {
                todo.push(&ind.mapping);
            }
        }
        let fresh: Vec<Result<EvalResult>> = todo.par_iter().map(|m| evaluator.evaluate(m)).collect();
        for (m, r) in todo.iter().zip(fresh) {
            let r = r.map_err(|e| match e {
                e @ Error::EvaluatorFailure { .. } => e,
                e => Error::EvaluatorFailure {
                    mapping: problem.format_mapping(m),
                    message: e.to_string(),
                },
            })?;
            self.results.insert((*m).clone(), r);
            self.evaluations += 1;
        }
        for ind in pop.iter_mut() {
            let r = &self.results[&ind.mapping];
            ind.objective = r.objective(kind);
            ind.fitness = Some(transform.apply(ind.objective));
            ind.eval = Some(r.clone());
        }
        Ok(())
    }
}
