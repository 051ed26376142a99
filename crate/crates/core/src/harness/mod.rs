//! Seeded experiments: repeated GA and heuristic runs, comparison tables,
//! exhaustive enumeration and benchmark generation.

pub mod bench;
pub mod exhaustive;
pub mod output;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::ga::{evolve, GaConfig, Preset, RunLog, SimEvaluator};
use crate::heuristics::Heuristic;
use crate::model::Problem;
use crate::simulator::{simulate, SimConfig};

pub use bench::{gen_benchmark, preset, preset_params, ShapeParams};
pub use exhaustive::{exhaustive, mapping_at, pearson, CorrelationReport, MappingRecord, QuartileSummary};
pub use output::{emit_results, run_metadata};

pub const EXPERIMENT_FORMAT: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Base { base: u64 },
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::Base { base: 0 }
    }
}

/// Runs one algorithm once per value of a configuration field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heuristic: Option<Heuristic>,
    /// GA configuration fields replacing the preset's values.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

impl AlgorithmEntry {
    pub fn ga(name: &str, preset: Preset) -> Self {
        AlgorithmEntry {
            name: name.to_string(),
            preset: Some(preset),
            heuristic: None,
            overrides: BTreeMap::new(),
            sweep: None,
        }
    }

    pub fn heuristic(name: &str, h: Heuristic) -> Self {
        AlgorithmEntry {
            name: name.to_string(),
            preset: None,
            heuristic: Some(h),
            overrides: BTreeMap::new(),
            sweep: None,
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.overrides.insert(key.to_string(), value.into());
        self
    }

    fn resolve(&self) -> Result<Vec<Algorithm>> {
        let invalid = |m: String| Error::SpecInvalid(format!("algorithm `{}`: {m}", self.name));
        match (self.preset, self.heuristic) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(invalid("give exactly one of `preset` and `heuristic`".into()))
            }
            (None, Some(h)) => {
                if !self.overrides.is_empty() || self.sweep.is_some() {
                    return Err(invalid("heuristics take no overrides or sweeps".into()));
                }
                return Ok(vec![Algorithm {
                    name: self.name.clone(),
                    kind: AlgorithmKind::Heuristic(h),
                }]);
            }
            (Some(_), None) => {}
        }
        let points: Vec<(String, BTreeMap<String, Value>)> = match &self.sweep {
            None => vec![(self.name.clone(), self.overrides.clone())],
            Some(s) => {
                if s.values.is_empty() {
                    return Err(invalid("sweep has no values".into()));
                }
                s.values
                    .iter()
                    .map(|v| {
                        let mut o = self.overrides.clone();
                        o.insert(s.param.clone(), v.clone());
                        (format!("{}[{}={}]", self.name, s.param, v), o)
                    })
                    .collect()
            }
        };
        points
            .into_iter()
            .map(|(name, overrides)| {
                let cfg = configure(self.preset.expect("checked"), &overrides).map_err(|e| invalid(e.to_string()))?;
                Ok(Algorithm {
                    name,
                    kind: AlgorithmKind::Ga(cfg),
                })
            })
            .collect()
    }
}

/// A preset with some fields replaced.
pub fn configure(preset: Preset, overrides: &BTreeMap<String, Value>) -> Result<GaConfig> {
    let mut v = serde_json::to_value(GaConfig::preset(preset))?;
    let obj = v.as_object_mut().expect("config serializes to an object");
    for (k, val) in overrides {
        if !obj.contains_key(k) {
            return Err(Error::BadConfig(format!("unknown field `{k}`")));
        }
        obj.insert(k.clone(), val.clone());
    }
    let mut cfg: GaConfig = serde_json::from_value(v).map_err(|e| Error::BadConfig(e.to_string()))?;
    // a shortened run keeps the preset's stall window only where it fits
    if !overrides.contains_key("stall_generations") {
        cfg.stall_generations = cfg.stall_generations.min(cfg.max_generations);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Experiment file contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub format: u64,
    /// Problem file path, relative to the experiment file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<String>,
    /// Bundled preset name, as an alternative to `problem`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<String>,
    pub algorithms: Vec<AlgorithmEntry>,
    pub repetitions: usize,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<String>,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::SpecInvalid(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&crate::error::read_file(path.as_ref())?)
    }

    /// Loads or generates the problem; relative paths resolve against `dir`.
    pub fn load_problem(&self, dir: &Path) -> Result<Problem> {
        match (&self.problem, &self.benchmark) {
            (Some(p), None) => Problem::load(dir.join(p)),
            (None, Some(b)) => Problem::from_file(preset(b)?),
            _ => Err(Error::SpecInvalid(
                "give exactly one of `problem` and `benchmark`".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    Ga(GaConfig),
    Heuristic(Heuristic),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Algorithm {
    pub name: String,
    pub kind: AlgorithmKind,
}

/// A validated experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Experiment {
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    pub sim: SimConfig,
}

impl Experiment {
    pub fn from_spec(spec: &ExperimentSpec) -> Result<Self> {
        let invalid = |m: String| Err(Error::SpecInvalid(m));
        if spec.format != EXPERIMENT_FORMAT {
            return invalid(format!("unsupported format {} (expected 1)", spec.format));
        }
        if spec.repetitions == 0 {
            return invalid("repetitions must be at least 1".into());
        }
        if spec.algorithms.is_empty() {
            return invalid("no algorithms given".into());
        }
        spec.sim.validate().map_err(|e| Error::SpecInvalid(e.to_string()))?;
        let seeds = match &spec.seeds {
            Seeds::Base { base } => (0..spec.repetitions as u64).map(|i| base.wrapping_add(i)).collect(),
            Seeds::List(list) => {
                if list.len() != spec.repetitions {
                    return invalid(format!(
                        "{} seeds listed for {} repetitions",
                        list.len(),
                        spec.repetitions
                    ));
                }
                list.clone()
            }
        };
        let mut algorithms = Vec::new();
        for entry in &spec.algorithms {
            algorithms.extend(entry.resolve()?);
        }
        for (i, a) in algorithms.iter().enumerate() {
            if algorithms[..i].iter().any(|b| b.name == a.name) {
                return invalid(format!("duplicate algorithm name `{}`", a.name));
            }
        }
        Ok(Experiment {
            algorithms,
            seeds,
            sim: spec.sim,
        })
    }

    /// Runs every GA once per seed and every heuristic once. Runs are
    /// independent and execute in parallel; results come back in
    /// (algorithm, repetition) order. A failed run is recorded, not raised.
    pub fn run(&self, problem: &Problem, progress: &(dyn Fn(&RunRecord) + Sync)) -> ExperimentOutcome {
        let mut jobs = Vec::new();
        for (a, alg) in self.algorithms.iter().enumerate() {
            let reps = match alg.kind {
                AlgorithmKind::Ga(_) => self.seeds.len(),
                AlgorithmKind::Heuristic(_) => 1,
            };
            jobs.extend((0..reps).map(|rep| (a, rep)));
        }
        let runs: Vec<RunRecord> = jobs
            .par_iter()
            .map(|&(a, rep)| {
                let r = self.run_one(problem, &self.algorithms[a], rep);
                progress(&r);
                r
            })
            .collect();
        let table = ComparisonTable::from_runs(&self.algorithms, &runs);
        ExperimentOutcome { runs, table }
    }

    fn run_one(&self, problem: &Problem, alg: &Algorithm, rep: usize) -> RunRecord {
        let seed = self.seeds[rep];
        let started = Instant::now();
        let mut record = RunRecord {
            algorithm: alg.name.clone(),
            rep,
            seed,
            objective: None,
            generations: 0,
            evaluations: 0,
            seconds: 0.0,
            best: None,
            log: None,
            error: None,
        };
        let kind = problem.objective_kind();
        match &alg.kind {
            AlgorithmKind::Ga(cfg) => {
                let cfg = GaConfig { seed, ..cfg.clone() };
                let eval = SimEvaluator {
                    problem,
                    config: self.sim,
                };
                match evolve(problem, &cfg, &eval) {
                    Ok((m, log)) => {
                        record.objective = Some(log.best_objective);
                        record.generations = log.generations;
                        record.evaluations = log.evaluations;
                        record.best = Some(problem.format_mapping(&m));
                        record.log = Some(log);
                    }
                    Err(e) => record.error = Some(format!("{}: {e}", e.code())),
                }
            }
            AlgorithmKind::Heuristic(h) => {
                let m = h.run(problem);
                match simulate(problem, &m, &self.sim) {
                    Ok(r) => {
                        record.objective = Some(r.objective(kind));
                        record.evaluations = 1;
                        record.best = Some(problem.format_mapping(&m));
                    }
                    Err(e) => record.error = Some(format!("{}: {e}", e.code())),
                }
            }
        }
        record.seconds = started.elapsed().as_secs_f64();
        record
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub rep: usize,
    pub seed: u64,
    /// Best objective found; `None` when the run failed.
    pub objective: Option<f64>,
    pub generations: usize,
    pub evaluations: u64,
    pub seconds: f64,
    /// Best mapping as processor ids.
    pub best: Option<String>,
    #[serde(skip)]
    pub log: Option<RunLog>,
    pub error: Option<String>,
}

impl RunRecord {
    /// Best-so-far objective per generation; a heuristic has just one point.
    pub fn convergence(&self) -> Vec<(usize, f64)> {
        match (&self.log, self.objective) {
            (Some(log), _) => log.records.iter().map(|r| (r.generation, r.best_so_far)).collect(),
            (None, Some(obj)) => vec![(0, obj)],
            (None, None) => Vec::new(),
        }
    }
}

pub struct ExperimentOutcome {
    pub runs: Vec<RunRecord>,
    pub table: ComparisonTable,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Stats {
    pub min: f64,
    pub avg: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let avg = values.iter().sum::<f64>() / values.len() as f64;
        // keep min <= avg <= max despite rounding in the sum
        Some(Stats {
            min,
            avg: avg.clamp(min, max),
            max,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub algorithm: String,
    pub runs: usize,
    pub failed: usize,
    pub objective: Option<Stats>,
    pub seconds: Option<Stats>,
    pub evaluations_avg: f64,
    pub generations_avg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn from_runs(algorithms: &[Algorithm], runs: &[RunRecord]) -> Self {
        let rows = algorithms
            .iter()
            .map(|a| {
                let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.algorithm == a.name).collect();
                let ok: Vec<&RunRecord> = mine.iter().copied().filter(|r| r.objective.is_some()).collect();
                let objectives: Vec<f64> = ok.iter().filter_map(|r| r.objective).collect();
                let seconds: Vec<f64> = ok.iter().map(|r| r.seconds).collect();
                let n = ok.len().max(1) as f64;
                ComparisonRow {
                    algorithm: a.name.clone(),
                    runs: mine.len(),
                    failed: mine.len() - ok.len(),
                    objective: Stats::of(&objectives),
                    seconds: Stats::of(&seconds),
                    evaluations_avg: ok.iter().map(|r| r.evaluations as f64).sum::<f64>() / n,
                    generations_avg: ok.iter().map(|r| r.generations as f64).sum::<f64>() / n,
                }
            })
            .collect();
        ComparisonTable { rows }
    }

    pub fn row(&self, algorithm: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm)
    }
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.algorithm.len()).max().unwrap_or(0).max(9);
        writeln!(
            f,
            "{:<width$} {:>4} {:>14} {:>14} {:>14} {:>9} {:>9} {:>9} {:>8} {:>6}",
            "algorithm", "runs", "min", "avg", "max", "min s", "avg s", "max s", "evals", "gens"
        )?;
        for r in &self.rows {
            let (o, s) = (r.objective, r.seconds);
            let num = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.1}"));
            let sec = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
            writeln!(
                f,
                "{:<width$} {:>4} {:>14} {:>14} {:>14} {:>9} {:>9} {:>9} {:>8.1} {:>6.1}",
                r.algorithm,
                r.runs,
                num(o.map(|s| s.min)),
                num(o.map(|s| s.avg)),
                num(o.map(|s| s.max)),
                sec(s.map(|s| s.min)),
                sec(s.map(|s| s.avg)),
                sec(s.map(|s| s.max)),
                r.evaluations_avg,
                r.generations_avg,
            )?;
            if r.failed > 0 {
                writeln!(f, "{:<width$} ({} failed)", "", r.failed)?;
            }
        }
        Ok(())
    }
}

/// Parses, validates and runs an experiment file's contents against an
/// already loaded problem.
pub fn run_experiment(spec: &ExperimentSpec, problem: &Problem) -> Result<(Experiment, ExperimentOutcome)> {
    let exp = Experiment::from_spec(spec)?;
    let outcome = exp.run(problem, &|_| {});
    Ok((exp, outcome))
}
