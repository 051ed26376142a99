//! CSV and JSON result files.
//!
//! Every CSV has a header row, LF line endings and plain decimal numbers,
//! and depends only on the seeds and inputs. Wall-clock times go to
//! `timing.csv` and `run_metadata.json`, which are not reproducible.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::error::Result;
use crate::ga::MutationKind;
use crate::harness::{AlgorithmKind, CorrelationReport, Experiment, RunRecord};
use crate::heuristics::Heuristic;
use crate::model::{mapping_space_size, Problem};

pub const COMPARISON_CSV: &str = "comparison.csv";
pub const CONVERGENCE_CSV: &str = "convergence.csv";
pub const CORRELATION_CSV: &str = "correlation.csv";
pub const TIMING_CSV: &str = "timing.csv";
pub const METADATA_JSON: &str = "run_metadata.json";

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

/// `f64` in plain decimal (`inf` for deadlocked mappings).
fn num(x: f64) -> String {
    format!("{x}")
}

/// Writes all result files into `dir`, creating it if needed. Missing runs or
/// report produce header-only files.
pub fn emit_results(
    dir: &Path,
    runs: &[RunRecord],
    report: Option<&CorrelationReport>,
    metadata: &Value,
) -> Result<()> {
    fs::create_dir_all(dir)?;

    let mut w = writer(&dir.join(COMPARISON_CSV))?;
    w.write_record(["algorithm", "rep", "seed", "objective", "generations", "evaluations"])?;
    for r in runs {
        w.write_record([
            r.algorithm.clone(),
            r.rep.to_string(),
            r.seed.to_string(),
            r.objective.map(num).unwrap_or_default(),
            r.generations.to_string(),
            r.evaluations.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = writer(&dir.join(CONVERGENCE_CSV))?;
    w.write_record(["algorithm", "rep", "generation", "best_so_far"])?;
    for r in runs {
        for (g, best) in r.convergence() {
            w.write_record([r.algorithm.clone(), r.rep.to_string(), g.to_string(), num(best)])?;
        }
    }
    w.flush()?;

    let mut w = writer(&dir.join(TIMING_CSV))?;
    w.write_record(["algorithm", "rep", "seed", "seconds"])?;
    for r in runs {
        w.write_record([
            r.algorithm.clone(),
            r.rep.to_string(),
            r.seed.to_string(),
            num(r.seconds),
        ])?;
    }
    w.flush()?;

    let mut w = writer(&dir.join(CORRELATION_CSV))?;
    w.write_record(["mapping_index", "makespan", "imbalance", "objective"])?;
    for rec in report.map(|r| r.records.as_slice()).unwrap_or_default() {
        w.write_record([
            rec.index.to_string(),
            rec.makespan.to_string(),
            rec.imbalance.to_string(),
            num(rec.objective),
        ])?;
    }
    w.flush()?;

    let mut text = serde_json::to_string_pretty(metadata)?;
    text.push('\n');
    fs::write(dir.join(METADATA_JSON), text)?;
    Ok(())
}

/// Configuration echo, problem summary, seeds and per-run timings.
pub fn run_metadata(problem: &Problem, experiment: Option<&Experiment>, runs: &[RunRecord], extra: Value) -> Value {
    let started = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let approximations: Vec<String> = experiment
        .map(|e| e.algorithms.as_slice())
        .unwrap_or_default()
        .iter()
        .filter_map(|a| match &a.kind {
            AlgorithmKind::Heuristic(Heuristic::Orb) => {
                Some(format!("{}: orb is an approximation of output-rate balancing", a.name))
            }
            AlgorithmKind::Ga(cfg) if cfg.mutation == MutationKind::ThreeStep => Some(format!(
                "{}: three_step mutation approximates the GA3SM operator",
                a.name
            )),
            _ => None,
        })
        .collect();
    json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "written_at_unix": started,
        "problem": {
            "apps": problem.apps().iter().map(|a| a.name.clone()).collect::<Vec<_>>(),
            "tasks": problem.num_tasks(),
            "processors": problem.num_procs(),
            "objective": problem.objective_kind(),
            "space_size": mapping_space_size(problem).to_string(),
        },
        "experiment": experiment,
        "approximations": approximations,
        "runs": runs,
        "extra": extra,
    })
}
