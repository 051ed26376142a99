//! Full enumeration of small mapping spaces.

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{mapping_space_size, Cycles, Mapping, Problem};
use crate::simulator::{simulate, SimConfig};

pub const DEFAULT_CAP: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MappingRecord {
    pub index: u64,
    pub makespan: Cycles,
    pub imbalance: Cycles,
    /// Infinite for a deadlocked mapping.
    pub objective: f64,
}

/// Objective means inside the lowest-makespan quartile, split at the median
/// imbalance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuartileSummary {
    pub count: usize,
    pub low_imbalance_mean: f64,
    pub high_imbalance_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub records: Vec<MappingRecord>,
    /// Pearson correlation of makespan and objective over non-deadlocked
    /// mappings; `None` when either side is constant.
    pub pearson_r: Option<f64>,
    pub optimum: Mapping,
    pub optimum_objective: f64,
    pub quartile: Option<QuartileSummary>,
}

/// The `index`-th mapping in lexicographic order over the free genes, the
/// first free gene most significant.
pub fn mapping_at(problem: &Problem, mut index: u64) -> Mapping {
    let free = problem.free_procs();
    let base = free.len() as u64;
    let mut genes: Vec<_> = problem.tasks().iter().map(|t| t.pinned.unwrap_or(free[0])).collect();
    let slots: Vec<usize> = problem.free_tasks().collect();
    for &i in slots.iter().rev() {
        genes[i] = free[(index % base) as usize];
        index /= base;
    }
    Mapping::new(genes)
}

/// Simulates every mapping. Fails without simulating anything when the space
/// holds more than `cap` mappings.
pub fn exhaustive(problem: &Problem, sim: &SimConfig, cap: u64) -> Result<CorrelationReport> {
    sim.validate()?;
    let size = mapping_space_size(problem);
    if size > BigUint::from(cap) {
        return Err(Error::SpaceTooLarge {
            size: size.to_string(),
            cap,
        });
    }
    let n: u64 = size.try_into().expect("bounded by cap");
    let evaluated: Vec<(MappingRecord, bool)> = (0..n)
        .into_par_iter()
        .map(|index| {
            let m = mapping_at(problem, index);
            simulate(problem, &m, sim).map(|r| {
                let record = MappingRecord {
                    index,
                    makespan: r.usage.makespan(),
                    imbalance: r.usage.imbalance(),
                    objective: r.objective(problem.objective_kind()),
                };
                (record, r.deadlocked)
            })
        })
        .collect::<Result<_>>()?;
    let records: Vec<MappingRecord> = evaluated.into_iter().map(|(r, _)| r).collect();

    let best = records
        .iter()
        .min_by(|a, b| a.objective.total_cmp(&b.objective))
        .expect("space is never empty");
    let live: Vec<&MappingRecord> = records.iter().filter(|r| r.objective.is_finite()).collect();
    let xs: Vec<f64> = live.iter().map(|r| r.makespan as f64).collect();
    let ys: Vec<f64> = live.iter().map(|r| r.objective).collect();
    Ok(CorrelationReport {
        pearson_r: pearson(&xs, &ys),
        optimum: mapping_at(problem, best.index),
        optimum_objective: best.objective,
        quartile: quartile_summary(&live),
        records,
    })
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn quartile_summary(live: &[&MappingRecord]) -> Option<QuartileSummary> {
    let mut by_span: Vec<&MappingRecord> = live.to_vec();
    by_span.sort_by_key(|r| (r.makespan, r.index));
    let q = by_span.len().div_ceil(4);
    if q < 2 {
        return None;
    }
    let mut quart = by_span[..q].to_vec();
    quart.sort_by_key(|r| (r.imbalance, r.index));
    let mean = |rs: &[&MappingRecord]| rs.iter().map(|r| r.objective).sum::<f64>() / rs.len() as f64;
    let (low, high) = quart.split_at(q / 2);
    Some(QuartileSummary {
        count: q,
        low_imbalance_mean: mean(low),
        high_imbalance_mean: mean(high),
    })
}
