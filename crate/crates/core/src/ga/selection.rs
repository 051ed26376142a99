use rand::Rng;

use crate::error::{Error, Result};

/// Fitness-proportionate draw with replacement.
pub fn select_roulette<R: Rng + ?Sized>(fitness: &[f64], rng: &mut R) -> Result<usize> {
    assert!(!fitness.is_empty(), "empty population");
    if let Some(&bad) = fitness.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
        return Err(Error::NonPositiveFitness(bad));
    }
    let total: f64 = fitness.iter().sum();
    let mut pick = rng.gen::<f64>() * total;
    for (i, &f) in fitness.iter().enumerate() {
        if pick < f {
            return Ok(i);
        }
        pick -= f;
    }
    Ok(fitness.len() - 1)
}

pub fn select_random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> usize {
    rng.gen_range(0..len)
}

/// Best of `k` contenders drawn uniformly with replacement; the first drawn
/// wins ties.
pub fn select_tournament<R: Rng + ?Sized>(fitness: &[f64], k: usize, rng: &mut R) -> Result<usize> {
    if k < 1 || k > fitness.len() {
        return Err(Error::BadTournamentSize { k, pop: fitness.len() });
    }
    let mut best = rng.gen_range(0..fitness.len());
    for _ in 1..k {
        let c = rng.gen_range(0..fitness.len());
        if fitness[c] > fitness[best] {
            best = c;
        }
    }
    Ok(best)
}
