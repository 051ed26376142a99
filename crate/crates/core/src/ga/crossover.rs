use rand::Rng;

use crate::model::{Mapping, ProcId};

/// Swaps the tails after `cut` (genes `cut..` come from the other parent).
pub fn one_point_at(a: &Mapping, b: &Mapping, cut: usize) -> (Mapping, Mapping) {
    two_point_at(a, b, cut, a.len())
}

/// Swaps the genes in `lo..hi`.
pub fn two_point_at(a: &Mapping, b: &Mapping, lo: usize, hi: usize) -> (Mapping, Mapping) {
    assert_eq!(a.len(), b.len(), "parents differ in length");
    let mut x = a.genes().to_vec();
    let mut y = b.genes().to_vec();
    x[lo..hi].swap_with_slice(&mut y[lo..hi]);
    (Mapping::new(x), Mapping::new(y))
}

/// Child one takes `a`'s gene where `mask` is set and `b`'s elsewhere; child
/// two the opposite.
pub fn uniform_with_mask(a: &Mapping, b: &Mapping, mask: &[bool]) -> (Mapping, Mapping) {
    assert_eq!(a.len(), b.len(), "parents differ in length");
    assert_eq!(a.len(), mask.len());
    let pick = |first: &Mapping, second: &Mapping| -> Vec<ProcId> {
        mask.iter()
            .enumerate()
            .map(|(i, &heads)| if heads { first.get(i) } else { second.get(i) })
            .collect()
    };
    (Mapping::new(pick(a, b)), Mapping::new(pick(b, a)))
}

/// Cut drawn uniformly from `1..len`, so both children mix both parents.
pub fn crossover_one_point<R: Rng + ?Sized>(a: &Mapping, b: &Mapping, rng: &mut R) -> (Mapping, Mapping) {
    if a.len() < 2 {
        return (a.clone(), b.clone());
    }
    let cut = rng.gen_range(1..a.len());
    one_point_at(a, b, cut)
}

/// Two distinct cuts drawn uniformly from `1..len`.
pub fn crossover_two_point<R: Rng + ?Sized>(a: &Mapping, b: &Mapping, rng: &mut R) -> (Mapping, Mapping) {
    let n = a.len();
    if n < 3 {
        return crossover_one_point(a, b, rng);
    }
    let c1 = rng.gen_range(1..n);
    let mut c2 = rng.gen_range(1..n - 1);
    if c2 >= c1 {
        c2 += 1;
    }
    two_point_at(a, b, c1.min(c2), c1.max(c2))
}

pub fn crossover_uniform<R: Rng + ?Sized>(a: &Mapping, b: &Mapping, rng: &mut R) -> (Mapping, Mapping) {
    let mask: Vec<bool> = (0..a.len()).map(|_| rng.gen()).collect();
    uniform_with_mask(a, b, &mask)
}
