//! Random instances for tests, examples and acceptance runs.

use crate::boltzmann::PairTransition;
use crate::markov::RateMatrix;
use crate::measures::ProbabilityVector;
use rand::Rng;

/// Strictly positive probability vector with unnormalized weights uniform
/// on [floor, 1].
pub fn random_probability<R: Rng>(n: usize, floor: f64, rng: &mut R) -> ProbabilityVector {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(floor..=1.0)).collect();
    ProbabilityVector::from_unnormalized(w).expect("positive weights")
}

/// Dense irreducible chain with a cyclic drift, so it is almost surely not
/// reversible.
pub fn random_rate_matrix<R: Rng>(n: usize, rng: &mut R) -> RateMatrix {
    let mut r = vec![0.0; n * n];
    for x in 0..n {
        for y in 0..n {
            if x != y {
                r[x * n + y] = rng.gen_range(0.1..1.0);
            }
        }
        if n > 1 {
            r[x * n + (x + 1) % n] += rng.gen_range(1.0..2.0);
        }
    }
    RateMatrix::new(n, r).expect("valid rates")
}

/// Dense pair transition invariant under swapping the incoming pair and
/// swapping the outgoing pair, with entries bounded away from zero.
pub fn random_pair_transition<R: Rng>(n: usize, rng: &mut R) -> PairTransition {
    let n2 = n * n;
    let raw: Vec<f64> = (0..n2 * n2).map(|_| rng.gen_range(0.05..1.0)).collect();
    let swap = |i: usize| (i % n) * n + i / n;
    let mut p = vec![0.0; n2 * n2];
    for vw in 0..n2 {
        for ab in 0..n2 {
            let (wv, ba) = (swap(vw), swap(ab));
            p[vw * n2 + ab] =
                raw[vw * n2 + ab] + raw[wv * n2 + ab] + raw[vw * n2 + ba] + raw[wv * n2 + ba];
        }
        let s: f64 = p[vw * n2..(vw + 1) * n2].iter().sum();
        p[vw * n2..(vw + 1) * n2].iter_mut().for_each(|x| *x /= s);
    }
    PairTransition::dense(n, p).expect("rows normalized")
}
