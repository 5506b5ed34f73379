//! Population-free sampling for LeadingOnes-type fitness.
//!
//! Under a product model, the number of offspring with at least `k` leading
//! ones is a chain of binomial thinnings: `c_0 = λ`, `c_k ~ Bin(c_{k-1}, p_k)`.
//! That chain fixes the whole fitness histogram. After truncation selection a
//! selected individual with `ℓ < m` leading ones has ones at positions `1..=ℓ`,
//! a zero at `ℓ + 1`, and untouched Bernoulli bits afterwards, so the next
//! model needs only one more binomial per position. The joint law of the
//! observables and of the updated model is exactly the one of the explicit
//! sampler; only the individual bit strings are never materialized.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::model::FrequencyVector;

fn binomial<R: Rng + ?Sized>(trials: usize, p: f64, rng: &mut R) -> usize {
    if trials == 0 {
        return 0;
    }
    Binomial::new(trials as u64, p)
        .expect("clamped frequency is a valid probability")
        .sample(rng) as usize
}

/// `counts[k]` = number of offspring whose first `k` bits are all 1, for
/// `k` in `0..=prefix`.
pub fn sample_levels<R: Rng + ?Sized>(
    p: &FrequencyVector,
    prefix: usize,
    lambda: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut counts = vec![0usize; prefix + 1];
    counts[0] = lambda;
    for k in 1..=prefix {
        let prev = counts[k - 1];
        if prev == 0 {
            break;
        }
        counts[k] = binomial(prev, p.get(k - 1), rng);
    }
    counts
}

/// 1-based sampling index of the first of `hits` optimal offspring, when the
/// `hits` optima occupy a uniformly random subset of `1..=lambda`.
pub fn first_hit_index<R: Rng + ?Sized>(hits: usize, lambda: usize, rng: &mut R) -> u64 {
    assert!(hits >= 1 && hits <= lambda);
    let mut remaining = lambda;
    for pos in 1..=lambda {
        if rng.random::<f64>() * (remaining as f64) < hits as f64 {
            return pos as u64;
        }
        remaining -= 1;
    }
    lambda as u64
}

/// Number of ones per position among the μ selected offspring.
pub fn selected_ones<R: Rng + ?Sized>(
    p: &FrequencyVector,
    counts: &[usize],
    mu: usize,
    rng: &mut R,
) -> Vec<usize> {
    let n = p.n();
    let prefix = counts.len() - 1;
    (1..=n)
        .map(|j| {
            if j <= prefix {
                // selected with >= j leading ones are forced to 1; selected
                // with exactly j - 1 are forced to 0; the rest are free
                let forced = counts[j].min(mu);
                let free = mu.saturating_sub(counts[j - 1]);
                forced + binomial(free, p.get(j - 1), rng)
            } else {
                binomial(mu, p.get(j - 1), rng)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn levels_are_monotone_and_start_at_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = FrequencyVector::uniform(20).unwrap();
        let c = sample_levels(&p, 20, 1000, &mut rng);
        assert_eq!(c[0], 1000);
        assert!(c.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn selected_prefix_is_full() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = FrequencyVector::uniform(6).unwrap();
        // 10 offspring; 4 reach level 2, 1 reaches level 3
        let counts = [10, 7, 4, 1, 0, 0, 0];
        let ones = selected_ones(&p, &counts, 4, &mut rng);
        assert_eq!(&ones[..3], &[4, 4, 1]);
    }

    #[test]
    fn first_hit_is_uniform_for_single_hit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut hist = [0usize; 4];
        for _ in 0..40_000 {
            hist[first_hit_index(1, 4, &mut rng) as usize - 1] += 1;
        }
        for h in hist {
            let f = h as f64 / 40_000.0;
            assert!((f - 0.25).abs() < 0.01, "{f}");
        }
    }
}
