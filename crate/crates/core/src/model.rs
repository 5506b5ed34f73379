//! Sampling machinery: parameters, the clamped frequency vector, packed bit
//! strings, individuals and populations, and the deterministic stream keying.
//!
//! Every random draw made while sampling an individual comes from a ChaCha8
//! stream keyed by `(master_seed, run_index, iteration, individual_index)`.
//! The stream is consumed in a fixed order: one 64-bit tie-break key, then one
//! 64-bit word per bit position, position 1 first. Any sampler that follows
//! that order reproduces the same individual bit for bit.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UmdaError};
use crate::fitness::FitnessKind;

/// Tolerance used for every comparison against the clamp borders.
pub const BORDER_TOLERANCE: f64 = 1e-12;

const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

/// Problem dimension, population sizes, iteration cap and master seed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UmdaParams {
    pub n: usize,
    pub mu: usize,
    pub lambda: usize,
    pub max_iterations: u64,
    pub master_seed: u64,
}

impl UmdaParams {
    /// Parameters with the default iteration cap of `10 n` and seed 0.
    pub fn new(n: usize, mu: usize, lambda: usize) -> Result<Self> {
        let params = Self {
            n,
            mu,
            lambda,
            max_iterations: default_max_iterations(n),
            master_seed: 0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: u64) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(UmdaError::InvalidDimension(self.n));
        }
        if self.mu < 1 {
            return Err(UmdaError::InvalidParams("mu must be at least 1".into()));
        }
        if self.mu > self.lambda {
            return Err(UmdaError::InvalidParams(format!(
                "mu = {} exceeds lambda = {}",
                self.mu, self.lambda
            )));
        }
        if self.max_iterations < 1 {
            return Err(UmdaError::InvalidParams(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

pub fn default_max_iterations(n: usize) -> u64 {
    10 * n as u64
}

/// Restricts `value` to `[1/n, 1 - 1/n]`.
pub fn clamp(value: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(UmdaError::InvalidDimension(n));
    }
    if !(0.0..=1.0).contains(&value) {
        return Err(UmdaError::InvalidParams(format!(
            "probability {value} outside [0, 1]"
        )));
    }
    Ok(clamp_unchecked(value, n))
}

#[inline]
pub(crate) fn clamp_unchecked(value: f64, n: usize) -> f64 {
    let margin = 1.0 / n as f64;
    value.max(margin).min(1.0 - margin)
}

/// The UMDA model: one sampling probability per position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FrequencyVector {
    values: Vec<f64>,
}

impl FrequencyVector {
    /// The initial model, every frequency at 1/2.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(UmdaError::InvalidDimension(n));
        }
        Ok(Self {
            values: vec![0.5; n],
        })
    }

    /// Every frequency at the upper border `1 - 1/n`.
    pub fn all_upper(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(UmdaError::InvalidDimension(n));
        }
        Ok(Self {
            values: vec![1.0 - 1.0 / n as f64; n],
        })
    }

    /// Wraps explicit values; each must already lie within the borders.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(UmdaError::InvalidDimension(n));
        }
        let (lo, hi) = borders(n);
        if let Some(bad) = values
            .iter()
            .find(|v| !(**v >= lo - BORDER_TOLERANCE && **v <= hi + BORDER_TOLERANCE))
        {
            return Err(UmdaError::InvalidParams(format!(
                "frequency {bad} outside [{lo}, {hi}]"
            )));
        }
        Ok(Self { values })
    }

    /// `clamp(count / mu)` for each position.
    pub fn from_counts(counts: &[usize], mu: usize) -> Result<Self> {
        let n = counts.len();
        if n < 2 {
            return Err(UmdaError::InvalidDimension(n));
        }
        if mu == 0 || counts.iter().any(|&c| c > mu) {
            return Err(UmdaError::InvalidParams(format!(
                "counts must lie in [0, mu] with mu >= 1 (mu = {mu})"
            )));
        }
        Ok(Self::from_counts_unchecked(counts, mu))
    }

    pub(crate) fn from_counts_unchecked(counts: &[usize], mu: usize) -> Self {
        let n = counts.len();
        let values = counts
            .iter()
            .map(|&c| clamp_unchecked(c as f64 / mu as f64, n))
            .collect();
        Self { values }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Frequency at 0-based index `i`.
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn upper_border(&self) -> f64 {
        1.0 - 1.0 / self.n() as f64
    }

    pub fn lower_border(&self) -> f64 {
        1.0 / self.n() as f64
    }

    /// Whether the frequency at 0-based index `i` sits at `1 - 1/n`.
    pub fn is_at_upper(&self, i: usize) -> bool {
        self.values[i] >= self.upper_border() - BORDER_TOLERANCE
    }
}

fn borders(n: usize) -> (f64, f64) {
    let margin = 1.0 / n as f64;
    (margin, 1.0 - margin)
}

impl TryFrom<Vec<f64>> for FrequencyVector {
    type Error = UmdaError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::from_values(values)
    }
}

impl From<FrequencyVector> for Vec<f64> {
    fn from(p: FrequencyVector) -> Self {
        p.values
    }
}

/// A fixed-length bit string packed into 64-bit words.
///
/// Position 1 is the most significant bit of the first word, so a prefix scan
/// is a `leading_ones` per word. Padding bits past `len` are always zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut bits = Self::zeros(len);
        for i in 0..len {
            bits.set(i, true);
        }
        bits
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut out = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            out.set(i, b);
        }
        out
    }

    pub(crate) fn from_words(words: Vec<u64>, len: usize) -> Self {
        debug_assert_eq!(words.len(), len.div_ceil(64));
        Self { words, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Bit at 0-based index `i`.
    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.words[i >> 6] >> (63 - (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (63 - (i & 63));
        if value {
            self.words[i >> 6] |= mask;
        } else {
            self.words[i >> 6] &= !mask;
        }
    }

    /// Length of the all-ones prefix.
    pub fn leading_ones(&self) -> usize {
        let mut total = 0;
        for &w in &self.words {
            let run = w.leading_ones() as usize;
            total += run;
            if run < 64 {
                break;
            }
        }
        total.min(self.len)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = UmdaError;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(UmdaError::InvalidParams(format!(
                    "bit string contains {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_bools(&bits))
    }
}

/// A sampled bit string with its cached fitness and tie-break key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Individual {
    pub bits: BitString,
    pub fitness: usize,
    pub tiebreak_key: u64,
}

impl Individual {
    pub fn new(bits: BitString, fitness: FitnessKind, tiebreak_key: u64) -> Self {
        let value = fitness.evaluate(&bits);
        Self {
            bits,
            fitness: value,
            tiebreak_key,
        }
    }
}

/// The λ offspring of one iteration, all evaluated under `fitness`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Population {
    pub individuals: Vec<Individual>,
    pub iteration: u64,
    pub fitness: FitnessKind,
}

impl Population {
    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }
}

/// Purpose tag folded into every derived seed, so streams drawn for
/// different purposes never share a key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum StreamDomain {
    Individual = 1,
    Aggregate = 2,
    MonteCarlo = 3,
}

fn splitmix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn derive_seed(domain: StreamDomain, words: &[u64]) -> [u8; 32] {
    let mut h = splitmix64(domain as u64);
    for &w in words {
        h = splitmix64(h ^ w);
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        h = splitmix64(h);
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    seed
}

pub(crate) fn keyed_rng(domain: StreamDomain, words: &[u64], stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(derive_seed(domain, words));
    rng.set_stream(stream);
    rng
}

/// Key of the random stream used to sample one individual.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStreamSpec {
    pub master_seed: u64,
    pub run_index: u64,
    pub iteration: u64,
    pub individual_index: u64,
}

impl RngStreamSpec {
    pub fn new(master_seed: u64, run_index: u64, iteration: u64, individual_index: u64) -> Self {
        Self {
            master_seed,
            run_index,
            iteration,
            individual_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        keyed_rng(
            StreamDomain::Individual,
            &[self.master_seed, self.run_index, self.iteration],
            self.individual_index,
        )
    }
}

/// Integer thresholds for one frequency vector: bit `i` is 1 iff the drawn
/// word is below `thresholds[i]`.
#[derive(Clone, Debug)]
pub struct Sampler {
    thresholds: Vec<u64>,
}

impl Sampler {
    pub fn new(p: &FrequencyVector) -> Self {
        let thresholds = p
            .as_slice()
            .iter()
            .map(|&v| probability_threshold(v))
            .collect();
        Self { thresholds }
    }

    pub fn n(&self) -> usize {
        self.thresholds.len()
    }

    /// Draws the tie-break key and then the bits, in stream order.
    pub fn sample(&self, stream: &RngStreamSpec) -> (BitString, u64) {
        let mut rng = stream.rng();
        let key = rng.next_u64();
        let n = self.thresholds.len();
        let mut words = vec![0u64; n.div_ceil(64)];
        for (i, &thr) in self.thresholds.iter().enumerate() {
            if rng.next_u64() < thr {
                words[i >> 6] |= 1u64 << (63 - (i & 63));
            }
        }
        (BitString::from_words(words, n), key)
    }
}

#[inline]
pub(crate) fn probability_threshold(p: f64) -> u64 {
    // saturating float-to-int cast; p < 1 for every clamped frequency
    (p * TWO_POW_64) as u64
}

pub fn sample_individual(
    p: &FrequencyVector,
    stream: &RngStreamSpec,
    fitness: FitnessKind,
) -> Individual {
    let (bits, key) = Sampler::new(p).sample(stream);
    Individual::new(bits, fitness, key)
}

/// Samples λ individuals with indices `0..λ`. The result does not depend on
/// how rayon schedules the work.
pub fn sample_population(
    p: &FrequencyVector,
    params: &UmdaParams,
    run_index: u64,
    iteration: u64,
    fitness: FitnessKind,
) -> Population {
    let sampler = Sampler::new(p);
    let individuals = (0..params.lambda as u64)
        .into_par_iter()
        .map(|idx| {
            let stream = RngStreamSpec::new(params.master_seed, run_index, iteration, idx);
            let (bits, key) = sampler.sample(&stream);
            Individual::new(bits, fitness, key)
        })
        .collect();
    Population {
        individuals,
        iteration,
        fitness,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_examples() {
        assert_eq!(clamp(0.0, 4).unwrap(), 0.25);
        assert_eq!(clamp(1.0, 4).unwrap(), 0.75);
        assert_eq!(clamp(0.5, 4).unwrap(), 0.5);
        assert!(matches!(clamp(0.5, 1), Err(UmdaError::InvalidDimension(1))));
        assert!(clamp(1.5, 4).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(UmdaParams::new(1, 1, 1).is_err());
        assert!(UmdaParams::new(4, 3, 2).is_err());
        assert!(UmdaParams::new(4, 0, 2).is_err());
        let p = UmdaParams::new(4, 2, 2).unwrap();
        assert_eq!(p.max_iterations, 40);
        assert!(p.with_max_iterations(0).validate().is_err());
    }

    #[test]
    fn bitstring_prefix_scan_crosses_words() {
        let mut bits = BitString::ones(130);
        assert_eq!(bits.leading_ones(), 130);
        bits.set(100, false);
        assert_eq!(bits.leading_ones(), 100);
        assert_eq!(bits.count_ones(), 129);
        let exact = BitString::ones(128);
        assert_eq!(exact.leading_ones(), 128);
    }

    #[test]
    fn bitstring_parse_roundtrip() {
        let bits: BitString = "1101".parse().unwrap();
        assert_eq!(bits.to_string(), "1101");
        assert!("10a1".parse::<BitString>().is_err());
    }

    #[test]
    fn from_counts_clamps() {
        let p = FrequencyVector::from_counts(&[2, 1, 0], 2).unwrap();
        assert!((p.get(0) - 2.0 / 3.0).abs() < 1e-12);
        assert!((p.get(1) - 0.5).abs() < 1e-12);
        assert!((p.get(2) - 1.0 / 3.0).abs() < 1e-12);
        assert!(FrequencyVector::from_counts(&[3, 0], 2).is_err());
    }

    #[test]
    fn from_values_rejects_out_of_border() {
        assert!(FrequencyVector::from_values(vec![0.5, 0.9]).is_err());
        assert!(FrequencyVector::from_values(vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn identical_stream_gives_identical_individual() {
        let p = FrequencyVector::uniform(70).unwrap();
        let s = RngStreamSpec::new(11, 2, 3, 4);
        let a = sample_individual(&p, &s, FitnessKind::LeadingOnes);
        let b = sample_individual(&p, &s, FitnessKind::LeadingOnes);
        assert_eq!(a, b);
        let c = sample_individual(
            &p,
            &RngStreamSpec::new(11, 2, 3, 5),
            FitnessKind::LeadingOnes,
        );
        assert_ne!(a.bits, c.bits);
    }

    #[test]
    fn fair_bits_at_n_two() {
        let p = FrequencyVector::uniform(2).unwrap();
        let sampler = Sampler::new(&p);
        let samples = 100_000;
        let mut ones = [0usize; 2];
        for idx in 0..samples {
            let (bits, _) = sampler.sample(&RngStreamSpec::new(1, 0, 0, idx));
            for (i, slot) in ones.iter_mut().enumerate() {
                *slot += bits.get(i) as usize;
            }
        }
        for count in ones {
            let mean = count as f64 / samples as f64;
            assert!((0.494..=0.506).contains(&mean), "mean {mean}");
        }
    }

    #[test]
    fn lower_border_expected_ones() {
        let p = FrequencyVector::from_values(vec![0.01; 100]).unwrap();
        let sampler = Sampler::new(&p);
        let samples = 100_000u64;
        let total: usize = (0..samples)
            .map(|idx| {
                sampler
                    .sample(&RngStreamSpec::new(2, 0, 0, idx))
                    .0
                    .count_ones()
            })
            .sum();
        let mean = total as f64 / samples as f64;
        assert!((0.97..=1.03).contains(&mean), "mean {mean}");
    }

    #[test]
    fn singleton_population_matches_individual() {
        let params = UmdaParams::new(10, 1, 1).unwrap().with_seed(5);
        let p = FrequencyVector::uniform(10).unwrap();
        let pop = sample_population(&p, &params, 3, 7, FitnessKind::OneMax);
        let single = sample_individual(&p, &RngStreamSpec::new(5, 3, 7, 0), FitnessKind::OneMax);
        assert_eq!(pop.individuals, vec![single]);
    }

    #[test]
    fn population_independent_of_worker_count() {
        let params = UmdaParams::new(40, 10, 300).unwrap().with_seed(9);
        let p = FrequencyVector::uniform(40).unwrap();
        let sample_with = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample_population(&p, &params, 1, 2, FitnessKind::LeadingOnes))
        };
        assert_eq!(sample_with(1), sample_with(4));
    }

    #[test]
    fn one_max_population_mean() {
        let params = UmdaParams::new(64, 1, 10_000).unwrap().with_seed(3);
        let p = FrequencyVector::uniform(64).unwrap();
        let pop = sample_population(&p, &params, 0, 0, FitnessKind::OneMax);
        let mean = pop.individuals.iter().map(|x| x.fitness).sum::<usize>() as f64 / 1e4;
        assert!((31.8..=32.2).contains(&mean), "mean {mean}");
    }
}
