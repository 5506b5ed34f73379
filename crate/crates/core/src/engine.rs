//! The UMDA loop: sample λ offspring, select the best μ with uniform
//! tie-breaking, set each frequency to the selected 1-fraction, clamp.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregated;
use crate::error::{Result, UmdaError};
use crate::fitness::FitnessKind;
use crate::instrumentation::{
    level_counts, max_selection_relevant_from_levels, FrequencyStats, IterationObserver,
    IterationRecord, PopulationStats, RunTrace,
};
use crate::model::{
    keyed_rng, sample_population, FrequencyVector, Individual, Population, StreamDomain, UmdaParams,
};

/// How offspring are drawn.
///
/// `Explicit` materializes every individual from its own keyed stream.
/// `Aggregated` draws the LeadingOnes fitness histogram and the selected
/// 1-counts directly (see [`crate::aggregated`]); it is exact in
/// distribution but produces different realizations than `Explicit`.
/// `Auto` picks `Aggregated` for prefix-scored fitness and `Explicit`
/// otherwise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Explicit,
    Aggregated,
    #[default]
    Auto,
}

impl Backend {
    pub fn resolve(self, fitness: FitnessKind, n: usize) -> Result<Backend> {
        let prefix_scored = fitness.scored_prefix(n).is_some();
        match self {
            Backend::Auto if prefix_scored => Ok(Backend::Aggregated),
            Backend::Auto => Ok(Backend::Explicit),
            Backend::Aggregated if !prefix_scored => Err(UmdaError::UnsupportedBackend {
                backend: self.to_string(),
                fitness: fitness.to_string(),
            }),
            other => Ok(other),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Explicit => "explicit",
            Backend::Aggregated => "aggregated",
            Backend::Auto => "auto",
        })
    }
}

impl FromStr for Backend {
    type Err = UmdaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit" => Ok(Backend::Explicit),
            "aggregated" => Ok(Backend::Aggregated),
            "auto" => Ok(Backend::Auto),
            other => Err(UmdaError::InvalidParams(format!(
                "unknown backend {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    OptimumFound,
    IterationCap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub found_optimum: bool,
    pub termination: Termination,
    /// Iterations executed, including the one that sampled the optimum.
    pub iterations_completed: u64,
    /// 1-based index of the first optimal fitness evaluation. Runs that do
    /// not stop at the optimum still record it here.
    pub first_optimum_eval_index: Option<u64>,
    pub final_frequencies: FrequencyVector,
    pub trace: RunTrace,
}

fn selection_order(a: &Individual, b: &Individual) -> Ordering {
    b.fitness
        .cmp(&a.fitness)
        .then(a.tiebreak_key.cmp(&b.tiebreak_key))
}

/// The μ best individuals, ties broken by ascending tie-break key. The
/// returned slice is not sorted.
pub fn select_top_mu(pop: &Population, mu: usize) -> Vec<&Individual> {
    let mut order: Vec<usize> = (0..pop.len()).collect();
    let cmp = |&a: &usize, &b: &usize| {
        selection_order(&pop.individuals[a], &pop.individuals[b]).then(a.cmp(&b))
    };
    let mu = mu.min(order.len());
    if mu == 0 {
        return Vec::new();
    }
    if mu < order.len() {
        order.select_nth_unstable_by(mu - 1, cmp);
        order.truncate(mu);
    }
    order.into_iter().map(|i| &pop.individuals[i]).collect()
}

/// `clamp(ones at position i / μ)` over the selected individuals.
pub fn update_frequencies(
    selected: &[&Individual],
    n: usize,
    mu: usize,
) -> Result<FrequencyVector> {
    if selected.len() != mu {
        return Err(UmdaError::InvalidParams(format!(
            "expected {mu} selected individuals, got {}",
            selected.len()
        )));
    }
    let mut counts = vec![0usize; n];
    for x in selected {
        if x.bits.len() != n {
            return Err(UmdaError::InvalidParams(format!(
                "individual of length {} in dimension {n}",
                x.bits.len()
            )));
        }
        for (i, slot) in counts.iter_mut().enumerate() {
            *slot += x.bits.get(i) as usize;
        }
    }
    FrequencyVector::from_counts(&counts, mu)
}

/// A configured UMDA run.
#[derive(Clone, Debug)]
pub struct Umda {
    params: UmdaParams,
    fitness: FitnessKind,
    backend: Backend,
    run_index: u64,
    stop_at_optimum: bool,
    initial: Option<FrequencyVector>,
}

enum Pending {
    Explicit(Population),
    Aggregated {
        counts: Vec<usize>,
        rng: Box<rand_chacha::ChaCha8Rng>,
    },
}

impl Umda {
    pub fn new(params: UmdaParams, fitness: FitnessKind) -> Result<Self> {
        params.validate()?;
        fitness.validate(params.n)?;
        Ok(Self {
            params,
            fitness,
            backend: Backend::Auto,
            run_index: 0,
            stop_at_optimum: true,
            initial: None,
        })
    }

    pub fn backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn run_index(mut self, run_index: u64) -> Self {
        self.run_index = run_index;
        self
    }

    /// When false the run always executes `max_iterations` iterations.
    pub fn stop_at_optimum(mut self, stop: bool) -> Self {
        self.stop_at_optimum = stop;
        self
    }

    /// Start from `p` instead of the all-1/2 model.
    pub fn initial_frequencies(mut self, p: FrequencyVector) -> Result<Self> {
        if p.n() != self.params.n {
            return Err(UmdaError::InvalidParams(format!(
                "initial model has {} entries, expected {}",
                p.n(),
                self.params.n
            )));
        }
        self.initial = Some(p);
        Ok(self)
    }

    pub fn params(&self) -> &UmdaParams {
        &self.params
    }

    pub fn run(&self) -> Result<RunOutcome> {
        self.run_observed(&mut [])
    }

    pub fn run_observed(&self, observers: &mut [&mut dyn IterationObserver]) -> Result<RunOutcome> {
        let UmdaParams {
            n,
            mu,
            lambda,
            max_iterations,
            master_seed,
        } = self.params;
        let backend = self.backend.resolve(self.fitness, n)?;
        let optimum = self.fitness.optimum_value(n);
        let mut p = match &self.initial {
            Some(p) => p.clone(),
            None => FrequencyVector::uniform(n)?,
        };
        let mut trace = RunTrace::default();
        let mut first_eval = None;

        for t in 0..max_iterations {
            let (stats, first_hit, pending) = match backend {
                Backend::Explicit => {
                    let pop = sample_population(&p, &self.params, self.run_index, t, self.fitness);
                    let first_hit = pop
                        .individuals
                        .iter()
                        .position(|x| x.fitness == optimum)
                        .map(|i| i as u64 + 1);
                    let max_selection_relevant =
                        (self.fitness == FitnessKind::LeadingOnes).then(|| {
                            let counts = level_counts(pop.individuals.iter().map(|x| x.fitness), n);
                            max_selection_relevant_from_levels(&counts, mu)
                        });
                    let stats = PopulationStats {
                        max_selection_relevant: max_selection_relevant.flatten(),
                        best_fitness: pop.individuals.iter().map(|x| x.fitness).max().unwrap_or(0),
                        optimum_sampled: first_hit.is_some(),
                    };
                    (stats, first_hit, Pending::Explicit(pop))
                }
                Backend::Aggregated => {
                    let prefix = self
                        .fitness
                        .scored_prefix(n)
                        .expect("aggregated backend resolved for prefix-scored fitness");
                    let mut rng = keyed_rng(
                        StreamDomain::Aggregate,
                        &[master_seed, self.run_index, t],
                        0,
                    );
                    let counts = aggregated::sample_levels(&p, prefix, lambda, &mut rng);
                    let hits = counts[prefix];
                    let first_hit =
                        (hits > 0).then(|| aggregated::first_hit_index(hits, lambda, &mut rng));
                    let stats = PopulationStats {
                        max_selection_relevant: if self.fitness == FitnessKind::LeadingOnes {
                            max_selection_relevant_from_levels(&counts, mu)
                        } else {
                            None
                        },
                        best_fitness: counts.iter().rposition(|&c| c > 0).unwrap_or(0),
                        optimum_sampled: hits > 0,
                    };
                    (
                        stats,
                        first_hit,
                        Pending::Aggregated {
                            counts,
                            rng: Box::new(rng),
                        },
                    )
                }
                Backend::Auto => unreachable!("backend resolved above"),
            };

            let record = IterationRecord::assemble(t, FrequencyStats::of(&p), stats);
            for obs in observers.iter_mut() {
                obs.observe(&record, &p);
            }
            trace.records.push(record);

            if let Some(index) = first_hit {
                first_eval = first_eval.or(Some(t * lambda as u64 + index));
            }
            if first_hit.is_some() && self.stop_at_optimum {
                return Ok(RunOutcome {
                    found_optimum: true,
                    termination: Termination::OptimumFound,
                    iterations_completed: t + 1,
                    first_optimum_eval_index: first_eval,
                    final_frequencies: p,
                    trace,
                });
            }

            p = match pending {
                Pending::Explicit(pop) => update_frequencies(&select_top_mu(&pop, mu), n, mu)?,
                Pending::Aggregated { counts, mut rng } => {
                    let ones = aggregated::selected_ones(&p, &counts, mu, &mut *rng);
                    FrequencyVector::from_counts_unchecked(&ones, mu)
                }
            };
        }

        Ok(RunOutcome {
            found_optimum: false,
            termination: Termination::IterationCap,
            iterations_completed: max_iterations,
            first_optimum_eval_index: first_eval,
            final_frequencies: p,
            trace,
        })
    }
}

/// Runs with run index 0, the automatic backend and early stopping.
pub fn run(
    params: &UmdaParams,
    fitness: FitnessKind,
    observers: &mut [&mut dyn IterationObserver],
) -> Result<RunOutcome> {
    Umda::new(params.clone(), fitness)?.run_observed(observers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BitString;

    fn pop_with_fitness(values: &[usize], keys: &[u64]) -> Population {
        let individuals = values
            .iter()
            .zip(keys)
            .map(|(&f, &k)| Individual {
                bits: BitString::zeros(4),
                fitness: f,
                tiebreak_key: k,
            })
            .collect();
        Population {
            individuals,
            iteration: 0,
            fitness: FitnessKind::LeadingOnes,
        }
    }

    #[test]
    fn select_examples() {
        let pop = pop_with_fitness(&[3, 2, 2, 0], &[5, 9, 1, 0]);
        let mut got: Vec<usize> = select_top_mu(&pop, 2).iter().map(|x| x.fitness).collect();
        got.sort();
        assert_eq!(got, vec![2, 3]);
        // smaller key wins the tie
        assert!(select_top_mu(&pop, 2).iter().any(|x| x.tiebreak_key == 1));
        let pop = pop_with_fitness(&[5, 5, 5], &[1, 2, 3]);
        assert_eq!(select_top_mu(&pop, 3).len(), 3);
    }

    #[test]
    fn update_examples() {
        let a = Individual::new("110".parse().unwrap(), FitnessKind::LeadingOnes, 0);
        let b = Individual::new("100".parse().unwrap(), FitnessKind::LeadingOnes, 1);
        let p = update_frequencies(&[&a, &b], 3, 2).unwrap();
        let expected = [2.0 / 3.0, 0.5, 1.0 / 3.0];
        for (got, want) in p.as_slice().iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }
        for n in [2, 5, 70] {
            let ones = Individual::new(BitString::ones(n), FitnessKind::OneMax, 0);
            let zeros = Individual::new(BitString::zeros(n), FitnessKind::OneMax, 0);
            let up = update_frequencies(&[&ones, &ones], n, 2).unwrap();
            let down = update_frequencies(&[&zeros, &zeros], n, 2).unwrap();
            assert!(up
                .as_slice()
                .iter()
                .all(|v| (v - (1.0 - 1.0 / n as f64)).abs() < 1e-12));
            assert!(down
                .as_slice()
                .iter()
                .all(|v| (v - 1.0 / n as f64).abs() < 1e-12));
        }
        assert!(update_frequencies(&[&a], 3, 2).is_err());
    }

    #[test]
    fn zero_iteration_cap_is_rejected() {
        let params = UmdaParams::new(4, 1, 2).unwrap().with_max_iterations(0);
        assert!(Umda::new(params, FitnessKind::LeadingOnes).is_err());
    }

    #[test]
    fn aggregated_rejects_one_max() {
        let params = UmdaParams::new(4, 1, 2).unwrap();
        let umda = Umda::new(params, FitnessKind::OneMax)
            .unwrap()
            .backend(Backend::Aggregated);
        assert!(matches!(
            umda.run(),
            Err(UmdaError::UnsupportedBackend { .. })
        ));
    }

    #[test]
    fn backend_parses() {
        assert_eq!("explicit".parse::<Backend>().unwrap(), Backend::Explicit);
        assert!("fast".parse::<Backend>().is_err());
        assert_eq!(
            Backend::Auto.resolve(FitnessKind::OneMax, 4).unwrap(),
            Backend::Explicit
        );
        assert_eq!(
            Backend::Auto.resolve(FitnessKind::LeadingOnes, 4).unwrap(),
            Backend::Aggregated
        );
    }
}
