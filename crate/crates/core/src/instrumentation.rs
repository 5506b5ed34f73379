//! Per-iteration observables: critical position, maximum selection-relevant
//! position, frequency band counts, and the streaming trace writers.
//!
//! Positions reported here are 1-based, matching the usual numbering of bit
//! positions in LeadingOnes analyses.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UmdaError};
use crate::fitness::FitnessKind;
use crate::model::{FrequencyVector, Population};

/// Observables of iteration `t`. Frequency statistics describe `p^(t)`, the
/// model the iteration sampled from; population statistics describe the λ
/// offspring of that iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u64,
    pub critical_position: Option<usize>,
    pub max_selection_relevant: Option<usize>,
    pub min_frequency: f64,
    /// Largest frequency strictly after the critical position.
    pub max_frequency_beyond_critical: Option<f64>,
    pub count_at_upper_border: usize,
    pub count_below_quarter: usize,
    pub count_in_middle_band: usize,
    pub best_fitness: usize,
    pub optimum_sampled: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Receives every iteration record together with the model it describes.
pub trait IterationObserver {
    fn observe(&mut self, record: &IterationRecord, frequencies: &FrequencyVector);
}

impl<F> IterationObserver for F
where
    F: FnMut(&IterationRecord, &FrequencyVector),
{
    fn observe(&mut self, record: &IterationRecord, frequencies: &FrequencyVector) {
        self(record, frequencies)
    }
}

/// The 1-based position `i` whose predecessors are all at `1 - 1/n` while
/// `p_i` is below it, or `None` when every frequency is at the upper border.
pub fn critical_position(p: &FrequencyVector) -> Option<usize> {
    (0..p.n()).find(|&i| !p.is_at_upper(i)).map(|i| i + 1)
}

/// Frequency-side fields of an [`IterationRecord`].
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyStats {
    pub critical_position: Option<usize>,
    pub min_frequency: f64,
    pub max_frequency_beyond_critical: Option<f64>,
    pub count_at_upper_border: usize,
    pub count_below_quarter: usize,
    pub count_in_middle_band: usize,
}

impl FrequencyStats {
    /// Band counts are disjoint: an entry at the upper border is counted
    /// there first, then below 1/4, then in the open band (1/4, 3/4).
    pub fn of(p: &FrequencyVector) -> Self {
        let critical = critical_position(p);
        let mut stats = Self {
            critical_position: critical,
            min_frequency: f64::INFINITY,
            max_frequency_beyond_critical: None,
            count_at_upper_border: 0,
            count_below_quarter: 0,
            count_in_middle_band: 0,
        };
        for (i, &v) in p.as_slice().iter().enumerate() {
            stats.min_frequency = stats.min_frequency.min(v);
            if p.is_at_upper(i) {
                stats.count_at_upper_border += 1;
            } else if v < 0.25 {
                stats.count_below_quarter += 1;
            } else if v > 0.25 && v < 0.75 {
                stats.count_in_middle_band += 1;
            }
        }
        if let Some(c) = critical {
            stats.max_frequency_beyond_critical =
                p.as_slice()[c..].iter().copied().reduce(f64::max);
        }
        stats
    }
}

/// Population-side fields of an [`IterationRecord`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PopulationStats {
    pub max_selection_relevant: Option<usize>,
    pub best_fitness: usize,
    pub optimum_sampled: bool,
}

impl IterationRecord {
    pub fn assemble(iteration: u64, freq: FrequencyStats, pop: PopulationStats) -> Self {
        Self {
            iteration,
            critical_position: freq.critical_position,
            max_selection_relevant: pop.max_selection_relevant,
            min_frequency: freq.min_frequency,
            max_frequency_beyond_critical: freq.max_frequency_beyond_critical,
            count_at_upper_border: freq.count_at_upper_border,
            count_below_quarter: freq.count_below_quarter,
            count_in_middle_band: freq.count_in_middle_band,
            best_fitness: pop.best_fitness,
            optimum_sampled: pop.optimum_sampled,
        }
    }
}

/// `counts[k]` is the number of individuals whose fitness is at least `k`,
/// for `k` in `0..=n`.
pub fn level_counts(fitness_values: impl IntoIterator<Item = usize>, n: usize) -> Vec<usize> {
    let mut counts = vec![0usize; n + 2];
    for f in fitness_values {
        counts[f.min(n)] += 1;
    }
    for k in (0..=n).rev() {
        counts[k] += counts[k + 1];
    }
    counts.truncate(n + 1);
    counts
}

/// Largest `i` in `[1, n]` with at least μ individuals having at least
/// `i - 1` leading ones, read from LeadingOnes level counts.
pub fn max_selection_relevant_from_levels(counts: &[usize], mu: usize) -> Option<usize> {
    let n = counts.len().checked_sub(1)?;
    (1..=n).rev().find(|&i| counts[i - 1] >= mu)
}

/// Maximum selection-relevant position of a LeadingOnes population.
pub fn max_selection_relevant(pop: &Population, mu: usize) -> Result<Option<usize>> {
    if pop.fitness != FitnessKind::LeadingOnes {
        return Err(UmdaError::NotLeadingOnes(pop.fitness.to_string()));
    }
    let Some(first) = pop.individuals.first() else {
        return Ok(None);
    };
    let n = first.bits.len();
    let counts = level_counts(pop.individuals.iter().map(|x| x.fitness), n);
    Ok(max_selection_relevant_from_levels(&counts, mu))
}

/// Literal re-count from raw bits: does the population hold at least μ
/// individuals whose first `i - 1` bits are all 1?
pub fn selection_relevant_oracle(pop: &Population, mu: usize, i: usize) -> bool {
    let prefix = i.saturating_sub(1);
    let qualifying = pop
        .individuals
        .iter()
        .filter(|x| (0..prefix).all(|j| j < x.bits.len() && x.bits.get(j)))
        .count();
    qualifying >= mu
}

/// For each position, the first iteration in which it was selection-relevant.
/// Positions beyond the largest recorded maximum are absent.
pub fn first_selection_relevant_iterations(trace: &RunTrace) -> BTreeMap<usize, u64> {
    let mut first = BTreeMap::new();
    let mut reached = 0usize;
    for record in &trace.records {
        if let Some(m) = record.max_selection_relevant {
            for pos in (reached + 1)..=m {
                first.insert(pos, record.iteration);
            }
            reached = reached.max(m);
        }
    }
    first
}

/// Column order of the per-iteration trace CSV.
pub const TRACE_CSV_HEADER: [&str; 10] = [
    "run_id",
    "t",
    "critical_pos",
    "max_sel_relevant",
    "min_freq",
    "n_at_upper",
    "n_below_quarter",
    "n_middle",
    "best_fitness",
    "optimum_sampled",
];

fn opt_field<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub(crate) fn trace_row(run_id: u64, r: &IterationRecord) -> [String; 10] {
    [
        run_id.to_string(),
        r.iteration.to_string(),
        opt_field(r.critical_position),
        opt_field(r.max_selection_relevant),
        r.min_frequency.to_string(),
        r.count_at_upper_border.to_string(),
        r.count_below_quarter.to_string(),
        r.count_in_middle_band.to_string(),
        r.best_fitness.to_string(),
        r.optimum_sampled.to_string(),
    ]
}

/// Streams one CSV row per iteration. Write errors are kept and reported by
/// [`TraceCsvWriter::finish`].
pub struct TraceCsvWriter<W: Write> {
    writer: csv::Writer<W>,
    run_id: u64,
    error: Option<csv::Error>,
}

impl<W: Write> TraceCsvWriter<W> {
    pub fn new(inner: W, run_id: u64) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(inner);
        writer.write_record(TRACE_CSV_HEADER)?;
        Ok(Self {
            writer,
            run_id,
            error: None,
        })
    }

    pub fn write(&mut self, record: &IterationRecord) {
        if self.error.is_none() {
            if let Err(e) = self.writer.write_record(trace_row(self.run_id, record)) {
                self.error = Some(e);
            }
        }
    }

    pub fn finish(mut self) -> Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e.into());
        }
        self.writer
            .into_inner()
            .map_err(|e| UmdaError::Io(e.into_error()))
    }
}

impl<W: Write> IterationObserver for TraceCsvWriter<W> {
    fn observe(&mut self, record: &IterationRecord, _frequencies: &FrequencyVector) {
        self.write(record);
    }
}

/// Opt-in full dump: one row `t,p_1,...,p_n` per iteration.
pub struct FrequencyDumpWriter<W: Write> {
    writer: csv::Writer<W>,
    error: Option<csv::Error>,
}

impl<W: Write> FrequencyDumpWriter<W> {
    pub fn new(inner: W, n: usize) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(inner);
        let header = std::iter::once("t".to_string()).chain((1..=n).map(|i| format!("p{i}")));
        writer.write_record(header)?;
        Ok(Self {
            writer,
            error: None,
        })
    }

    pub fn finish(mut self) -> Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e.into());
        }
        self.writer
            .into_inner()
            .map_err(|e| UmdaError::Io(e.into_error()))
    }
}

impl<W: Write> IterationObserver for FrequencyDumpWriter<W> {
    fn observe(&mut self, record: &IterationRecord, frequencies: &FrequencyVector) {
        if self.error.is_some() {
            return;
        }
        let row = std::iter::once(record.iteration.to_string())
            .chain(frequencies.as_slice().iter().map(|v| v.to_string()));
        if let Err(e) = self.writer.write_record(row) {
            self.error = Some(e);
        }
    }
}
