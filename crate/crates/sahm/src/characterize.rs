//! State-dynamics characterization: transition counts, transition shares,
//! maximal same-state intervals, and per-application state coverage.

use std::io::Write;

use thiserror::Error;

use crate::state::{BehavioralState, CutoffSet, STATE_COUNT};
use crate::trace::Trace;

/// Default interval length buckets (lower bounds, in epochs):
/// 1, 2-4, 5-9, 10-49, 50+.
pub const DEFAULT_INTERVAL_BUCKETS: [u64; 5] = [1, 2, 5, 10, 50];

#[derive(Debug, Error)]
pub enum CharacterizeError {
    #[error("no transitions to take shares of{0}")]
    NoTransitions(&'static str),
    #[error("interval buckets must be strictly increasing and start at 1, got {0:?}")]
    InvalidBuckets(Vec<u64>),
    #[error("at least one trace is required")]
    NoTraces,
    #[error("csv write failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("write failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Pairwise state transition counts over consecutive epochs. Counting never
/// crosses a trace boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionMatrix {
    counts: [[u64; STATE_COUNT]; STATE_COUNT],
}

impl TransitionMatrix {
    pub fn zero() -> Self {
        TransitionMatrix {
            counts: [[0; STATE_COUNT]; STATE_COUNT],
        }
    }

    pub fn count(&self, from: BehavioralState, to: BehavioralState) -> u64 {
        self.counts[from.index()][to.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn diagonal_total(&self) -> u64 {
        (0..STATE_COUNT).map(|i| self.counts[i][i]).sum()
    }

    /// Fraction of transitions that stay in the same state.
    pub fn diagonal_share(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        self.diagonal_total() as f64 / total as f64
    }

    fn add_trace(&mut self, states: &[BehavioralState]) {
        for pair in states.windows(2) {
            self.counts[pair[0].index()][pair[1].index()] += 1;
        }
    }
}

/// Counts transitions over every trace. Traces shorter than two epochs
/// contribute no pairs and are skipped with a warning.
pub fn transitions(traces: &[Trace], cutoffs: &CutoffSet) -> TransitionMatrix {
    let mut matrix = TransitionMatrix::zero();
    for trace in traces {
        if trace.len() < 2 {
            log::warn!(
                "trace `{}` has {} epoch(s); too short to contribute transitions",
                trace.name(),
                trace.len()
            );
            continue;
        }
        matrix.add_trace(&trace.states(cutoffs));
    }
    matrix
}

/// Normalized transition shares. `None` means the transition never occurred,
/// which output files preserve as an empty/null field, distinct from a zero.
pub type TransitionShares = [[Option<f64>; STATE_COUNT]; STATE_COUNT];

/// Shares of total transition count per (from, to) pair. With
/// `exclude_diagonal`, self-transitions are removed before normalizing and
/// their cells are reported as absent.
pub fn transition_shares(
    matrix: &TransitionMatrix,
    exclude_diagonal: bool,
) -> Result<TransitionShares, CharacterizeError> {
    let total = if exclude_diagonal {
        matrix.total() - matrix.diagonal_total()
    } else {
        matrix.total()
    };
    if total == 0 {
        return Err(CharacterizeError::NoTransitions(if exclude_diagonal {
            " (no off-diagonal transitions)"
        } else {
            ""
        }));
    }
    let mut shares = [[None; STATE_COUNT]; STATE_COUNT];
    for from in 0..STATE_COUNT {
        for to in 0..STATE_COUNT {
            if exclude_diagonal && from == to {
                continue;
            }
            let count = matrix.counts[from][to];
            if count > 0 {
                shares[from][to] = Some(count as f64 / total as f64);
            }
        }
    }
    Ok(shares)
}

/// Interval statistics over maximal runs of the same state.
#[derive(Debug, Clone)]
pub struct IntervalStats {
    buckets: Vec<u64>,
    /// Every maximal run, in encounter order: (state, length in epochs).
    intervals: Vec<(BehavioralState, u64)>,
    count_share: Vec<f64>,
    time_share: Vec<f64>,
}

impl IntervalStats {
    /// Bucket lower bounds.
    pub fn buckets(&self) -> &[u64] {
        &self.buckets
    }

    pub fn intervals(&self) -> &[(BehavioralState, u64)] {
        &self.intervals
    }

    /// Share of interval count per bucket; sums to 1.
    pub fn count_share(&self) -> &[f64] {
        &self.count_share
    }

    /// Share of total epochs per bucket; sums to 1.
    pub fn time_share(&self) -> &[f64] {
        &self.time_share
    }

    /// Interval lengths for one state.
    pub fn lengths_for(&self, state: BehavioralState) -> Vec<u64> {
        self.intervals
            .iter()
            .filter(|(s, _)| *s == state)
            .map(|(_, len)| *len)
            .collect()
    }

    /// Mean interval length for one state, if the state ever occurred.
    pub fn mean_length_for(&self, state: BehavioralState) -> Option<f64> {
        let lengths = self.lengths_for(state);
        if lengths.is_empty() {
            return None;
        }
        Some(lengths.iter().sum::<u64>() as f64 / lengths.len() as f64)
    }

    /// Mean interval length over all states.
    pub fn mean_length(&self) -> f64 {
        let total: u64 = self.intervals.iter().map(|(_, len)| len).sum();
        total as f64 / self.intervals.len() as f64
    }

    /// Human-readable bucket label, e.g. `2-4` or `50+`.
    pub fn bucket_label(&self, index: usize) -> String {
        let lo = self.buckets[index];
        match self.buckets.get(index + 1) {
            Some(&next) if next == lo + 1 => format!("{lo}"),
            Some(&next) => format!("{lo}-{}", next - 1),
            None => format!("{lo}+"),
        }
    }

    fn bucket_of(&self, length: u64) -> usize {
        self.buckets
            .iter()
            .rposition(|&lo| length >= lo)
            .expect("buckets start at 1 and lengths are >= 1")
    }
}

/// Splits every trace into maximal same-state runs and buckets the run
/// lengths. `buckets` are lower bounds: strictly increasing, starting at 1 so
/// every interval lands in exactly one bucket.
pub fn intervals(
    traces: &[Trace],
    cutoffs: &CutoffSet,
    buckets: &[u64],
) -> Result<IntervalStats, CharacterizeError> {
    if traces.is_empty() {
        return Err(CharacterizeError::NoTraces);
    }
    let valid =
        !buckets.is_empty() && buckets[0] == 1 && buckets.windows(2).all(|pair| pair[0] < pair[1]);
    if !valid {
        return Err(CharacterizeError::InvalidBuckets(buckets.to_vec()));
    }

    let mut stats = IntervalStats {
        buckets: buckets.to_vec(),
        intervals: Vec::new(),
        count_share: vec![0.0; buckets.len()],
        time_share: vec![0.0; buckets.len()],
    };
    for trace in traces {
        let states = trace.states(cutoffs);
        let mut run_state = states[0];
        let mut run_len = 1u64;
        for &state in &states[1..] {
            if state == run_state {
                run_len += 1;
            } else {
                stats.intervals.push((run_state, run_len));
                run_state = state;
                run_len = 1;
            }
        }
        stats.intervals.push((run_state, run_len));
    }

    let mut count_per_bucket = vec![0u64; buckets.len()];
    let mut epochs_per_bucket = vec![0u64; buckets.len()];
    for &(_, length) in &stats.intervals {
        let bucket = stats.bucket_of(length);
        count_per_bucket[bucket] += 1;
        epochs_per_bucket[bucket] += length;
    }
    let total_count: u64 = count_per_bucket.iter().sum();
    let total_epochs: u64 = epochs_per_bucket.iter().sum();
    for i in 0..buckets.len() {
        stats.count_share[i] = count_per_bucket[i] as f64 / total_count as f64;
        stats.time_share[i] = epochs_per_bucket[i] as f64 / total_epochs as f64;
    }
    Ok(stats)
}

/// Per-application state occupancy plus the unweighted average across
/// applications.
#[derive(Debug, Clone)]
pub struct CoverageTable {
    pub rows: Vec<(String, [f64; STATE_COUNT])>,
    pub average: [f64; STATE_COUNT],
}

/// Computes the fraction of epochs each application spends in each state.
pub fn coverage(traces: &[Trace], cutoffs: &CutoffSet) -> Result<CoverageTable, CharacterizeError> {
    if traces.is_empty() {
        return Err(CharacterizeError::NoTraces);
    }
    let mut rows = Vec::with_capacity(traces.len());
    let mut average = [0.0f64; STATE_COUNT];
    for trace in traces {
        let fractions = crate::trace::empirical_state_fraction(trace, cutoffs);
        for (avg, f) in average.iter_mut().zip(fractions.iter()) {
            *avg += f;
        }
        rows.push((trace.name().to_string(), fractions));
    }
    for avg in &mut average {
        *avg /= traces.len() as f64;
    }
    Ok(CoverageTable { rows, average })
}

/// Writes `coverage.csv`: one row per application with its 16 state shares,
/// followed by an `average` row.
pub fn write_coverage_csv<W: Write>(
    writer: W,
    table: &CoverageTable,
) -> Result<(), CharacterizeError> {
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec!["application".to_string()];
    header.extend(BehavioralState::all().map(|s| s.label()));
    out.write_record(&header)?;
    for (name, fractions) in &table.rows {
        let mut row = vec![name.clone()];
        row.extend(fractions.iter().map(|f| format!("{f}")));
        out.write_record(&row)?;
    }
    let mut row = vec!["average".to_string()];
    row.extend(table.average.iter().map(|f| format!("{f}")));
    out.write_record(&row)?;
    out.flush()?;
    Ok(())
}

/// Writes `transitions.csv`: all 256 (from, to) pairs with the share of total
/// transitions; transitions that never occurred leave the share field empty.
pub fn write_transitions_csv<W: Write>(
    writer: W,
    shares: &TransitionShares,
) -> Result<(), CharacterizeError> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["from_state", "to_state", "share"])?;
    for from in 0..STATE_COUNT {
        for to in 0..STATE_COUNT {
            let share = shares[from][to].map_or(String::new(), |s| format!("{s}"));
            out.write_record(&[from.to_string(), to.to_string(), share])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes `intervals.csv`. Bucket rows carry the count and time shares;
/// state rows carry the per-state mean interval length (empty when a state
/// never occurred); the final `all` row carries the overall mean.
pub fn write_intervals_csv<W: Write>(
    writer: W,
    stats: &IntervalStats,
) -> Result<(), CharacterizeError> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "kind",
        "key",
        "count_share",
        "time_share",
        "mean_interval_epochs",
    ])?;
    for i in 0..stats.buckets().len() {
        out.write_record(&[
            "bucket".to_string(),
            stats.bucket_label(i),
            format!("{}", stats.count_share()[i]),
            format!("{}", stats.time_share()[i]),
            String::new(),
        ])?;
    }
    for state in BehavioralState::all() {
        let mean = stats
            .mean_length_for(state)
            .map_or(String::new(), |m| format!("{m}"));
        out.write_record(&[
            "state".to_string(),
            state.label(),
            String::new(),
            String::new(),
            mean,
        ])?;
    }
    out.write_record(&[
        "all".to_string(),
        String::new(),
        String::new(),
        String::new(),
        format!("{}", stats.mean_length()),
    ])?;
    out.flush()?;
    Ok(())
}
