//! Per-epoch performance-counter traces: the on-disk CSV format, validation,
//! and a seeded synthetic generator driven by a first-order state chain.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::state::{classify, BehavioralState, CutoffSet, Metric, STATE_COUNT};

/// Expected trace CSV header, in column order.
pub const TRACE_HEADER: [&str; 6] = [
    "name",
    "epoch_index",
    "branch_mispredict_ratio",
    "l1i_mpki",
    "l1d_miss_ratio",
    "l2_miss_ratio",
];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: bad header {found:?} (expected {expected:?})")]
    BadHeader {
        path: String,
        found: Vec<String>,
        expected: Vec<String>,
    },
    #[error("{path} line {line}: expected {expected} fields, found {found}")]
    WrongFieldCount {
        path: String,
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("{path} line {line}: cannot parse `{value}` as {what}")]
    BadField {
        path: String,
        line: u64,
        value: String,
        what: &'static str,
    },
    #[error("{path} line {line}: {source}")]
    FieldOutOfRange {
        path: String,
        line: u64,
        source: FieldRangeError,
    },
    #[error("{path} line {line}: duplicate epoch_index {index}")]
    DuplicateIndex { path: String, line: u64, index: u64 },
    #[error(
        "{path}: epoch_index {index} missing ({rows} data rows read; indices must be dense from 0)"
    )]
    MissingIndex {
        path: String,
        index: u64,
        rows: usize,
    },
    #[error("{path} line {line}: trace name `{found}` differs from `{expected}` on the first row")]
    NameMismatch {
        path: String,
        line: u64,
        expected: String,
        found: String,
    },
    #[error("{path}: no epochs")]
    Empty { path: String },
    #[error("trace must contain at least one epoch")]
    NoEpochs,
    #[error("epoch_ms must be positive")]
    ZeroEpochMs,
    #[error("trace name must be non-empty")]
    EmptyName,
    #[error(transparent)]
    Record(#[from] FieldRangeError),
    #[error(
        "target distribution weight {index} is {value}; weights must be finite and non-negative"
    )]
    BadWeight { index: usize, value: f64 },
    #[error("target distribution has no positive weight")]
    ZeroDistribution,
    #[error("self_transition_prob must lie in [0, 1], got {0}")]
    BadSelfTransition(f64),
    #[error("epoch_count must be at least 1")]
    ZeroEpochCount,
    #[error("no reachable successor: single-support distribution with self_transition_prob < 1")]
    NoReachableSuccessor,
    #[error("cutoff for {metric} is {cutoff}, too high to place a HIGH value within [0, {max}]")]
    CutoffTooHigh {
        metric: &'static str,
        cutoff: f64,
        max: f64,
    },
}

/// A metric value outside its documented range.
#[derive(Debug, Error)]
#[error("{field} = {value} outside [{min}, {max}]")]
pub struct FieldRangeError {
    pub field: &'static str,
    pub value: f64,
    pub min: f64,
    pub max: f64,
}

/// One 100ms-scale sampling epoch: the four characteristic metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub branch_mispredict_ratio: f64,
    pub l1i_mpki: f64,
    pub l1d_miss_ratio: f64,
    pub l2_miss_ratio: f64,
}

impl EpochRecord {
    pub fn new(
        branch_mispredict_ratio: f64,
        l1i_mpki: f64,
        l1d_miss_ratio: f64,
        l2_miss_ratio: f64,
    ) -> Result<Self, FieldRangeError> {
        let record = EpochRecord {
            branch_mispredict_ratio,
            l1i_mpki,
            l1d_miss_ratio,
            l2_miss_ratio,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<(), FieldRangeError> {
        for metric in Metric::ALL {
            let value = self.metric(metric);
            let max = metric.max_value();
            if !(value.is_finite() && (0.0..=max).contains(&value)) {
                return Err(FieldRangeError {
                    field: metric.name(),
                    value,
                    min: 0.0,
                    max,
                });
            }
        }
        Ok(())
    }

    pub fn metric(&self, metric: Metric) -> f64 {
        match metric {
            Metric::BranchMispredict => self.branch_mispredict_ratio,
            Metric::L1iMpki => self.l1i_mpki,
            Metric::L1dMiss => self.l1d_miss_ratio,
            Metric::L2Miss => self.l2_miss_ratio,
        }
    }
}

/// A named sequence of epochs sampled at a fixed epoch length.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    name: String,
    epoch_ms: u32,
    epochs: Vec<EpochRecord>,
}

impl Trace {
    pub fn new(name: String, epoch_ms: u32, epochs: Vec<EpochRecord>) -> Result<Self, TraceError> {
        if name.is_empty() {
            return Err(TraceError::EmptyName);
        }
        if epoch_ms == 0 {
            return Err(TraceError::ZeroEpochMs);
        }
        if epochs.is_empty() {
            return Err(TraceError::NoEpochs);
        }
        for record in &epochs {
            record.validate()?;
        }
        Ok(Trace {
            name,
            epoch_ms,
            epochs,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn epoch_ms(&self) -> u32 {
        self.epoch_ms
    }

    pub fn epochs(&self) -> &[EpochRecord] {
        &self.epochs
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// Wall-clock length of the trace when run unaccelerated.
    pub fn baseline_len_ms(&self) -> u64 {
        self.epochs.len() as u64 * self.epoch_ms as u64
    }

    /// Replaces the trace name.
    pub fn with_name(mut self, name: String) -> Result<Self, TraceError> {
        if name.is_empty() {
            return Err(TraceError::EmptyName);
        }
        self.name = name;
        Ok(self)
    }

    /// Classifies every epoch under the given cutoffs.
    pub fn states(&self, cutoffs: &CutoffSet) -> Vec<BehavioralState> {
        self.epochs.iter().map(|r| classify(r, cutoffs)).collect()
    }
}

/// Reads one trace from a CSV file. Rows may appear in any order but their
/// `epoch_index` values must be dense from 0 with no duplicates, and every
/// row must carry the same trace name.
pub fn read_trace(path: &Path, epoch_ms: u32) -> Result<Trace, TraceError> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| TraceError::Io {
        path: display.clone(),
        source,
    })?;
    read_trace_from(file, epoch_ms, &display)
}

/// Reads one trace from any CSV reader; `origin` names the source in errors.
pub fn read_trace_from<R: Read>(
    reader: R,
    epoch_ms: u32,
    origin: &str,
) -> Result<Trace, TraceError> {
    let path = origin.to_string();
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);

    let headers = csv_reader
        .headers()
        .map_err(|source| TraceError::Csv {
            path: path.clone(),
            source,
        })?
        .clone();
    let found: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
    if found != TRACE_HEADER {
        return Err(TraceError::BadHeader {
            path,
            found,
            expected: TRACE_HEADER.iter().map(|s| s.to_string()).collect(),
        });
    }

    let mut name: Option<String> = None;
    let mut rows: Vec<(u64, EpochRecord)> = Vec::new();
    let mut seen: HashSet<u64> = HashSet::new();
    for result in csv_reader.records() {
        let record = result.map_err(|source| TraceError::Csv {
            path: path.clone(),
            source,
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != TRACE_HEADER.len() {
            return Err(TraceError::WrongFieldCount {
                path,
                line,
                expected: TRACE_HEADER.len(),
                found: record.len(),
            });
        }
        let row_name = record[0].to_string();
        match &name {
            None => name = Some(row_name),
            Some(expected) if *expected != row_name => {
                return Err(TraceError::NameMismatch {
                    path,
                    line,
                    expected: expected.clone(),
                    found: row_name,
                });
            }
            Some(_) => {}
        }
        let index: u64 = record[1].trim().parse().map_err(|_| TraceError::BadField {
            path: path.clone(),
            line,
            value: record[1].to_string(),
            what: "a non-negative integer epoch_index",
        })?;
        if !seen.insert(index) {
            return Err(TraceError::DuplicateIndex { path, line, index });
        }
        let mut values = [0.0f64; 4];
        for (slot, field) in values.iter_mut().zip(2..6) {
            *slot = record[field]
                .trim()
                .parse()
                .map_err(|_| TraceError::BadField {
                    path: path.clone(),
                    line,
                    value: record[field].to_string(),
                    what: "a floating-point metric value",
                })?;
        }
        let epoch =
            EpochRecord::new(values[0], values[1], values[2], values[3]).map_err(|source| {
                TraceError::FieldOutOfRange {
                    path: path.clone(),
                    line,
                    source,
                }
            })?;
        rows.push((index, epoch));
    }

    if rows.is_empty() {
        return Err(TraceError::Empty { path });
    }
    for expected in 0..rows.len() as u64 {
        if !seen.contains(&expected) {
            return Err(TraceError::MissingIndex {
                path,
                index: expected,
                rows: rows.len(),
            });
        }
    }
    rows.sort_by_key(|(index, _)| *index);
    let epochs = rows.into_iter().map(|(_, record)| record).collect();
    let name = name.expect("at least one row read");
    if name.is_empty() {
        return Err(TraceError::EmptyName);
    }
    Trace::new(name, epoch_ms, epochs)
}

/// Writes a trace in the CSV format `read_trace` accepts.
pub fn write_trace(trace: &Trace, path: &Path) -> Result<(), TraceError> {
    let display = path.display().to_string();
    let file = File::create(path).map_err(|source| TraceError::Io {
        path: display.clone(),
        source,
    })?;
    write_trace_to(trace, file, &display)
}

pub fn write_trace_to<W: Write>(trace: &Trace, writer: W, origin: &str) -> Result<(), TraceError> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    let wrap = |source: csv::Error| TraceError::Csv {
        path: origin.to_string(),
        source,
    };
    csv_writer.write_record(TRACE_HEADER).map_err(wrap)?;
    for (index, record) in trace.epochs().iter().enumerate() {
        csv_writer
            .write_record(&[
                trace.name().to_string(),
                index.to_string(),
                format!("{}", record.branch_mispredict_ratio),
                format!("{}", record.l1i_mpki),
                format!("{}", record.l1d_miss_ratio),
                format!("{}", record.l2_miss_ratio),
            ])
            .map_err(wrap)?;
    }
    csv_writer.flush().map_err(|source| TraceError::Io {
        path: origin.to_string(),
        source,
    })?;
    Ok(())
}

/// Expands files and directories into a sorted list of trace CSV paths and
/// reads them all. Directories contribute their `*.csv` entries sorted by
/// file name, so the resulting workload order is stable.
pub fn read_traces_from_paths(paths: &[PathBuf], epoch_ms: u32) -> Result<Vec<Trace>, TraceError> {
    let mut files: Vec<PathBuf> = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
                .map_err(|source| TraceError::Io {
                    path: path.display().to_string(),
                    source,
                })?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(path.clone());
        }
    }
    files
        .iter()
        .map(|file| read_trace(file, epoch_ms))
        .collect()
}

/// Parameters for the synthetic generator: a target state distribution, a
/// self-transition probability, a length, and a seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    target_distribution: [f64; STATE_COUNT],
    self_transition_prob: f64,
    epoch_count: usize,
    seed: u64,
}

impl SyntheticSpec {
    /// Validates and normalizes the weights to sum to 1.
    pub fn new(
        weights: [f64; STATE_COUNT],
        self_transition_prob: f64,
        epoch_count: usize,
        seed: u64,
    ) -> Result<Self, TraceError> {
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(TraceError::BadWeight { index, value });
            }
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(TraceError::ZeroDistribution);
        }
        if !(0.0..=1.0).contains(&self_transition_prob) {
            return Err(TraceError::BadSelfTransition(self_transition_prob));
        }
        if epoch_count == 0 {
            return Err(TraceError::ZeroEpochCount);
        }
        let mut target_distribution = weights;
        for w in &mut target_distribution {
            *w /= total;
        }
        Ok(SyntheticSpec {
            target_distribution,
            self_transition_prob,
            epoch_count,
            seed,
        })
    }

    pub fn target_distribution(&self) -> &[f64; STATE_COUNT] {
        &self.target_distribution
    }

    pub fn self_transition_prob(&self) -> f64 {
        self.self_transition_prob
    }

    pub fn epoch_count(&self) -> usize {
        self.epoch_count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn support_size(&self) -> usize {
        self.target_distribution
            .iter()
            .filter(|&&w| w > 0.0)
            .count()
    }
}

/// Generates a synthetic trace and returns the state sequence it was drawn
/// from. The chain stays put with probability `self_transition_prob` and
/// otherwise moves to another state with probability proportional to that
/// state's target weight. HIGH metrics are placed at twice their cutoff
/// (capped to the metric range) and LOW metrics at half, so classification
/// under the same cutoffs reproduces the drawn sequence exactly.
pub fn generate_trace_with_states(
    spec: &SyntheticSpec,
    cutoffs: &CutoffSet,
) -> Result<(Trace, Vec<BehavioralState>), TraceError> {
    for metric in Metric::ALL {
        let cutoff = cutoffs.value(metric);
        if cutoff >= metric.max_value() {
            return Err(TraceError::CutoffTooHigh {
                metric: metric.name(),
                cutoff,
                max: metric.max_value(),
            });
        }
    }
    if spec.support_size() == 1 && spec.self_transition_prob < 1.0 && spec.epoch_count > 1 {
        return Err(TraceError::NoReachableSuccessor);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let weights = &spec.target_distribution;
    let mut drawn = Vec::with_capacity(spec.epoch_count);
    let mut current = sample_weighted(&mut rng, weights, None);
    drawn.push(current);
    for _ in 1..spec.epoch_count {
        let stay = match spec.self_transition_prob {
            p if p >= 1.0 => true,
            p if p <= 0.0 => false,
            p => rng.gen_bool(p),
        };
        if !stay {
            current = sample_weighted(&mut rng, weights, Some(current));
        }
        drawn.push(current);
    }

    let epochs = drawn
        .iter()
        .map(|&s| record_for_state(s, cutoffs))
        .collect();
    let name = format!("synth-{:016x}", spec.seed);
    let trace = Trace::new(name, 100, epochs)?;
    let states = drawn.into_iter().map(BehavioralState::from_index).collect();
    Ok((trace, states))
}

/// Generates a synthetic trace; see [`generate_trace_with_states`].
pub fn generate_trace(spec: &SyntheticSpec, cutoffs: &CutoffSet) -> Result<Trace, TraceError> {
    generate_trace_with_states(spec, cutoffs).map(|(trace, _)| trace)
}

fn sample_weighted(
    rng: &mut ChaCha8Rng,
    weights: &[f64; STATE_COUNT],
    exclude: Option<usize>,
) -> usize {
    let total: f64 = weights
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != exclude)
        .map(|(_, &w)| w)
        .sum();
    debug_assert!(total > 0.0, "sampling from an empty distribution");
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if Some(i) == exclude || w <= 0.0 {
            continue;
        }
        acc += w;
        last = Some(i);
        if u < acc {
            return i;
        }
    }
    last.expect("distribution has positive weight")
}

/// Metric placement for a drawn state: HIGH bits at 2x cutoff (capped to the
/// metric range), LOW bits at 0.5x cutoff.
fn record_for_state(state_index: usize, cutoffs: &CutoffSet) -> EpochRecord {
    let state = BehavioralState::from_index(state_index);
    let mut values = [0.0f64; 4];
    for (slot, metric) in values.iter_mut().zip(Metric::ALL) {
        let cutoff = cutoffs.value(metric);
        *slot = if state.has(metric) {
            (2.0 * cutoff).min(metric.max_value())
        } else {
            0.5 * cutoff
        };
    }
    EpochRecord::new(values[0], values[1], values[2], values[3])
        .expect("placed metric values are in range")
}

/// Fraction of epochs spent in each state.
pub fn empirical_state_fraction(trace: &Trace, cutoffs: &CutoffSet) -> [f64; STATE_COUNT] {
    let mut counts = [0u64; STATE_COUNT];
    for record in trace.epochs() {
        counts[classify(record, cutoffs).index()] += 1;
    }
    let total = trace.len() as f64;
    let mut fractions = [0.0f64; STATE_COUNT];
    for (slot, &count) in fractions.iter_mut().zip(counts.iter()) {
        *slot = count as f64 / total;
    }
    fractions
}

/// Builds a diverse synthetic workload. Each trace targets `low_share` mass
/// on the all-LOW state; the rest concentrates on a primary component (cycled
/// across the four components) plus one and two secondary components, so
/// consecutive states usually share a component. Trace `i` is named
/// `app-<i>`.
pub fn component_clustered_workload(
    count: usize,
    epochs_per_trace: usize,
    low_share: f64,
    self_transition_prob: f64,
    seed: u64,
    cutoffs: &CutoffSet,
) -> Result<Vec<Trace>, TraceError> {
    assert!(
        (0.0..1.0).contains(&low_share),
        "low_share must be in [0, 1)"
    );
    let mut traces = Vec::with_capacity(count);
    for i in 0..count {
        let trace_seed = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i as u64 + 1));
        let mut rng = ChaCha8Rng::seed_from_u64(trace_seed ^ 0xD1F0);
        let primary = Metric::ALL[i % 4];
        let mut others: Vec<Metric> = Metric::ALL
            .iter()
            .copied()
            .filter(|&m| m != primary)
            .collect();
        let first = rng.gen_range(0..others.len());
        let secondary = others.remove(first);
        let tertiary = others[rng.gen_range(0..others.len())];

        let mut weights = [0.0f64; STATE_COUNT];
        weights[0] = low_share;
        let spread: [f64; 3] = [
            0.45 + rng.gen_range(-0.1..0.1),
            0.35 + rng.gen_range(-0.1..0.1),
            0.20 + rng.gen_range(-0.05..0.05),
        ];
        let spread_total: f64 = spread.iter().sum();
        let remaining = 1.0 - low_share;
        weights[primary.bit() as usize] += remaining * spread[0] / spread_total;
        weights[(primary.bit() | secondary.bit()) as usize] += remaining * spread[1] / spread_total;
        weights[(primary.bit() | secondary.bit() | tertiary.bit()) as usize] +=
            remaining * spread[2] / spread_total;

        let spec = SyntheticSpec::new(weights, self_transition_prob, epochs_per_trace, trace_seed)?;
        let trace = generate_trace(&spec, cutoffs)?.with_name(format!("app-{i:02}"))?;
        traces.push(trace);
    }
    Ok(traces)
}
