//! Behavioral states and the cutoffs that define them.
//!
//! A state is a 4-bit code, one bit per hardware component that can be
//! stressed during an epoch: branch prediction, L1 instruction cache, L1 data
//! cache, and L2 cache. A bit is set when the corresponding metric strictly
//! exceeds its cutoff; equality counts as LOW.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{EpochRecord, Trace};

/// Number of distinct behavioral states (2^4 component bits).
pub const STATE_COUNT: usize = 16;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("state code {0} out of range 0..=15")]
    CodeOutOfRange(u8),
    #[error("cutoff `{name}` must be strictly positive and finite, got {value}")]
    InvalidCutoff { name: &'static str, value: f64 },
    #[error("percentile must lie strictly between 0 and 1, got {0}")]
    PercentileOutOfRange(f64),
    #[error("cannot derive cutoffs from an empty epoch pool")]
    EmptyPool,
    #[error("unknown cutoff preset `{0}` (expected intuitive, p25, or p50)")]
    UnknownPreset(String),
    #[error("failed to read cutoff file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to parse cutoff file {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
}

/// One of the four per-epoch hardware metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    /// Branch mispredictions per branch, in [0, 1].
    BranchMispredict,
    /// L1 instruction-cache misses per kilo-instruction, in [0, 1000].
    L1iMpki,
    /// L1 data-cache misses per access, in [0, 1].
    L1dMiss,
    /// L2 misses per L2 access, in [0, 1].
    L2Miss,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::BranchMispredict,
        Metric::L1iMpki,
        Metric::L1dMiss,
        Metric::L2Miss,
    ];

    /// Bit assigned to this metric in a state code.
    pub fn bit(self) -> u8 {
        match self {
            Metric::BranchMispredict => 1 << 0,
            Metric::L1iMpki => 1 << 1,
            Metric::L1dMiss => 1 << 2,
            Metric::L2Miss => 1 << 3,
        }
    }

    /// Field name used in trace files and cutoff files.
    pub fn name(self) -> &'static str {
        match self {
            Metric::BranchMispredict => "branch_mispredict_ratio",
            Metric::L1iMpki => "l1i_mpki",
            Metric::L1dMiss => "l1d_miss_ratio",
            Metric::L2Miss => "l2_miss_ratio",
        }
    }

    /// Upper end of the metric's valid range.
    pub fn max_value(self) -> f64 {
        match self {
            Metric::L1iMpki => 1000.0,
            _ => 1.0,
        }
    }

    /// Short label used when printing state names.
    fn label(self) -> &'static str {
        match self {
            Metric::BranchMispredict => "Branch",
            Metric::L1iMpki => "L1I",
            Metric::L1dMiss => "L1D",
            Metric::L2Miss => "L2",
        }
    }
}

/// A 4-bit behavioral state code.
///
/// Bit 0 = branch mispredict HIGH, bit 1 = L1I HIGH, bit 2 = L1D HIGH,
/// bit 3 = L2 HIGH. Code 0 is the all-LOW state.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BehavioralState(u8);

impl BehavioralState {
    /// The all-LOW state.
    pub const LOW: BehavioralState = BehavioralState(0);

    pub fn new(code: u8) -> Result<Self, StateError> {
        if code < STATE_COUNT as u8 {
            Ok(BehavioralState(code))
        } else {
            Err(StateError::CodeOutOfRange(code))
        }
    }

    /// Builds a state from an index known to be in range; panics otherwise.
    pub fn from_index(index: usize) -> Self {
        assert!(index < STATE_COUNT, "state index {index} out of range");
        BehavioralState(index as u8)
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// True when the given metric's bit is set.
    pub fn has(self, metric: Metric) -> bool {
        self.0 & metric.bit() != 0
    }

    pub fn is_low(self) -> bool {
        self.0 == 0
    }

    /// All 16 states in code order.
    pub fn all() -> impl Iterator<Item = BehavioralState> {
        (0..STATE_COUNT as u8).map(BehavioralState)
    }

    /// Human-readable name: `Low` for code 0, otherwise the HIGH components
    /// joined with `+` in the fixed order L2, L1D, L1I, Branch.
    pub fn label(self) -> String {
        if self.is_low() {
            return "Low".to_string();
        }
        let mut parts = Vec::new();
        for metric in [
            Metric::L2Miss,
            Metric::L1dMiss,
            Metric::L1iMpki,
            Metric::BranchMispredict,
        ] {
            if self.has(metric) {
                parts.push(metric.label());
            }
        }
        parts.join("+")
    }
}

impl fmt::Debug for BehavioralState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BehavioralState({}: {})", self.0, self.label())
    }
}

impl Serialize for BehavioralState {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.0)
    }
}

impl<'de> Deserialize<'de> for BehavioralState {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let code = u8::deserialize(deserializer)?;
        BehavioralState::new(code).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for BehavioralState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// HIGH/LOW thresholds for the four metrics. All cutoffs are strictly
/// positive; a metric value must strictly exceed its cutoff to count as HIGH.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSet {
    pub branch_mispredict: f64,
    pub l1i_mpki: f64,
    pub l1d_miss: f64,
    pub l2_miss: f64,
}

impl CutoffSet {
    pub fn new(
        branch_mispredict: f64,
        l1i_mpki: f64,
        l1d_miss: f64,
        l2_miss: f64,
    ) -> Result<Self, StateError> {
        let set = CutoffSet {
            branch_mispredict,
            l1i_mpki,
            l1d_miss,
            l2_miss,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), StateError> {
        for metric in Metric::ALL {
            let value = self.value(metric);
            if !(value.is_finite() && value > 0.0) {
                return Err(StateError::InvalidCutoff {
                    name: metric.name(),
                    value,
                });
            }
        }
        Ok(())
    }

    pub fn value(&self, metric: Metric) -> f64 {
        match metric {
            Metric::BranchMispredict => self.branch_mispredict,
            Metric::L1iMpki => self.l1i_mpki,
            Metric::L1dMiss => self.l1d_miss,
            Metric::L2Miss => self.l2_miss,
        }
    }

    /// Hand-picked thresholds: 1% branch mispredicts, 1 MPKI, 2% L1D misses,
    /// 10% L2 misses. This is the default preset.
    pub fn intuitive() -> Self {
        CutoffSet {
            branch_mispredict: 0.01,
            l1i_mpki: 1.0,
            l1d_miss: 0.02,
            l2_miss: 0.10,
        }
    }

    /// 25th-percentile thresholds measured over a reference workload pool.
    pub fn p25() -> Self {
        CutoffSet {
            branch_mispredict: 0.0003,
            l1i_mpki: 0.004,
            l1d_miss: 0.005,
            l2_miss: 0.0364,
        }
    }

    /// Median thresholds measured over a reference workload pool.
    pub fn p50() -> Self {
        CutoffSet {
            branch_mispredict: 0.0034,
            l1i_mpki: 0.009,
            l1d_miss: 0.0099,
            l2_miss: 0.1847,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "intuitive" => Some(Self::intuitive()),
            "p25" => Some(Self::p25()),
            "p50" => Some(Self::p50()),
            _ => None,
        }
    }

    /// Resolves a preset name or a JSON file path.
    pub fn resolve(arg: &str) -> Result<Self, StateError> {
        if let Some(set) = Self::preset(arg) {
            return Ok(set);
        }
        let path = Path::new(arg);
        if !path.exists() {
            return Err(StateError::UnknownPreset(arg.to_string()));
        }
        Self::load(path)
    }

    pub fn load(path: &Path) -> Result<Self, StateError> {
        let text = fs::read_to_string(path).map_err(|source| StateError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let set: CutoffSet = serde_json::from_str(&text).map_err(|source| StateError::Parse {
            path: path.display().to_string(),
            source,
        })?;
        set.validate()?;
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<(), StateError> {
        let text = serde_json::to_string_pretty(self).expect("cutoff set serializes");
        fs::write(path, text).map_err(|source| StateError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Classifies one epoch: each metric bit is set iff the metric strictly
/// exceeds its cutoff.
pub fn classify(record: &EpochRecord, cutoffs: &CutoffSet) -> BehavioralState {
    let mut code = 0u8;
    for metric in Metric::ALL {
        if record.metric(metric) > cutoffs.value(metric) {
            code |= metric.bit();
        }
    }
    BehavioralState(code)
}

/// Derives a cutoff set from observed traces: for each metric, pool every
/// epoch of every trace and take the requested percentile with linear
/// interpolation. Fails if a derived cutoff is not strictly positive.
pub fn derive_percentile_cutoffs(
    traces: &[Trace],
    percentile: f64,
) -> Result<CutoffSet, StateError> {
    if !(percentile > 0.0 && percentile < 1.0) {
        return Err(StateError::PercentileOutOfRange(percentile));
    }
    let total: usize = traces.iter().map(|t| t.len()).sum();
    if total == 0 {
        return Err(StateError::EmptyPool);
    }
    let mut per_metric = [0.0f64; 4];
    for (slot, metric) in per_metric.iter_mut().zip(Metric::ALL) {
        let mut pool: Vec<f64> = Vec::with_capacity(total);
        for trace in traces {
            pool.extend(trace.epochs().iter().map(|r| r.metric(metric)));
        }
        pool.sort_by(|a, b| a.partial_cmp(b).expect("metric values are finite"));
        *slot = quantile_sorted(&pool, percentile);
    }
    CutoffSet::new(per_metric[0], per_metric[1], per_metric[2], per_metric[3])
}

/// Percentile of a sorted slice with linear interpolation between the two
/// nearest order statistics (the inclusive method).
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    if sorted.len() == 1 {
        return sorted[0];
    }
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}
