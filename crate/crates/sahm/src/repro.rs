//! Canned studies with fixed output filenames, reproducible byte-for-byte
//! on any worker count:
//!
//! * `limit-study` — per-trace simulated speedup on the canonical chip next
//!   to the contention-free analytic bound computed from its state mix.
//! * `breadth` — per-trace speedup distribution across every specialized
//!   chip in the three-level design space.
//! * `generalist-vs-specialized` — across-trace speedup distributions for
//!   the canonical chip, two weakened-branch-core variants, and a flat +5%
//!   single-core generalist modeled analytically.
//! * `realistic-ladder` — the full mixed workload on the large
//!   mostly-baseline chip, stepping from ideal scheduling down through
//!   increasingly realistic observation, migration cost, and inertia.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chip::{enumerate_design_space, ChipConfig, Specialization};
use crate::report::{run_jobs, sweep_rungs, worker_threads, ReportError, Rung, SweepRow, Workload};
use crate::sched::PolicyConfig;
use crate::sim::{amdahl_speedup, simulate_quiet, SimParams};
use crate::state::{quantile_sorted, CutoffSet};
use crate::trace::{empirical_state_fraction, Trace};

/// Seed used by the command-line presets when none is given, so two bare
/// invocations agree byte-for-byte.
pub const DEFAULT_SEED: u64 = 1729;

pub const LIMIT_STUDY_FILE: &str = "limit_study.csv";
pub const BREADTH_FILE: &str = "breadth.csv";
pub const GENERALIST_FILE: &str = "generalist_vs_specialized.csv";
pub const LADDER_FILE: &str = "realistic_ladder.csv";

/// Flat per-instruction speedup credited to the single-core generalist
/// comparison point.
pub const GENERALIST_SPEEDUP: f64 = 0.05;

/// The speedup levels spanned by the breadth study's design space.
pub const BREADTH_LEVELS: [f64; 3] = [0.1, 0.2, 0.3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitStudyRow {
    pub trace: String,
    pub simulated_speedup: f64,
    pub amdahl_speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreadthRow {
    pub trace: String,
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub mean: f64,
    pub p75: f64,
    pub max: f64,
    pub best_config: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigDistributionRow {
    pub config: String,
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub mean: f64,
    pub p75: f64,
    pub max: f64,
}

/// Simulation parameters used by every preset: defaults, with the epoch
/// length taken from the traces and the timestep shrunk if needed to divide
/// it.
fn preset_params(traces: &[Trace]) -> SimParams {
    let epoch_ms = u64::from(traces[0].epoch_ms());
    let timestep_ms = (1..=10)
        .rev()
        .find(|d| epoch_ms % d == 0)
        .unwrap_or(epoch_ms);
    SimParams {
        timestep_ms,
        epoch_ms,
        ..SimParams::default()
    }
}

fn require_traces(traces: &[Trace]) -> Result<(), ReportError> {
    if traces.is_empty() {
        Err(ReportError::NoWorkloads)
    } else {
        Ok(())
    }
}

fn sorted_stats(values: &[f64]) -> (f64, f64, f64, f64, f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite speedups"));
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    (
        sorted[0],
        quantile_sorted(&sorted, 0.25),
        quantile_sorted(&sorted, 0.5),
        mean,
        quantile_sorted(&sorted, 0.75),
        *sorted.last().expect("nonempty"),
    )
}

fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<(), ReportError> {
    let file = BufWriter::new(File::create(path)?);
    let mut writer = csv::Writer::from_writer(file);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Each trace alone on the canonical chip under the clairvoyant policy at
/// zero cost, next to its analytic bound.
pub fn limit_study_rows(
    traces: &[Trace],
    cutoffs: &CutoffSet,
) -> Result<Vec<LimitStudyRow>, ReportError> {
    require_traces(traces)?;
    let chip = ChipConfig::canonical30();
    let params = preset_params(traces);
    let jobs: Vec<&Trace> = traces.iter().collect();
    run_jobs(&jobs, worker_threads(jobs.len()), |trace| {
        let workload = vec![(*trace).clone()];
        let result = simulate_quiet(&workload, &chip, PolicyConfig::oracle(), cutoffs, &params)?;
        let fractions = empirical_state_fraction(trace, cutoffs);
        Ok(LimitStudyRow {
            trace: trace.name().to_string(),
            simulated_speedup: result.system_speedup,
            amdahl_speedup: amdahl_speedup(&fractions, &chip),
        })
    })
}

pub fn limit_study(
    traces: &[Trace],
    cutoffs: &CutoffSet,
    out_dir: &Path,
) -> Result<PathBuf, ReportError> {
    let rows = limit_study_rows(traces, cutoffs)?;
    let path = out_dir.join(LIMIT_STUDY_FILE);
    write_csv(&rows, &path)?;
    Ok(path)
}

/// All specialized chips in the design space spanned by `BREADTH_LEVELS`.
pub fn breadth_chips() -> Vec<ChipConfig> {
    enumerate_design_space(&BREADTH_LEVELS)
        .expect("static levels are valid")
        .into_iter()
        .filter(|chip| {
            chip.cores()
                .iter()
                .any(|core| core.specialization != Specialization::Baseline)
        })
        .collect()
}

/// Each trace alone across every specialized chip (clairvoyant, zero cost);
/// one row per trace summarizing the distribution over chips.
pub fn breadth_rows(traces: &[Trace], cutoffs: &CutoffSet) -> Result<Vec<BreadthRow>, ReportError> {
    require_traces(traces)?;
    let chips = breadth_chips();
    let params = preset_params(traces);
    let mut jobs = Vec::new();
    for trace_index in 0..traces.len() {
        for chip_index in 0..chips.len() {
            jobs.push((trace_index, chip_index));
        }
    }
    let speedups = run_jobs(&jobs, worker_threads(jobs.len()), |&(t, c)| {
        let workload = vec![traces[t].clone()];
        let result = simulate_quiet(
            &workload,
            &chips[c],
            PolicyConfig::oracle(),
            cutoffs,
            &params,
        )?;
        Ok(result.system_speedup)
    })?;
    let mut rows = Vec::with_capacity(traces.len());
    for (trace_index, trace) in traces.iter().enumerate() {
        let per_chip = &speedups[trace_index * chips.len()..(trace_index + 1) * chips.len()];
        let (min, p25, median, mean, p75, max) = sorted_stats(per_chip);
        let best = per_chip
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite").then(b.0.cmp(&a.0)))
            .map(|(index, _)| index)
            .expect("at least one chip");
        rows.push(BreadthRow {
            trace: trace.name().to_string(),
            min,
            p25,
            median,
            mean,
            p75,
            max,
            best_config: chips[best].name().to_string(),
        });
    }
    Ok(rows)
}

pub fn breadth(
    traces: &[Trace],
    cutoffs: &CutoffSet,
    out_dir: &Path,
) -> Result<PathBuf, ReportError> {
    let rows = breadth_rows(traces, cutoffs)?;
    let path = out_dir.join(BREADTH_FILE);
    write_csv(&rows, &path)?;
    Ok(path)
}

/// The chip ladder compared by the generalist study: the canonical chip,
/// the same chip with its branch core weakened to +10% and to +0%, and the
/// analytic flat generalist.
fn generalist_chips() -> Vec<(String, ChipConfig)> {
    vec![
        (
            "all-30".to_string(),
            ChipConfig::canonical([0.3, 0.3, 0.3, 0.3]).expect("valid speedups"),
        ),
        (
            "branch-10".to_string(),
            ChipConfig::canonical([0.1, 0.3, 0.3, 0.3]).expect("valid speedups"),
        ),
        (
            "branch-0".to_string(),
            ChipConfig::canonical([0.0, 0.3, 0.3, 0.3]).expect("valid speedups"),
        ),
    ]
}

/// Across-trace speedup distributions for each comparison chip, plus a flat
/// single-core generalist row at 1 + `GENERALIST_SPEEDUP` (a uniform boost
/// needs no simulation: every trace lands exactly there).
pub fn generalist_vs_specialized_rows(
    traces: &[Trace],
    cutoffs: &CutoffSet,
) -> Result<Vec<ConfigDistributionRow>, ReportError> {
    require_traces(traces)?;
    let chips = generalist_chips();
    let params = preset_params(traces);
    let mut jobs = Vec::new();
    for chip_index in 0..chips.len() {
        for trace_index in 0..traces.len() {
            jobs.push((chip_index, trace_index));
        }
    }
    let speedups = run_jobs(&jobs, worker_threads(jobs.len()), |&(c, t)| {
        let workload = vec![traces[t].clone()];
        let result = simulate_quiet(
            &workload,
            &chips[c].1,
            PolicyConfig::oracle(),
            cutoffs,
            &params,
        )?;
        Ok(result.system_speedup)
    })?;
    let mut rows = Vec::with_capacity(chips.len() + 1);
    for (chip_index, (label, _)) in chips.iter().enumerate() {
        let per_trace = &speedups[chip_index * traces.len()..(chip_index + 1) * traces.len()];
        let (min, p25, median, mean, p75, max) = sorted_stats(per_trace);
        rows.push(ConfigDistributionRow {
            config: label.clone(),
            min,
            p25,
            median,
            mean,
            p75,
            max,
        });
    }
    let flat = 1.0 + GENERALIST_SPEEDUP;
    rows.push(ConfigDistributionRow {
        config: "generalist-5".to_string(),
        min: flat,
        p25: flat,
        median: flat,
        mean: flat,
        p75: flat,
        max: flat,
    });
    Ok(rows)
}

pub fn generalist_vs_specialized(
    traces: &[Trace],
    cutoffs: &CutoffSet,
    out_dir: &Path,
) -> Result<PathBuf, ReportError> {
    let rows = generalist_vs_specialized_rows(traces, cutoffs)?;
    let path = out_dir.join(GENERALIST_FILE);
    write_csv(&rows, &path)?;
    Ok(path)
}

/// The policy/cost rungs of the realism ladder, most idealized first.
pub fn ladder_rungs() -> Vec<Rung> {
    let inertia = PolicyConfig::greedy_inertia(crate::sched::DEFAULT_INERTIA_SCHEDULINGS)
        .expect("default inertia is nonzero");
    vec![
        (PolicyConfig::oracle(), 0.0),
        (PolicyConfig::greedy(), 0.0),
        (PolicyConfig::greedy(), 1.0),
        (inertia, 1.0),
        (inertia, 5.0),
        (inertia, 9.0),
    ]
}

/// The whole trace set as one workload on the large mostly-baseline chip,
/// descending the realism ladder.
pub fn realistic_ladder_rows(
    traces: &[Trace],
    cutoffs: &CutoffSet,
) -> Result<Vec<SweepRow>, ReportError> {
    require_traces(traces)?;
    let workloads = vec![Workload::new("mix", traces.to_vec())];
    let chips = vec![ChipConfig::realistic39()];
    sweep_rungs(
        &workloads,
        &chips,
        &ladder_rungs(),
        cutoffs,
        &preset_params(traces),
    )
}

pub fn realistic_ladder(
    traces: &[Trace],
    cutoffs: &CutoffSet,
    out_dir: &Path,
) -> Result<PathBuf, ReportError> {
    let rows = realistic_ladder_rows(traces, cutoffs)?;
    let path = out_dir.join(LADDER_FILE);
    write_csv(&rows, &path)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::Metric;
    use crate::trace::{EpochRecord, SyntheticSpec};

    fn cutoffs() -> CutoffSet {
        CutoffSet::intuitive()
    }

    fn trace_of_states(name: &str, codes: &[u8]) -> Trace {
        let c = cutoffs();
        let epochs: Vec<EpochRecord> = codes
            .iter()
            .map(|&code| {
                let value = |metric: Metric| {
                    if code & metric.bit() != 0 {
                        (2.0 * c.value(metric)).min(metric.max_value())
                    } else {
                        0.5 * c.value(metric)
                    }
                };
                EpochRecord::new(
                    value(Metric::BranchMispredict),
                    value(Metric::L1iMpki),
                    value(Metric::L1dMiss),
                    value(Metric::L2Miss),
                )
                .unwrap()
            })
            .collect();
        Trace::new(name.to_string(), 100, epochs).unwrap()
    }

    fn small_workload() -> Vec<Trace> {
        let mut weights = [0.0; 16];
        weights[0] = 0.2;
        weights[1] = 0.3;
        weights[8] = 0.3;
        weights[10] = 0.2;
        let c = cutoffs();
        (0..3)
            .map(|i| {
                let spec = SyntheticSpec::new(weights, 0.8, 20, 7 + i).unwrap();
                crate::trace::generate_trace(&spec, &c)
                    .unwrap()
                    .with_name(format!("t{i}"))
                    .unwrap()
            })
            .collect()
    }

    #[test]
    fn limit_study_matches_analysis_on_constant_traces() {
        let traces = vec![
            trace_of_states("steady-l2", &[8, 8, 8, 8]),
            trace_of_states("steady-low", &[0, 0, 0, 0]),
        ];
        let rows = limit_study_rows(&traces, &cutoffs()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].trace, "steady-l2");
        assert!((rows[0].simulated_speedup - 1.3).abs() < 1e-12);
        assert!((rows[0].amdahl_speedup - 1.3).abs() < 1e-12);
        assert!((rows[1].simulated_speedup - 1.0).abs() < 1e-12);
        assert!((rows[1].amdahl_speedup - 1.0).abs() < 1e-12);
    }

    #[test]
    fn limit_study_speedups_are_at_least_one() {
        let rows = limit_study_rows(&small_workload(), &cutoffs()).unwrap();
        for row in rows {
            assert!(row.simulated_speedup >= 1.0 - 1e-12);
            assert!(row.amdahl_speedup >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn breadth_covers_all_specialized_configs() {
        assert_eq!(breadth_chips().len(), 255);
        let traces = vec![trace_of_states("x", &[1, 8, 1, 8])];
        let rows = breadth_rows(&traces, &cutoffs()).unwrap();
        assert_eq!(rows.len(), 1);
        let row = &rows[0];
        assert!(row.min <= row.p25 && row.p25 <= row.median);
        assert!(row.median <= row.p75 && row.p75 <= row.max);
        assert!(row.min >= 1.0 - 1e-12);
        // Half the time in a branch state, half in a bandwidth state: the
        // best chip serves both at +30%.
        assert!((row.max - 1.3).abs() < 1e-12);
        assert!(!row.best_config.is_empty());
    }

    #[test]
    fn generalist_study_orders_branch_variants() {
        // Traces that spend real time in branch-flagged states.
        let traces = vec![
            trace_of_states("b0", &[1, 1, 0, 1]),
            trace_of_states("b1", &[1, 0, 1, 1]),
        ];
        let rows = generalist_vs_specialized_rows(&traces, &cutoffs()).unwrap();
        assert_eq!(rows.len(), 4);
        let by_name = |name: &str| rows.iter().find(|r| r.config == name).unwrap().clone();
        let all30 = by_name("all-30");
        let br10 = by_name("branch-10");
        let br0 = by_name("branch-0");
        let flat = by_name("generalist-5");
        assert!(all30.median > br10.median);
        assert!(br10.median > br0.median);
        assert!((flat.min - 1.05).abs() < 1e-12);
        assert!((flat.max - 1.05).abs() < 1e-12);
        // A branch core with no speedup leaves these traces at baseline.
        assert!((br0.median - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ladder_produces_one_row_per_rung_in_order() {
        let rows = realistic_ladder_rows(&small_workload(), &cutoffs()).unwrap();
        let labels: Vec<(String, f64)> = rows
            .iter()
            .map(|r| (r.policy.clone(), r.migration_cost_ms))
            .collect();
        assert_eq!(
            labels,
            vec![
                ("oracle".to_string(), 0.0),
                ("greedy".to_string(), 0.0),
                ("greedy".to_string(), 1.0),
                ("inertia:5".to_string(), 1.0),
                ("inertia:5".to_string(), 5.0),
                ("inertia:5".to_string(), 9.0),
            ]
        );
        for row in &rows {
            assert_eq!(row.chip, "realistic39");
            assert_eq!(row.workload, "mix");
            assert!(row.system_speedup > 0.5);
        }
        // Cost-free rungs never lose to the baseline: with fewer programs
        // than cores every migration targets an empty core, so nothing
        // queues and nothing stalls. Costed rungs may dip below 1 when the
        // workload idles too much to repay migration stalls.
        assert!(rows[0].system_speedup >= 1.0 - 1e-9);
        assert!(rows[1].system_speedup >= 1.0 - 1e-9);
        // Pinning programs after a migration suppresses the migration rate
        // and, at equal cost, the stall bill.
        let greedy_1 = &rows[2];
        let inertia_1 = &rows[3];
        assert!(inertia_1.migrations_per_sec < greedy_1.migrations_per_sec);
        assert!(inertia_1.system_speedup >= greedy_1.system_speedup);
        // Same policy, rising cost: this deterministic workload pays
        // monotonically for migrations.
        assert!(rows[3].system_speedup >= rows[4].system_speedup);
        assert!(rows[4].system_speedup >= rows[5].system_speedup);
    }

    #[test]
    fn presets_write_their_fixed_filenames() {
        let dir = tempfile::tempdir().unwrap();
        let traces = small_workload();
        let c = cutoffs();
        let a = limit_study(&traces, &c, dir.path()).unwrap();
        let b = generalist_vs_specialized(&traces, &c, dir.path()).unwrap();
        let d = realistic_ladder(&traces, &c, dir.path()).unwrap();
        assert_eq!(a.file_name().unwrap(), LIMIT_STUDY_FILE);
        assert_eq!(b.file_name().unwrap(), GENERALIST_FILE);
        assert_eq!(d.file_name().unwrap(), LADDER_FILE);
        for path in [&a, &b, &d] {
            let text = std::fs::read_to_string(path).unwrap();
            assert!(text.lines().count() >= 2, "{path:?} has rows");
        }
        let header = std::fs::read_to_string(&a).unwrap();
        assert!(header.starts_with("trace,simulated_speedup,amdahl_speedup"));
    }

    #[test]
    fn presets_reject_empty_trace_sets() {
        let c = cutoffs();
        assert!(limit_study_rows(&[], &c).is_err());
        assert!(breadth_rows(&[], &c).is_err());
        assert!(generalist_vs_specialized_rows(&[], &c).is_err());
        assert!(realistic_ladder_rows(&[], &c).is_err());
    }
}
