//! Aggregation of simulation outputs: independent metric recomputation from
//! raw event logs, multi-run sweeps with deterministic ordering, and table
//! writers.

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chip::ChipConfig;
use crate::sched::PolicyConfig;
use crate::sim::{simulate_quiet, SimError, SimEventLog, SimParams, SimResult};
use crate::state::{quantile_sorted, CutoffSet};
use crate::trace::Trace;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("event log references program {program} but the run had {count} programs")]
    BadProgramIndex { program: u32, count: usize },
    #[error("program {program} executed {executed_ms}ms of a {horizon_ms}ms horizon")]
    HorizonExceeded {
        program: u32,
        executed_ms: u64,
        horizon_ms: u64,
    },
    #[error("event at {time_ms}ms lies outside the {horizon_ms}ms horizon")]
    TimeOutOfRange { time_ms: u64, horizon_ms: u64 },
    #[error("step at {time_ms}ms reports {reported}ms of stall+work, expected {expected}ms")]
    StepNotConserving {
        time_ms: u64,
        reported: f64,
        expected: f64,
    },
    #[error("log disagrees with result for program {program}: {field} is {from_log} from events but {from_result} in the result")]
    Mismatch {
        program: String,
        field: &'static str,
        from_log: f64,
        from_result: f64,
    },
    #[error("sweep requires at least one workload")]
    NoWorkloads,
    #[error("sweep requires at least one chip")]
    NoChips,
    #[error("sweep requires at least one policy")]
    NoPolicies,
    #[error("sweep requires at least one migration cost")]
    NoCosts,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("failed to write table: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Per-program aggregates recomputed purely from an event log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProgramMetrics {
    pub work_ms: f64,
    pub speedup: f64,
    pub migrations: u64,
    pub matched_step_fraction: f64,
    pub busy_ms: f64,
    pub stall_ms: f64,
    pub wait_ms: f64,
    pub executed_steps: u64,
    pub matched_steps: u64,
}

/// System aggregates recomputed purely from an event log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMetrics {
    pub per_program: Vec<LogProgramMetrics>,
    pub system_speedup: f64,
    pub mean_app_speedup: f64,
    pub migrations_per_sec: f64,
    pub epoch_utilization: f64,
}

/// Rebuilds all reportable metrics from raw events alone, validating the
/// log's internal consistency on the way.
pub fn compute_metrics(
    log: &SimEventLog,
    params: &SimParams,
    horizon_ms: u64,
    program_count: usize,
) -> Result<LogMetrics, ReportError> {
    let step_f = params.timestep_ms as f64;
    let mut work = vec![0.0f64; program_count];
    let mut stall = vec![0.0f64; program_count];
    let mut executed = vec![0u64; program_count];
    let mut matched = vec![0u64; program_count];
    let mut migrations = vec![0u64; program_count];

    for step in &log.steps {
        let index = step.program as usize;
        if index >= program_count {
            return Err(ReportError::BadProgramIndex {
                program: step.program,
                count: program_count,
            });
        }
        if step.time_ms >= horizon_ms {
            return Err(ReportError::TimeOutOfRange {
                time_ms: step.time_ms,
                horizon_ms,
            });
        }
        // Work happens at rate >= 1, so a step's stall plus work can never
        // undershoot the timestep; overshoot is bounded by the best rate,
        // but without the chip we only check the lower bound.
        if step.stalled_ms + step.work_done_ms < step_f - 1e-6 {
            return Err(ReportError::StepNotConserving {
                time_ms: step.time_ms,
                reported: step.stalled_ms + step.work_done_ms,
                expected: step_f,
            });
        }
        work[index] += step.work_done_ms;
        stall[index] += step.stalled_ms;
        executed[index] += 1;
        if step.matched {
            matched[index] += 1;
        }
    }
    for migration in &log.migrations {
        let index = migration.program as usize;
        if index >= program_count {
            return Err(ReportError::BadProgramIndex {
                program: migration.program,
                count: program_count,
            });
        }
        if migration.time_ms >= horizon_ms {
            return Err(ReportError::TimeOutOfRange {
                time_ms: migration.time_ms,
                horizon_ms,
            });
        }
        migrations[index] += 1;
    }

    let horizon_f = horizon_ms as f64;
    let mut per_program = Vec::with_capacity(program_count);
    for index in 0..program_count {
        let executed_ms = executed[index] * params.timestep_ms;
        if executed_ms > horizon_ms {
            return Err(ReportError::HorizonExceeded {
                program: index as u32,
                executed_ms,
                horizon_ms,
            });
        }
        let busy = executed_ms as f64 - stall[index];
        per_program.push(LogProgramMetrics {
            work_ms: work[index],
            speedup: work[index] / horizon_f,
            migrations: migrations[index],
            matched_step_fraction: if executed[index] == 0 {
                0.0
            } else {
                matched[index] as f64 / executed[index] as f64
            },
            busy_ms: busy,
            stall_ms: stall[index],
            wait_ms: horizon_f - executed_ms as f64,
            executed_steps: executed[index],
            matched_steps: matched[index],
        });
    }

    let total_work: f64 = work.iter().sum();
    let total_migrations: u64 = migrations.iter().sum();
    let total_executed: u64 = executed.iter().sum();
    let total_matched: u64 = matched.iter().sum();
    Ok(LogMetrics {
        system_speedup: total_work / (program_count as f64 * horizon_f),
        mean_app_speedup: per_program.iter().map(|p| p.speedup).sum::<f64>() / program_count as f64,
        migrations_per_sec: total_migrations as f64 / (horizon_f / 1000.0),
        epoch_utilization: if total_executed == 0 {
            0.0
        } else {
            total_matched as f64 / total_executed as f64
        },
        per_program,
    })
}

/// Cross-checks a result against its own event log; any disagreement beyond
/// rounding noise is an integrity failure.
pub fn verify_against(log: &SimEventLog, result: &SimResult) -> Result<(), ReportError> {
    let params = SimParams {
        timestep_ms: result.timestep_ms,
        epoch_ms: result.epoch_ms,
        migration_cost_ms: result.migration_cost_ms,
        horizon_ms: Some(result.horizon_ms),
        seed: result.seed,
    };
    let metrics = compute_metrics(log, &params, result.horizon_ms, result.programs.len())?;
    let tolerance = 1e-9;
    let check = |program: &str, field: &'static str, from_log: f64, from_result: f64| {
        if (from_log - from_result).abs() > tolerance {
            Err(ReportError::Mismatch {
                program: program.to_string(),
                field,
                from_log,
                from_result,
            })
        } else {
            Ok(())
        }
    };
    for (from_log, from_result) in metrics.per_program.iter().zip(&result.programs) {
        let name = from_result.name.as_str();
        check(name, "work_ms", from_log.work_ms, from_result.work_ms)?;
        check(name, "speedup", from_log.speedup, from_result.speedup)?;
        check(
            name,
            "migrations",
            from_log.migrations as f64,
            from_result.migrations as f64,
        )?;
        check(
            name,
            "matched_step_fraction",
            from_log.matched_step_fraction,
            from_result.matched_step_fraction,
        )?;
        check(name, "busy_ms", from_log.busy_ms, from_result.busy_ms)?;
        check(name, "stall_ms", from_log.stall_ms, from_result.stall_ms)?;
        check(name, "wait_ms", from_log.wait_ms, from_result.wait_ms)?;
        check(
            name,
            "executed_steps",
            from_log.executed_steps as f64,
            from_result.executed_steps as f64,
        )?;
    }
    check(
        "system",
        "system_speedup",
        metrics.system_speedup,
        result.system_speedup,
    )?;
    check(
        "system",
        "mean_app_speedup",
        metrics.mean_app_speedup,
        result.mean_app_speedup,
    )?;
    check(
        "system",
        "migrations_per_sec",
        metrics.migrations_per_sec,
        result.migrations_per_sec,
    )?;
    check(
        "system",
        "epoch_utilization",
        metrics.epoch_utilization,
        result.epoch_utilization,
    )?;
    Ok(())
}

/// A named set of traces simulated together.
#[derive(Debug, Clone)]
pub struct Workload {
    pub name: String,
    pub traces: Vec<Trace>,
}

impl Workload {
    pub fn new(name: impl Into<String>, traces: Vec<Trace>) -> Self {
        Workload {
            name: name.into(),
            traces,
        }
    }
}

/// Splits traces into one single-trace workload each, named after the trace.
pub fn per_trace_workloads(traces: &[Trace]) -> Vec<Workload> {
    traces
        .iter()
        .map(|t| Workload::new(t.name().to_string(), vec![t.clone()]))
        .collect()
}

/// One line of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub workload: String,
    pub chip: String,
    pub policy: String,
    pub migration_cost_ms: f64,
    pub system_speedup: f64,
    pub mean_app_speedup: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub min: f64,
    pub max: f64,
    pub migrations_per_sec: f64,
    pub epoch_utilization: f64,
}

/// Summarizes one run as a sweep line; the quartiles describe the
/// distribution of per-program speedups within the run.
pub fn row_from_result(workload: &str, result: &SimResult) -> SweepRow {
    let mut speedups: Vec<f64> = result.programs.iter().map(|p| p.speedup).collect();
    speedups.sort_by(|a, b| a.partial_cmp(b).expect("speedups are finite"));
    SweepRow {
        workload: workload.to_string(),
        chip: result.chip.clone(),
        policy: result.policy.clone(),
        migration_cost_ms: result.migration_cost_ms,
        system_speedup: result.system_speedup,
        mean_app_speedup: result.mean_app_speedup,
        p25: quantile_sorted(&speedups, 0.25),
        median: quantile_sorted(&speedups, 0.5),
        p75: quantile_sorted(&speedups, 0.75),
        min: speedups[0],
        max: *speedups.last().expect("at least one program"),
        migrations_per_sec: result.migrations_per_sec,
        epoch_utilization: result.epoch_utilization,
    }
}

/// A (policy, migration cost) pair to run.
pub type Rung = (PolicyConfig, f64);

/// Worker count for fan-out: the `SAHM_THREADS` environment variable when
/// set, otherwise the machine's parallelism, never more than the job count.
pub fn worker_threads(job_count: usize) -> usize {
    let available = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let cap = std::env::var("SAHM_THREADS")
        .ok()
        .and_then(|value| value.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(available);
    cap.min(job_count).max(1)
}

/// Runs every workload × chip × rung combination, ordered by
/// (chip, policy/cost rung, workload). Output is identical for any worker
/// count because rows are merged by job index.
pub fn sweep_rungs(
    workloads: &[Workload],
    chips: &[ChipConfig],
    rungs: &[Rung],
    cutoffs: &CutoffSet,
    params: &SimParams,
) -> Result<Vec<SweepRow>, ReportError> {
    if workloads.is_empty() {
        return Err(ReportError::NoWorkloads);
    }
    if chips.is_empty() {
        return Err(ReportError::NoChips);
    }
    if rungs.is_empty() {
        return Err(ReportError::NoPolicies);
    }
    let mut jobs = Vec::new();
    for chip_index in 0..chips.len() {
        for rung_index in 0..rungs.len() {
            for workload_index in 0..workloads.len() {
                jobs.push((chip_index, rung_index, workload_index));
            }
        }
    }
    run_jobs(&jobs, worker_threads(jobs.len()), |&(c, r, w)| {
        let (policy, cost) = rungs[r];
        let job_params = SimParams {
            migration_cost_ms: cost,
            ..*params
        };
        let result = simulate_quiet(
            &workloads[w].traces,
            &chips[c],
            policy,
            cutoffs,
            &job_params,
        )?;
        Ok(row_from_result(&workloads[w].name, &result))
    })
}

/// Full cartesian sweep: every workload × chip × policy × cost, ordered by
/// (chip, policy, cost, workload).
pub fn sweep(
    workloads: &[Workload],
    chips: &[ChipConfig],
    policies: &[PolicyConfig],
    costs: &[f64],
    cutoffs: &CutoffSet,
    params: &SimParams,
) -> Result<Vec<SweepRow>, ReportError> {
    if policies.is_empty() {
        return Err(ReportError::NoPolicies);
    }
    if costs.is_empty() {
        return Err(ReportError::NoCosts);
    }
    let rungs: Vec<Rung> = policies
        .iter()
        .flat_map(|&policy| costs.iter().map(move |&cost| (policy, cost)))
        .collect();
    sweep_rungs(workloads, chips, &rungs, cutoffs, params)
}

/// Executes jobs across a scoped thread pool and returns results in job
/// order regardless of scheduling.
pub(crate) fn run_jobs<J, R, F>(jobs: &[J], threads: usize, run: F) -> Result<Vec<R>, ReportError>
where
    J: Sync,
    R: Send,
    F: Fn(&J) -> Result<R, ReportError> + Sync,
{
    let slots: Vec<Mutex<Option<Result<R, ReportError>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let cursor = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let index = cursor.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(index) else {
                    break;
                };
                let outcome = run(job);
                *slots[index].lock().expect("result slot") = Some(outcome);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .expect("result slot")
                .expect("every job ran")
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<(), ReportError> {
    let mut out = csv::Writer::from_writer(writer);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_sweep_json<W: Write>(rows: &[SweepRow], mut writer: W) -> Result<(), ReportError> {
    serde_json::to_writer_pretty(&mut writer, rows)?;
    writer.write_all(b"\n")?;
    Ok(())
}

/// Writes the raw event streams as CSV: migration rows carry empty
/// step-only columns and vice versa. Rows are time-ordered with each step's
/// migrations (scheduler pass) before its dispatches.
pub fn write_events_csv<W: Write>(
    log: &SimEventLog,
    program_names: &[String],
    writer: W,
) -> Result<(), ReportError> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "kind",
        "time_ms",
        "program",
        "core",
        "state",
        "matched",
        "work_done_ms",
        "stalled_ms",
        "from_core",
        "to_core",
    ])?;
    let name = |program: u32| -> &str {
        program_names
            .get(program as usize)
            .map(String::as_str)
            .unwrap_or("?")
    };
    let mut steps = log.steps.iter().peekable();
    let mut migrations = log.migrations.iter().peekable();
    loop {
        let migration_first = match (migrations.peek(), steps.peek()) {
            (Some(m), Some(s)) => m.time_ms <= s.time_ms,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        if migration_first {
            let m = migrations.next().expect("peeked");
            out.write_record([
                "migration",
                &m.time_ms.to_string(),
                name(m.program),
                "",
                "",
                "",
                "",
                "",
                &m.from_core.to_string(),
                &m.to_core.to_string(),
            ])?;
        } else {
            let s = steps.next().expect("peeked");
            out.write_record([
                "step",
                &s.time_ms.to_string(),
                name(s.program),
                &s.core.to_string(),
                &s.state.code().to_string(),
                if s.matched { "true" } else { "false" },
                &s.work_done_ms.to_string(),
                &s.stalled_ms.to_string(),
                "",
                "",
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
