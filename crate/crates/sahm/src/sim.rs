//! Trace-driven simulation engine.
//!
//! Wall time advances in fixed timesteps. Each step first runs the scheduler
//! pass over all cores in ascending id order, then dispatches: every core's
//! head program consumes pending migration stall and spends the rest of the
//! step working, at rate `1 + speedup` when the core's specialization
//! matches the program's state at its current trace offset and rate 1
//! otherwise. Finished traces restart from the beginning; queued programs
//! make no progress. The run ends at a fixed horizon, by default the
//! baseline length of the longest trace.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chip::ChipConfig;
use crate::sched::{specialty_matches, Decision, PolicyConfig, SchedulerState};
use crate::state::{BehavioralState, CutoffSet, STATE_COUNT};
use crate::trace::Trace;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("workload must contain at least one trace")]
    NoTraces,
    #[error("timestep_ms must be positive")]
    ZeroTimestep,
    #[error("epoch_ms must be positive")]
    ZeroEpoch,
    #[error("epoch_ms {epoch_ms} must be an integer multiple of timestep_ms {timestep_ms}")]
    EpochNotMultiple { epoch_ms: u64, timestep_ms: u64 },
    #[error(
        "horizon_ms {horizon_ms} must be a positive integer multiple of timestep_ms {timestep_ms}"
    )]
    BadHorizon { horizon_ms: u64, timestep_ms: u64 },
    #[error("migration_cost_ms {0} must be finite and non-negative")]
    BadMigrationCost(f64),
    #[error("trace `{name}` has epoch_ms {found} but the simulation uses {expected}")]
    EpochMismatch {
        name: String,
        found: u64,
        expected: u64,
    },
    #[error("duplicate program name `{0}` in workload")]
    DuplicateProgram(String),
}

/// Simulation timing and cost parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub timestep_ms: u64,
    pub epoch_ms: u64,
    pub migration_cost_ms: f64,
    /// Run length; `None` uses the baseline length of the longest trace.
    pub horizon_ms: Option<u64>,
    /// Echoed into results; the engine itself is deterministic.
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            timestep_ms: 10,
            epoch_ms: 100,
            migration_cost_ms: 0.0,
            horizon_ms: None,
            seed: 0,
        }
    }
}

impl SimParams {
    pub fn with_migration_cost(mut self, cost_ms: f64) -> Self {
        self.migration_cost_ms = cost_ms;
        self
    }

    pub fn with_horizon(mut self, horizon_ms: u64) -> Self {
        self.horizon_ms = Some(horizon_ms);
        self
    }
}

/// One dispatched timestep of one program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub time_ms: u64,
    pub program: u32,
    pub core: u32,
    pub state: BehavioralState,
    pub matched: bool,
    pub work_done_ms: f64,
    pub stalled_ms: f64,
}

/// One migration event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationRecord {
    pub time_ms: u64,
    pub program: u32,
    pub from_core: u32,
    pub to_core: u32,
}

/// Raw event streams from one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimEventLog {
    pub steps: Vec<StepRecord>,
    pub migrations: Vec<MigrationRecord>,
}

/// Final per-program tallies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramResult {
    pub name: String,
    /// Baseline-equivalent milliseconds of trace consumed.
    pub work_ms: f64,
    /// work / horizon.
    pub speedup: f64,
    pub migrations: u64,
    /// Matched dispatched timesteps / dispatched timesteps (0 if never
    /// dispatched).
    pub matched_step_fraction: f64,
    /// Wall time spent working on a core.
    pub busy_ms: f64,
    /// Wall time spent paying migration stalls.
    pub stall_ms: f64,
    /// Wall time spent queued behind another program.
    pub wait_ms: f64,
    pub executed_steps: u64,
    pub matched_steps: u64,
    /// Complete trace traversals (restarts).
    pub wraps: u64,
}

/// Aggregate outcome of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub chip: String,
    pub policy: String,
    pub programs: Vec<ProgramResult>,
    /// Σ work / (program count × horizon).
    pub system_speedup: f64,
    /// Arithmetic mean of per-program speedups.
    pub mean_app_speedup: f64,
    /// Total migrations / horizon in seconds.
    pub migrations_per_sec: f64,
    /// Matched dispatched timesteps / dispatched timesteps, system-wide.
    pub epoch_utilization: f64,
    pub horizon_ms: u64,
    pub timestep_ms: u64,
    pub epoch_ms: u64,
    pub migration_cost_ms: f64,
    pub seed: u64,
}

/// Contention- and migration-free speedup bound for a state mix: the
/// harmonic composition of per-state factors, each factor being 1 plus the
/// best speedup among cores serving that state (1 when none does).
pub fn amdahl_speedup(state_fractions: &[f64; STATE_COUNT], chip: &ChipConfig) -> f64 {
    debug_assert!(
        (state_fractions.iter().sum::<f64>() - 1.0).abs() < 1e-9,
        "state fractions must sum to 1"
    );
    let mut denominator = 0.0;
    for (index, &fraction) in state_fractions.iter().enumerate() {
        let state = BehavioralState::from_index(index);
        let factor = 1.0
            + chip
                .cores()
                .iter()
                .filter(|core| specialty_matches(core.specialization, state))
                .map(|core| core.speedup)
                .fold(0.0, f64::max);
        denominator += fraction / factor;
    }
    1.0 / denominator
}

/// Runs one simulation, returning aggregates plus the full event log.
pub fn simulate(
    traces: &[Trace],
    chip: &ChipConfig,
    policy: PolicyConfig,
    cutoffs: &CutoffSet,
    params: &SimParams,
) -> Result<(SimResult, SimEventLog), SimError> {
    run(traces, chip, policy, cutoffs, params, true)
}

/// Runs one simulation without accumulating per-step records; migrations are
/// still counted. Intended for sweeps where only aggregates are kept.
pub fn simulate_quiet(
    traces: &[Trace],
    chip: &ChipConfig,
    policy: PolicyConfig,
    cutoffs: &CutoffSet,
    params: &SimParams,
) -> Result<SimResult, SimError> {
    run(traces, chip, policy, cutoffs, params, false).map(|(result, _)| result)
}

fn validate(traces: &[Trace], params: &SimParams) -> Result<u64, SimError> {
    if traces.is_empty() {
        return Err(SimError::NoTraces);
    }
    if params.timestep_ms == 0 {
        return Err(SimError::ZeroTimestep);
    }
    if params.epoch_ms == 0 {
        return Err(SimError::ZeroEpoch);
    }
    if params.epoch_ms % params.timestep_ms != 0 {
        return Err(SimError::EpochNotMultiple {
            epoch_ms: params.epoch_ms,
            timestep_ms: params.timestep_ms,
        });
    }
    if !params.migration_cost_ms.is_finite() || params.migration_cost_ms < 0.0 {
        return Err(SimError::BadMigrationCost(params.migration_cost_ms));
    }
    let mut seen = std::collections::HashSet::new();
    for trace in traces {
        if u64::from(trace.epoch_ms()) != params.epoch_ms {
            return Err(SimError::EpochMismatch {
                name: trace.name().to_string(),
                found: u64::from(trace.epoch_ms()),
                expected: params.epoch_ms,
            });
        }
        if !seen.insert(trace.name()) {
            return Err(SimError::DuplicateProgram(trace.name().to_string()));
        }
    }
    let horizon = params
        .horizon_ms
        .unwrap_or_else(|| traces.iter().map(Trace::baseline_len_ms).max().unwrap_or(0));
    if horizon == 0 || horizon % params.timestep_ms != 0 {
        return Err(SimError::BadHorizon {
            horizon_ms: horizon,
            timestep_ms: params.timestep_ms,
        });
    }
    Ok(horizon)
}

fn run(
    traces: &[Trace],
    chip: &ChipConfig,
    policy: PolicyConfig,
    cutoffs: &CutoffSet,
    params: &SimParams,
    log_steps: bool,
) -> Result<(SimResult, SimEventLog), SimError> {
    let horizon = validate(traces, params)?;
    let n = traces.len();
    let cores = chip.core_count();
    let step_f = params.timestep_ms as f64;
    let epoch_f = params.epoch_ms as f64;
    let source = policy.kind.state_source();

    let states: Vec<Vec<BehavioralState>> = traces.iter().map(|t| t.states(cutoffs)).collect();
    let trace_len: Vec<f64> = traces.iter().map(|t| t.baseline_len_ms() as f64).collect();

    let mut sched = SchedulerState::new_round_robin(cores, n);
    let mut work = vec![0.0f64; n];
    let mut pending_stall = vec![0.0f64; n];
    let mut inertia = vec![0u32; n];
    let mut busy = vec![0.0f64; n];
    let mut stall = vec![0.0f64; n];
    let mut wait = vec![0.0f64; n];
    let mut migrations = vec![0u64; n];
    let mut executed = vec![0u64; n];
    let mut matched_steps = vec![0u64; n];
    let mut log = SimEventLog::default();

    let steps = horizon / params.timestep_ms;
    for step in 0..steps {
        let now_ms = step * params.timestep_ms;

        if policy.kind.migrates() {
            // Snapshot the running program of every core: each is examined
            // exactly once per invocation, even if it moves to a
            // later-visited core mid-pass. Occupancy is still read live, so
            // one pass never stacks two programs onto the same idle core.
            let running: Vec<Option<usize>> = (0..cores).map(|c| sched.head(c)).collect();
            for core in 0..cores {
                let Some(program) = running[core] else {
                    continue;
                };
                if inertia[program] > 0 {
                    inertia[program] -= 1;
                    continue;
                }
                let observed =
                    crate::sched::observed_state(&states[program], work[program], epoch_f, source);
                match sched.decide(core, chip, observed) {
                    Decision::Stay => {}
                    Decision::Migrate { to } => {
                        sched.migrate(core, to);
                        inertia[program] = policy.inertia_schedulings;
                        pending_stall[program] += params.migration_cost_ms;
                        migrations[program] += 1;
                        log.migrations.push(MigrationRecord {
                            time_ms: now_ms,
                            program: program as u32,
                            from_core: core as u32,
                            to_core: to as u32,
                        });
                    }
                }
            }
        }

        for core in 0..cores {
            let Some(program) = sched.head(core) else {
                continue;
            };
            let stalled = pending_stall[program].min(step_f);
            pending_stall[program] -= stalled;
            let working = step_f - stalled;
            // One state lookup per step; stalling does not move the offset,
            // so the state seen here covers the whole working portion.
            let state = crate::sched::observed_state(
                &states[program],
                work[program],
                epoch_f,
                crate::sched::StateSource::Oracle,
            );
            let core_spec = &chip.cores()[core];
            let matched = specialty_matches(core_spec.specialization, state);
            let rate = if matched {
                1.0 + core_spec.speedup
            } else {
                1.0
            };
            let done = working * rate;
            work[program] += done;
            busy[program] += working;
            stall[program] += stalled;
            executed[program] += 1;
            if matched {
                matched_steps[program] += 1;
            }
            if log_steps {
                log.steps.push(StepRecord {
                    time_ms: now_ms,
                    program: program as u32,
                    core: core as u32,
                    state,
                    matched,
                    work_done_ms: done,
                    stalled_ms: stalled,
                });
            }
        }

        for core in 0..cores {
            for (position, program) in sched.queue(core).enumerate() {
                if position > 0 {
                    wait[program] += step_f;
                }
            }
            sched.rotate(core);
        }
    }

    let horizon_f = horizon as f64;
    let programs: Vec<ProgramResult> = (0..n)
        .map(|i| ProgramResult {
            name: traces[i].name().to_string(),
            work_ms: work[i],
            speedup: work[i] / horizon_f,
            migrations: migrations[i],
            matched_step_fraction: if executed[i] == 0 {
                0.0
            } else {
                matched_steps[i] as f64 / executed[i] as f64
            },
            busy_ms: busy[i],
            stall_ms: stall[i],
            wait_ms: wait[i],
            executed_steps: executed[i],
            matched_steps: matched_steps[i],
            wraps: (work[i] / trace_len[i]).floor() as u64,
        })
        .collect();

    let total_work: f64 = work.iter().sum();
    let total_migrations: u64 = migrations.iter().sum();
    let total_executed: u64 = executed.iter().sum();
    let total_matched: u64 = matched_steps.iter().sum();
    let result = SimResult {
        chip: chip.name().to_string(),
        policy: policy.to_string(),
        system_speedup: total_work / (n as f64 * horizon_f),
        mean_app_speedup: programs.iter().map(|p| p.speedup).sum::<f64>() / n as f64,
        migrations_per_sec: total_migrations as f64 / (horizon_f / 1000.0),
        epoch_utilization: if total_executed == 0 {
            0.0
        } else {
            total_matched as f64 / total_executed as f64
        },
        horizon_ms: horizon,
        timestep_ms: params.timestep_ms,
        epoch_ms: params.epoch_ms,
        migration_cost_ms: params.migration_cost_ms,
        seed: params.seed,
        programs,
    };
    Ok((result, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sched::PolicyKind;
    use crate::state::Metric;
    use crate::trace::{EpochRecord, SyntheticSpec};

    fn cutoffs() -> CutoffSet {
        CutoffSet::intuitive()
    }

    /// A trace whose epochs classify to the given state codes under the
    /// intuitive cutoffs.
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

    #[test]
    fn rejects_bad_params() {
        let trace = trace_of_states("a", &[0, 0]);
        let chip = ChipConfig::canonical30();
        let base = SimParams::default();

        let mut p = base;
        p.timestep_ms = 0;
        assert!(matches!(
            simulate(
                &[trace.clone()],
                &chip,
                PolicyConfig::greedy(),
                &cutoffs(),
                &p
            ),
            Err(SimError::ZeroTimestep)
        ));

        let mut p = base;
        p.timestep_ms = 30;
        assert!(matches!(
            simulate(
                &[trace.clone()],
                &chip,
                PolicyConfig::greedy(),
                &cutoffs(),
                &p
            ),
            Err(SimError::EpochNotMultiple { .. })
        ));

        let mut p = base;
        p.migration_cost_ms = -1.0;
        assert!(matches!(
            simulate(
                &[trace.clone()],
                &chip,
                PolicyConfig::greedy(),
                &cutoffs(),
                &p
            ),
            Err(SimError::BadMigrationCost(_))
        ));

        let mut p = base;
        p.horizon_ms = Some(105);
        assert!(matches!(
            simulate(
                &[trace.clone()],
                &chip,
                PolicyConfig::greedy(),
                &cutoffs(),
                &p
            ),
            Err(SimError::BadHorizon { .. })
        ));

        assert!(matches!(
            simulate(&[], &chip, PolicyConfig::greedy(), &cutoffs(), &base),
            Err(SimError::NoTraces)
        ));

        let twin = trace_of_states("a", &[0, 0]);
        assert!(matches!(
            simulate(
                &[trace.clone(), twin],
                &chip,
                PolicyConfig::greedy(),
                &cutoffs(),
                &base
            ),
            Err(SimError::DuplicateProgram(_))
        ));

        let other = Trace::new(
            "b".into(),
            50,
            vec![EpochRecord::new(0.0, 0.0, 0.0, 0.0).unwrap()],
        )
        .unwrap();
        assert!(matches!(
            simulate(&[other], &chip, PolicyConfig::greedy(), &cutoffs(), &base),
            Err(SimError::EpochMismatch { .. })
        ));
    }

    #[test]
    fn oracle_on_constant_matched_trace_hits_full_speedup() {
        let trace = trace_of_states("l2heavy", &[8; 30]);
        let chip = ChipConfig::canonical30();
        let (result, log) = simulate(
            &[trace],
            &chip,
            PolicyConfig::oracle(),
            &cutoffs(),
            &SimParams::default(),
        )
        .unwrap();
        let app = &result.programs[0];
        assert!((app.speedup - 1.3).abs() < 1e-12, "speedup {}", app.speedup);
        assert_eq!(app.migrations, 1);
        assert_eq!(app.matched_step_fraction, 1.0);
        assert_eq!(result.epoch_utilization, 1.0);
        assert!((result.system_speedup - 1.3).abs() < 1e-12);
        // 1 migration over a 3-second horizon.
        assert!((result.migrations_per_sec - 1.0 / 3.0).abs() < 1e-12);
        // The log replays to the same totals.
        let logged_work: f64 = log
            .steps
            .iter()
            .filter(|s| s.program == 0)
            .map(|s| s.work_done_ms)
            .sum();
        assert!((logged_work - app.work_ms).abs() < 1e-9);
    }

    #[test]
    fn all_low_trace_gets_exactly_unit_speedup_under_every_policy() {
        let trace = trace_of_states("idle", &[0; 20]);
        let chip = ChipConfig::canonical30();
        for kind in PolicyKind::ALL {
            let policy = PolicyConfig::new(kind, None).unwrap();
            let (result, _) = simulate(
                &[trace.clone()],
                &chip,
                policy,
                &cutoffs(),
                &SimParams::default(),
            )
            .unwrap();
            assert_eq!(
                result.programs[0].speedup, 1.0,
                "policy {kind} must not accelerate an all-Low trace"
            );
            assert_eq!(result.programs[0].matched_step_fraction, 0.0);
            if kind == PolicyKind::Blind {
                assert_eq!(result.programs[0].migrations, 0);
            }
        }
    }

    #[test]
    fn blind_policy_never_migrates_or_accelerates_from_baseline_core() {
        let trace = trace_of_states("l2heavy", &[8; 10]);
        let chip = ChipConfig::canonical30();
        let (result, log) = simulate(
            &[trace],
            &chip,
            PolicyConfig::blind(),
            &cutoffs(),
            &SimParams::default(),
        )
        .unwrap();
        assert_eq!(result.programs[0].migrations, 0);
        assert_eq!(result.programs[0].speedup, 1.0);
        assert!(log.migrations.is_empty());
        assert!(log.steps.iter().all(|s| s.core == 0));
    }

    #[test]
    fn previous_epoch_observation_costs_one_epoch_of_lag() {
        // Three matched epochs; the greedy scheduler discovers the state
        // only after the first epoch completes, so exactly one epoch runs
        // unaccelerated: work = 100 + 200·1.3 = 360 over a 300ms horizon.
        let trace = trace_of_states("l2heavy", &[8, 8, 8]);
        let chip = ChipConfig::canonical30();
        let (result, _) = simulate(
            &[trace],
            &chip,
            PolicyConfig::greedy(),
            &cutoffs(),
            &SimParams::default(),
        )
        .unwrap();
        let app = &result.programs[0];
        assert!((app.speedup - 1.2).abs() < 1e-12, "speedup {}", app.speedup);
        assert_eq!(app.wraps, 1);
    }

    #[test]
    fn migration_cost_stalls_the_migrating_program() {
        let trace = trace_of_states("l2heavy", &[8; 3]);
        let chip = ChipConfig::canonical30();
        let params = SimParams::default().with_migration_cost(5.0);
        let (result, _) =
            simulate(&[trace], &chip, PolicyConfig::oracle(), &cutoffs(), &params).unwrap();
        let app = &result.programs[0];
        assert_eq!(app.migrations, 1);
        assert!((app.stall_ms - 5.0).abs() < 1e-12);
        assert!((app.busy_ms - 295.0).abs() < 1e-12);
        // 5ms stalled, 295ms worked at 1.3.
        assert!((app.work_ms - 295.0 * 1.3).abs() < 1e-9);
    }

    #[test]
    fn work_conservation_under_overload() {
        // Three programs share a two-core chip; queued time must account
        // for every millisecond not spent busy or stalled.
        let traces = vec![
            trace_of_states("a", &[8, 1, 8, 1, 8]),
            trace_of_states("b", &[2, 2, 4, 4, 2]),
            trace_of_states("c", &[0, 8, 0, 8, 0]),
        ];
        let chip = ChipConfig::canonical([0.3, 0.2, 0.1, 0.25]).unwrap();
        for kind in PolicyKind::ALL {
            let policy = PolicyConfig::new(kind, None).unwrap();
            let params = SimParams::default().with_migration_cost(3.0);
            let (result, _) = simulate(&traces, &chip, policy, &cutoffs(), &params).unwrap();
            for app in &result.programs {
                let accounted = app.busy_ms + app.stall_ms + app.wait_ms;
                assert!(
                    (accounted - result.horizon_ms as f64).abs() < 1e-6,
                    "policy {kind} program {} accounts {accounted} of {}",
                    app.name,
                    result.horizon_ms
                );
            }
        }
    }

    #[test]
    fn accelerated_program_wraps_and_restarts() {
        let trace = trace_of_states("l2heavy", &[8, 8]);
        let chip = ChipConfig::canonical30();
        // Horizon of 400ms on a 200ms trace at full speedup: work = 520,
        // two complete traversals plus an offset of 120.
        let params = SimParams::default().with_horizon(400);
        let (result, _) =
            simulate(&[trace], &chip, PolicyConfig::oracle(), &cutoffs(), &params).unwrap();
        let app = &result.programs[0];
        assert!((app.work_ms - 520.0).abs() < 1e-9);
        assert_eq!(app.wraps, 2);
    }

    #[test]
    fn deterministic_across_runs() {
        let traces = vec![
            trace_of_states("a", &[8, 1, 2, 4, 8, 0, 1, 1]),
            trace_of_states("b", &[0, 0, 4, 4, 2, 2, 8, 8]),
        ];
        let chip = ChipConfig::realistic(1, 2, 0.3).unwrap();
        let policy = PolicyConfig::greedy_inertia(3).unwrap();
        let params = SimParams::default().with_migration_cost(1.0);
        let first = simulate(&traces, &chip, policy, &cutoffs(), &params).unwrap();
        let second = simulate(&traces, &chip, policy, &cutoffs(), &params).unwrap();
        assert_eq!(first.0, second.0);
        assert_eq!(first.1, second.1);
        let quiet = simulate_quiet(&traces, &chip, policy, &cutoffs(), &params).unwrap();
        assert_eq!(first.0, quiet);
    }

    #[test]
    fn inertia_reduces_migrations_on_a_ping_pong_trace() {
        let codes: Vec<u8> = (0..60).map(|i| if i % 2 == 0 { 1 } else { 2 }).collect();
        let trace = trace_of_states("pingpong", &codes);
        let chip = ChipConfig::canonical30();
        // Schedule once per epoch so the observed state changes between
        // consecutive scheduler invocations.
        let mut params = SimParams::default();
        params.timestep_ms = 100;
        let (greedy, _) = simulate(
            &[trace.clone()],
            &chip,
            PolicyConfig::greedy(),
            &cutoffs(),
            &params,
        )
        .unwrap();
        let (inertia, _) = simulate(
            &[trace],
            &chip,
            PolicyConfig::greedy_inertia(5).unwrap(),
            &cutoffs(),
            &params,
        )
        .unwrap();
        assert!(greedy.programs[0].migrations > 0);
        assert!(inertia.programs[0].migrations <= greedy.programs[0].migrations);
    }

    #[test]
    fn amdahl_formula_examples() {
        let chip = ChipConfig::canonical30();
        let mut all_low = [0.0; STATE_COUNT];
        all_low[0] = 1.0;
        assert_eq!(amdahl_speedup(&all_low, &chip), 1.0);

        let mut half = [0.0; STATE_COUNT];
        half[0] = 0.5;
        half[8] = 0.5;
        let expected = 1.0 / (0.5 + 0.5 / 1.3);
        assert!((amdahl_speedup(&half, &chip) - expected).abs() < 1e-12);

        // A multi-component state uses the best matching core.
        let hetero = ChipConfig::canonical([0.1, 0.0, 0.0, 0.3]).unwrap();
        let mut nine = [0.0; STATE_COUNT];
        nine[9] = 1.0;
        assert!((amdahl_speedup(&nine, &hetero) - 1.3).abs() < 1e-12);

        // No core serves the state: factor 1.
        let branch_only = ChipConfig::canonical([0.3, 0.0, 0.0, 0.0]).unwrap();
        let mut eight = [0.0; STATE_COUNT];
        eight[8] = 1.0;
        assert_eq!(amdahl_speedup(&eight, &branch_only), 1.0);
    }

    #[test]
    fn oracle_matches_amdahl_on_synthetic_trace_with_exact_horizon() {
        // Uniform 25% speedups tile the 100ms epoch into whole 10ms steps
        // (8 matched or 10 unmatched), so running for exactly one traversal
        // reproduces the analytic speedup with zero discretization error.
        let mut weights = [0.0; STATE_COUNT];
        weights[0] = 0.2;
        weights[1] = 0.3;
        weights[8] = 0.3;
        weights[10] = 0.2;
        let spec = SyntheticSpec::new(weights, 0.7, 50, 99).unwrap();
        let trace = crate::trace::generate_trace(&spec, &cutoffs()).unwrap();
        let chip = ChipConfig::canonical([0.25; 4]).unwrap();
        let fractions = crate::trace::empirical_state_fraction(&trace, &cutoffs());
        let expected = amdahl_speedup(&fractions, &chip);

        let states = trace.states(&cutoffs());
        let traversal_ms: u64 = states
            .iter()
            .map(|&s| {
                let served = chip
                    .cores()
                    .iter()
                    .any(|c| specialty_matches(c.specialization, s));
                if served {
                    80
                } else {
                    100
                }
            })
            .sum();
        let params = SimParams::default().with_horizon(traversal_ms);
        let (result, _) =
            simulate(&[trace], &chip, PolicyConfig::oracle(), &cutoffs(), &params).unwrap();
        assert!(
            (result.programs[0].speedup - expected).abs() < 1e-9,
            "simulated {} analytic {}",
            result.programs[0].speedup,
            expected
        );
    }
}
