//! Scheduling policies and the per-core migration decision.
//!
//! Each core owns a FIFO queue of programs; the head of the queue runs.
//! Once per scheduling round, every core is visited in ascending id order
//! and its head program may migrate:
//!
//! 1. A program still under migration inertia stays put and the counter
//!    decrements, with no state lookup.
//! 2. Otherwise the program's behavioral state is observed (last completed
//!    epoch, or the current epoch for oracle policies).
//! 3. If the current core serves that state, the program stays.
//! 4. Otherwise it moves to the lowest-id *empty* core that serves the
//!    state, if one exists.
//! 5. Otherwise it moves to the most idle core overall (shortest queue,
//!    running programs included; ties break to the lowest id). Moving to
//!    its own core is a no-op.
//!
//! A migration enqueues the program at the tail of the target queue and, for
//! inertia policies, arms the inertia counter.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::chip::{ChipConfig, CoreSpec, Specialization};
use crate::state::BehavioralState;

/// Inertia counter value armed after each migration when the policy does not
/// override it.
pub const DEFAULT_INERTIA_SCHEDULINGS: u32 = 5;

#[derive(Debug, Error)]
pub enum SchedError {
    #[error("unknown policy `{0}` (expected blind, greedy, inertia, oracle, or oracle-inertia)")]
    UnknownPolicy(String),
    #[error("policy `{0}` does not take an inertia setting")]
    InertiaNotApplicable(PolicyKind),
    #[error("policy `{0}` requires an inertia of at least 1 scheduling")]
    ZeroInertia(PolicyKind),
}

/// Where the scheduler's view of a program's state comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateSource {
    /// The last epoch the program completed; a program that has not yet
    /// completed one epoch of work reads as Low.
    PrevEpoch,
    /// The epoch the program is executing right now.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    /// Never migrates; programs stay where they were first placed.
    Blind,
    /// Migrates on the last completed epoch's state.
    Greedy,
    /// Greedy plus a post-migration cooldown.
    GreedyInertia,
    /// Migrates on the current epoch's state.
    OracleGreedy,
    /// Oracle observation plus a post-migration cooldown.
    OracleInertia,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Blind,
        PolicyKind::Greedy,
        PolicyKind::GreedyInertia,
        PolicyKind::OracleGreedy,
        PolicyKind::OracleInertia,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Blind => "blind",
            PolicyKind::Greedy => "greedy",
            PolicyKind::GreedyInertia => "inertia",
            PolicyKind::OracleGreedy => "oracle",
            PolicyKind::OracleInertia => "oracle-inertia",
        }
    }

    pub fn uses_inertia(self) -> bool {
        matches!(self, PolicyKind::GreedyInertia | PolicyKind::OracleInertia)
    }

    pub fn migrates(self) -> bool {
        self != PolicyKind::Blind
    }

    pub fn state_source(self) -> StateSource {
        match self {
            PolicyKind::OracleGreedy | PolicyKind::OracleInertia => StateSource::Oracle,
            _ => StateSource::PrevEpoch,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = SchedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|kind| kind.name() == s)
            .ok_or_else(|| SchedError::UnknownPolicy(s.to_string()))
    }
}

/// A policy plus its inertia setting. Non-inertia policies always carry an
/// inertia of 0, inertia policies always at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub inertia_schedulings: u32,
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind, inertia: Option<u32>) -> Result<Self, SchedError> {
        let inertia_schedulings = if kind.uses_inertia() {
            let value = inertia.unwrap_or(DEFAULT_INERTIA_SCHEDULINGS);
            if value == 0 {
                return Err(SchedError::ZeroInertia(kind));
            }
            value
        } else {
            if inertia.is_some() {
                return Err(SchedError::InertiaNotApplicable(kind));
            }
            0
        };
        Ok(PolicyConfig {
            kind,
            inertia_schedulings,
        })
    }

    pub fn blind() -> Self {
        Self::new(PolicyKind::Blind, None).unwrap()
    }

    pub fn greedy() -> Self {
        Self::new(PolicyKind::Greedy, None).unwrap()
    }

    pub fn greedy_inertia(inertia: u32) -> Result<Self, SchedError> {
        Self::new(PolicyKind::GreedyInertia, Some(inertia))
    }

    pub fn oracle() -> Self {
        Self::new(PolicyKind::OracleGreedy, None).unwrap()
    }

    pub fn oracle_inertia(inertia: u32) -> Result<Self, SchedError> {
        Self::new(PolicyKind::OracleInertia, Some(inertia))
    }
}

impl fmt::Display for PolicyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.kind.uses_inertia() {
            write!(f, "{}:{}", self.kind, self.inertia_schedulings)
        } else {
            self.kind.fmt(f)
        }
    }
}

/// Whether a core serves a behavioral state: a specialized core serves every
/// state with its component HIGH. Baseline cores serve no state, and no core
/// serves the Low state.
pub fn specialty_matches(specialization: Specialization, state: BehavioralState) -> bool {
    match specialization.metric() {
        None => false,
        Some(metric) => state.has(metric),
    }
}

fn core_matches(core: &CoreSpec, state: BehavioralState) -> bool {
    specialty_matches(core.specialization, state)
}

/// Index of the epoch a program is in after `work_ms` of baseline-equivalent
/// progress; the trace loops, so work past the end wraps to a restart.
pub fn epoch_index_at(work_ms: f64, trace_len_ms: f64, epoch_ms: f64, epoch_count: usize) -> usize {
    debug_assert!(epoch_count > 0 && trace_len_ms > 0.0 && epoch_ms > 0.0);
    let offset = work_ms.rem_euclid(trace_len_ms);
    ((offset / epoch_ms) as usize).min(epoch_count - 1)
}

/// The state a scheduler sees for a program with the given progress.
pub fn observed_state(
    states: &[BehavioralState],
    work_ms: f64,
    epoch_ms: f64,
    source: StateSource,
) -> BehavioralState {
    let n = states.len();
    debug_assert!(n > 0);
    let trace_len_ms = epoch_ms * n as f64;
    let current = epoch_index_at(work_ms, trace_len_ms, epoch_ms, n);
    match source {
        StateSource::Oracle => states[current],
        StateSource::PrevEpoch => {
            if work_ms < epoch_ms {
                // Nothing completed yet: the scheduler has no sample and
                // assumes Low.
                BehavioralState::LOW
            } else {
                states[(current + n - 1) % n]
            }
        }
    }
}

/// The scheduler's migration decision for one core's running program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Stay,
    Migrate { to: usize },
}

/// Per-core FIFO queues of program indices. The head of each queue is the
/// program that executes on that core.
#[derive(Debug, Clone)]
pub struct SchedulerState {
    queues: Vec<VecDeque<usize>>,
}

impl SchedulerState {
    /// Places programs round-robin: program `i` starts on core `i % cores`.
    pub fn new_round_robin(core_count: usize, program_count: usize) -> Self {
        assert!(core_count > 0, "a chip has at least one core");
        let mut queues = vec![VecDeque::new(); core_count];
        for program in 0..program_count {
            queues[program % core_count].push_back(program);
        }
        SchedulerState { queues }
    }

    pub fn core_count(&self) -> usize {
        self.queues.len()
    }

    pub fn queue_len(&self, core: usize) -> usize {
        self.queues[core].len()
    }

    /// The program currently executing on a core.
    pub fn head(&self, core: usize) -> Option<usize> {
        self.queues[core].front().copied()
    }

    pub fn queue(&self, core: usize) -> impl Iterator<Item = usize> + '_ {
        self.queues[core].iter().copied()
    }

    /// Moves the head to the tail so queued programs take turns running.
    pub fn rotate(&mut self, core: usize) {
        if self.queues[core].len() > 1 {
            let head = self.queues[core].pop_front().expect("non-empty queue");
            self.queues[core].push_back(head);
        }
    }

    /// Moves the head of `from` to the tail of `to`.
    pub fn migrate(&mut self, from: usize, to: usize) {
        assert_ne!(from, to, "migration to the same core is a stay");
        let program = self.queues[from]
            .pop_front()
            .expect("migrating core has a running program");
        self.queues[to].push_back(program);
    }

    /// The core with the shortest queue, running programs included; ties
    /// break to the lowest id.
    pub fn most_idle_core(&self) -> usize {
        let mut best = 0;
        let mut best_len = usize::MAX;
        for (core, queue) in self.queues.iter().enumerate() {
            if queue.len() < best_len {
                best = core;
                best_len = queue.len();
            }
        }
        best
    }

    /// Decides whether the head of `core` should migrate given its observed
    /// state. The caller handles inertia gating and the actual move.
    pub fn decide(&self, core: usize, chip: &ChipConfig, observed: BehavioralState) -> Decision {
        debug_assert_eq!(chip.core_count(), self.core_count());
        debug_assert!(self.head(core).is_some());
        if core_matches(&chip.cores()[core], observed) {
            return Decision::Stay;
        }
        for candidate in chip.cores() {
            if self.queues[candidate.id].is_empty() && core_matches(candidate, observed) {
                return Decision::Migrate { to: candidate.id };
            }
        }
        let target = self.most_idle_core();
        if target == core {
            Decision::Stay
        } else {
            Decision::Migrate { to: target }
        }
    }
}
