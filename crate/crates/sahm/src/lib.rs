//! Core library for characterizing per-epoch performance-counter traces and
//! simulating schedulers on chips with component-specialized cores.

pub mod characterize;
pub mod chip;
pub mod report;
pub mod repro;
pub mod sched;
pub mod sim;
pub mod state;
pub mod trace;

pub use chip::{ChipConfig, CoreSpec, Specialization};
pub use sched::{PolicyConfig, PolicyKind};
pub use sim::{simulate, SimParams};
pub use state::{classify, BehavioralState, CutoffSet};
pub use trace::{EpochRecord, SyntheticSpec, Trace};
