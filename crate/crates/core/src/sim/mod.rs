//! Train traverse simulation: scenario configuration, the per-slot loop over
//! channel, probing and policy, and CSV emission.

pub mod calibrate;
pub mod config;
pub mod environment;
pub mod run;

pub use calibrate::{path_statistics, PathStats};
pub use config::{EnvironmentMode, ScenarioConfig};
pub use environment::{Environment, SlotChannel};
pub use run::{
    genie_at, run, sweep, write_sweep_csv, Policy, RunResult, Simulation, SlotRow, SweepAxis, SweepPoint,
    TraverseSummary,
};
