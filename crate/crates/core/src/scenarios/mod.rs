//! IEEE 9-bus system assembly, scenario runs and parameter sweeps.

pub mod bench;
pub mod run;
pub mod spec;
pub mod system;

pub use run::{expand_sweep, run, sweep, Channel, Diagnostics, SimResult, SweepPoint, RECORD_EVERY_ENV};
pub use spec::{Lpf, ScenarioSpec, StrategyKind, UnitKind, UnitSpec};
pub use system::{build_system, Built, Device, DeviceModel, DeviceSignals, System};
