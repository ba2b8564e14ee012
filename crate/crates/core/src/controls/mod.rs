//! Grid-forming converter controls: frequency laws, dc current reference,
//! ac voltage magnitude loop and the inverse-droop augmentation.

pub mod config;
pub mod controller;
pub mod laws;

pub use config::{AcLoop, ControlConfig, DcLoop, DcLoopMode, InverseDroop, Strategy, DEFAULT_OMEGA_F};
pub use controller::{controller_rhs, steady_control_state, ControlOutputs, ControlState, Measurements};
pub use laws::*;
