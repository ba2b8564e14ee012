//! Fixed-step integration, state bookkeeping and frame transforms.

pub mod frames;
pub mod integrate;
pub mod state;

pub use frames::{clarke, dot, inverse_clarke, norm, rotate, wrap_angle, Vec2};
pub use integrate::{integrate, integrate_observed, IntegratorConfig, Rk4, Trajectory};
pub use state::{SliceEntry, StateLayout, StateVector};
