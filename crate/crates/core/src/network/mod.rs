//! Transmission network: dataset, dynamic αβ model, phasor steady state.

pub mod dataset;
pub mod model;
pub mod phasor;

pub use dataset::{checksum, NetworkDataset, IEEE9_TOML};
pub use model::{
    apply_load_step, network_rhs, power_balance, LineParams, LoadEvent, LoadParams, NetworkModel,
    Port, PowerBalance, TransformerParams,
};
pub use phasor::{power_flow, PhasorNetwork, PortSeries, PowerFlowSolution, TerminalControl};
