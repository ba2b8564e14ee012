//! Averaged-model simulation of low-inertia grids with grid-forming
//! converters (droop, matching and hybrid angle control) and synchronous
//! machines, plus an energy-function certification of a two-converter
//! system.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod base;
pub mod controls;
pub mod converter;
pub mod error;
pub mod io;
pub mod machine;
pub mod metrics;
pub mod network;
pub mod scenarios;
pub mod numerics;

pub use error::{Error, IntegrationError, Result};

#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    pub struct Overview;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
    #[doc = include_str!("../../../book/src/library.md")]
    pub struct Library;
    #[doc = include_str!("../../../book/src/controls.md")]
    pub struct Controls;
    #[doc = include_str!("../../../book/src/certification.md")]
    pub struct Certification;
    #[doc = include_str!("../../../book/src/acceptance.md")]
    pub struct Acceptance;
    #[doc = include_str!("../../../README.md")]
    pub struct Readme;
}
