//! Closed-form H∞-optimal static state feedback for structured linear
//! systems.
//!
//! The crate constructs the explicit optimal gains (`synth`), certifies
//! them numerically (`verify`), compiles network application models into
//! plants (`netgen`) and provides a Riccati γ-bisection baseline for
//! comparison (`baseline`). Model and report files are handled in
//! `format`.

pub mod baseline;
pub mod error;
pub mod format;
pub mod grid;
pub mod netgen;
pub mod numkit;
pub mod rows;
pub mod synth;
pub mod sysmodel;
pub mod verify;

pub use error::{Error, Result};
pub use grid::FrequencyGrid;
pub use sysmodel::{
    close_loop, eval_closed_rational, DescriptorPlant, FrequencyModel, Gain, GainFormula, RationalEntry,
    RationalMatrix, RationalPlant, StateSpace, WeightedObjective,
};
