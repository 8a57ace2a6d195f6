//! Toolchain for a hybrid Spatial/Winograd CNN accelerator.
//!
//! The pipeline is `model` → `dse` → `compiler` → `simulator`, with
//! `perfmodel` providing the analytical resource and latency estimates used by
//! the exploration and checked against the simulator.

pub mod compiler;
pub mod dse;
pub mod error;
pub mod isa;
pub mod model;
pub mod perfmodel;
pub mod simulator;
pub mod tensor;
pub mod winograd;

pub use error::{Error, Result};
