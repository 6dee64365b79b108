//! Simulation of an RIS-assisted downlink to a high-speed train: channel
//! generation, joint beamforming/phase optimization and link metrics.

pub mod channel;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod numerics;
pub mod optimizer;

pub use error::{Error, Result};
