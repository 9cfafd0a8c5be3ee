//! Joint flow-split, congestion control and scheduling (JFCS) for
//! multi-RU traffic steering.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`]: topology, path loss, Rician fading, noise power
//! - [`queueing`]: physical and virtual queues, delay budgets, stability
//! - [`congestion`]: utility functions and the per-slot congestion controller
//! - [`flow_split`]: per-frame regret-based learning of flow splits
//! - [`mrt`]: MRT power control by inner approximation
//! - [`zf`]: zero-forcing beamforming with water-filling bisection
//! - [`analysis`]: Lyapunov bookkeeping, theorem constants, scaling checks
//! - [`sim`], [`config`], [`export`]: the two-timescale simulation harness

pub mod analysis;
pub mod channel;
pub mod config;
pub mod congestion;
mod error;
pub mod export;
pub mod flow_split;
pub mod linalg;
pub mod mrt;
pub mod queueing;
pub mod rng;
pub mod sim;
pub mod zf;

pub use error::{Error, Result};
