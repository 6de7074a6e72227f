//! Monte Carlo toolkit for dense random Gaussian interference networks.
//!
//! Transmitter/receiver pairs are dropped IID in space, path gains follow a
//! power law, and per-link rate variables `S_ij = 1/2 log2(1 + 2 g_ij)` drive
//! everything else:
//!
//! * [`network`] draws instances and estimates the limit `E = E[S_ii]`.
//! * [`bottleneck`] finds epsilon-bottleneck links and the `U`/`V` statistics.
//! * [`bounds`] brackets the sum capacity of one instance.
//! * [`eia`] is a symbol-level model of ergodic interference alignment.
//! * [`experiments`] runs seeded, replicated sweeps over the network size.

pub mod bottleneck;
pub mod bounds;
pub mod eia;
pub mod error;
pub mod experiments;
pub mod matrix;
pub mod network;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
