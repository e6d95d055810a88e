//! Distributed, time-driven spiking network simulator built as a proxy
//! application for interconnect and energy-to-solution benchmarking.
//!
//! The network is a 2D grid of cortical columns of leaky integrate-and-fire
//! neurons with calcium-mediated adaptation. Columns are partitioned across
//! ranks; every millisecond step each rank integrates its neurons, then the
//! axonal spikes are exchanged between ranks as small packets and expanded
//! into synaptic events on the receiving side.
//!
//! Module map:
//! - [`model`]: grid, connectivity, partitioning and routing tables.
//! - [`dynamics`]: neuron update, external Poisson drive, input accumulation.
//! - [`exchange`]: packet codec, delay queues, transports, broker routing and
//!   the per-rank step engine.
//! - [`instrumentation`]: phase timers, traffic stats, event counts, energy.
//! - [`harness`]: run configuration, single runs, scaling sweeps and reports.

pub mod dynamics;
pub mod error;
pub mod exchange;
pub mod harness;
pub mod instrumentation;
pub mod model;
pub mod rng;

pub use error::{Error, Result};
pub use harness::{run_simulation, strong_scaling_sweep, RunConfig, RunReport, ScalingReport};
