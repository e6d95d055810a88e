//! Measurements taken around a run: where the time went, what crossed the
//! transport, how many synaptic events were processed, and what that cost
//! in energy.

mod energy;
mod events;
mod phase;
mod raster;
mod traffic;

pub use energy::{
    energy_report, integrate_energy, per_event_energy, EnergyReport, PowerSample, PowerSampleSeries,
};
pub use events::{count_synaptic_events, expected_synaptic_events, SynapticEventCount};
pub use phase::{phase_report, Phase, PhaseBreakdown, PhaseClock, PhaseFractions, PhaseTimers};
pub use raster::{fnv1a64, Raster};
pub use traffic::{
    read_packet_log, traffic_summary, write_packet_log, EndpointTraffic, PacketRecord,
    TrafficCounter, TrafficStats,
};
