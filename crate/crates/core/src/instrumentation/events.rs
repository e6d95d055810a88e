use serde::{Deserialize, Serialize};

use super::raster::Raster;
use crate::dynamics::ExternalDrive;
use crate::model::Topology;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynapticEventCount {
    /// One per spike per outgoing synapse of its source.
    pub internal: u64,
    /// External drive events delivered to any neuron over the run.
    pub external: u64,
}

impl SynapticEventCount {
    pub fn total(&self) -> u64 {
        self.internal + self.external
    }
}

/// Counts the synaptic events of a completed run from its raster and the
/// connectivity, re-drawing the external drive for every neuron and step.
/// Independent of the engine's own delivery counters.
pub fn count_synaptic_events(
    raster: &Raster,
    topology: &Topology,
    drive: &ExternalDrive,
    steps: u32,
) -> SynapticEventCount {
    let internal = raster
        .spikes()
        .iter()
        .map(|&(_, id)| topology.synapses.out_degree(id) as u64)
        .sum();
    let mut external = 0u64;
    for n in 0..topology.total_neurons() {
        for t in 0..steps {
            external += u64::from(drive.events(n, t));
        }
    }
    SynapticEventCount { internal, external }
}

/// Mean-field event count: `neurons * rate * seconds * out_degree` internal
/// plus `neurons * external_synapses * external_rate * seconds` external.
pub fn expected_synaptic_events(
    neurons: f64,
    firing_rate_hz: f64,
    seconds: f64,
    internal_synapses_per_neuron: f64,
    external_synapses_per_neuron: f64,
    external_rate_hz: f64,
) -> f64 {
    neurons * firing_rate_hz * seconds * internal_synapses_per_neuron
        + neurons * external_synapses_per_neuron * external_rate_hz * seconds
}
