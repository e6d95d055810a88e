//! The simulated network: a grid of columns, their synapses, and how the
//! neurons are split across ranks.

mod config;
mod partition;
mod routing;
mod topology;

pub use config::{GridConfig, RemoteKernel, SynapticWeights};
pub use partition::{partition_columns, PartitionMap};
pub use routing::{build_routing_tables, RoutingTable};
pub use topology::{
    build_topology, generate_synapses, ConnectivityStats, Layout, Population, Synapse,
    SynapseTable, Topology,
};
