//! Moving axonal spikes between ranks: wire format, delay queues,
//! transports, broker routing and the per-rank step loop.

mod broker;
mod delay;
mod engine;
mod packet;
mod tcp;
mod transport;

pub use broker::{broker_route, flat_inter_node_streams, BrokerRoute, NodeMap, RankTraffic};
pub use delay::{DelayQueues, DELAY_HORIZON};
pub use engine::{
    run_engine, BrokerOutcome, EngineConfig, EngineOutput, ExchangeMode, Network, RankOutcome,
    RankWorker, SendMode, SynEvent,
};
pub use packet::{
    pack_packets, packet_len, peek_header, unpack_packet, AxonalSpike, Hop, Packet, PacketError,
    FLAG_EMPTY, HEADER_BYTES, MAX_PACKET_BYTES, MAX_SPIKES_PER_PACKET, PACKET_VERSION, SPIKE_BYTES,
};
pub use tcp::{tcp_local_mesh, TcpEndpoint};
pub use transport::{loopback, Envelope, LoopbackEndpoint, Transport};
