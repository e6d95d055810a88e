use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::exchange::NodeMap;
use crate::Result;

/// One sent packet, as written to the optional `step,src,dst,bytes` log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PacketRecord {
    pub step: u32,
    pub src: u32,
    pub dst: u32,
    pub bytes: u32,
}

/// Streaming per-endpoint tally kept by the sender.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficCounter {
    pub packets: u64,
    pub payload_bytes: u64,
    pub max_packet_bytes: u64,
    /// Sum over steps of the distinct off-node destinations of this step.
    pub inter_node_streams: u64,
    #[serde(skip)]
    step_streams: BTreeSet<u32>,
}

impl TrafficCounter {
    #[inline]
    pub fn record(&mut self, dst: u32, bytes: usize, off_node: bool) {
        self.packets += 1;
        self.payload_bytes += bytes as u64;
        self.max_packet_bytes = self.max_packet_bytes.max(bytes as u64);
        if off_node {
            self.step_streams.insert(dst);
        }
    }

    /// Closes the current step for stream counting.
    #[inline]
    pub fn end_step(&mut self) {
        self.inter_node_streams += self.step_streams.len() as u64;
        self.step_streams.clear();
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EndpointTraffic {
    pub endpoint: u32,
    pub is_broker: bool,
    pub packets: u64,
    pub payload_bytes: u64,
    pub max_packet_bytes: u64,
    pub mean_packet_bytes: f64,
    pub inter_node_streams: u64,
}

impl EndpointTraffic {
    fn from_counter(endpoint: u32, is_broker: bool, c: &TrafficCounter) -> Self {
        EndpointTraffic {
            endpoint,
            is_broker,
            packets: c.packets,
            payload_bytes: c.payload_bytes,
            max_packet_bytes: c.max_packet_bytes,
            mean_packet_bytes: mean(c.payload_bytes, c.packets),
            inter_node_streams: c.inter_node_streams,
        }
    }
}

fn mean(bytes: u64, packets: u64) -> f64 {
    if packets == 0 {
        0.0
    } else {
        bytes as f64 / packets as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrafficStats {
    pub steps: u64,
    pub per_endpoint: Vec<EndpointTraffic>,
    pub packets: u64,
    pub payload_bytes: u64,
    pub max_packet_bytes: u64,
    pub mean_packet_bytes: f64,
    /// Means over rank endpoints only (brokers excluded).
    pub packets_per_rank: f64,
    pub payload_bytes_per_rank: f64,
    pub inter_node_streams: u64,
    pub inter_node_streams_per_step: f64,
}

impl TrafficStats {
    /// Aggregates streaming counters; `counters[e]` belongs to endpoint `e`,
    /// endpoints at or above `n_ranks` being brokers.
    pub fn from_counters(counters: &[TrafficCounter], n_ranks: u32, steps: u64) -> Self {
        let per_endpoint = counters
            .iter()
            .enumerate()
            .map(|(e, c)| EndpointTraffic::from_counter(e as u32, e as u32 >= n_ranks, c))
            .collect();
        Self::aggregate(per_endpoint, n_ranks, steps)
    }

    fn aggregate(per_endpoint: Vec<EndpointTraffic>, n_ranks: u32, steps: u64) -> Self {
        let packets = per_endpoint.iter().map(|e| e.packets).sum();
        let payload_bytes = per_endpoint.iter().map(|e| e.payload_bytes).sum();
        let max_packet_bytes = per_endpoint
            .iter()
            .map(|e| e.max_packet_bytes)
            .max()
            .unwrap_or(0);
        let inter_node_streams = per_endpoint.iter().map(|e| e.inter_node_streams).sum();
        let ranks = per_endpoint.iter().filter(|e| !e.is_broker);
        let (rank_packets, rank_bytes) = ranks.fold((0u64, 0u64), |(p, b), e| {
            (p + e.packets, b + e.payload_bytes)
        });
        let n = f64::from(n_ranks.max(1));
        TrafficStats {
            steps,
            per_endpoint,
            packets,
            payload_bytes,
            max_packet_bytes,
            mean_packet_bytes: mean(payload_bytes, packets),
            packets_per_rank: rank_packets as f64 / n,
            payload_bytes_per_rank: rank_bytes as f64 / n,
            inter_node_streams,
            inter_node_streams_per_step: if steps == 0 {
                0.0
            } else {
                inter_node_streams as f64 / steps as f64
            },
        }
    }
}

/// Recomputes traffic statistics from a raw packet log. `n_endpoints`
/// counts ranks plus brokers; brokers occupy ids `nodes.n_ranks()..`.
pub fn traffic_summary(
    log: &[PacketRecord],
    nodes: &NodeMap,
    n_endpoints: u32,
    steps: u64,
) -> TrafficStats {
    let n_ranks = nodes.n_ranks();
    let mut per_endpoint: Vec<EndpointTraffic> = (0..n_endpoints)
        .map(|e| EndpointTraffic {
            endpoint: e,
            is_broker: e >= n_ranks,
            ..EndpointTraffic::default()
        })
        .collect();
    let mut streams = BTreeSet::new();
    for r in log {
        let e = &mut per_endpoint[r.src as usize];
        e.packets += 1;
        e.payload_bytes += u64::from(r.bytes);
        e.max_packet_bytes = e.max_packet_bytes.max(u64::from(r.bytes));
        if nodes.node_of_endpoint(r.src) != nodes.node_of_endpoint(r.dst) {
            streams.insert((r.step, r.src, r.dst));
        }
    }
    for (_, src, _) in &streams {
        per_endpoint[*src as usize].inter_node_streams += 1;
    }
    for e in per_endpoint.iter_mut() {
        e.mean_packet_bytes = mean(e.payload_bytes, e.packets);
    }
    TrafficStats::aggregate(per_endpoint, n_ranks, steps)
}

pub fn write_packet_log<W: Write>(log: &[PacketRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in log {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| crate::Error::io("packet log", e))?;
    Ok(())
}

pub fn read_packet_log<R: Read>(r: R) -> Result<Vec<PacketRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rd.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
