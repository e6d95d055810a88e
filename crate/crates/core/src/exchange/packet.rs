//! Wire format of the spike packets exchanged between ranks.
//!
//! ```text
//! offset  size  field
//! 0       1     version (= 1)
//! 1       1     flags   (bit 0: empty, bits 1-2: hop kind)
//! 2       2     n_spikes, u16 LE
//! 4       4     step, u32 LE
//! 8       8*n   records: source id u32 LE, emission step u32 LE
//! ```
//!
//! A packet never exceeds 512 bytes, so at most 63 spikes travel together;
//! larger sets are split over several packets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PACKET_VERSION: u8 = 1;
pub const HEADER_BYTES: usize = 8;
pub const SPIKE_BYTES: usize = 8;
pub const MAX_PACKET_BYTES: usize = 512;
pub const MAX_SPIKES_PER_PACKET: usize = (MAX_PACKET_BYTES - HEADER_BYTES) / SPIKE_BYTES;

pub const FLAG_EMPTY: u8 = 0b0000_0001;
const HOP_SHIFT: u8 = 1;
const HOP_MASK: u8 = 0b0000_0110;

/// A firing event as it travels on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AxonalSpike {
    pub source: u32,
    pub step: u32,
}

impl AxonalSpike {
    pub fn new(source: u32, step: u32) -> Self {
        AxonalSpike { source, step }
    }

    /// Tie order inside a delay bucket: emission step, then source id.
    #[inline]
    pub fn order_key(&self) -> (u32, u32) {
        (self.step, self.source)
    }
}

/// Leg of the route a packet is on. Flat mode only uses `Direct`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hop {
    /// Rank to rank.
    Direct = 0,
    /// Rank to its node broker.
    Gather = 1,
    /// Broker to broker.
    Relay = 2,
    /// Broker to a rank of its node.
    Scatter = 3,
}

impl Hop {
    fn from_bits(bits: u8) -> Hop {
        match bits & 0b11 {
            0 => Hop::Direct,
            1 => Hop::Gather,
            2 => Hop::Relay,
            _ => Hop::Scatter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PacketError {
    #[error("unsupported packet version {0}")]
    BadVersion(u8),
    #[error("packet length {actual} does not match the {expected} bytes its header implies")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("inconsistent spike count {n_spikes}: {reason}")]
    SpikeCount { n_spikes: u16, reason: &'static str },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub step: u32,
    pub hop: Hop,
    pub spikes: Vec<AxonalSpike>,
}

impl Packet {
    pub fn is_empty(&self) -> bool {
        self.spikes.is_empty()
    }
}

/// Encoded size of a packet carrying `n_spikes`.
#[inline]
pub fn packet_len(n_spikes: usize) -> usize {
    HEADER_BYTES + SPIKE_BYTES * n_spikes
}

fn encode_one(step: u32, hop: Hop, spikes: &[AxonalSpike]) -> Vec<u8> {
    debug_assert!(spikes.len() <= MAX_SPIKES_PER_PACKET);
    let mut buf = Vec::with_capacity(packet_len(spikes.len()));
    let mut flags = (hop as u8) << HOP_SHIFT;
    if spikes.is_empty() {
        flags |= FLAG_EMPTY;
    }
    buf.push(PACKET_VERSION);
    buf.push(flags);
    buf.extend_from_slice(&(spikes.len() as u16).to_le_bytes());
    buf.extend_from_slice(&step.to_le_bytes());
    for s in spikes {
        buf.extend_from_slice(&s.source.to_le_bytes());
        buf.extend_from_slice(&s.step.to_le_bytes());
    }
    buf
}

/// Encodes `spikes` (sorted by source id) for one destination and step.
///
/// No spikes yields a single header-only packet flagged empty; otherwise
/// chunks of at most [`MAX_SPIKES_PER_PACKET`] spikes.
pub fn pack_packets(step: u32, hop: Hop, spikes: &[AxonalSpike]) -> Vec<Vec<u8>> {
    debug_assert!(spikes.windows(2).all(|w| w[0].source <= w[1].source));
    if spikes.is_empty() {
        return vec![encode_one(step, hop, &[])];
    }
    spikes
        .chunks(MAX_SPIKES_PER_PACKET)
        .map(|chunk| encode_one(step, hop, chunk))
        .collect()
}

/// Reads `(step, hop)` from a header without decoding the records.
pub fn peek_header(bytes: &[u8]) -> Result<(u32, Hop), PacketError> {
    if bytes.len() < HEADER_BYTES {
        return Err(PacketError::LengthMismatch {
            expected: HEADER_BYTES,
            actual: bytes.len(),
        });
    }
    if bytes[0] != PACKET_VERSION {
        return Err(PacketError::BadVersion(bytes[0]));
    }
    let step = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
    Ok((step, Hop::from_bits((bytes[1] & HOP_MASK) >> HOP_SHIFT)))
}

pub fn unpack_packet(bytes: &[u8]) -> Result<Packet, PacketError> {
    let (step, hop) = peek_header(bytes)?;
    let flags = bytes[1];
    let n_spikes = u16::from_le_bytes([bytes[2], bytes[3]]);
    let n = usize::from(n_spikes);
    if n > MAX_SPIKES_PER_PACKET {
        return Err(PacketError::SpikeCount {
            n_spikes,
            reason: "more spikes than fit in a 512-byte packet",
        });
    }
    if (flags & FLAG_EMPTY != 0) != (n == 0) {
        return Err(PacketError::SpikeCount {
            n_spikes,
            reason: "empty flag disagrees with spike count",
        });
    }
    let expected = packet_len(n);
    if bytes.len() != expected {
        return Err(PacketError::LengthMismatch {
            expected,
            actual: bytes.len(),
        });
    }
    let spikes = bytes[HEADER_BYTES..]
        .chunks_exact(SPIKE_BYTES)
        .map(|r| AxonalSpike {
            source: u32::from_le_bytes([r[0], r[1], r[2], r[3]]),
            step: u32::from_le_bytes([r[4], r[5], r[6], r[7]]),
        })
        .collect();
    Ok(Packet { step, hop, spikes })
}
