//! Two-level exchange: ranks talk directly inside a node, and everything
//! that leaves a node is gathered at that node's broker, relayed broker to
//! broker, and scattered to the destination ranks.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::packet::AxonalSpike;
use crate::{Error, Result};

/// Grouping of ranks into nodes. Brokers are addressed as extra endpoints
/// after the ranks: node `k`'s broker is endpoint `n_ranks + k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeMap {
    node_of_rank: Vec<u32>,
    n_nodes: u32,
}

impl NodeMap {
    /// Consecutive blocks of `ranks_per_node` ranks; the last node may be
    /// smaller.
    pub fn uniform(n_ranks: u32, ranks_per_node: u32) -> Result<Self> {
        if ranks_per_node == 0 {
            return Err(Error::NodeMap("ranks_per_node must be >= 1".into()));
        }
        Self::from_assignment((0..n_ranks).map(|r| r / ranks_per_node).collect())
    }

    /// Everything on one node.
    pub fn single(n_ranks: u32) -> Self {
        NodeMap {
            node_of_rank: vec![0; n_ranks as usize],
            n_nodes: u32::from(n_ranks > 0),
        }
    }

    /// Explicit rank-to-node table. Node ids must be `0..n_nodes` with no
    /// empty node.
    pub fn from_assignment(node_of_rank: Vec<u32>) -> Result<Self> {
        if node_of_rank.is_empty() {
            return Err(Error::NodeMap("no ranks".into()));
        }
        let n_nodes = node_of_rank.iter().max().map_or(0, |m| m + 1);
        let used: BTreeSet<u32> = node_of_rank.iter().copied().collect();
        if used.len() as u32 != n_nodes {
            return Err(Error::NodeMap(format!(
                "node ids must cover 0..{n_nodes} without gaps"
            )));
        }
        Ok(NodeMap {
            node_of_rank,
            n_nodes,
        })
    }

    pub fn n_ranks(&self) -> u32 {
        self.node_of_rank.len() as u32
    }

    pub fn n_nodes(&self) -> u32 {
        self.n_nodes
    }

    #[inline]
    pub fn node_of(&self, rank: u32) -> u32 {
        self.node_of_rank[rank as usize]
    }

    pub fn ranks_of(&self, node: u32) -> Vec<u32> {
        (0..self.n_ranks())
            .filter(|&r| self.node_of(r) == node)
            .collect()
    }

    pub fn broker_endpoint(&self, node: u32) -> u32 {
        self.n_ranks() + node
    }

    /// Node hosting an endpoint, ranks and brokers alike.
    pub fn node_of_endpoint(&self, endpoint: u32) -> u32 {
        if endpoint < self.n_ranks() {
            self.node_of(endpoint)
        } else {
            endpoint - self.n_ranks()
        }
    }

    pub fn check_ranks(&self, n_ranks: u32) -> Result<()> {
        if self.n_ranks() != n_ranks {
            return Err(Error::NodeMap(format!(
                "node map covers {} ranks, run has {n_ranks}",
                self.n_ranks()
            )));
        }
        Ok(())
    }
}

/// Spikes one rank addresses to another within a step, keyed `(src, dst)`.
pub type RankTraffic = BTreeMap<(u32, u32), Vec<AxonalSpike>>;

/// Streams of one step of brokered exchange.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BrokerRoute {
    /// Intra-node rank-to-rank streams.
    pub direct: BTreeMap<(u32, u32), Vec<AxonalSpike>>,
    /// Rank to its own broker: spikes needed on at least one other node.
    pub gather: BTreeMap<u32, Vec<AxonalSpike>>,
    /// Broker to broker, keyed by `(src node, dst node)`.
    pub relay: BTreeMap<(u32, u32), Vec<AxonalSpike>>,
    /// Broker to a local rank, keyed by `(node, dst rank)`.
    pub scatter: BTreeMap<(u32, u32), Vec<AxonalSpike>>,
}

impl BrokerRoute {
    /// Streams whose endpoints sit on different nodes.
    pub fn inter_node_streams(&self) -> usize {
        self.relay.len()
    }

    /// What each destination rank ends up receiving from remote ranks,
    /// keyed by destination; sorted and deduplicated.
    pub fn delivered(&self) -> BTreeMap<u32, Vec<AxonalSpike>> {
        let mut out: BTreeMap<u32, BTreeSet<AxonalSpike>> = BTreeMap::new();
        for (&(_, dst), s) in self.direct.iter() {
            out.entry(dst).or_default().extend(s.iter().copied());
        }
        for (&(_, dst), s) in self.scatter.iter() {
            out.entry(dst).or_default().extend(s.iter().copied());
        }
        out.into_iter()
            .map(|(k, v)| (k, v.into_iter().collect()))
            .collect()
    }
}

/// Plans one step of brokered exchange for the given rank-to-rank traffic.
///
/// A spike crosses between two nodes at most once, however many ranks of
/// the destination node need it. Empty streams are omitted.
pub fn broker_route(nodes: &NodeMap, traffic: &RankTraffic) -> Result<BrokerRoute> {
    let mut route = BrokerRoute::default();
    let mut gather: BTreeMap<u32, BTreeSet<AxonalSpike>> = BTreeMap::new();
    let mut relay: BTreeMap<(u32, u32), BTreeSet<AxonalSpike>> = BTreeMap::new();
    let mut scatter: BTreeMap<(u32, u32), BTreeSet<AxonalSpike>> = BTreeMap::new();

    for (&(src, dst), spikes) in traffic {
        if src >= nodes.n_ranks() || dst >= nodes.n_ranks() {
            return Err(Error::NodeMap(format!(
                "traffic {src}->{dst} outside the {} mapped ranks",
                nodes.n_ranks()
            )));
        }
        if spikes.is_empty() || src == dst {
            continue;
        }
        let (sn, dn) = (nodes.node_of(src), nodes.node_of(dst));
        if sn == dn {
            route.direct.insert((src, dst), spikes.clone());
        } else {
            gather
                .entry(src)
                .or_default()
                .extend(spikes.iter().copied());
            relay
                .entry((sn, dn))
                .or_default()
                .extend(spikes.iter().copied());
            scatter
                .entry((dn, dst))
                .or_default()
                .extend(spikes.iter().copied());
        }
    }

    let to_vec = |s: BTreeSet<AxonalSpike>| s.into_iter().collect::<Vec<_>>();
    route.gather = gather.into_iter().map(|(k, v)| (k, to_vec(v))).collect();
    route.relay = relay.into_iter().map(|(k, v)| (k, to_vec(v))).collect();
    route.scatter = scatter.into_iter().map(|(k, v)| (k, to_vec(v))).collect();
    Ok(route)
}

/// Inter-node streams the same traffic needs without brokers: one per
/// communicating rank pair on different nodes.
pub fn flat_inter_node_streams(nodes: &NodeMap, traffic: &RankTraffic) -> usize {
    traffic
        .iter()
        .filter(|(&(s, d), v)| !v.is_empty() && s != d && nodes.node_of(s) != nodes.node_of(d))
        .count()
}
