//! The per-rank time-step loop and the per-node broker loop.
//!
//! Every step a rank drains the delay bucket due now into per-neuron input
//! sums, advances its neurons, ships the new axonal spikes to the ranks that
//! own targets of them, waits at the barrier, and expands its own and the
//! received spikes into synaptic events queued at their delays.
//!
//! Events reach a target in (emission step, source id, synapse order) no
//! matter how neurons are split across ranks, and the input sums are formed
//! in that order, so the spike raster does not depend on the partition.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::broker::NodeMap;
use super::delay::DelayQueues;
use super::packet::{pack_packets, unpack_packet, AxonalSpike, Hop};
use super::transport::{Envelope, Transport};
use crate::dynamics::{
    initial_state, step_lifca, ExternalDrive, ExternalStimulus, LifcaParams, LifcaState,
};
use crate::instrumentation::{PacketRecord, Phase, PhaseClock, PhaseTimers, TrafficCounter};
use crate::model::{build_routing_tables, partition_columns, PartitionMap, RoutingTable, Topology};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExchangeMode {
    /// Every rank sends straight to every rank it feeds.
    #[default]
    Flat,
    /// Inter-node spikes go through one broker per node.
    Broker,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SendMode {
    /// A packet, possibly empty, to every subscribed destination each step.
    #[default]
    #[serde(rename = "collective")]
    Collective,
    /// Only non-empty packets are sent.
    #[serde(rename = "p2p")]
    PointToPoint,
}

impl fmt::Display for ExchangeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExchangeMode::Flat => "flat",
            ExchangeMode::Broker => "broker",
        })
    }
}

impl FromStr for ExchangeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "flat" => Ok(ExchangeMode::Flat),
            "broker" => Ok(ExchangeMode::Broker),
            other => Err(Error::Config(format!("unknown exchange mode {other:?}"))),
        }
    }
}

impl fmt::Display for SendMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SendMode::Collective => "collective",
            SendMode::PointToPoint => "p2p",
        })
    }
}

impl FromStr for SendMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "collective" => Ok(SendMode::Collective),
            "p2p" => Ok(SendMode::PointToPoint),
            other => Err(Error::Config(format!("unknown send mode {other:?}"))),
        }
    }
}

/// Everything the step loop reads but never writes.
#[derive(Debug, Clone)]
pub struct Network {
    pub topology: Topology,
    pub partition: PartitionMap,
    pub routing: RoutingTable,
    pub nodes: NodeMap,
}

impl Network {
    pub fn build(topology: Topology, n_ranks: u32, nodes: NodeMap) -> Result<Self> {
        nodes.check_ranks(n_ranks)?;
        let partition = partition_columns(&topology.layout, n_ranks)?;
        let routing = build_routing_tables(&topology, &partition)?;
        Ok(Network {
            topology,
            partition,
            routing,
            nodes,
        })
    }

    pub fn n_ranks(&self) -> u32 {
        self.partition.n_ranks()
    }

    /// Ranks plus, in broker mode, one broker per node.
    pub fn n_endpoints(&self, mode: ExchangeMode) -> u32 {
        match mode {
            ExchangeMode::Flat => self.n_ranks(),
            ExchangeMode::Broker => self.n_ranks() + self.nodes.n_nodes(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub params: LifcaParams,
    pub stimulus: ExternalStimulus,
    pub steps: u32,
    /// Keys the initial potentials and the external drive.
    pub seed: u64,
    pub exchange: ExchangeMode,
    pub send: SendMode,
    pub record_packets: bool,
}

/// A synaptic event waiting in a rank's delay queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynEvent {
    /// Index of the target among the rank's own neurons.
    pub target: u32,
    pub weight: f32,
}

/// What one rank hands back after the loop.
#[derive(Debug, Clone)]
pub struct RankOutcome {
    pub rank: u32,
    /// `(step, neuron)` of every spike of the rank's neurons.
    pub spikes: Vec<(u32, u32)>,
    pub timers: PhaseTimers,
    pub traffic: TrafficCounter,
    pub packets: Vec<PacketRecord>,
    /// Synaptic events queued from axonal spikes.
    pub internal_events: u64,
    /// External drive events applied.
    pub external_events: u64,
    pub started: Instant,
    pub finished: Instant,
}

#[derive(Debug, Clone)]
pub struct BrokerOutcome {
    pub node: u32,
    pub endpoint: u32,
    pub traffic: TrafficCounter,
    pub packets: Vec<PacketRecord>,
}

#[derive(Debug, Clone)]
pub struct EngineOutput {
    pub ranks: Vec<RankOutcome>,
    pub brokers: Vec<BrokerOutcome>,
    /// From the first rank entering the loop to the last one leaving it.
    pub wall_seconds: f64,
}

fn collect_spikes(
    envs: &[Envelope],
    step: u32,
    total: u32,
    out: &mut Vec<AxonalSpike>,
) -> Result<()> {
    for env in envs {
        let p = unpack_packet(&env.bytes)?;
        for s in p.spikes {
            if s.step != step || s.source >= total {
                return Err(Error::Transport(format!(
                    "endpoint {} sent spike of neuron {} at step {} during step {step}",
                    env.src, s.source, s.step
                )));
            }
            out.push(s);
        }
    }
    Ok(())
}

/// Packs `spikes` for `dst`, sends it, and books the packets. Shared by
/// ranks and brokers.
struct Sender {
    me: u32,
    send: SendMode,
    record: bool,
    traffic: TrafficCounter,
    log: Vec<PacketRecord>,
}

impl Sender {
    fn emit<T: Transport + ?Sized>(
        &mut self,
        transport: &mut T,
        dst: u32,
        step: u32,
        hop: Hop,
        spikes: &[AxonalSpike],
        off_node: bool,
    ) -> Result<()> {
        if spikes.is_empty() && self.send == SendMode::PointToPoint {
            return Ok(());
        }
        for p in pack_packets(step, hop, spikes) {
            self.traffic.record(dst, p.len(), off_node);
            if self.record {
                self.log.push(PacketRecord {
                    step,
                    src: self.me,
                    dst,
                    bytes: p.len() as u32,
                });
            }
            transport.send(dst, p)?;
        }
        Ok(())
    }
}

/// State of one rank: its neurons, delay queues and slice of the synapses.
pub struct RankWorker<'a> {
    net: &'a Network,
    cfg: &'a EngineConfig,
    rank: u32,
    first: u32,
    /// Per global source, the `[start, end)` part of its row whose targets
    /// this rank owns.
    local_rows: Vec<(u32, u32)>,
    states: Vec<LifcaState>,
    input: Vec<f64>,
    queues: DelayQueues<SynEvent>,
    due: Vec<SynEvent>,
    drive: ExternalDrive,
    /// Same-node destinations in broker mode, all destinations when flat.
    direct: Vec<u32>,
    /// Whether some destination lives on another node (broker mode only).
    gathers: bool,
    outgoing: Vec<Vec<AxonalSpike>>,
    sender: Sender,
    raster: Vec<(u32, u32)>,
    internal_events: u64,
    external_events: u64,
}

impl<'a> RankWorker<'a> {
    pub fn new(net: &'a Network, cfg: &'a EngineConfig, rank: u32) -> Result<Self> {
        if rank >= net.n_ranks() {
            return Err(Error::Partition(format!("no rank {rank}")));
        }
        let owned = net.partition.range(rank);
        let syn = &net.topology.synapses;
        let local_rows = (0..net.topology.total_neurons())
            .map(|s| {
                let (targets, _) = syn.row(s);
                let a = targets.partition_point(|&t| t < owned.start);
                let b = targets.partition_point(|&t| t < owned.end);
                (a as u32, b as u32)
            })
            .collect();
        let states: Vec<LifcaState> = owned
            .clone()
            .map(|n| initial_state(&cfg.params, cfg.seed, n))
            .collect();
        let node = net.nodes.node_of(rank);
        let dests = net.routing.destinations(rank);
        let (direct, gathers) = match cfg.exchange {
            ExchangeMode::Flat => (dests.to_vec(), false),
            ExchangeMode::Broker => (
                dests
                    .iter()
                    .copied()
                    .filter(|&d| net.nodes.node_of(d) == node)
                    .collect(),
                dests.iter().any(|&d| net.nodes.node_of(d) != node),
            ),
        };
        Ok(RankWorker {
            net,
            cfg,
            rank,
            first: owned.start,
            local_rows,
            input: vec![0.0; states.len()],
            states,
            queues: DelayQueues::new(),
            due: Vec::new(),
            drive: ExternalDrive::new(&cfg.stimulus, cfg.params.dt, cfg.seed)?,
            direct,
            gathers,
            outgoing: vec![Vec::new(); net.n_ranks() as usize],
            sender: Sender {
                me: rank,
                send: cfg.send,
                record: cfg.record_packets,
                traffic: TrafficCounter::default(),
                log: Vec::new(),
            },
            raster: Vec::new(),
            internal_events: 0,
            external_events: 0,
        })
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    /// Sums the synaptic events due at `step` into per-neuron inputs.
    pub fn drain_inputs(&mut self, step: u32) {
        self.input.iter_mut().for_each(|x| *x = 0.0);
        self.queues.drain_into(step, &mut self.due);
        for ev in &self.due {
            self.input[ev.target as usize] += f64::from(ev.weight);
        }
    }

    /// Advances every owned neuron by one step; returns the new spikes in
    /// ascending source order.
    pub fn advance(&mut self, step: u32) -> Result<Vec<AxonalSpike>> {
        let w_ext = f64::from(self.cfg.stimulus.weight);
        let mut fired = Vec::new();
        for (i, st) in self.states.iter_mut().enumerate() {
            let id = self.first + i as u32;
            let ext = self.drive.events(id, step);
            self.external_events += u64::from(ext);
            let current = self.input[i] + f64::from(ext) * w_ext;
            if step_lifca(st, &self.cfg.params, current, step)? {
                fired.push(AxonalSpike::new(id, step));
                self.raster.push((step, id));
            }
        }
        Ok(fired)
    }

    fn send_spikes<T: Transport + ?Sized>(
        &mut self,
        transport: &mut T,
        step: u32,
        spikes: &[AxonalSpike],
    ) -> Result<()> {
        let routing = &self.net.routing;
        let nodes = &self.net.nodes;
        let node = nodes.node_of(self.rank);
        let mut gather = Vec::new();
        for s in spikes {
            let dests = routing.neuron_destinations(s.source);
            for &d in dests {
                self.outgoing[d as usize].push(*s);
            }
            if self.gathers && dests.iter().any(|&d| nodes.node_of(d) != node) {
                gather.push(*s);
            }
        }
        for &d in &self.direct {
            let list = std::mem::take(&mut self.outgoing[d as usize]);
            let off = nodes.node_of(d) != node;
            self.sender
                .emit(transport, d, step, Hop::Direct, &list, off)?;
        }
        for list in self.outgoing.iter_mut() {
            list.clear();
        }
        if self.gathers {
            let broker = nodes.broker_endpoint(node);
            self.sender
                .emit(transport, broker, step, Hop::Gather, &gather, false)?;
        }
        Ok(())
    }

    fn receive_spikes<T: Transport + ?Sized>(
        &mut self,
        transport: &mut T,
        step: u32,
    ) -> Result<Vec<AxonalSpike>> {
        let total = self.net.topology.total_neurons();
        let mut out = Vec::new();
        collect_spikes(
            &transport.receive_all_for_step(step, Hop::Direct)?,
            step,
            total,
            &mut out,
        )?;
        if self.cfg.exchange == ExchangeMode::Broker {
            let envs = transport.receive_all_for_step(step, Hop::Scatter)?;
            collect_spikes(&envs, step, total, &mut out)?;
        }
        Ok(out)
    }

    /// Expands spikes emitted at `step` into queued synaptic events for the
    /// owned targets; returns how many were queued.
    pub fn deliver(
        &mut self,
        step: u32,
        local: &[AxonalSpike],
        mut remote: Vec<AxonalSpike>,
    ) -> Result<u64> {
        remote.extend_from_slice(local);
        remote.sort_unstable_by_key(|s| s.source);
        let syn = &self.net.topology.synapses;
        let mut n = 0u64;
        for s in &remote {
            let (a, b) = self.local_rows[s.source as usize];
            if a == b {
                continue;
            }
            let (targets, delays) = syn.row(s.source);
            let weight = self.net.topology.weight_of(s.source);
            for k in a as usize..b as usize {
                let ev = SynEvent {
                    target: targets[k] - self.first,
                    weight,
                };
                self.queues.enqueue(ev, step, u32::from(delays[k]))?;
            }
            n += u64::from(b - a);
        }
        self.internal_events += n;
        Ok(n)
    }

    /// Ships this step's spikes, waits for every rank, and queues the
    /// synaptic events of all spikes that reach this rank. Returns the
    /// number of events queued.
    pub fn exchange_step<T: Transport + ?Sized>(
        &mut self,
        transport: &mut T,
        step: u32,
        local: &[AxonalSpike],
        clock: &mut PhaseClock,
    ) -> Result<u64> {
        self.send_spikes(transport, step, local)?;
        clock.lap(Phase::Communication);
        let barriers = match self.cfg.exchange {
            ExchangeMode::Flat => 1,
            ExchangeMode::Broker => 3,
        };
        for _ in 0..barriers {
            transport.barrier()?;
        }
        clock.lap(Phase::Synchronization);
        let remote = self.receive_spikes(transport, step)?;
        clock.lap(Phase::Communication);
        let n = self.deliver(step, local, remote)?;
        clock.lap(Phase::MemoryManagement);
        self.sender.traffic.end_step();
        Ok(n)
    }

    fn run<T: Transport + ?Sized>(mut self, transport: &mut T) -> Result<RankOutcome> {
        transport.barrier()?;
        let mut clock = PhaseClock::start();
        for step in 0..self.cfg.steps {
            self.drain_inputs(step);
            clock.lap(Phase::MemoryManagement);
            let fired = self.advance(step)?;
            clock.lap(Phase::Computation);
            self.exchange_step(transport, step, &fired, &mut clock)?;
            clock.end_step();
        }
        let started = clock.started_at();
        let timers = clock.finish();
        let finished = Instant::now();
        Ok(RankOutcome {
            rank: self.rank,
            spikes: self.raster,
            timers,
            traffic: self.sender.traffic,
            packets: self.sender.log,
            internal_events: self.internal_events,
            external_events: self.external_events,
            started,
            finished,
        })
    }
}

/// Relay for one node in broker mode.
struct BrokerWorker<'a> {
    net: &'a Network,
    cfg: &'a EngineConfig,
    node: u32,
    /// Nodes fed by some rank of this node.
    relay: Vec<u32>,
    /// Ranks of this node fed by some rank elsewhere.
    scatter: Vec<u32>,
    sender: Sender,
}

impl<'a> BrokerWorker<'a> {
    fn new(net: &'a Network, cfg: &'a EngineConfig, node: u32) -> Self {
        let nodes = &net.nodes;
        let mut relay = BTreeSet::new();
        let mut scatter = BTreeSet::new();
        for src in 0..net.n_ranks() {
            let sn = nodes.node_of(src);
            for &d in net.routing.destinations(src) {
                let dn = nodes.node_of(d);
                if sn == node && dn != node {
                    relay.insert(dn);
                }
                if sn != node && dn == node {
                    scatter.insert(d);
                }
            }
        }
        BrokerWorker {
            net,
            cfg,
            node,
            relay: relay.into_iter().collect(),
            scatter: scatter.into_iter().collect(),
            sender: Sender {
                me: nodes.broker_endpoint(node),
                send: cfg.send,
                record: cfg.record_packets,
                traffic: TrafficCounter::default(),
                log: Vec::new(),
            },
        }
    }

    fn step<T: Transport + ?Sized>(&mut self, transport: &mut T, step: u32) -> Result<()> {
        let total = self.net.topology.total_neurons();
        let nodes = &self.net.nodes;
        let routing = &self.net.routing;

        transport.barrier()?;
        let mut gathered = Vec::new();
        collect_spikes(
            &transport.receive_all_for_step(step, Hop::Gather)?,
            step,
            total,
            &mut gathered,
        )?;
        gathered.sort_unstable_by_key(|s| s.source);
        for &dn in &self.relay {
            let part: Vec<AxonalSpike> = gathered
                .iter()
                .copied()
                .filter(|s| {
                    routing
                        .neuron_destinations(s.source)
                        .iter()
                        .any(|&d| nodes.node_of(d) == dn)
                })
                .collect();
            let dst = nodes.broker_endpoint(dn);
            self.sender
                .emit(transport, dst, step, Hop::Relay, &part, true)?;
        }

        transport.barrier()?;
        let mut relayed = Vec::new();
        collect_spikes(
            &transport.receive_all_for_step(step, Hop::Relay)?,
            step,
            total,
            &mut relayed,
        )?;
        relayed.sort_unstable_by_key(|s| s.source);
        for &r in &self.scatter {
            let part: Vec<AxonalSpike> = relayed
                .iter()
                .copied()
                .filter(|s| routing.neuron_destinations(s.source).contains(&r))
                .collect();
            self.sender
                .emit(transport, r, step, Hop::Scatter, &part, false)?;
        }

        transport.barrier()?;
        self.sender.traffic.end_step();
        Ok(())
    }

    fn run<T: Transport + ?Sized>(mut self, transport: &mut T) -> Result<BrokerOutcome> {
        transport.barrier()?;
        for step in 0..self.cfg.steps {
            self.step(transport, step)?;
        }
        Ok(BrokerOutcome {
            node: self.node,
            endpoint: self.sender.me,
            traffic: self.sender.traffic,
            packets: self.sender.log,
        })
    }
}

enum Outcome {
    Rank(RankOutcome),
    Broker(BrokerOutcome),
}

/// Runs the whole simulation, one thread per endpoint. `endpoints[e]` must
/// be endpoint `e`: ranks first, then one broker per node in broker mode.
pub fn run_engine<T: Transport>(
    net: &Network,
    cfg: &EngineConfig,
    endpoints: Vec<T>,
) -> Result<EngineOutput> {
    cfg.params.validate()?;
    cfg.stimulus.validate()?;
    let want = net.n_endpoints(cfg.exchange);
    if endpoints.len() as u32 != want {
        return Err(Error::Transport(format!(
            "{} endpoints supplied, {} needed",
            endpoints.len(),
            want
        )));
    }
    for (i, ep) in endpoints.iter().enumerate() {
        if ep.endpoint() != i as u32 || ep.n_endpoints() != want {
            return Err(Error::Transport(format!("endpoint {i} is misnumbered")));
        }
    }
    let n_ranks = net.n_ranks();

    let results: Vec<Result<Outcome>> = std::thread::scope(|s| {
        let handles: Vec<_> = endpoints
            .into_iter()
            .map(|mut ep| {
                s.spawn(move || {
                    let id = ep.endpoint();
                    let out = if id < n_ranks {
                        RankWorker::new(net, cfg, id)
                            .and_then(|w| w.run(&mut ep))
                            .map(Outcome::Rank)
                    } else {
                        BrokerWorker::new(net, cfg, id - n_ranks)
                            .run(&mut ep)
                            .map(Outcome::Broker)
                    };
                    match &out {
                        Ok(_) => ep.close(),
                        Err(_) => ep.abort(),
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Transport("worker thread panicked".into())))
            })
            .collect()
    });

    let mut ranks = Vec::new();
    let mut brokers = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(Outcome::Rank(o)) => ranks.push(o),
            Ok(Outcome::Broker(o)) => brokers.push(o),
            Err(e) => errors.push(e),
        }
    }
    if !errors.is_empty() {
        // Peers of a failed worker report aborted barriers; surface the cause.
        let i = errors
            .iter()
            .position(|e| !matches!(e, Error::Transport(_)))
            .unwrap_or(0);
        return Err(errors.swap_remove(i));
    }
    let start = ranks.iter().map(|r| r.started).min();
    let end = ranks.iter().map(|r| r.finished).max();
    let wall_seconds = match (start, end) {
        (Some(a), Some(b)) => (b - a).as_secs_f64(),
        _ => 0.0,
    };
    Ok(EngineOutput {
        ranks,
        brokers,
        wall_seconds,
    })
}
