use std::fs::File;
use std::io::BufWriter;
use std::time::Instant;

use super::config::{RunConfig, TransportKind};
use super::report::{realtime_check, RealtimeCheck, RunReport};
use crate::dynamics::ExternalDrive;
use crate::exchange::{loopback, run_engine, tcp_local_mesh, EngineConfig, EngineOutput, Network};
use crate::instrumentation::{
    count_synaptic_events, energy_report, phase_report, write_packet_log, PacketRecord,
    PowerSampleSeries, Raster, TrafficCounter, TrafficStats,
};
use crate::model::build_topology;
use crate::{Error, Result};

/// A finished run with the data behind its report.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: RunReport,
    pub raster: Raster,
    /// Every packet sent, sorted by `(step, src, dst)`; empty unless packet
    /// recording was on.
    pub packets: Vec<PacketRecord>,
}

/// Builds the network, runs it, and reports on it.
pub fn run_simulation(config: &RunConfig) -> Result<RunReport> {
    Ok(run_detailed(config)?.report)
}

pub fn run_detailed(config: &RunConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let setup = Instant::now();
    let topology = build_topology(&config.grid_with_seed())?;
    if let Some(path) = &config.output.topology_dump {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        topology
            .write_dump(BufWriter::new(f))
            .map_err(|e| Error::io(path, e))?;
    }
    let net = Network::build(topology, config.n_ranks, config.node_map()?)?;
    let steps = config.steps();
    let engine = EngineConfig {
        params: config.neuron,
        stimulus: config.stimulus,
        steps,
        seed: config.seed,
        exchange: config.exchange,
        send: config.send,
        record_packets: config.record_packets || config.output.packet_log.is_some(),
    };
    let n_endpoints = net.n_endpoints(config.exchange);
    let setup_seconds = setup.elapsed().as_secs_f64();

    let out = match config.transport {
        TransportKind::Loopback => run_engine(&net, &engine, loopback(n_endpoints))?,
        TransportKind::Tcp => run_engine(&net, &engine, tcp_local_mesh(n_endpoints)?)?,
    };
    finish(config, &net, &engine, out, setup_seconds)
}

fn finish(
    config: &RunConfig,
    net: &Network,
    engine: &EngineConfig,
    out: EngineOutput,
    setup_seconds: f64,
) -> Result<RunArtifacts> {
    let raster = Raster::from_unsorted(
        out.ranks
            .iter()
            .flat_map(|r| r.spikes.iter().copied())
            .collect(),
    );
    let timers: Vec<_> = out.ranks.iter().map(|r| r.timers).collect();
    let phases = phase_report(&timers)?;

    let mut counters: Vec<TrafficCounter> = out.ranks.iter().map(|r| r.traffic.clone()).collect();
    counters.extend(out.brokers.iter().map(|b| b.traffic.clone()));
    let traffic = TrafficStats::from_counters(&counters, net.n_ranks(), u64::from(engine.steps));

    let mut packets: Vec<PacketRecord> = out
        .ranks
        .iter()
        .flat_map(|r| r.packets.iter().copied())
        .chain(out.brokers.iter().flat_map(|b| b.packets.iter().copied()))
        .collect();
    packets.sort_by_key(|p| (p.step, p.src, p.dst));

    let drive = ExternalDrive::new(&config.stimulus, config.neuron.dt, config.seed)?;
    let events = count_synaptic_events(&raster, &net.topology, &drive, engine.steps);
    let delivered_events = out
        .ranks
        .iter()
        .map(|r| r.internal_events + r.external_events)
        .sum();

    if let Some(path) = &config.output.raster {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        raster
            .write_text(BufWriter::new(f))
            .map_err(|e| Error::io(path, e))?;
    }
    if let Some(path) = &config.output.packet_log {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        write_packet_log(&packets, BufWriter::new(f))?;
    }

    let n_neurons = net.topology.total_neurons();
    let simulated_seconds = config.simulated_seconds();
    let spike_count = raster.len() as u64;
    let report = RunReport {
        config: config.clone(),
        n_neurons,
        n_synapses: net.topology.stats.total_synapses,
        columns_per_rank: net.partition.columns_per_rank_f64(),
        steps: engine.steps,
        simulated_seconds,
        wall_seconds: out.wall_seconds,
        setup_seconds,
        spike_count,
        mean_rate_hz: spike_count as f64 / (f64::from(n_neurons) * simulated_seconds),
        synaptic_events: events,
        synaptic_events_total: events.total(),
        delivered_events,
        phases,
        traffic,
        energy: None,
        realtime: RealtimeCheck::from_times(out.wall_seconds, simulated_seconds),
        raster_hash: format!("{:016x}", raster.hash()),
    };
    debug_assert_eq!(realtime_check(&report), report.realtime);
    Ok(RunArtifacts {
        report,
        raster,
        packets,
    })
}

/// Adds energy-to-solution figures from a power log covering `[t0, t1]`
/// (the whole log when not given), net of `baseline_watts`.
pub fn attach_energy(
    report: &mut RunReport,
    series: &PowerSampleSeries,
    window: Option<(f64, f64)>,
    baseline_watts: f64,
) -> Result<()> {
    let (t0, t1) = match window {
        Some(w) => w,
        None => series
            .span()
            .ok_or_else(|| Error::Energy("power log has no samples".into()))?,
    };
    report.energy = Some(energy_report(
        series,
        t0,
        t1,
        report.synaptic_events_total,
        baseline_watts,
    )?);
    Ok(())
}
