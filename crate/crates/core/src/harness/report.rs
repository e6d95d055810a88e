use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::instrumentation::{EnergyReport, PhaseBreakdown, SynapticEventCount, TrafficStats};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealtimeCheck {
    /// Wall-clock seconds per simulated second.
    pub ratio: f64,
    pub pass: bool,
}

impl RealtimeCheck {
    pub fn from_times(wall_seconds: f64, simulated_seconds: f64) -> Self {
        let ratio = wall_seconds / simulated_seconds;
        RealtimeCheck {
            ratio,
            pass: ratio <= 1.0,
        }
    }
}

/// Whether the run kept pace with simulated time.
pub fn realtime_check(report: &RunReport) -> RealtimeCheck {
    RealtimeCheck::from_times(report.wall_seconds, report.simulated_seconds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub n_neurons: u32,
    pub n_synapses: u64,
    pub columns_per_rank: f64,
    pub steps: u32,
    pub simulated_seconds: f64,
    /// Main loop only; network construction is in `setup_seconds`.
    pub wall_seconds: f64,
    pub setup_seconds: f64,
    pub spike_count: u64,
    pub mean_rate_hz: f64,
    /// Counted afterwards from the raster and connectivity.
    pub synaptic_events: SynapticEventCount,
    pub synaptic_events_total: u64,
    /// Events the ranks queued or applied while running.
    pub delivered_events: u64,
    pub phases: PhaseBreakdown,
    pub traffic: TrafficStats,
    pub energy: Option<EnergyReport>,
    pub realtime: RealtimeCheck,
    /// FNV-1a 64 of the canonical raster text, as 16 hex digits.
    pub raster_hash: String,
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

impl RunReport {
    /// Recomputes every derived field from the raw ones and lists the
    /// disagreements (relative tolerance 1e-9).
    pub fn consistency_errors(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let mut check = |name: &str, got: f64, want: f64| {
            if !close(got, want) {
                bad.push(format!("{name}: {got} != {want}"));
            }
        };
        check(
            "mean_rate_hz",
            self.mean_rate_hz,
            self.spike_count as f64 / (f64::from(self.n_neurons) * self.simulated_seconds),
        );
        check(
            "simulated_seconds",
            self.simulated_seconds,
            f64::from(self.steps) * self.config.neuron.dt / 1000.0,
        );
        check(
            "synaptic_events_total",
            self.synaptic_events_total as f64,
            self.synaptic_events.total() as f64,
        );
        check(
            "realtime.ratio",
            self.realtime.ratio,
            self.wall_seconds / self.simulated_seconds,
        );
        check("pooled fraction sum", self.phases.pooled.sum(), 1.0);
        for (i, f) in self.phases.per_rank.iter().enumerate() {
            check(&format!("rank {i} fraction sum"), f.sum(), 1.0);
            check(
                &format!("rank {i} computation"),
                f.computation,
                f.seconds.computation / f.seconds.total,
            );
        }
        let t = &self.traffic;
        let mean = if t.packets == 0 {
            0.0
        } else {
            t.payload_bytes as f64 / t.packets as f64
        };
        check("traffic.mean_packet_bytes", t.mean_packet_bytes, mean);
        let payload: u64 = t.per_endpoint.iter().map(|e| e.payload_bytes).sum();
        check(
            "traffic.payload_bytes",
            t.payload_bytes as f64,
            payload as f64,
        );
        if let Some(e) = &self.energy {
            check("energy.mean_watts", e.mean_watts, e.joules / e.wall_seconds);
            check(
                "energy.microjoules_per_event",
                e.microjoules_per_event,
                1e6 * e.joules / e.synaptic_events as f64,
            );
        }
        if self.realtime.pass != (self.realtime.ratio <= 1.0) {
            bad.push("realtime.pass disagrees with ratio".into());
        }
        bad
    }
}

/// One line of a scaling table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n_ranks: u32,
    pub columns_per_rank: f64,
    pub wall_seconds: f64,
    pub simulated_seconds: f64,
    pub speedup: f64,
    pub realtime_ratio: f64,
    pub spike_count: u64,
    pub mean_rate_hz: f64,
    pub synaptic_events: u64,
    pub raster_hash: String,
    pub packets_per_rank: f64,
    pub payload_bytes_per_rank: f64,
    pub mean_packet_bytes: f64,
    pub max_packet_bytes: u64,
    pub inter_node_streams_per_step: f64,
    pub computation: f64,
    pub memory_management: f64,
    pub communication: f64,
    pub synchronization: f64,
    pub residual: f64,
}

impl ScalingRow {
    pub fn from_run(r: &RunReport, base_wall_seconds: f64) -> Self {
        let p = &r.phases.pooled;
        ScalingRow {
            n_ranks: r.config.n_ranks,
            columns_per_rank: r.columns_per_rank,
            wall_seconds: r.wall_seconds,
            simulated_seconds: r.simulated_seconds,
            speedup: base_wall_seconds / r.wall_seconds,
            realtime_ratio: r.realtime.ratio,
            spike_count: r.spike_count,
            mean_rate_hz: r.mean_rate_hz,
            synaptic_events: r.synaptic_events_total,
            raster_hash: r.raster_hash.clone(),
            packets_per_rank: r.traffic.packets_per_rank,
            payload_bytes_per_rank: r.traffic.payload_bytes_per_rank,
            mean_packet_bytes: r.traffic.mean_packet_bytes,
            max_packet_bytes: r.traffic.max_packet_bytes,
            inter_node_streams_per_step: r.traffic.inter_node_streams_per_step,
            computation: p.computation,
            memory_management: p.memory_management,
            communication: p.communication,
            synchronization: p.synchronization,
            residual: p.residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub runs: Vec<RunReport>,
    /// False when a run failed and the sweep stopped early.
    pub complete: bool,
    pub error: Option<String>,
    pub hashes_agree: bool,
}

/// What `emit_report` and the `report` subcommand handle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)]
pub enum AnyReport {
    Run(RunReport),
    Scaling(ScalingReport),
}

impl AnyReport {
    pub fn rows(&self) -> Vec<ScalingRow> {
        match self {
            AnyReport::Run(r) => vec![ScalingRow::from_run(r, r.wall_seconds)],
            AnyReport::Scaling(s) => s.rows.clone(),
        }
    }

    pub fn runs(&self) -> Vec<&RunReport> {
        match self {
            AnyReport::Run(r) => vec![r],
            AnyReport::Scaling(s) => s.runs.iter().collect(),
        }
    }

    pub fn from_json_path(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

/// Writes the full report as JSON, or its scaling rows as CSV.
pub fn emit_report(report: &AnyReport, format: ReportFormat, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut w, report)?;
            writeln!(w).map_err(|e| Error::io(path, e))?;
        }
        ReportFormat::Csv => {
            let mut out = csv::Writer::from_writer(&mut w);
            for row in report.rows() {
                out.serialize(row)?;
            }
            out.flush().map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_csv<S: Serialize>(path: &Path, rows: &[S]) -> Result<()> {
    let mut out = csv::Writer::from_writer(create(path)?);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n_ranks: u32,
    pub wall_seconds: f64,
    pub speedup: f64,
    pub realtime_ratio: f64,
}

/// Pooled phase shares scaled to seconds of wall clock; the five columns
/// add up to `wall_seconds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseStackRow {
    pub n_ranks: u32,
    pub computation: f64,
    pub memory_management: f64,
    pub communication: f64,
    pub synchronization: f64,
    pub residual: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketStatsRow {
    pub n_ranks: u32,
    pub packets_per_rank: f64,
    pub payload_bytes_per_rank: f64,
    pub mean_packet_bytes: f64,
    pub max_packet_bytes: u64,
    pub inter_node_streams_per_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBar {
    pub n_ranks: u32,
    pub wall_seconds: f64,
    pub joules: f64,
    pub mean_watts: f64,
    pub synaptic_events: u64,
    pub microjoules_per_event: f64,
}

/// Writes `scaling_curve.csv`, `phase_stack.csv`, `packet_stats.csv` and,
/// when any run carries energy figures, `energy_bars.csv` into `dir`.
pub fn write_plot_data(report: &AnyReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows = report.rows();
    let scaling: Vec<ScalingPoint> = rows
        .iter()
        .map(|r| ScalingPoint {
            n_ranks: r.n_ranks,
            wall_seconds: r.wall_seconds,
            speedup: r.speedup,
            realtime_ratio: r.realtime_ratio,
        })
        .collect();
    write_csv(&dir.join("scaling_curve.csv"), &scaling)?;
    let stack: Vec<PhaseStackRow> = rows
        .iter()
        .map(|r| PhaseStackRow {
            n_ranks: r.n_ranks,
            computation: r.computation * r.wall_seconds,
            memory_management: r.memory_management * r.wall_seconds,
            communication: r.communication * r.wall_seconds,
            synchronization: r.synchronization * r.wall_seconds,
            residual: r.residual * r.wall_seconds,
            wall_seconds: r.wall_seconds,
        })
        .collect();
    write_csv(&dir.join("phase_stack.csv"), &stack)?;
    let packets: Vec<PacketStatsRow> = rows
        .iter()
        .map(|r| PacketStatsRow {
            n_ranks: r.n_ranks,
            packets_per_rank: r.packets_per_rank,
            payload_bytes_per_rank: r.payload_bytes_per_rank,
            mean_packet_bytes: r.mean_packet_bytes,
            max_packet_bytes: r.max_packet_bytes,
            inter_node_streams_per_step: r.inter_node_streams_per_step,
        })
        .collect();
    write_csv(&dir.join("packet_stats.csv"), &packets)?;
    let bars: Vec<EnergyBar> = report
        .runs()
        .into_iter()
        .filter_map(|r| {
            r.energy.map(|e| EnergyBar {
                n_ranks: r.config.n_ranks,
                wall_seconds: e.wall_seconds,
                joules: e.joules,
                mean_watts: e.mean_watts,
                synaptic_events: e.synaptic_events,
                microjoules_per_event: e.microjoules_per_event,
            })
        })
        .collect();
    if !bars.is_empty() {
        write_csv(&dir.join("energy_bars.csv"), &bars)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn realtime_boundary() {
        let c = RealtimeCheck::from_times(12.0, 10.0);
        assert!((c.ratio - 1.2).abs() < 1e-12 && !c.pass);
        assert!(RealtimeCheck::from_times(10.0, 10.0).pass);
        let c = RealtimeCheck::from_times(5.0, 10.0);
        assert_eq!(c.ratio, 0.5);
        assert!(c.pass);
    }

    #[test]
    fn format_names() {
        assert_eq!("json".parse::<ReportFormat>().unwrap(), ReportFormat::Json);
        assert_eq!("csv".parse::<ReportFormat>().unwrap(), ReportFormat::Csv);
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
