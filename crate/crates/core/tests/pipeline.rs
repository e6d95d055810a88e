use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;

use minidpsnn::exchange::{ExchangeMode, SendMode};
use minidpsnn::harness::{
    attach_energy, emit_report, run_detailed, strong_scaling_sweep, write_plot_data, AnyReport,
    ReportFormat, RunConfig, TransportKind,
};
use minidpsnn::instrumentation::{read_packet_log, traffic_summary, PowerSampleSeries, Raster};
use minidpsnn::model::GridConfig;

fn small(n_ranks: u32) -> RunConfig {
    let mut c = RunConfig {
        grid: GridConfig {
            grid_x: 3,
            grid_y: 3,
            neurons_per_column: 200,
            out_degree_exc: 100,
            out_degree_inh: 60,
            ..GridConfig::default()
        },
        n_ranks,
        sim_seconds: 0.3,
        seed: 11,
        ..RunConfig::default()
    };
    c.stimulus.weight = 0.6;
    c
}

#[test]
fn raster_identical_for_any_split() {
    let mut hashes = BTreeSet::new();
    let mut spikes = 0;
    // 9 columns: whole columns, uneven blocks, and split columns.
    for n_ranks in [1, 2, 4, 9, 12] {
        for exchange in [ExchangeMode::Flat, ExchangeMode::Broker] {
            for send in [SendMode::Collective, SendMode::PointToPoint] {
                let c = RunConfig {
                    exchange,
                    send,
                    ranks_per_node: 3,
                    ..small(n_ranks)
                };
                let r = run_detailed(&c).unwrap().report;
                spikes = r.spike_count;
                hashes.insert(r.raster_hash);
            }
        }
    }
    assert!(spikes > 100, "network too quiet to test anything: {spikes}");
    assert_eq!(hashes.len(), 1, "{hashes:?}");
}

#[test]
fn different_seeds_differ() {
    let a = run_detailed(&small(2)).unwrap().report;
    let b = run_detailed(&RunConfig {
        seed: 12,
        ..small(2)
    })
    .unwrap()
    .report;
    assert_ne!(a.raster_hash, b.raster_hash);
}

#[test]
fn tcp_matches_loopback() {
    for exchange in [ExchangeMode::Flat, ExchangeMode::Broker] {
        let base = RunConfig {
            exchange,
            ranks_per_node: 2,
            record_packets: true,
            ..small(4)
        };
        let lo = run_detailed(&base).unwrap();
        let tcp = run_detailed(&RunConfig {
            transport: TransportKind::Tcp,
            ..base
        })
        .unwrap();
        assert_eq!(lo.raster, tcp.raster);
        assert_eq!(lo.packets, tcp.packets);
        assert_eq!(lo.report.traffic, tcp.report.traffic);
    }
}

#[test]
fn event_tallies_agree() {
    for n_ranks in [1, 3, 12] {
        let r = run_detailed(&small(n_ranks)).unwrap().report;
        let counted = r.synaptic_events.internal + r.synaptic_events.external;
        assert!(r.synaptic_events.internal > 0);
        assert_eq!(r.delivered_events, counted, "{n_ranks} ranks");
        assert_eq!(r.synaptic_events_total, counted);
    }
}

#[test]
fn packet_log_rescan_matches_streaming_counts() {
    let dir = tempfile::tempdir().unwrap();
    for (exchange, send) in [
        (ExchangeMode::Flat, SendMode::Collective),
        (ExchangeMode::Flat, SendMode::PointToPoint),
        (ExchangeMode::Broker, SendMode::Collective),
        (ExchangeMode::Broker, SendMode::PointToPoint),
    ] {
        let log = dir.path().join(format!("{exchange}-{send}.csv"));
        let mut c = RunConfig {
            exchange,
            send,
            ranks_per_node: 2,
            ..small(6)
        };
        c.output.packet_log = Some(log.clone());
        let art = run_detailed(&c).unwrap();
        let from_file = read_packet_log(BufReader::new(File::open(&log).unwrap())).unwrap();
        assert_eq!(from_file, art.packets);

        let nodes = c.node_map().unwrap();
        let n_endpoints = match exchange {
            ExchangeMode::Flat => 6,
            ExchangeMode::Broker => 6 + nodes.n_nodes(),
        };
        let rescan = traffic_summary(&from_file, &nodes, n_endpoints, u64::from(art.report.steps));
        assert_eq!(rescan, art.report.traffic, "{exchange} {send}");
        assert!(art.packets.iter().all(|p| p.bytes >= 8 && p.bytes <= 512));
    }
}

#[test]
fn point_to_point_never_sends_empty_packets() {
    let c = RunConfig {
        send: SendMode::PointToPoint,
        record_packets: true,
        ..small(9)
    };
    let art = run_detailed(&c).unwrap();
    assert!(!art.packets.is_empty());
    assert!(art.packets.iter().all(|p| p.bytes > 8));
}

#[test]
fn raster_file_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("raster.txt");
    let mut c = small(3);
    c.output.raster = Some(path.clone());
    let art = run_detailed(&c).unwrap();
    let back = Raster::read_text(BufReader::new(File::open(&path).unwrap())).unwrap();
    assert_eq!(back, art.raster);
    assert_eq!(format!("{:016x}", back.hash()), art.report.raster_hash);
}

#[test]
fn report_is_self_consistent_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = run_detailed(&small(4)).unwrap().report;
    let seconds = r.wall_seconds;
    attach_energy(
        &mut r,
        &PowerSampleSeries::constant(20.0, seconds).unwrap(),
        None,
        0.0,
    )
    .unwrap();
    assert!(
        r.consistency_errors().is_empty(),
        "{:?}",
        r.consistency_errors()
    );
    let e = r.energy.unwrap();
    assert!((e.joules - 20.0 * seconds).abs() <= 1e-9 * e.joules);
    let want = 1e6 * e.joules / r.synaptic_events_total as f64;
    assert!((e.microjoules_per_event - want).abs() <= 1e-9 * want);

    let rate = r.spike_count as f64 / (f64::from(r.n_neurons) * r.simulated_seconds);
    assert!((r.mean_rate_hz - rate).abs() <= 1e-9 * rate);
    assert!(r.phases.pooled.residual.abs() < 0.05);

    let report = AnyReport::Run(r);
    let json = dir.path().join("r.json");
    emit_report(&report, ReportFormat::Json, &json).unwrap();
    assert_eq!(AnyReport::from_json_path(&json).unwrap(), report);

    let csv_path = dir.path().join("r.csv");
    emit_report(&report, ReportFormat::Csv, &csv_path).unwrap();
    let mut rd = csv::Reader::from_path(&csv_path).unwrap();
    assert!(rd.headers().unwrap().iter().any(|h| h == "raster_hash"));
    assert_eq!(rd.records().count(), 1);
}

#[test]
fn sweep_rows_share_one_raster_and_plot_data_adds_up() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = strong_scaling_sweep(&small(1), &[1, 3, 9]).unwrap();
    assert!(sweep.complete && sweep.error.is_none());
    assert!(sweep.hashes_agree);
    assert_eq!(sweep.rows.len(), 3);
    assert_eq!(sweep.rows[0].speedup, 1.0);
    for (row, n) in sweep.rows.iter().zip([1, 3, 9]) {
        assert_eq!(row.n_ranks, n);
        assert_eq!(row.raster_hash, sweep.rows[0].raster_hash);
        assert!((row.speedup - sweep.rows[0].wall_seconds / row.wall_seconds).abs() < 1e-12);
    }

    let report = AnyReport::Scaling(sweep);
    write_plot_data(&report, dir.path()).unwrap();
    let mut rd = csv::Reader::from_path(dir.path().join("phase_stack.csv")).unwrap();
    let mut rows = 0;
    for rec in rd.deserialize::<std::collections::HashMap<String, f64>>() {
        let rec = rec.unwrap();
        let parts: f64 = [
            "computation",
            "memory_management",
            "communication",
            "synchronization",
            "residual",
        ]
        .iter()
        .map(|k| rec[*k])
        .sum();
        assert!((parts - rec["wall_seconds"]).abs() <= 1e-9 * rec["wall_seconds"]);
        rows += 1;
    }
    assert_eq!(rows, 3);
    assert!(dir.path().join("scaling_curve.csv").exists());
    assert!(dir.path().join("packet_stats.csv").exists());
    assert!(!dir.path().join("energy_bars.csv").exists());
}

#[test]
fn sweep_rejects_bad_rank_lists() {
    assert!(strong_scaling_sweep(&small(1), &[]).is_err());
    assert!(strong_scaling_sweep(&small(1), &[4, 2]).is_err());
}

#[test]
fn sweep_stops_at_first_failing_run() {
    // 3x3 grid of 200 neurons cannot host 5000 ranks.
    let sweep = strong_scaling_sweep(&small(1), &[1, 5000]).unwrap();
    assert!(!sweep.complete);
    assert!(sweep.error.is_some());
    assert_eq!(sweep.rows.len(), 1);
}

#[test]
fn ini_file_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.ini");
    let c = RunConfig {
        exchange: ExchangeMode::Broker,
        ranks_per_node: 2,
        ..small(4)
    };
    std::fs::write(&path, c.to_ini_string()).unwrap();
    let back = RunConfig::from_ini_path(&path).unwrap();
    assert_eq!(back, c);
    assert_eq!(
        run_detailed(&back).unwrap().report.raster_hash,
        run_detailed(&c).unwrap().report.raster_hash
    );
}
