use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
[grid]
size = 2x2
neurons_per_column = 150
out_degree_exc = 80
out_degree_inh = 40

[stimulus]
weight = 0.6

[run]
sim_seconds = 0.2
seed = 5
";

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minidpsnn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> &Output {
    assert!(
        out.status.success(),
        "exit {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_prints_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let ini = dir.path().join("small.ini");
    std::fs::write(&ini, SMALL).unwrap();
    let out = cli(&[
        "run",
        "--config",
        s(&ini),
        "--ranks",
        "3",
        "--mode",
        "broker",
        "--ranks-per-node",
        "2",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&ok(&out).stdout).unwrap();
    assert_eq!(v["kind"], "run");
    assert_eq!(v["config"]["n_ranks"], 3);
    assert_eq!(v["config"]["exchange"], "broker");
    assert_eq!(v["n_neurons"], 600);
    assert_eq!(v["raster_hash"].as_str().unwrap().len(), 16);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("real time"), "{stderr}");
}

#[test]
fn run_writes_csv_and_energy() {
    let dir = tempfile::tempdir().unwrap();
    let ini = dir.path().join("small.ini");
    std::fs::write(&ini, SMALL).unwrap();
    let power = dir.path().join("power.csv");
    std::fs::write(&power, "t,i,v\n0,2.0,5.0\n1,2.0,5.0\n").unwrap();
    let csv_out = dir.path().join("run.csv");
    ok(&cli(&[
        "run",
        "--config",
        s(&ini),
        "--power-log",
        s(&power),
        "--out",
        s(&csv_out),
        "--format",
        "csv",
        "--plot-dir",
        s(&dir.path().join("plots")),
    ]));
    let text = std::fs::read_to_string(&csv_out).unwrap();
    assert_eq!(text.lines().count(), 2);
    let bars = std::fs::read_to_string(dir.path().join("plots/energy_bars.csv")).unwrap();
    // 10 W for one second.
    let row: Vec<&str> = bars.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[2].parse::<f64>().unwrap(), 10.0);
}

#[test]
fn energy_and_report_reprocess_stored_runs() {
    let dir = tempfile::tempdir().unwrap();
    let ini = dir.path().join("small.ini");
    std::fs::write(&ini, SMALL).unwrap();
    let json = dir.path().join("run.json");
    ok(&cli(&["run", "--config", s(&ini), "--out", s(&json)]));

    let power = dir.path().join("power.csv");
    std::fs::write(&power, "# bench meter\n0,100\n2,100\n4,300\n").unwrap();
    let out = cli(&[
        "energy",
        "--report",
        s(&json),
        "--power-log",
        s(&power),
        "--t0",
        "1",
        "--t1",
        "3",
        "--baseline-watts",
        "50",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&ok(&out).stdout).unwrap();
    // 100 W over [1,2], ramp 100->200 W over [2,3], minus 50 W baseline.
    assert!((v["energy"]["joules"].as_f64().unwrap() - 150.0).abs() < 1e-9);

    let out = cli(&["report", "--input", s(&json), "--format", "csv"]);
    let text = String::from_utf8(ok(&out).stdout.clone()).unwrap();
    assert!(text.starts_with("n_ranks,"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn sweep_reports_every_rank_count() {
    let dir = tempfile::tempdir().unwrap();
    let ini = dir.path().join("small.ini");
    std::fs::write(&ini, SMALL).unwrap();
    let out = cli(&[
        "sweep",
        "--config",
        s(&ini),
        "--ranks",
        "1,2,4",
        "--send",
        "p2p",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&ok(&out).stdout).unwrap();
    assert_eq!(v["kind"], "scaling");
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert_eq!(v["hashes_agree"], true);
}

#[test]
fn bad_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let ini = dir.path().join("bad.ini");
    std::fs::write(&ini, "[grid]\ncolour = blue\n").unwrap();
    let out = cli(&["run", "--config", s(&ini)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    assert!(!cli(&["run", "--grid", "2x2", "--ranks", "0"])
        .status
        .success());
    assert!(!cli(&["run", "--sim-seconds", "-1"]).status.success());
    assert!(!cli(&["run", "--mode", "ring"]).status.success());
    assert!(
        !cli(&["report", "--input", s(&dir.path().join("missing.json"))])
            .status
            .success()
    );
}

#[test]
fn missed_real_time_is_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let ini = dir.path().join("small.ini");
    // Many ranks on a tiny network: slow, but still a successful run.
    std::fs::write(&ini, SMALL).unwrap();
    let out = cli(&[
        "run",
        "--config",
        s(&ini),
        "--ranks",
        "12",
        "--sim-seconds",
        "0.05",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&ok(&out).stdout).unwrap();
    assert_eq!(
        v["realtime"]["pass"].as_bool().unwrap(),
        v["wall_seconds"].as_f64().unwrap() <= v["simulated_seconds"].as_f64().unwrap()
    );
}
