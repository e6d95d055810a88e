//! Compiles a small C program against the generated header and the static
//! library, then runs it. Skipped when no C compiler is on the PATH.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "minidpsnn.h"

#define CHECK(call) do { DpsnnStatus s_ = (call); if (s_ != DPSNN_STATUS_OK) { \
    fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_, dpsnn_last_error_message()); return 1; } } while (0)

int main(void) {
    DpsnnConfig *cfg = NULL;
    DpsnnReport *rep = NULL;
    DpsnnSummary sum;
    char *json = NULL;
    CHECK(dpsnn_config_parse(
        "[grid]\nsize = 2x2\nneurons_per_column = 100\nout_degree_exc = 50\nout_degree_inh = 25\n"
        "[stimulus]\nweight = 0.6\n[run]\nsim_seconds = 0.1\nranks = 2\n", &cfg));
    CHECK(dpsnn_config_set(cfg, "run", "send", "p2p"));
    if (dpsnn_config_set(cfg, "run", "send", "carrier-pigeon") != DPSNN_STATUS_CONFIG) return 2;
    if (dpsnn_last_error_message() == NULL) return 3;
    CHECK(dpsnn_run(cfg, &rep));
    CHECK(dpsnn_report_summary(rep, &sum));
    CHECK(dpsnn_report_to_json(rep, &json));
    if (strstr(json, "\"kind\":\"run\"") == NULL) return 4;
    dpsnn_string_free(json);

    uint32_t src[2] = {4, 17}, st[2] = {9, 9}, out_src[2], out_st[2], step;
    uint8_t buf[64], hop;
    size_t len, n;
    CHECK(dpsnn_packet_encode(9, 1, src, st, 2, buf, sizeof buf, &len));
    CHECK(dpsnn_packet_decode(buf, len, &step, &hop, out_src, out_st, 2, &n));
    if (len != 24 || n != 2 || out_src[1] != 17 || hop != 1) return 5;

    printf("%u %u %llu %016llx\n", sum.n_neurons, sum.n_ranks,
           (unsigned long long)sum.synaptic_events, (unsigned long long)sum.raster_hash);
    dpsnn_report_free(rep);
    dpsnn_config_free(cfg);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<this test> -> target/<profile>
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libminidpsnn_ffi.a");
    assert!(
        lib.exists(),
        "static library not built at {}",
        lib.display()
    );

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    let exe = dir.path().join("client");
    std::fs::write(&src, PROGRAM).unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let run = Command::new(&exe).output().unwrap();
    assert!(
        run.status.success(),
        "exit {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stderr)
    );
    let stdout = String::from_utf8(run.stdout).unwrap();
    let fields: Vec<&str> = stdout.split_whitespace().collect();
    assert_eq!(fields[0], "400");
    assert_eq!(fields[1], "2");
    assert!(fields[2].parse::<u64>().unwrap() > 0);
    assert_eq!(fields[3].len(), 16);
}
