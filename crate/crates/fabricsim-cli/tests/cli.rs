//! End-to-end checks of the binary: exit codes, CSV determinism, config
//! schema validation and the documented flag surface.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fabricsim"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fabricsim-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn beff_direct_preset_reports_sub_3us_latency() {
    let dir = tmp("beff");
    let out = run_in(&dir, &["beff", "--preset", "direct-udp-pl", "--nodes", "2", "--repetitions", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.join("out/beff.csv")).unwrap();
    let first = csv.lines().nth(1).unwrap();
    let fields: Vec<&str> = first.split(',').collect();
    assert_eq!(fields[0], "64");
    let latency: f64 = fields[1].parse().unwrap();
    assert!(latency < 3.0e-6, "64 B latency {latency}");
    assert!(dir.join("out/beff_model_error.csv").exists());
}

#[test]
fn beff_rejects_single_node_ring() {
    let dir = tmp("beff-one");
    let out = run_in(&dir, &["beff", "--preset", "direct-udp-pl", "--nodes", "1"]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    assert!(stderr(&out).contains("node_count"));
}

#[test]
fn unknown_preset_is_a_config_error() {
    let dir = tmp("preset");
    let out = run_in(&dir, &["beff", "--preset", "no-such-cluster"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("unknown preset"));
    assert!(stderr(&out).contains("direct-udp-pl"), "should list available presets");
}

#[test]
fn identical_configs_give_byte_identical_csvs() {
    let dir = tmp("determinism");
    let args =
        ["beff", "--preset", "switch-tcp-pl", "--nodes", "4", "--repetitions", "2", "--out-dir"];
    let a = run_in(&dir, &[&args[..], &["a"]].concat());
    let b = run_in(&dir, &[&args[..], &["b"]].concat());
    assert!(a.status.success() && b.status.success());
    let csv_a = std::fs::read(dir.join("a/beff.csv")).unwrap();
    let csv_b = std::fs::read(dir.join("b/beff.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    assert_eq!(stdout(&a).replace("a/", "x/"), stdout(&b).replace("b/", "x/"));
}

#[test]
fn config_file_with_unknown_key_is_rejected() {
    let dir = tmp("schema");
    std::fs::write(
        dir.join("exp.toml"),
        "workload = \"beff\"\n[beff]\nnodes = 2\nrepetitionz = 5\n",
    )
    .unwrap();
    let out = run_in(&dir, &["beff", "--config", "exp.toml", "--preset", "direct-udp-pl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("repetitionz"), "stderr: {}", stderr(&out));
}

#[test]
fn config_workload_must_match_subcommand() {
    let dir = tmp("mismatch");
    std::fs::write(dir.join("exp.toml"), "workload = \"swe-solve\"\n").unwrap();
    let out = run_in(&dir, &["beff", "--config", "exp.toml", "--preset", "direct-udp-pl"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn dump_config_prints_resolved_parameters() {
    let dir = tmp("dump");
    let out = run_in(&dir, &["beff", "--preset", "switch-udp-pl", "--dump-config"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("preset = \"switch-udp-pl\""));
    assert!(text.contains("switch_hops = 1"));
    assert!(text.contains("host_invoke_latency"));
    // dump only: no results written
    assert!(!dir.join("out").exists());
}

#[test]
fn inline_cluster_sections_replace_the_preset() {
    let dir = tmp("inline");
    std::fs::write(
        dir.join("exp.toml"),
        r#"
workload = "beff"

[cluster]
preset = "direct-udp-pl"

[cluster.link]
raw_bandwidth = 12.5e9
base_latency = 10.0e-6
switch_hops = 0
per_hop_latency = 1.0e-6
frame_overhead = 66
mtu_payload = 1472

[beff]
nodes = 2
repetitions = 1
sizes = [64]
"#,
    )
    .unwrap();
    let out = run_in(&dir, &["beff", "--config", "exp.toml"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.join("out/beff.csv")).unwrap();
    let latency: f64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    // 10 us base latency dominates: far above the preset's 2.3 us
    assert!(latency > 10.0e-6, "latency {latency}");
}

#[test]
fn model_buffered_peak_prints_harmonic_combination() {
    let dir = tmp("model-peak");
    let out = run_in(&dir, &["model", "--buffered-peak", "14e9", "12.5e9"]);
    assert!(out.status.success());
    let value: f64 = stdout(&out).trim().parse().unwrap();
    assert!((value - 6.6e9).abs() < 0.05e9);
}

#[test]
fn model_sweep_is_monotone_and_streamed_beats_buffered() {
    let dir = tmp("model-sweep");
    let out = run_in(&dir, &["model", "--preset", "direct-udp-pl"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.join("out/model.csv")).unwrap();
    let mut rows: Vec<(u64, String, f64)> = Vec::new();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        rows.push((f[0].parse().unwrap(), f[1].to_string(), f[2].parse().unwrap()));
    }
    for mode in ["buffered/host", "buffered/pl", "streamed/host", "streamed/pl"] {
        let series: Vec<f64> =
            rows.iter().filter(|r| r.1 == mode).map(|r| r.2).collect();
        assert!(!series.is_empty());
        assert!(series.windows(2).all(|w| w[1] >= w[0]), "{mode} not monotone");
    }
    for (size, _, lat) in rows.iter().filter(|r| r.1 == "streamed/host") {
        let buffered = rows
            .iter()
            .find(|r| r.1 == "buffered/host" && r.0 == *size)
            .unwrap()
            .2;
        assert!(*lat <= buffered, "streamed should not exceed buffered at {size}");
    }
}

#[test]
fn model_rejects_empty_sweep() {
    let dir = tmp("model-empty");
    std::fs::write(dir.join("exp.toml"), "workload = \"model-eval\"\n[model]\nsizes = []\n")
        .unwrap();
    let out =
        run_in(&dir, &["model", "--config", "exp.toml", "--preset", "direct-udp-pl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("empty"));
}

#[test]
fn swe_solve_oracle_check_passes() {
    let dir = tmp("swe-oracle");
    let out = run_in(
        &dir,
        &[
            "swe", "solve", "--preset", "direct-udp-pl", "--nx", "6", "--ny", "6", "--k", "4",
            "--steps", "20", "--check-oracle",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("bitwise identical"));
    assert!(dir.join("out/state_final.csv").exists());
    assert!(dir.join("out/timing.csv").exists());
}

#[test]
fn swe_solve_cfl_violation_exits_2() {
    let dir = tmp("swe-cfl");
    let out = run_in(
        &dir,
        &["swe", "solve", "--preset", "direct-udp-pl", "--nx", "4", "--ny", "4", "--dt", "10.0"],
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("CFL"));
}

#[test]
fn swe_scaling_writes_table() {
    let dir = tmp("swe-scaling");
    let out = run_in(
        &dir,
        &[
            "swe", "scaling", "--preset", "direct-udp-pl", "--kind", "weak", "--k-list", "1,2,4",
            "--elements-per-partition", "800", "--steps", "2",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.join("out/scaling.csv")).unwrap();
    assert!(csv.starts_with("k,n_max,sim_flops,model_flops,efficiency,stall_fraction"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn mesh_round_trip_through_files() {
    let dir = tmp("mesh");
    let gen = run_in(
        &dir,
        &["mesh", "generate", "--nx", "5", "--ny", "4", "--sea-side", "north", "--out", "m.mesh"],
    );
    assert!(gen.status.success());
    let inspect = run_in(&dir, &["mesh", "inspect", "--mesh", "m.mesh"]);
    assert!(inspect.status.success());
    let text = stdout(&inspect);
    assert!(text.contains("elements:        40"));
    assert!(text.contains("5 sea"));
    let part = run_in(&dir, &["mesh", "partition", "--mesh", "m.mesh", "--k", "3", "--out", "s.csv"]);
    assert!(part.status.success(), "{}", stderr(&part));
    let csv = std::fs::read_to_string(dir.join("s.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn malformed_mesh_file_reports_line() {
    let dir = tmp("mesh-bad");
    std::fs::write(dir.join("bad.mesh"), "vertices 2\ntriangles 1\n0 0\n1 0\n0 1 7\n").unwrap();
    let out = run_in(&dir, &["mesh", "inspect", "--mesh", "bad.mesh"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("missing vertex"), "stderr: {}", stderr(&out));
}

#[test]
fn trace_flag_writes_event_log() {
    let dir = tmp("trace");
    std::fs::write(dir.join("exp.toml"), "workload = \"beff\"\n[beff]\nsizes = [64]\nrepetitions = 1\n").unwrap();
    let out = run_in(
        &dir,
        &["beff", "--config", "exp.toml", "--preset", "direct-udp-pl", "--trace"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let trace = std::fs::read_to_string(dir.join("out/trace.log")).unwrap();
    assert!(trace.lines().count() > 4);
    assert!(trace.contains("CommandIssued"));
    assert!(trace.contains("SegmentRx"));
}
