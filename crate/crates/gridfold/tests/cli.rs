use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn gridfold(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridfold"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn out_arg(dir: &TempDir, sub: &str) -> String {
    dir.path().join(sub).display().to_string()
}

#[test]
fn bounds_on_the_worked_example() {
    let dir = TempDir::new().unwrap();
    let out = out_arg(&dir, "b");
    let o = gridfold(&["bounds", "--out", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let b = json(&dir.path().join("b/bounds.json"));
    assert_eq!(b["w1"], 5.0);
    assert_eq!(b["r_mu"], 6);
    assert_eq!(b["steiner"], 7);
    assert_eq!(b["schema_version"], 1);
    assert_eq!(b["digest"]["L"], 4);
    let m = json(&dir.path().join("b/manifest.json"));
    assert_eq!(m["experiment"], "bounds");
    assert!(m["finished_unix_ms"].as_u64() >= m["started_unix_ms"].as_u64());
}

#[test]
fn out_of_range_delta_names_the_field() {
    let dir = TempDir::new().unwrap();
    let out = out_arg(&dir, "p");
    let o = gridfold(&["percolation", "--out", &out, "--set", "delta=1.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("delta"));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "seed = 3\nbogus_key = 1\n").unwrap();
    let o = gridfold(&["bounds", cfg.to_str().unwrap(), "--out", &out_arg(&dir, "x")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus_key"));
}

#[test]
fn config_file_and_flags_layer() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("v.toml");
    fs::write(&cfg, "experiment = \"variance\"\nn_list = [4]\nf_act = 0.5\ntrials = 2000\nseed = 1\n").unwrap();
    let out = out_arg(&dir, "v");
    let o = gridfold(&["run", cfg.to_str().unwrap(), "--out", &out, "--seed", "9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("v/variance.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,P,f,trials,mean_hat,mean_exact,var_hat,var_exact,var_over_P2,var_over_P32"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "4");
    assert_eq!(row[1], "16");
    assert_eq!(row[5].parse::<f64>().unwrap(), 12.0);
    assert_eq!(row[7].parse::<f64>().unwrap(), 14.0);
    assert_eq!(json(&dir.path().join("v/manifest.json"))["seed"], 9);

    let clash = gridfold(&["bounds", cfg.to_str().unwrap(), "--out", &out]);
    assert_eq!(clash.status.code(), Some(1));
}

#[test]
fn law_violation_exits_two_with_witness() {
    let dir = TempDir::new().unwrap();
    let out = out_arg(&dir, "t");
    let o = gridfold(&["treefold", "--out", &out, "--set", "monoid=difference"]);
    assert_eq!(o.status.code(), Some(2));
    let cert = json(&dir.path().join("t/law_report.json"));
    assert_eq!(cert["status"], "failed");
}

#[test]
fn treefold_reports_the_sum() {
    let dir = TempDir::new().unwrap();
    let out = out_arg(&dir, "t");
    let o = gridfold(&["treefold", "--out", &out, "--set", "L=5", "--set", "t_merge=2", "--set", "max_local=3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&dir.path().join("t/treefold.summary.json"));
    assert_eq!(s["value"], "325");
    assert_eq!(s["schedule_independent"], true);
    assert!(s["wallclock_seconds"].as_f64() <= s["wallclock_bound_seconds"].as_f64());
}

#[test]
fn simulate_writes_routes_and_trace() {
    let dir = TempDir::new().unwrap();
    let out = out_arg(&dir, "s");
    let trace = dir.path().join("s/trace.jsonl");
    let o = gridfold(&["simulate", "--out", &out, "--trace", trace.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&dir.path().join("s/simulate.summary.json"));
    assert_eq!(s["completion_cycles"], 6);
    assert_eq!(s["work_attains_w1"], true);
    let routes = json(&dir.path().join("s/routes.json"));
    assert_eq!(routes["routes"].as_array().unwrap().len(), 3);
    let lines = fs::read_to_string(&trace).unwrap();
    assert_eq!(lines.lines().count(), 6);
    for l in lines.lines() {
        serde_json::from_str::<Value>(l).unwrap();
    }
}

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn reruns_are_byte_identical_for_any_thread_count() {
    let dir = TempDir::new().unwrap();
    let runs: &[(&str, &[&str])] = &[
        ("variance", &["--set", "n_list=[4,8]", "--set", "trials=20000"]),
        ("percolation", &["--set", "L=24", "--set", "fields=8", "--set", "pairs_per_field=20", "--set", "delta=0"]),
        ("smallworld", &["--set", "k=1", "--set", "L_list=[8,40]", "--set", "pairs=150"]),
        ("latency", &["--format", "json-lines"]),
    ];
    for (kind, extra) in runs {
        let mut outputs = Vec::new();
        for (i, threads) in ["1", "3", "1"].into_iter().enumerate() {
            let out = out_arg(&dir, &format!("{kind}{i}"));
            let mut args = vec![*kind, "--out", &out, "--threads", threads, "--seed", "5"];
            args.extend_from_slice(extra);
            let o = gridfold(&args);
            assert!(o.status.success(), "{kind}: {}", String::from_utf8_lossy(&o.stderr));
            outputs.push(data_files(&dir.path().join(format!("{kind}{i}"))));
        }
        assert!(!outputs[0].is_empty());
        assert_eq!(outputs[0], outputs[1], "{kind}: thread count changed the output");
        assert_eq!(outputs[0], outputs[2], "{kind}: rerun changed the output");
    }
}

#[test]
fn graph_files_round_trip_through_the_cli() {
    let dir = TempDir::new().unwrap();
    let g = dir.path().join("g.txt");
    let o = gridfold(&[
        "bounds", "--out", &out_arg(&dir, "a"), "--set", "k=1", "--set", "L=6",
        "--set", &format!("save_graph=\"{}\"", g.display()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = gridfold(&[
        "bounds", "--out", &out_arg(&dir, "b"),
        "--set", &format!("graph_file=\"{}\"", g.display()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read(dir.path().join("a/bounds.json")).unwrap(),
        fs::read(dir.path().join("b/bounds.json")).unwrap()
    );
}
