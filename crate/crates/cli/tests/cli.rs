use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use spherical_lsf::bench::trial_seeds;
use tempfile::TempDir;

fn slsf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slsf"))
        .args(args)
        .output()
        .expect("spawn slsf")
}

fn ok_json(args: &[&str]) -> Value {
    let out = slsf(args);
    assert!(
        out.status.success(),
        "slsf {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

const INSTANCE: [&str; 6] = ["--n", "300", "--d", "16", "--gamma", "0.5"];

#[test]
fn gen_index_query_reproduces_materialized_bench_trials() {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["--seed", "11", "bench"];
    args.extend(INSTANCE);
    args.extend(["--tau", "0.3", "--m", "400", "--trials", "3", "--engine", "materialized"]);
    let bench = ok_json(&args);
    let trials = bench["trials"].as_array().unwrap();
    assert_eq!(trials.len(), 3);

    for (i, rec) in trials.iter().enumerate() {
        let (data_seed, bank_seed) = trial_seeds(11, i);
        let data = p(dir.path(), &format!("d{i}.slsf"));
        let bank = p(dir.path(), &format!("b{i}.bin"));
        let ds = data_seed.to_string();
        let mut gen = vec!["--seed", ds.as_str(), "gen"];
        gen.extend(INSTANCE);
        gen.extend(["--out", data.as_str()]);
        let g = ok_json(&gen);
        assert_eq!(g["planted_id"], rec["planted_id"]);

        let bs = bank_seed.to_string();
        let idx = ok_json(&[
            "--seed", &bs, "index", "--data", &data, "--tau", "0.3", "--m", "400", "--bank-out", &bank,
        ]);
        assert_eq!(idx["stats"]["total_entries"], rec["total_entries"]);

        let q = ok_json(&["query", "--data", &data, "--bank", &bank]);
        assert_eq!(q["engine"], "materialized");
        assert_eq!(q["outcome"], rec["outcome"], "trial {i}");
    }
}

#[test]
fn sampled_query_reproduces_sampled_bench_trial() {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["--seed", "5", "bench"];
    args.extend(INSTANCE);
    args.extend(["--tau", "0.4", "--m", "1000", "--trials", "2", "--engine", "sampled"]);
    let bench = ok_json(&args);
    for (i, rec) in bench["trials"].as_array().unwrap().iter().enumerate() {
        let (data_seed, bank_seed) = trial_seeds(5, i);
        let data = p(dir.path(), &format!("s{i}.slsf"));
        let ds = data_seed.to_string();
        let mut gen = vec!["--seed", ds.as_str(), "gen"];
        gen.extend(INSTANCE);
        gen.extend(["--out", data.as_str()]);
        ok_json(&gen);
        let bs = bank_seed.to_string();
        let q = ok_json(&["--seed", &bs, "query", "--data", &data, "--tau", "0.4", "--m", "1000"]);
        assert_eq!(q["engine"], "sampled");
        assert_eq!(q["outcome"], rec["outcome"], "trial {i}");
    }
}

#[test]
fn explicit_parameters_are_echoed() {
    let dir = TempDir::new().unwrap();
    let data = p(dir.path(), "d.slsf");
    let mut gen = vec!["gen"];
    gen.extend(INSTANCE);
    gen.extend(["--out", data.as_str()]);
    ok_json(&gen);
    let idx = ok_json(&["index", "--data", &data, "--tau", "0.4", "--m", "100"]);
    assert_eq!(idx["params"]["tau"].as_f64(), Some(0.4));
    assert_eq!(idx["params"]["m_int"].as_u64(), Some(100));
    assert_eq!(idx["stats"]["m"].as_u64(), Some(100));
    assert_eq!(idx["stats"]["n"].as_u64(), Some(300));
}

#[test]
fn json_out_matches_stdout() {
    let dir = TempDir::new().unwrap();
    let file = p(dir.path(), "rho.json");
    let out = slsf(&["--json-out", &file, "rho"]);
    assert!(out.status.success());
    let written = std::fs::read(&file).unwrap();
    let a: Value = serde_json::from_slice(&out.stdout).unwrap();
    let b: Value = serde_json::from_slice(&written).unwrap();
    assert_eq!(a, b);
}

#[test]
fn malformed_dataset_exits_3() {
    let dir = TempDir::new().unwrap();
    let data = p(dir.path(), "bad.slsf");
    std::fs::write(&data, b"not a dataset").unwrap();
    let out = slsf(&["index", "--data", &data, "--tau", "0.3", "--m", "10", "--gamma", "0.5", "--c", "2"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn missing_file_exits_3() {
    let out = slsf(&["query", "--data", "/nonexistent/x.slsf"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(slsf(&["bench", "--bogus"]).status.code(), Some(2));
    assert_eq!(slsf(&["rho", "--gamma", "nonsense"]).status.code(), Some(2));
    let out = slsf(&["bench", "--n", "10", "--d", "4", "--c", "0.5", "--trials", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_bounds_passes_and_is_reproducible() {
    let args = ["--seed", "3", "verify-bounds", "--trials", "200000", "--rho-trials", "100000"];
    let a = slsf(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = slsf(&args);
    assert_eq!(a.stdout, b.stdout);
    let report: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert!(!report.as_object().unwrap().is_empty());
}

#[test]
fn corrupted_bounds_exit_1() {
    let out = slsf(&["verify-bounds", "--grid", "2:pi/3", "--trials", "20000", "--rho-t", "", "--corrupt-bounds"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_output_ignores_thread_count() {
    let mut base = vec!["--seed", "9"];
    let mut tail = vec!["bench"];
    tail.extend(INSTANCE);
    tail.extend(["--tau", "0.3", "--m", "200", "--trials", "6", "--engine", "materialized", "--sweep", "100,200"]);
    let mut one = base.clone();
    one.extend(["--threads", "1"]);
    one.extend(tail.iter().copied());
    base.extend(["--threads", "4"]);
    base.extend(tail.iter().copied());
    assert_eq!(slsf(&one).stdout, slsf(&base).stdout);
}

#[test]
fn rho_csv_has_header_and_rows() {
    let out = slsf(&["rho", "--csv", "--t", "4,8"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("t,rho,"));
}
