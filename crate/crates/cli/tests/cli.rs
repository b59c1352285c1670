use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nvdnp::io::{self, Manifest, Table};
use nvdnp::signal::{synthesize_fid, DatasetStore, DecayModel};

fn nvdnp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvdnp"))
        .args(args)
        .env_remove("NVDNP_CONFIG")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let o = nvdnp(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout_table(o: &Output) -> Table {
    Table::from_csv_str(std::str::from_utf8(&o.stdout).unwrap()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn plans() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../plans")
}

#[test]
fn odmr_header_carries_binomial_weights() {
    let t = stdout_table(&ok(&["odmr", "--p", "0.5"]));
    assert_eq!(t.metadata["occupancy_weights"], "[0.125,0.375,0.375,0.125]");
}

#[test]
fn odmr_line_counts() {
    let single = io::spectrum_from_table(&stdout_table(&ok(&["odmr", "--p", "0"]))).unwrap();
    assert_eq!(single.peaks(0.05).len(), 1);
    let quartet = io::spectrum_from_table(&stdout_table(&ok(&["odmr", "--p", "1", "--secular-mhz", "130"]))).unwrap();
    assert_eq!(quartet.peaks(0.05).len(), 4);
}

#[test]
fn odmr_writes_one_file_per_enrichment() {
    let d = tempfile::tempdir().unwrap();
    ok(&["odmr", "--p", "0.011", "0.5", "1", "--out-dir", s(d.path())]);
    for p in ["0.011", "0.5", "1"] {
        assert!(d.path().join(format!("odmr_p{p}.csv")).exists());
    }
    assert_eq!(code(&nvdnp(&["odmr", "--p", "0.1", "0.2"])), 2);
}

#[test]
fn bad_input_exits_2() {
    assert_eq!(code(&nvdnp(&["odmr", "--p", "1.5"])), 2);
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("bad.json");
    std::fs::write(&cfg, "{\"nv\": 3}").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_nvdnp"))
        .args(["odmr", "--p", "0.5"])
        .env("NVDNP_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("config"));
    assert_eq!(code(&nvdnp(&["odmr", "--p", "0.5", "--config", "/nonexistent.json"])), 2);
    assert_eq!(code(&nvdnp(&["frobnicate"])), 2);
}

#[test]
fn dnp_sweep_verify_and_zero_larmor() {
    let o = ok(&["dnp-sweep", "--p", "1", "--secular-mhz", "130", "--verify"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("antisymmetry residual"));
    // Tilted first-shell tensors shift the satellites unevenly.
    assert_eq!(code(&nvdnp(&["dnp-sweep", "--p", "1", "--verify"])), 3);
    let zero = io::dnp_from_table(&stdout_table(&ok(&["dnp-sweep", "--sample", "D5", "--nu-n", "0"]))).unwrap();
    assert!(zero.signal.iter().all(|v| *v == 0.0));
}

#[test]
fn dnp_sweep_default_larmor_from_field() {
    let t = stdout_table(&ok(&["dnp-sweep", "--sample", "D1"]));
    let nu: f64 = t.metadata["nu_n_mhz"].parse().unwrap();
    assert!((nu - 5.054).abs() < 0.01, "{nu}");
}

#[test]
fn fit_buildup_recovers_time_constant() {
    let d = tempfile::tempdir().unwrap();
    let f = d.path().join("b.csv");
    ok(&["synth", "buildup", "--sample", "D1", "--noise", "0.005", "--seed", "11", "--out", s(&f)]);
    let r = json(&ok(&["fit", "buildup", s(&f)]));
    let t = &r["fit"]["t_dnp_s"];
    assert!(t["ci_low"].as_f64().unwrap() <= 22.34 && 22.34 <= t["ci_high"].as_f64().unwrap(), "{t}");
}

#[test]
fn fit_echo_reports_t2_pair() {
    let d = tempfile::tempdir().unwrap();
    let f = d.path().join("e.csv");
    ok(&["synth", "echo", "--sample", "D2", "--seed", "1", "--out", s(&f)]);
    let r = json(&ok(&["fit", "echo", s(&f)]));
    let t1 = r["fit"]["t2_1_s"]["value"].as_f64().unwrap();
    let t2 = r["fit"]["t2_2_s"]["value"].as_f64().unwrap();
    assert!((t1 / 5.22e-3 - 1.0).abs() < 1e-3 && (t2 / 146.67e-3 - 1.0).abs() < 1e-3, "{t1} {t2}");
}

#[test]
fn fit_t1_and_nonphysical_series() {
    let d = tempfile::tempdir().unwrap();
    let f = d.path().join("t.csv");
    ok(&["synth", "t1", "--sample", "D1", "--seed", "1", "--out", s(&f)]);
    let r = json(&ok(&["fit", "t1", s(&f)]));
    assert!((r["fit"]["t1_s"]["value"].as_f64().unwrap() / 13.08 - 1.0).abs() < 1e-3);
    assert_eq!(code(&nvdnp(&["synth", "t1", "--sample", "D3", "--seed", "1"])), 2);

    let k: Vec<f64> = (0..20).map(f64::from).collect();
    let rising: Vec<f64> = k.iter().map(|k| (k / 5.0).exp()).collect();
    let g = d.path().join("rising.csv");
    Table::from_columns(&["k", "signal"], &[&k, &rising]).unwrap().write(&g).unwrap();
    let o = nvdnp(&["fit", "t1", s(&g), "--flip-deg", "10", "--tau-s", "1"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn malformed_input_exits_2_naming_row() {
    let d = tempfile::tempdir().unwrap();
    let empty = d.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(code(&nvdnp(&["fit", "buildup", s(&empty)])), 2);
    let bad = d.path().join("bad.csv");
    std::fs::write(&bad, "time_s,polarization\n0,0\n1,0.1\n2,oops\n").unwrap();
    let o = nvdnp(&["fit", "buildup", s(&bad)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 4"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bootstrap_d1_regime_is_asymmetric() {
    let d = tempfile::tempdir().unwrap();
    let ds = d.path().join("d1");
    ok(&["synth", "dataset", "--sample", "D1", "--rel-noise", "0.2", "--seed", "3", "--out-dir", s(&ds)]);
    let r = json(&ok(&["bootstrap", s(&ds), "--seed", "7", "--resamples", "2000"]));
    let e = &r["enhancement"];
    assert_eq!(e["symmetric"], false);
    let (v, lo, hi) = (e["enhancement"].as_f64().unwrap(), e["lower"].as_f64().unwrap(), e["upper"].as_f64().unwrap());
    assert!(lo < v && v < hi && hi - v > v - lo, "{lo} {v} {hi}");
}

#[test]
fn bootstrap_is_byte_deterministic_across_threads() {
    let d = tempfile::tempdir().unwrap();
    let ds = d.path().join("d5");
    ok(&["synth", "dataset", "--sample", "D5", "--seed", "1", "--out-dir", s(&ds)]);
    let run = |threads: &str| ok(&["--threads", threads, "bootstrap", s(&ds), "--resamples", "10000", "--seed", "7"]).stdout;
    let a = run("1");
    assert_eq!(a, run("1"));
    assert_eq!(a, run("4"));
    let r: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(r["enhancement"]["symmetric"], true);
}

#[test]
fn identical_blocks_warn_about_zero_sigma() {
    let d = tempfile::tempdir().unwrap();
    let hp = synthesize_fid(1.0, DecayModel::None, 0.0, 0.0, 0, 32, 1e-6).unwrap();
    let block = synthesize_fid(1e-3, DecayModel::None, 0.0, 0.0, 0, 32, 1e-6).unwrap();
    let store = DatasetStore::new(vec![block; 4]).unwrap();
    io::write_dataset(d.path(), &store, Some(&hp), Manifest::default()).unwrap();
    let o = ok(&["bootstrap", s(d.path()), "--seed", "1", "--resamples", "100"]);
    let r = json(&o);
    assert_eq!(r["bootstrap"]["sigma"], 0.0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn bootstrap_missing_manifest_exits_2() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&nvdnp(&["bootstrap", s(d.path()), "--seed", "1"])), 2);
}

#[test]
fn simulated_sweep_matches_dnp_sweep() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("sim");
    let plan = plans().join("cw_dnp.plan");
    ok(&[
        "simulate", s(&plan), "--sample", "D5", "--seed", "2", "--out-dir", s(&out),
        "--sweep-span-mhz", "40", "--sweep-points", "41",
    ]);
    let sim = io::dnp_from_table(&Table::read(&out.join("sweep.csv")).unwrap()).unwrap();
    let direct = io::dnp_from_table(&stdout_table(&ok(&[
        "dnp-sweep", "--sample", "D5", "--span-mhz", "40", "--points", "41", "--normalize",
    ])))
    .unwrap();
    let m = sim.max_abs();
    for (a, b) in sim.signal.iter().zip(&direct.signal) {
        assert!((a / m - b).abs() < 0.01, "{} vs {b}", a / m);
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["sweep"].as_array().unwrap().len(), 41);
}

#[test]
fn simulate_is_deterministic_with_noise() {
    let d = tempfile::tempdir().unwrap();
    let plan = plans().join("cw_dnp.plan");
    let run = |name: &str, threads: &str| {
        let out = d.path().join(name);
        ok(&[
            "--threads", threads, "simulate", s(&plan), "--sample", "D1", "--seed", "9", "--noise", "1e-5",
            "--out-dir", s(&out), "--sweep-span-mhz", "20", "--sweep-points", "5",
        ]);
        std::fs::read(out.join("sweep.csv")).unwrap()
    };
    assert_eq!(run("a", "1"), run("b", "3"));
}

#[test]
fn plan_without_acquire_warns() {
    let d = tempfile::tempdir().unwrap();
    let plan = d.path().join("quiet.plan");
    std::fs::write(&plan, "laser on\nwait 1s\nlaser off\n").unwrap();
    let out = d.path().join("out");
    let o = ok(&["simulate", s(&plan), "--sample", "D2", "--seed", "1", "--out-dir", s(&out)]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no acquire"));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert!(m["acquisitions"].as_array().unwrap().is_empty());
}

#[test]
fn bad_plan_reports_location() {
    let d = tempfile::tempdir().unwrap();
    let plan = d.path().join("bad.plan");
    std::fs::write(&plan, "laser on\npulze 90 x\n").unwrap();
    let o = nvdnp(&["simulate", s(&plan), "--sample", "D2", "--seed", "1", "--out-dir", s(d.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}
