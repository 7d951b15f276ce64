use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn workdir(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("config_in.json");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_gauss-weyl"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn read_json(p: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn exponential_matches_oracle() {
    let d = workdir("exp");
    let o = run(&d, r#"{"symbol": {"family": "exponential", "a": [0.9], "b": [-0.6]}, "h": 0.5}"#, &["quantize", "--degree", "14"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_json(d.join("out/summary.json"));
    assert!(s["oracle_residual"].as_f64().unwrap() < 1e-5);
    assert_eq!(s["degree"], 14);
    let meta = &s["metadata"];
    assert_eq!(meta["version"], gauss_weyl::VERSION);
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);
    // The effective config records the flag override.
    let c = read_json(d.join("out/config.json"));
    assert_eq!(c["config"]["degree"], 14);
    assert_eq!(c["metadata"]["config_hash"], meta["config_hash"]);
}

#[test]
fn antiwick_and_hybrid_match_damped_oracle() {
    for (method, extra) in [("antiwick", ""), ("hybrid", r#", "selected": [1]"#)] {
        let d = workdir(&format!("damped_{method}"));
        let cfg = format!(r#"{{"symbol": {{"family": "exponential", "a": [0.5, -0.3], "b": [0.2, 0.4]}}, "method": "{method}", "degree": 5{extra}}}"#);
        let o = run(&d, &cfg, &["quantize"]);
        assert_eq!(code(&o), 0, "{method}: {}", String::from_utf8_lossy(&o.stdout));
    }
}

#[test]
fn constant_symbol_gives_identity() {
    let d = workdir("const");
    let o = run(&d, r#"{"symbol": {"family": "constant", "value": 1.0}}"#, &["quantize", "--degree", "4"]);
    assert_eq!(code(&o), 0);
    let m = read_json(d.join("out/matrix.json"));
    let n = m["matrix"]["size"].as_u64().unwrap() as usize;
    let entries = m["matrix"]["entries"].as_array().unwrap();
    for r in 0..n {
        for c in 0..n {
            let e = &entries[r * n + c];
            let want = if r == c { 1.0 } else { 0.0 };
            assert!((e[0].as_f64().unwrap() - want).abs() < 1e-12 && e[1].as_f64().unwrap().abs() < 1e-12);
        }
    }
}

#[test]
fn input_errors_exit_2() {
    let d = workdir("bad");
    assert_eq!(code(&run(&d, "{not json", &["quantize"])), 2);
    assert_eq!(code(&run(&d, r#"{"h": -1}"#, &["quantize"])), 2);
    assert_eq!(code(&run(&d, "{}", &["quantize"])), 2);
    assert_eq!(code(&run(&d, r#"{"symbol": {"family": "exponential", "a": [1.0], "b": [1.0]}}"#, &["quantize", "--dim", "2"])), 2);
    // A monomial carries no class data, so the ladder cannot run.
    assert_eq!(code(&run(&d, r#"{"symbol": {"family": "monomial", "directions": [[1.0, 0.0]]}}"#, &["converge"])), 2);
    assert_eq!(code(&run(&d, "{}", &["verify", "--filter", "no_such_check"])), 2);
}

#[test]
fn resource_cap_exits_4() {
    let d = workdir("cap");
    let cfg = dir_cfg(&d);
    let o = Command::new(env!("CARGO_BIN_EXE_gauss-weyl"))
        .args(["quantize", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(d.join("out"))
        .env("GW_MAX_NODES", "10")
        .output()
        .unwrap();
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

fn dir_cfg(d: &Path) -> PathBuf {
    let p = d.join("cfg.json");
    std::fs::write(&p, r#"{"symbol": {"family": "exponential", "a": [0.4], "b": [0.1]}}"#).unwrap();
    p
}

#[test]
fn converge_writes_csv_and_svg() {
    let d = workdir("converge");
    let cfg = r#"{"symbol": {"family": "lattice", "side": 2, "g_geometric": {"g0": 0.25, "ratio": 0.5}, "potential": {"kind": "cos"}, "t": 1.0},
                  "ladders": [[0, 1], [1, 0]], "degree": 3, "seed": 9}"#;
    let o = run(&d, cfg, &["converge"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(d.join("out/ladder_0.csv")).unwrap();
    assert!(csv.starts_with("# tool=gauss-weyl"));
    assert!(csv.contains("# seed=9"));
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert!(r[2] <= r[3], "diff {} above bound {}", r[2], r[3]);
    }
    assert!(rows[1][4] <= rows[0][4]);
    let svg = std::fs::read_to_string(d.join("out/ladder_1.svg")).unwrap();
    assert!(svg.contains("<svg") && svg.contains("config_hash="));
    let s = read_json(d.join("out/summary.json"));
    assert_eq!(s["ladders_agree"], true);
    assert!(s["final_norm_spread"].as_f64().unwrap() <= s["agreement_tolerance"].as_f64().unwrap());
}

#[test]
fn zero_eps_symbol_has_zero_differences() {
    let d = workdir("converge_const");
    let o = run(&d, r#"{"symbol": {"family": "constant", "value": 2.0}, "dim": 2, "degree": 3}"#, &["converge"]);
    assert_eq!(code(&o), 0);
    let s = read_json(d.join("out/summary.json"));
    for st in s["ladders"][0]["steps"].as_array().unwrap() {
        assert!(st["diff_norm"].as_f64().unwrap() < 1e-12);
    }
}

#[test]
fn wick_wigner_heat_mc_outputs() {
    let d = workdir("misc");
    let o = run(&d, r#"{"symbol": {"family": "exponential", "a": [0.5], "b": [0.5]}}"#, &["wick"]);
    assert_eq!(code(&o), 0);
    let s = read_json(d.join("out/summary.json"));
    assert!(s["max_abs_diff"].as_f64().unwrap() < 1e-6);

    let o = run(&d, r#"{"f": {"coherent": [0.3, -0.2]}, "g": {"basis": 1}, "points": [[0.0, 0.0], [0.5, 0.1]]}"#, &["wigner"]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(d.join("out/wigner.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 3);

    let o = run(&d, r#"{"symbol": {"family": "exponential", "a": [0.7, 0.1], "b": [-0.4, 0.3]}, "selected": [1], "t": 0.3}"#, &["heat"]);
    assert_eq!(code(&o), 0);
    assert!(read_json(d.join("out/summary.json"))["max_abs_diff"].as_f64().unwrap() < 1e-12);

    let o = run(&d, r#"{"mc": {"kind": "brownian", "k": 4, "samples": 50}}"#, &["mc", "--seed", "3"]);
    assert_eq!(code(&o), 0);
    let first = std::fs::read_to_string(d.join("out/ensemble.csv")).unwrap();
    assert!(first.contains("# seed=3"));
    run(&d, r#"{"mc": {"kind": "brownian", "k": 4, "samples": 50}}"#, &["mc", "--seed", "3"]);
    assert_eq!(first, std::fs::read_to_string(d.join("out/ensemble.csv")).unwrap());
}

#[test]
fn verify_filter_and_mutations() {
    let d = workdir("verify");
    let o = run(&d, r#"{"scale": "quick"}"#, &["verify", "--filter", "wick"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r = read_json(d.join("out/report.json"));
    let checks = r["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 1);
    assert_eq!(checks[0]["id"], "wick_symbol");

    let o = run(&d, r#"{"scale": "quick"}"#, &["verify", "--filter", "wick", "--mutation", "sign-flip"]);
    assert_eq!(code(&o), 3);
    let o = run(&d, r#"{"scale": "quick"}"#, &["verify", "--filter", "oracle_u", "--mutation", "sign-flip"]);
    assert_eq!(code(&o), 3);
    let o = run(&d, r#"{"scale": "quick"}"#, &["verify", "--mutation", "eps"]);
    assert_eq!(code(&o), 3);
    let r = read_json(d.join("out/report.json"));
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["passed"] == false));
}
