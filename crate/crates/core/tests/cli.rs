use std::path::Path;
use std::process::{Command, Output};

use fracblowup::config::{config_hash, Params};
use fracblowup::Error;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fracblowup"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

#[test]
fn params_layering() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.toml");
    std::fs::write(&file, "s = 0.5\np = 2.5\nmesh-n = 64\nk-list = [1.0, 2.0]\n").unwrap();
    let base = Params::from_toml_file(&file).unwrap();
    assert_eq!(base.mesh_n, Some(64));
    let flags = Params {
        p: Some(3.0),
        ..Params::default()
    };
    let merged = flags.over(base);
    assert_eq!(merged.p, Some(3.0));
    assert_eq!(merged.s, Some(0.5));
    let r = merged.resolve().unwrap();
    assert_eq!(r.k_list, vec![1.0, 2.0]);
    assert_eq!(r.dim, 1);
    assert_eq!(r.hash(), config_hash(&r));
    assert_eq!(r.hash().len(), 64);
}

#[test]
fn params_validation() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.toml");
    std::fs::write(&file, "s = 0.5\nbogus = 1\n").unwrap();
    assert!(matches!(Params::from_toml_file(&file), Err(Error::Config(_))));
    let p = |s: f64, pp: f64, n: usize| Params {
        s: Some(s),
        p: Some(pp),
        mesh_n: Some(n),
        ..Params::default()
    };
    assert!(p(1.5, 2.0, 64).resolve().is_err());
    assert!(p(0.5, -2.0, 64).resolve().is_err());
    assert!(p(0.5, 2.0, 8).resolve().is_err());
    assert!(Params::default().resolve().is_err());
    let g = Params {
        g_spec: Some("cube:1".into()),
        ..p(0.5, 2.5, 64)
    };
    assert!(g.resolve().unwrap().exterior().is_err());
}

#[test]
fn hash_tracks_config() {
    let a = Params {
        s: Some(0.5),
        p: Some(2.5),
        ..Params::default()
    }
    .resolve()
    .unwrap();
    let mut b = a.clone();
    assert_eq!(a.hash(), b.hash());
    b.mesh_n = 128;
    assert_ne!(a.hash(), b.hash());
}

#[test]
fn check_command() {
    let out = run(&["check", "--s", "0.5", "--p", "2.5"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["reports"][0]["verdict"], "Converges");
    assert_eq!(v["reports"][1]["verdict"], "Converges");
    assert_eq!(v["power_regime"], "LargeSolution");
    // Critical power: undecidable, exit 2.
    let out = run(&["check", "--s", "0.5", "--p", "2"]);
    assert_eq!(out.status.code(), Some(2));
    // Log factors decide at the critical power.
    let out = run(&["check", "--s", "0.5", "--family", "powerlog", "--p", "2", "--alpha", "-1.5"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["reports"][0]["verdict"], "Diverges");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["check"]).status.code(), Some(1));
    assert_eq!(run(&["check", "--s", "2", "--p", "2"]).status.code(), Some(1));
    assert_eq!(run(&["replicate", "--scenario", "nope"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn solve_residual_analyze_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("run.toml");
    std::fs::write(&cfg, "s = 0.5\np = 2.5\nk = 8.0\nmesh-n = 128\n").unwrap();
    let solve_dir = d.join("solve");
    let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", solve_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let diag = read_json(&solve_dir.join("diagnostics.json"));
    assert_eq!(diag["diagnostics"]["converged"], true);
    assert_eq!(diag["config"]["mesh_n"], 128);
    let sol = solve_dir.join("solution.csv");
    assert!(sol.exists());

    let out = run(&["residual", "--solution", sol.to_str().unwrap(), "--p", "2.5", "--out", d.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let res = read_json(&d.join("residual.json"));
    assert!(res["max_relative_residual"].as_f64().unwrap() < 0.05);
    assert!(d.join("residual.csv").exists());

    let out = run(&["analyze", "--solution", sol.to_str().unwrap(), "--p", "2.5", "--out", d.to_str().unwrap()]);
    assert!(matches!(out.status.code(), Some(0) | Some(2)));
    let an = read_json(&d.join("analyze.json"));
    assert!(an["trace"].as_f64().unwrap() > 0.0);
    assert!(an["exponent"].as_f64().unwrap() < 0.0);
}

#[test]
fn flags_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "s = 0.5\np = 2.5\nk = 1.0\nmesh-n = 64\n").unwrap();
    let out_dir = dir.path().join("o");
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--mesh-n",
        "48",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let diag = read_json(&out_dir.join("diagnostics.json"));
    assert_eq!(diag["config"]["mesh_n"], 48);
}

#[test]
fn exterior_solve_via_cli() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "solve",
        "--s",
        "0.5",
        "--p",
        "2.5",
        "--g-spec",
        "shell:1.2:2:5",
        "--k-list",
        "1,2,4",
        "--mesh-n",
        "64",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let diag = read_json(&dir.path().join("diagnostics.json"));
    assert_eq!(diag["config"]["g_spec"], "shell:1.2:2:5");
}

#[test]
fn sweep_command_writes_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "sweep",
        "--s",
        "0.5",
        "--p",
        "1.2",
        "--k-list",
        "1,2,4",
        "--mesh-n",
        "64",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&dir.path().join("sweep.json"));
    assert_eq!(v["results"]["regime_observed"], "L1Escape");
    assert_eq!(v["status"], "pass");
    for k in ["1", "2", "4"] {
        assert!(dir.path().join(format!("u_k{k}.csv")).exists());
    }
}

#[test]
fn info_is_seeded() {
    let a = run(&["info", "--N", "3", "--s", "0.5", "--seed", "7"]);
    let b = run(&["info", "--N", "3", "--s", "0.5", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert!(v["green_symmetry_max_rel"].as_f64().unwrap() < 1e-12);
    // γ_{3,1/2} = Γ(3/2) / (2 Γ(2) Γ(3/2)).
    assert!((v["torsion_constant"].as_f64().unwrap() - 0.5).abs() < 1e-14);
}
