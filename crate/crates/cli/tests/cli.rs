use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sparse_cce::lifted::lift;
use sparse_cce::nfg::StandardGame;
use sparse_cce::strategies::stationary_nash_component;
use sparse_cce::{MixedStrategy, SparseCorrelated};
use sparse_cce_cli::pipeline::{run_pipeline, GameSource, PipelineSpec, ThresholdPolicy};

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparse-cce"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn pennies_file(dir: &Path) {
    let out = bin(dir, &["gen-game", "--name", "matching_pennies", "--out", "mp.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gen_game_and_lift_descriptor() {
    let dir = tempfile::tempdir().unwrap();
    pennies_file(dir.path());
    let out = bin(dir.path(), &["lift", "--game", "mp.json", "--lift", "2", "--export-sequential", "seq.json"]);
    assert_eq!(out.status.code(), Some(0));
    let desc = json_stdout(&out);
    assert_eq!(desc["H"], 2);
    assert_eq!(desc["node_count"], 273);
    assert_eq!(desc["base"]["M1"][0][1], -1.0);
    let seq: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("seq.json")).unwrap()).unwrap();
    assert_eq!(seq["nodes"].as_array().unwrap().len(), 17 * 7 + 256);
}

#[test]
fn random_games_follow_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = bin(dir.path(), &["--seed", "42", "gen-game", "--name", "random_bimatrix", "--m", "3"]);
    let b = bin(dir.path(), &["gen-game", "--name", "random_bimatrix", "--m", "3", "--seed", "42"]);
    assert_eq!(a.stdout, b.stdout);
    let g = json_stdout(&a);
    assert_eq!(g["kind"], "bimatrix");
    assert_eq!(g["m"], 3);
    let c = json_stdout(&bin(dir.path(), &["gen-game", "--actions", "2,2,2"]));
    assert_eq!(c["kind"], "nfg");
    assert_eq!(c["utilities"].as_array().unwrap().len(), 8);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    pennies_file(dir.path());
    assert_eq!(bin(dir.path(), &["lift", "--game", "missing.json", "--lift", "2"]).status.code(), Some(2));
    assert_eq!(bin(dir.path(), &["gen-game", "--name", "chess"]).status.code(), Some(2));
    assert_eq!(bin(dir.path(), &["lift", "--game", "mp.json", "--lift", "6"]).status.code(), Some(4));
    assert_eq!(
        bin(dir.path(), &["lift", "--game", "mp.json", "--lift", "3", "--node-budget", "1000"]).status.code(),
        Some(4)
    );

    let out = bin(dir.path(), &["learn", "--game", "mp.json", "--lift", "2", "--eta", "0.2", "--iters", "6", "--out", "cce.json"]);
    assert_eq!(out.status.code(), Some(0));
    let found = bin(dir.path(), &["extract", "--game", "mp.json", "--lift", "2", "--cce", "cce.json", "--threshold", "2"]);
    assert_eq!(found.status.code(), Some(0));
    assert_eq!(json_stdout(&found)["outcome"], "found");
    let failed = bin(dir.path(), &["extract", "--game", "mp.json", "--lift", "2", "--cce", "cce.json", "--threshold", "0", "--report", "r.json"]);
    assert_eq!(failed.status.code(), Some(3));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["outcome"], "failed");
    assert_eq!(report["states_scanned"], 17);
}

#[test]
fn learn_metrics_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    pennies_file(dir.path());
    let out = bin(
        dir.path(),
        &["learn", "--game", "mp.json", "--lift", "2", "--eta", "0.2", "--iters", "10", "--every", "5", "--out", "cce.json", "--metrics", "m.csv"],
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "iteration,regret_p1,regret_p2,regret_k,gap_p1,gap_p2,gap_k");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("10,"));

    let v = json_stdout(&bin(dir.path(), &["verify", "--what", "lifted-cce-gap", "--game", "mp.json", "--lift", "2", "--cce", "cce.json"]));
    assert_eq!(v["dual_agrees"], true);
    let last_gap: f64 = lines[2].split(',').nth(6).unwrap().parse().unwrap();
    assert!((v["gaps"][2].as_f64().unwrap() - last_gap).abs() < 1e-12);

    let z = json_stdout(&bin(dir.path(), &["verify", "--what", "zero-sum", "--game", "mp.json", "--lift", "2"]));
    assert_eq!(z["ok"], true);
    assert_eq!(z["leaves"], 256);

    std::fs::write(dir.path().join("p.json"), "[[0.5,0.5],[0.5,0.5]]").unwrap();
    let n = json_stdout(&bin(dir.path(), &["verify", "--what", "ne-gap", "--game", "mp.json", "--profile", "p.json"]));
    assert_eq!(n["value"], 0.0);
    assert_eq!(n["ok"], true);
}

#[test]
fn normal_form_learning_round_trips_through_verify() {
    let dir = tempfile::tempdir().unwrap();
    assert!(bin(dir.path(), &["--seed", "3", "gen-game", "--actions", "2,3,2", "--out", "g.json"]).status.success());
    for alg in ["mwu", "omwu"] {
        let out = bin(dir.path(), &["learn", "--game", "g.json", "--alg", alg, "--eta", "0.1", "--iters", "40", "--every", "40", "--out", "nf.json"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let csv = std::fs::read_to_string(dir.path().join("nf.metrics.csv")).unwrap();
        let row: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        let v = json_stdout(&bin(dir.path(), &["verify", "--what", "cce-gap", "--game", "g.json", "--cce", "nf.json"]));
        for p in 0..3 {
            assert!((v["gaps"][p].as_f64().unwrap() - row[4 + p]).abs() < 1e-12);
            assert!((row[1 + p] - 40.0 * row[4 + p]).abs() < 1e-9);
        }
    }
    assert_eq!(
        bin(dir.path(), &["learn", "--game", "g.json", "--alg", "mwu", "--lift", "2", "--iters", "4", "--out", "x.json"]).status.code(),
        Some(2)
    );
}

#[test]
fn density_bench_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path(), &["--format", "csv", "--threads", "2", "density-bench", "--seeds", "5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "seed,H,E,mean_tv,bound");
    assert_eq!(lines.len(), 6);
    for (i, l) in lines[1..].iter().enumerate() {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(f[0], i.to_string());
        assert_eq!((f[1], f[2]), ("64", "32"));
        let bound: f64 = f[4].parse().unwrap();
        assert!((bound - (32f64.ln() / 64.0).sqrt()).abs() < 1e-15);
    }
}

#[test]
fn pipeline_theorem_policy_is_flagged_vacuous() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = PipelineSpec::new(
        GameSource::Named {
            name: "matching_pennies".into(),
            m: None,
            seed: None,
        },
        2,
        dir.path(),
    );
    spec.iterations = 20;
    let r = run_pipeline(&spec).unwrap();
    assert_eq!(r.exit_code, 0);
    assert!(r.manifest.threshold.vacuous);
    assert!(r.manifest.threshold.threshold >= 2.0);
    assert_eq!(r.manifest.outcome, "found");
    for f in ["game.json", "lifted.json", "cce.json", "metrics.csv", "extraction.json", "manifest.json", "timings.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let m: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["threshold"]["vacuous"], true);
    assert_eq!(m["spec"]["seed"], 0);
    assert_eq!(m["artifacts"].as_array().unwrap().len(), 5);
}

#[test]
fn pipeline_with_injected_exact_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let lg = lift(&StandardGame::MatchingPennies.build(), 2).unwrap();
    let u = MixedStrategy::uniform(2);
    let mu = SparseCorrelated::uniform(vec![stationary_nash_component(&lg, &u, &u)]).unwrap();
    let cce = dir.path().join("injected.json");
    std::fs::write(&cce, serde_json::to_string(&mu).unwrap()).unwrap();

    let out = dir.path().join("bundle");
    let mut spec = PipelineSpec::new(
        GameSource::Named {
            name: "matching_pennies".into(),
            m: None,
            seed: None,
        },
        2,
        &out,
    );
    spec.threshold = ThresholdPolicy::Explicit(1e-6);
    spec.inject_cce = Some(cce);
    let r = run_pipeline(&spec).unwrap();
    assert_eq!(r.exit_code, 0);
    assert!(!r.manifest.threshold.vacuous);
    assert_eq!(r.extraction.found_profile(), Some(&[u.clone(), u]));
}

#[test]
fn pipeline_budget_refused_before_lifting() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path(), &["--out-dir", "b", "pipeline", "--game", "random_bimatrix", "--m", "3", "--lift", "4"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(!dir.path().join("b/lifted.json").exists());
}

#[test]
fn pipeline_binary_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |d: &str| {
        let out = bin(dir.path(), &["--seed", "5", "--out-dir", d, "pipeline", "--game", "random_bimatrix", "--m", "2", "--lift", "2", "--iters", "8", "--threshold", "0.3"]);
        assert!(matches!(out.status.code(), Some(0) | Some(3)));
        sparse_cce_cli::pipeline::bundle_hashes(&dir.path().join(d)).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}
