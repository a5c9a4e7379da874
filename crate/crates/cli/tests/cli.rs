use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str], config: &Path, out: &Path) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_lievortex"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .status()
        .expect("binary runs");
    status.code().expect("exited normally")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn free_top_writes_schema_and_conserves_momentum() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["simulate"], &fixture("free_top_so3.toml"), dir.path()), 0);
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "t,g1_1,g1_2,g1_3,g2_1,g2_2,g2_3,g3_1,g3_2,g3_3,m1_2,m1_3,m2_3,drift_momentum,drift_energy,drift_orthogonality"
    );
    assert_eq!(csv.lines().count(), 1 + 101);
    let summary = read_json(&dir.path().join("summary.json"));
    assert!(summary["max_drift"]["momentum"].as_f64().unwrap() <= 1e-8);
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["config"]["operator"]["u"], serde_json::json!([1.0, 2.0, 3.0]));
}

#[test]
fn identical_configs_give_identical_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        assert_eq!(run(&["simulate"], &fixture("manakov_so4.toml"), d.path()), 0);
    }
    for f in ["trajectory.csv", "summary.json", "manifest.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_override_changes_random_initial_state() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(run(&["simulate"], &fixture("manakov_so4.toml"), a.path()), 0);
    assert_eq!(run(&["simulate", "--seed", "8"], &fixture("manakov_so4.toml"), b.path()), 0);
    let ea = read_json(&a.path().join("summary.json"))["endpoint"].clone();
    let eb = read_json(&b.path().join("summary.json"))["endpoint"].clone();
    assert_ne!(ea, eb);
    assert_eq!(read_json(&b.path().join("manifest.json"))["config"]["seed"], 8);
}

#[test]
fn vortex_fixture_is_a_two_torus() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["vortex"], &fixture("vortex_so4.toml"), dir.path()), 0);
    let r = read_json(&dir.path().join("vortex_report.json"));
    assert_eq!(r["dimension"], 2);
    assert_eq!(r["manifold_dimension"], 2);
    assert_eq!(r["abelian"], true);
    for c in r["recurrence"].as_array().unwrap() {
        assert!((c["period"].as_f64().unwrap() - std::f64::consts::TAU).abs() < 1e-6);
    }
}

#[test]
fn steered_signal_replays_through_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let steer_out = dir.path().join("steer");
    assert_eq!(run(&["steer"], &fixture("steer_so3.toml"), &steer_out), 0);
    let result = read_json(&steer_out.join("steer_result.json"));
    assert_eq!(result["reached"], true);
    assert!(result["distance"].as_f64().unwrap() <= 1e-2);
    let problem = read_json(&steer_out.join("steer_problem.json"));
    assert_eq!(problem["seed"], 1);

    let mut replay =
        fs::read_to_string(fixture("steer_so3.toml")).unwrap().replace("command = \"steer\"", "command = \"simulate\"");
    replay = replay.replace("horizon = 10.0", "horizon = 10.0\nsignal = \"steer/steer_result.json\"");
    let cfg = dir.path().join("replay.toml");
    fs::write(&cfg, replay).unwrap();
    let sim_out = dir.path().join("replay");
    assert_eq!(run(&["simulate"], &cfg, &sim_out), 0);
    let replayed = floats(&read_json(&sim_out.join("summary.json"))["endpoint"]);
    let recorded = floats(&result["endpoint"]);
    let gap = replayed.iter().zip(&recorded).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap <= 1e-10, "{gap}");
    let rows = fs::read_to_string(sim_out.join("trajectory.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 21);
}

#[test]
fn rank_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["rank-check"], &fixture("rank_so3_single.toml"), &dir.path().join("a")), 0);
    let r = read_json(&dir.path().join("a/rank_report.json"));
    assert_eq!(r["min_rank"], 3);
    assert_eq!(r["points"].as_array().unwrap().len(), 100);

    assert_eq!(run(&["rank-check"], &fixture("rank_so3_principal.toml"), &dir.path().join("b")), 0);
    assert!(read_json(&dir.path().join("b/rank_report.json"))["min_rank"].as_u64().unwrap() < 3);

    assert_eq!(run(&["rank-check"], &fixture("rank_two_generators_so4.toml"), &dir.path().join("c")), 0);
    assert_eq!(read_json(&dir.path().join("c/rank_report.json"))["two_generator"]["generates"], true);

    assert_eq!(run(&["rank-check"], &fixture("planar_cosine.toml"), &dir.path().join("d")), 0);
    assert_eq!(read_json(&dir.path().join("d/rank_report.json"))["report"]["rank"], 2);
}

#[test]
fn nonanalytic_contrast() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["transversality"], &fixture("transversality_nonanalytic.toml"), dir.path()), 0);
    let r = read_json(&dir.path().join("transversality_report.json"));
    assert_eq!(r["bracket_rank"], 1);
    assert_eq!(r["transversal"], true);
    assert_eq!(r["g_analytic"], false);
}

#[test]
fn chaplygin_and_stiefel_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["chaplygin"], &fixture("chaplygin_ball.toml"), &dir.path().join("c")), 0);
    let s = read_json(&dir.path().join("c/summary.json"));
    assert!(s["max_drift"]["norm"].as_f64().unwrap() <= 1e-8);
    assert!(s["max_drift"]["projection"].as_f64().unwrap() <= 1e-8);

    assert_eq!(run(&["stiefel"], &fixture("stiefel_so4.toml"), &dir.path().join("s")), 0);
    let s = read_json(&dir.path().join("s/summary.json"));
    assert!(s["max_gram_drift"].as_f64().unwrap() <= 1e-8);
    let header = fs::read_to_string(dir.path().join("s/stiefel.csv")).unwrap().lines().next().unwrap().to_string();
    assert!(header.starts_with("t,x1_1,x1_2,x1_3,x1_4,x2_1"));
    assert!(header.ends_with("gram_drift,sigma1,sigma2,sigma3,sigma4"));
}

#[test]
fn transfer_fixture_passes_the_diagram() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["transfer"], &fixture("transfer_so3.toml"), dir.path()), 0);
    let r = read_json(&dir.path().join("transfer_report.json"));
    assert_eq!(r["passed"], true);
    assert_eq!(r["entries"].as_array().unwrap().len(), 3);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "command = \"simulate\"\nn = 3\n[operator]\nkind = \"manakov\"\nu = [1.0, 2.0]\n[momentum]\ncoords = [0.1, 0.2, 0.3]\n").unwrap();
    assert_eq!(run(&["simulate"], &bad, &dir.path().join("o")), 2);
    fs::write(&bad, "n = 3\nbogus = 1\n").unwrap();
    assert_eq!(run(&["simulate"], &bad, &dir.path().join("o")), 2);
    assert_eq!(run(&["vortex"], &fixture("free_top_so3.toml"), &dir.path().join("o")), 2);
    assert_eq!(run(&["simulate"], &dir.path().join("missing.toml"), &dir.path().join("o")), 2);
    let unseeded = fs::read_to_string(fixture("manakov_so4.toml")).unwrap().replace("seed = 7\n", "");
    fs::write(&bad, unseeded).unwrap();
    assert_eq!(run(&["simulate"], &bad, &dir.path().join("o")), 2);
}

#[test]
fn drift_budget_exceeded_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.toml");
    let text = fs::read_to_string(fixture("free_top_so3.toml"))
        .unwrap()
        .replace("drift_budget = 1e-8", "drift_budget = 1e-30");
    fs::write(&cfg, text).unwrap();
    assert_eq!(run(&["simulate"], &cfg, &dir.path().join("o")), 3);
}
