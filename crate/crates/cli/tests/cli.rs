use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ctgame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctgame")).args(args).output().expect("binary runs")
}

fn generate(dir: &Path, name: &str, args: &[&str]) -> String {
    let out = ctgame(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let path = dir.join(name);
    std::fs::write(&path, &out.stdout).unwrap();
    path.display().to_string()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json report")
}

#[test]
fn guess_passes_on_dyadic_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = generate(dir.path(), "d3.json", &["generate", "dyadic", "--n", "3"]);
    let out = ctgame(&["guess", "--model", &model, "--eps", "0.2"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["pass"], true);
    assert_eq!(report["config"]["eps"][0], "1/5");
    assert_eq!(report["cases"][0]["bounds"]["prop1"], true);
}

#[test]
fn usage_and_parse_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let model = generate(dir.path(), "c.json", &["generate", "constant-sections"]);
    assert_eq!(ctgame(&["guess", "--model", &model, "--eps", ""]).status.code(), Some(2));
    assert_eq!(ctgame(&["guess", "--model", &model, "--eps", "0.7"]).status.code(), Some(2));
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"label\": \"x\",\n \"atoms\": [}").unwrap();
    let out = ctgame(&["guess", "--model", broken.to_str().unwrap(), "--eps", "0.2"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    let strategy = generate(dir.path(), "pc.json", &["generate", "catalog", "pure-constant"]);
    assert_eq!(ctgame(&["ctmp", "--strategy", &strategy, "--eps", "0.2", "--r", "0"]).status.code(), Some(2));
    let text = std::fs::read_to_string(&strategy).unwrap().replace("\"constant\"", "\"mystery\"");
    std::fs::write(&strategy, text).unwrap();
    assert_eq!(ctgame(&["ctmp", "--strategy", &strategy, "--eps", "0.2", "--r", "1"]).status.code(), Some(2));
}

#[test]
fn ctmp_grid_switcher_and_role_swap() {
    let dir = tempfile::tempdir().unwrap();
    for (player, me) in [("aqua", "bard"), ("bard", "aqua")] {
        let spec = generate(dir.path(), "gs.json", &["generate", "catalog", "grid-switcher", "--player", player]);
        let out = ctgame(&["ctmp", "--strategy", &spec, "--eps", "0.1", "--r", "1"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let report = json(&out);
        assert_eq!(report["cases"][0]["result"]["me"], me);
        assert!(report["cases"][0]["result"]["gamma"].as_f64().unwrap() > 0.9);
    }
}

#[test]
fn sweep_writes_matching_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let model = generate(dir.path(), "d3.json", &["generate", "dyadic", "--n", "3"]);
    let out_dir = dir.path().join("out");
    let out = ctgame(&[
        "sweep", "--model", &model, "--eps", "0.2,0.1,0.05,0.02,0.1", "--out", out_dir.to_str().unwrap(), "--format", "both",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate eps 1/10"));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("sweep.json")).unwrap()).unwrap();
    let csv = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    for (row, case) in rows.iter().zip(report["cases"].as_array().unwrap()) {
        let expected = format!(
            "{},{},{}",
            case["eps"].as_str().unwrap(),
            case["expected_payoff"].as_str().unwrap(),
            case["one_minus_3eps"].as_str().unwrap()
        );
        assert_eq!(*row, expected);
    }
    assert!(out_dir.join("sweep.meta.json").exists());
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let model = generate(dir.path(), "p.json", &["generate", "piecewise", "--max-pieces", "4", "--atoms", "20", "--seed", "7"]);
    let args = ["guess", "--model", &model, "--eps", "0.2", "--mode", "mc", "--samples", "500", "--seed", "3"];
    let a = ctgame(&args);
    let b = ctgame(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(json(&a)["cases"][0]["expected_payoff"]["radius"].as_f64().unwrap() > 0.0);
}

#[test]
fn verify_detects_injected_cheater() {
    let honest = ctgame(&["verify", "--samples", "40", "--seed", "1"]);
    assert_eq!(honest.status.code(), Some(0), "{}", String::from_utf8_lossy(&honest.stderr));
    let again = ctgame(&["verify", "--samples", "40", "--seed", "1"]);
    assert_eq!(honest.stdout, again.stdout);
    let cheat = ctgame(&["verify", "--samples", "40", "--seed", "1", "--inject-cheater"]);
    assert_eq!(cheat.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&cheat.stderr).contains("FAIL information-flow"));
}
