use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn isomon(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isomon"))
        .args(args)
        .current_dir(dir)
        .env_remove("ISOMON_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn identities_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = isomon(dir.path(), &["identities", "--tau", "0+1i", "--points", "100", "--seed", "7", "--out", "a"]);
    assert_eq!(code(&ok), 0, "{}", stdout(&ok));
    let rep = json(&dir.path().join("a/identities.json"));
    assert_eq!(rep["schema"], 1);
    assert_eq!(rep["config"]["points"], 100);
    assert_eq!(rep["identities"].as_array().unwrap().len(), 21);
    let csv = std::fs::read_to_string(dir.path().join("a/identities.csv")).unwrap();
    assert!(csv.starts_with("kind,name,points,max_residual,tolerance,passed\n"));
    assert_eq!(csv.lines().count(), 1 + 21 + 3);

    let lower = isomon(dir.path(), &["identities", "--tau", "0-1i", "--out", "b"]);
    assert_eq!(code(&lower), 1);
    assert!(!dir.path().join("b").exists());
    let strict = isomon(dir.path(), &["identities", "--tolerance", "1e-30", "--points", "5", "--out", "c"]);
    assert_eq!(code(&strict), 2);
    assert_eq!(json(&dir.path().join("c/identities.json"))["passed"], false);
}

#[test]
fn usage_errors_and_help() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&isomon(dir.path(), &["identities", "--tau", "one"])), 1);
    assert_eq!(code(&isomon(dir.path(), &["lax-check", "--model", "c-vector"])), 1);
    assert_eq!(code(&isomon(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&isomon(dir.path(), &["evolve", "--mode", "both"])), 1);
    assert_eq!(code(&isomon(dir.path(), &["monodromy", "--tau-path", "i:-0.5i"])), 1);
    let help = isomon(dir.path(), &["--help"]);
    assert_eq!(code(&help), 0);
    assert!(stdout(&help).contains("lax-check"));
    let list = isomon(dir.path(), &["identities", "--list"]);
    assert_eq!(code(&list), 0);
    assert_eq!(stdout(&list).lines().count(), 21);
}

#[test]
fn config_file_sits_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.json"), r#"{"tau": "0.3+0.8i", "points": 3, "heat_points": 2, "out": "from-file"}"#)
        .unwrap();
    let o = isomon(dir.path(), &["identities", "--config", "run.json", "--points", "4"]);
    assert_eq!(code(&o), 0);
    let rep = json(&dir.path().join("from-file/identities.json"));
    assert_eq!(rep["config"]["points"], 4);
    assert_eq!(rep["config"]["heat_points"], 2);
    assert_eq!(rep["config"]["tau"], "0.3+0.8i");
    assert_eq!(rep["tau"], serde_json::json!([0.3, 0.8]));

    std::fs::write(dir.path().join("typo.json"), r#"{"pionts": 3}"#).unwrap();
    assert_eq!(code(&isomon(dir.path(), &["identities", "--config", "typo.json"])), 1);
    assert_eq!(code(&isomon(dir.path(), &["identities", "--config", "missing.json"])), 1);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |extra: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_isomon"))
            .args(["couplings", "--model", "bc", "--gs", "1", "--gl", "2"])
            .args(extra)
            .current_dir(dir.path())
            .env("ISOMON_OUT_DIR", "env-out")
            .output()
            .unwrap()
    };
    assert_eq!(code(&run(&[])), 0);
    assert!(dir.path().join("env-out/couplings.json").exists());
    assert_eq!(code(&run(&["--out", "flag-out"])), 0);
    assert!(dir.path().join("flag-out/couplings.json").exists());
    let plain = isomon(dir.path(), &["couplings"]);
    assert_eq!(code(&plain), 0);
    assert!(dir.path().join("isomon-out/couplings.json").exists());
}

#[test]
fn couplings_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = isomon(dir.path(), &["couplings", "--model", "bc", "--gs", "1", "--gl", "2", "--out", "c"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("g̃_s² = 2"), "{}", stdout(&o));
    let rep = json(&dir.path().join("c/couplings.json"));
    assert_eq!(rep["renormalized"]["values"]["gs_sq"], serde_json::json!([2.0, 0.0]));
    assert!(rep["inozemtsev"].is_null());
    let tw = isomon(dir.path(), &["couplings", "--model", "twisted-bc", "--rank", "1", "--out", "t"]);
    assert_eq!(code(&tw), 0);
    assert_eq!(json(&dir.path().join("t/couplings.json"))["inozemtsev"].as_array().unwrap().len(), 4);
}

#[test]
fn lax_check_examples() {
    let dir = tempfile::tempdir().unwrap();
    let o = isomon(dir.path(), &["lax-check", "--model", "twisted-bc", "--rank", "2", "--mode", "isomonodromic", "--out", "t"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let rep = json(&dir.path().join("t/lax-check.json"));
    let s = &rep["summaries"][0];
    assert!(s["max_isomonodromic"].as_f64().unwrap() < 1e-6);
    assert!(s["max_isospectral"].is_null());

    let trivial = isomon(dir.path(), &["lax-check", "--model", "a-vector", "--rank", "1", "--out", "a"]);
    assert_eq!(code(&trivial), 0);
    let rep = json(&dir.path().join("a/lax-check.json"));
    assert_eq!(rep["summaries"][0]["lax_dim"], 1);

    let spin = isomon(dir.path(), &["lax-check", "--model", "spin-sl", "--rank", "3", "--samples", "5", "--out", "s"]);
    assert_eq!(code(&spin), 0);
    let csv = std::fs::read_to_string(dir.path().join("s/lax-check.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "constraint").unwrap();
    assert_eq!(csv.lines().count(), 6);
    for line in csv.lines().skip(1) {
        assert!(line.split(',').nth(col).unwrap().parse::<f64>().unwrap() < 1e-12);
    }
}

#[test]
fn evolve_example_and_state_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = isomon(dir.path(), &["evolve", "--model", "a-vector", "--rank", "2", "--mode", "isospectral", "--t", "0..1", "--out", "e"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let rep = json(&dir.path().join("e/evolve.json"));
    assert!(rep["summary"]["hamiltonian_drift"].as_f64().unwrap() < 1e-9);
    let csv = std::fs::read_to_string(dir.path().join("e/evolve.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 11);
    assert!(csv.starts_with("s,time_re,time_im,tau_re,tau_im,q0_re"));

    // the initial state written by one run reproduces it when fed back
    std::fs::write(dir.path().join("s.json"), rep["initial_state"].to_string()).unwrap();
    let again = isomon(dir.path(), &["evolve", "--model", "a-vector", "--rank", "2", "--state", "s.json", "--seed", "99", "--out", "f"]);
    assert_eq!(code(&again), 0);
    let rep2 = json(&dir.path().join("f/evolve.json"));
    assert_eq!(rep["trajectory"], rep2["trajectory"]);

    let modulus = isomon(dir.path(), &["evolve", "--model", "bc", "--rank", "1", "--mode", "isomonodromic", "--out", "m"]);
    assert_eq!(code(&modulus), 0);
    assert_eq!(json(&dir.path().join("m/evolve.json"))["summary"]["conservation_expected"], false);
}

#[test]
fn collision_aborts_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // attractive coupling and colliding momenta
    std::fs::write(dir.path().join("s.json"), r#"{"q": [[0.1, 0.0], [-0.1, 0.0]], "p": [[-1.0, 0.0], [1.0, 0.0]]}"#).unwrap();
    let o = isomon(dir.path(), &["evolve", "--model", "a-vector", "--rank", "2", "--g", "0+1i", "--state", "s.json", "--out", "e"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let rep = json(&dir.path().join("e/evolve.json"));
    let s = rep["abort"]["s"].as_f64().unwrap();
    assert!(s > 0.0 && s < 0.2, "{s}");
    assert!(rep["abort"]["last_state"]["q"].is_array());
    assert!(!dir.path().join("e/evolve.csv").exists());
}

#[test]
fn singular_base_point_aborts_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = isomon(dir.path(), &["monodromy", "--model", "a-vector", "--rank", "2", "--z0", "0", "--checkpoints", "2", "--out", "m"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn monodromy_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = isomon(dir.path(), &["monodromy", "--model", "twisted-bc", "--rank", "1", "--tau-path", "i:i+0.1i", "--out", "m"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let rep = json(&dir.path().join("m/monodromy.json"));
    assert!(rep["drift"]["max_drift"].as_f64().unwrap() < 1e-5);
    assert_eq!(rep["census"].as_array().unwrap().len(), 4);
    assert_eq!(rep["monodromy"]["gamma_local"].as_array().unwrap().len(), 4);
    assert_eq!(rep["drift"]["checkpoints"].as_array().unwrap().len(), 5);
    let csv = std::fs::read_to_string(dir.path().join("m/monodromy-drift.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    let svg = std::fs::read_to_string(dir.path().join("m/monodromy-drift.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 3] = [
        &["lax-check", "--samples", "4", "--seed", "11", "--out", "o"],
        &["evolve", "--model", "spin-sl", "--rank", "3", "--seed", "5", "--out", "o"],
        &["monodromy", "--model", "a-vector", "--rank", "2", "--checkpoints", "2", "--control", "--out", "o"],
    ];
    for args in runs {
        assert_eq!(code(&isomon(dir.path(), args)), 0, "{args:?}");
        let snapshot = |d: &Path| {
            let mut files: Vec<_> = std::fs::read_dir(d).unwrap().map(|e| e.unwrap().path()).collect();
            files.sort();
            files.into_iter().map(|p| (p.clone(), std::fs::read(p).unwrap())).collect::<Vec<_>>()
        };
        let first = snapshot(&dir.path().join("o"));
        assert_eq!(code(&isomon(dir.path(), args)), 0);
        assert_eq!(first, snapshot(&dir.path().join("o")), "{args:?}");
        std::fs::remove_dir_all(dir.path().join("o")).unwrap();
    }
}
