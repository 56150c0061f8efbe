use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_erasure-bc"));
    c.env_remove("ERASURE_BC_OUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("erasure-bc-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

#[test]
fn region_dd_outer_has_symmetric_corner() {
    let out = run(&["region", "--scenario", "dd-outer", "--delta1", "0.5", "--delta2", "0.5", "--eps1", "0.5", "--eps2", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("label,r1,r2\n"));
    assert!(text.lines().any(|l| {
        let f: Vec<&str> = l.split(',').collect();
        f.len() == 3
            && f[1].parse::<f64>().is_ok_and(|x| (x - 0.375).abs() < 1e-12)
            && f[2].parse::<f64>().is_ok_and(|y| (y - 0.375).abs() < 1e-12)
    }), "{text}");
}

#[test]
fn region_nn_nonblind_example_corner() {
    let third = (1.0f64 / 3.0).to_string();
    let (e1, e2) = ((2.0f64 / 3.0).to_string(), (1.0f64 / 6.0).to_string());
    let out = run(&["region", "--scenario", "nn-nonblind", "--delta1", &third, "--delta2", "0.5", "--eps1", &e1, "--eps2", &e2]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("0.36363636363636"), "{text}");
    assert!(text.contains("0.45454545454545"), "{text}");
}

#[test]
fn invalid_probability_writes_nothing() {
    let dir = scratch("invalid");
    let path = dir.join("r.csv");
    let out = run(&[
        "region", "--scenario", "dd-outer", "--delta1", "0.5", "--delta2", "0.5", "--eps1", "1.5", "--eps2", "0.5",
        "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    assert!(!path.exists());
}

#[test]
fn case_b_rejects_partial_cache_at_rx1() {
    let out = run(&[
        "simulate", "--protocol", "case-b", "--delta1", "0.5", "--delta2", "0.5", "--eps1", "0.2", "--eps2", "0.5",
        "--m", "100", "--trials", "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_figure_fails() {
    let dir = scratch("unknown");
    let out = run(&["figure", "--figure", "7", "--out", dir.to_str().unwrap()]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn simulate_json_is_reproducible() {
    let args = [
        "simulate", "--protocol", "case-b", "--delta1", "0.5", "--delta2", "0.5", "--eps1", "0", "--eps2", "0.5",
        "--m", "2000", "--trials", "4", "--seed", "11",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(matches!(a.status.code(), Some(0) | Some(2)));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["flags"]["seed"], 11);
    assert_eq!(v["stats"]["trials"], 4);
}

#[test]
fn config_file_supplies_missing_flags_and_flags_win() {
    let dir = scratch("config");
    let conf = dir.join("run.conf");
    std::fs::write(&conf, "# symmetric channel\nscenario = dd-outer\ndelta1 = 0.5\ndelta2 = 0.5\neps1 = 0.9\neps2 = 0.5\n").unwrap();
    let from_file = run(&["--config", conf.to_str().unwrap(), "region", "--eps1", "0.5"]);
    let from_flags = run(&["region", "--scenario", "dd-outer", "--delta1", "0.5", "--delta2", "0.5", "--eps1", "0.5", "--eps2", "0.5"]);
    assert_eq!(from_file.status.code(), Some(0));
    assert_eq!(from_file.stdout, from_flags.stdout);
}

#[test]
fn figures_match_golden_csvs() {
    for id in ["2", "3a", "3b", "4a", "4b", "5"] {
        let dir = scratch(&format!("fig{id}"));
        let out = run(&["figure", "--figure", id, "--out", dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "figure {id}");
        let mut files: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        assert!(!files.is_empty());
        for f in files {
            let name = f.file_name().unwrap();
            let golden = std::fs::read(fixtures().join(name))
                .unwrap_or_else(|_| panic!("missing fixture {}", name.to_string_lossy()));
            assert_eq!(std::fs::read(&f).unwrap(), golden, "{}", name.to_string_lossy());
        }
    }
}

#[test]
fn figure_output_dir_from_environment() {
    let dir = scratch("env");
    let out = bin().args(["figure", "--figure", "5"]).env("ERASURE_BC_OUT_DIR", &dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.join("fig5_inner.csv").exists() && dir.join("fig5_outer.csv").exists());
}

#[test]
fn figure_five_has_a_gap() {
    let dir = scratch("gap");
    run(&["figure", "--figure", "5", "--out", dir.to_str().unwrap()]);
    let read = |f: &str| std::fs::read_to_string(dir.join(f)).unwrap();
    assert_ne!(read("fig5_inner.csv").lines().skip(1).map(|l| l.split_once(',').unwrap().1.to_string()).collect::<Vec<_>>(),
               read("fig5_outer.csv").lines().skip(1).map(|l| l.split_once(',').unwrap().1.to_string()).collect::<Vec<_>>());
}
