use sigma2lab::report::Report;
use std::path::Path;
use std::process::{Command, Output};

fn sigma2lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigma2lab")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn identities_suite_passes_and_writes_a_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "suite = \"identities\"\n[samples]\nidentities = 20\n");
    let out = tmp.path().join("out");
    let o = sigma2lab(&["verify", "--config", &cfg, "--seed", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report = Report::from_jsonl(&std::fs::read_to_string(out.join("report.jsonl")).unwrap()).unwrap();
    assert!(report.all_pass());
    assert_eq!(report.environment.seed, 7);
    assert!(report.records.iter().all(|r| !r.formula.is_empty()));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.lines().last().unwrap().contains("0 failed"));
    assert!(out.join("config.toml").exists());
}

#[test]
fn potentials_for_one_model() {
    let o = sigma2lab(&["verify", "--suite", "potentials", "--model", "sphere", "--n", "3", "--radius", "0.7853981633974483"]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("potential/sphere3/r0.785398/interior"));
    assert!(stdout.contains("2 checks, 2 passed"));
}

#[test]
fn empty_config_is_a_parse_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "empty.toml", "");
    let o = sigma2lab(&["verify", "--config", &cfg]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("suite"));
}

#[test]
fn bad_tolerance_override_is_a_parse_error() {
    assert_eq!(code(&sigma2lab(&["verify", "--suite", "identities", "--tol-override", "identity"])), 2);
    assert_eq!(code(&sigma2lab(&["verify", "--suite", "identities", "--tol-override", "nope=1"])), 2);
}

#[test]
fn bad_thread_count_is_a_parse_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_sigma2lab"))
        .args(["verify", "--suite", "identities"])
        .env("SIGMA2LAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn tightened_tolerance_fails_with_exit_1() {
    let o = sigma2lab(&["verify", "--suite", "potentials", "--model", "hyperbolic", "--radius", "1", "--tol-override", "potential=0"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8(o.stdout).unwrap().contains("FAIL"));
}

#[test]
fn numeric_failure_names_the_check() {
    // the sphere potential does not exist on the hemisphere
    let o = sigma2lab(&["verify", "--suite", "potentials", "--model", "sphere", "--radius", "1.5707963267948966"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("potential/sphere3/r1.570796"));
}

#[test]
fn report_rerenders_and_rejects_garbage() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = sigma2lab(&["verify", "--suite", "potentials", "--model", "hyperbolic", "--radius", "0.5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let path = out.join("report.jsonl");
    let r = sigma2lab(&["report", path.to_str().unwrap()]);
    assert_eq!(code(&r), 0);
    assert_eq!(r.stdout, o.stdout);
    let bad = write(tmp.path(), "bad.jsonl", "{\"kind\":\"check\"}\n");
    assert_eq!(code(&sigma2lab(&["report", &bad])), 2);
}

#[test]
fn spectrum_writes_a_sweep() {
    let o = sigma2lab(&["spectrum", "--model", "hyperbolic", "--n", "3", "--radius", "2", "--grid", "64"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("radius"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), sigma2lab::checks::SWEEP_POINTS);
    assert!(rows.windows(2).all(|w| w[1][1] < w[0][1]), "λ₁ decreases with the radius");
}

#[test]
fn fixed_seed_reports_are_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "suite = \"variations\"\n[samples]\nlinearization = 6\nsecond_variation = 3\ntt_bumps = 1\n");
    let mut texts = Vec::new();
    for d in ["a", "b"] {
        let out = tmp.path().join(d);
        let o = sigma2lab(&["verify", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
        texts.push(sigma2lab::report::without_timestamp(&std::fs::read_to_string(out.join("report.jsonl")).unwrap()));
    }
    assert_eq!(texts[0], texts[1]);
}
