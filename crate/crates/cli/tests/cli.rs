use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn tiediv(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tiediv"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .unwrap()
}

fn with_fixture<'a>(command: &'a str, extra: &[&'a str]) -> Vec<String> {
    let mut args = vec![
        command.to_string(),
        "--gps".into(),
        fixture("mini_gps.csv").display().to_string(),
        "--survey".into(),
        fixture("mini_survey.csv").display().to_string(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    args
}

fn run_ok(args: &[String], out: &Path) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = tiediv(&refs, out);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

/// Data rows of a `#`-annotated artifact.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn header_line(path: &Path, prefix: &str) -> Option<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .find(|l| l.starts_with(prefix))
        .map(str::to_string)
}

#[test]
fn staged_run_matches_all() {
    let (staged, whole) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_ok(&with_fixture("ingest", &[]), staged.path());
    for stage in [
        "preprocess",
        "encounters",
        "features",
        "compare",
        "sweep-t",
        "sweep-q",
        "subgroups",
        "evolve",
    ] {
        run_ok(&[stage.to_string()], staged.path());
    }
    run_ok(&with_fixture("all", &[]), whole.path());
    for name in [
        "clean_fixes.csv",
        "encounters.csv",
        "features.csv",
        "compare.csv",
        "sweep_t.csv",
        "evolution.csv",
    ] {
        assert_eq!(
            fs::read(staged.path().join(name)).unwrap(),
            fs::read(whole.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn missing_upstream_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = tiediv(&["sweep-t"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("run encounters first"));
    let o = tiediv(&["compare"], dir.path());
    assert!(String::from_utf8_lossy(&o.stderr).contains("run features first"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(tiediv(&["ingest"], dir.path()).status.code(), Some(2));
    assert_eq!(
        tiediv(&["synth", "--width-t", "7"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        tiediv(&["synth", "--min-days", "many"], dir.path())
            .status
            .code(),
        Some(2)
    );
    let o = tiediv(&["synth", "--synth-encounters-per-day", "500"], dir.path());
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn ingest_reports_rejected_rows() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&with_fixture("ingest", &[]), dir.path());
    let rejected = rows(&dir.path().join("rejections.csv"));
    let reasons: Vec<&str> = rejected.iter().map(|r| r[2].as_str()).collect();
    assert_eq!(
        reasons,
        ["lat out of range", "duplicate header", "self-rating"]
    );
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "threshold-m = 30\nwidth-t = 120\n").unwrap();
    let args = with_fixture(
        "all",
        &["--config", conf.to_str().unwrap(), "--threshold-m", "40"],
    );
    run_ok(&args, dir.path());
    let features = dir.path().join("features.csv");
    assert_eq!(
        header_line(&features, "# config.threshold-m=").unwrap(),
        "# config.threshold-m=40"
    );
    assert_eq!(
        header_line(&features, "# config.width-t=").unwrap(),
        "# config.width-t=120"
    );
    assert!(header_line(&features, "# input.encounters.csv=sha256:").is_some());
}

#[test]
fn synth_is_seeded() {
    let (a, b, c) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    let args = |seed: &str| {
        vec![
            "synth".to_string(),
            "--synth-pairs".into(),
            "5".into(),
            "--seed".into(),
            seed.into(),
        ]
    };
    run_ok(&args("7"), a.path());
    run_ok(&args("7"), b.path());
    run_ok(&args("8"), c.path());
    let gps = |d: &Path| fs::read(d.join("synth_gps.csv")).unwrap();
    assert_eq!(gps(a.path()), gps(b.path()));
    assert_ne!(gps(a.path()), gps(c.path()));
}

#[test]
fn synthetic_run_ranks_temporal_diversity_first() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &["synth".to_string(), "--synth-pairs".into(), "15".into()],
        dir.path(),
    );
    let gps = dir.path().join("synth_gps.csv").display().to_string();
    let survey = dir.path().join("synth_survey.csv").display().to_string();
    run_ok(
        &[
            "all".to_string(),
            "--gps".into(),
            gps,
            "--survey".into(),
            survey,
        ],
        dir.path(),
    );
    let compare = rows(&dir.path().join("compare.csv"));
    assert_eq!(compare[0][0], "1");
    assert_eq!(compare[0][1], "Temporal Diversity");
    let truth = rows(&dir.path().join("synth_truth.csv"));
    assert_eq!(truth.len(), 30);
}
