//! Workspace commands end to end on the smoke spec, plus CLI exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

use headprune::runner::{load_spec, report, CommandKind, Outcome, ReportKind, ReportSpec, Workspace};
use headprune::Error;

fn smoke() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("specs/smoke.toml")
}

#[test]
fn recorded_spec_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = load_spec(&smoke(), None).unwrap();
    let ws = Workspace::new(tmp.path());
    ws.run(CommandKind::GenData, &spec).unwrap();
    let err = ws.run(CommandKind::GenData, &spec).unwrap_err();
    assert!(matches!(err, Error::Validation(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
    ws.clone().with_force(true).run(CommandKind::GenData, &spec).unwrap();
    assert_eq!(ws.results().unwrap().len(), 2);
    assert_eq!(ws.runs().unwrap().len(), 2);
}

#[test]
fn sweep_without_ranking_is_a_missing_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = load_spec(&smoke(), None).unwrap();
    let ws = Workspace::new(tmp.path());
    ws.run(CommandKind::GenData, &spec).unwrap();
    let err = ws.run(CommandKind::Sweep, &spec).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
}

#[test]
fn correlation_report_reproduces_the_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = load_spec(&smoke(), None).unwrap();
    spec.source_languages = vec!["xa".into(), "xz".into()];
    spec.train.epochs = 1;
    let ws = Workspace::new(tmp.path());
    for cmd in [CommandKind::GenData, CommandKind::Rank, CommandKind::Correlate] {
        ws.run(cmd, &spec).unwrap();
    }
    let on_disk = std::fs::read_to_string(ws.correlation_csv_path(&spec)).unwrap();
    let text = report(&ws.results().unwrap(), &ReportSpec { kind: ReportKind::Correlation, ..Default::default() }).unwrap();
    assert_eq!(text, on_disk);
    assert_eq!(on_disk.lines().count(), 3);
}

#[test]
fn seed_override_changes_the_hash() {
    let a = load_spec(&smoke(), None).unwrap();
    let b = load_spec(&smoke(), Some(8)).unwrap();
    assert_eq!(b.seed, 8);
    assert_ne!(a.hash(), b.hash());
}

#[test]
fn sweep_records_unpruned_and_best() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = load_spec(&smoke(), None).unwrap();
    let ws = Workspace::new(tmp.path());
    for cmd in [CommandKind::GenData, CommandKind::Rank, CommandKind::Sweep] {
        ws.run(cmd, &spec).unwrap();
    }
    let last = ws.results().unwrap().pop().unwrap();
    let Outcome::Sweep { sweep } = last.outcome else { panic!("expected a sweep") };
    assert_eq!(sweep.per_k_scores.len(), spec.prune_limit + 1);
    assert!(sweep.best_score >= sweep.unpruned_score());
    let md = report(&ws.results().unwrap(), &ReportSpec::default()).unwrap();
    assert!(md.starts_with("| Task | SL | TL |"), "{md}");
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_headprune")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(cli(&["rank", "--out", out]).status.code(), Some(2));
    assert_eq!(cli(&["rank", "--spec", "/nonexistent/spec.toml", "--out", out]).status.code(), Some(3));
    let spec = smoke();
    let gen = cli(&["gen-data", "--spec", spec.to_str().unwrap(), "--out", out]);
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    assert!(String::from_utf8_lossy(&gen.stdout).contains("xa"));
    assert_eq!(cli(&["gen-data", "--spec", spec.to_str().unwrap(), "--out", out]).status.code(), Some(2));
}
