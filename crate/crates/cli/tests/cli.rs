use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hypodb_cli::state::State;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn hypodb(state: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypodb"))
        .arg("--state")
        .arg(state)
        .args(args)
        .env_remove("HYPODB_STATE")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn built() -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let state = dir.path().join("state.json");
    let manifest = fixture("fall/project.toml");
    let o = hypodb(&state, &["build", manifest.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    (dir, state)
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

#[test]
fn build_reports_schemes_and_writes_state() {
    let (_dir, state) = built();
    let loaded = State::load(&state).unwrap();
    assert_eq!(loaded.current, loaded.baseline);
    assert_eq!(loaded.current.world.len(), 7);
    assert!(loaded.current.history.is_empty());
}

#[test]
fn query_ranks_fourteen_positions() {
    let (_dir, state) = built();
    let o = hypodb(&state, &["query", "--attr", "s", "--at", "t=3", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<serde_json::Value> = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(rows.len(), 14);
    let total: f64 = rows.iter().map(|r| r["prior"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);

    let table = hypodb(&state, &["query", "--attr", "s", "--at", "t=3"]);
    assert!(table.status.success());
    assert!(stdout(&table).lines().count() >= 14);
}

#[test]
fn unnormalized_priors_are_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let project = dir.path().join("fall");
    copy_dir(&fixture("fall"), &project);
    let manifest = project.join("project.toml");
    let text = std::fs::read_to_string(&manifest).unwrap().replace("conf = 0.6", "conf = 0.5");
    std::fs::write(&manifest, text).unwrap();

    let state = dir.path().join("state.json");
    let o = hypodb(&state, &["build", manifest.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains('1') && err.contains("0.9"), "{err}");
    assert!(!state.exists());
}

#[test]
fn invalid_sigma_and_unknown_attribute_exit_codes() {
    let (_dir, state) = built();
    let o = hypodb(&state, &["observe", "--attr", "s", "--at", "t=3", "--y", "2300", "--sigma", "0"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = hypodb(&state, &["observe", "--attr", "s", "--at", "t=3", "--y", "2300", "--sigma", "-5"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = hypodb(&state, &["query", "--attr", "z", "--at", "t=3"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let o = hypodb(&state, &["query", "--phi", "9", "--attr", "s", "--at", "t=3"]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn missing_state_file_fails() {
    let dir = TempDir::new().unwrap();
    let o = hypodb(&dir.path().join("absent.json"), &["query", "--attr", "s", "--at", "t=3"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn dry_run_leaves_the_state_untouched() {
    let (_dir, state) = built();
    let before = std::fs::read(&state).unwrap();
    let o = hypodb(&state, &["observe", "--attr", "s", "--at", "t=3", "--y", "2300", "--sigma", "400", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["committed"], false);
    assert!(v["rows"].as_array().unwrap().iter().all(|r| r["posterior"].is_number()));
    assert_eq!(std::fs::read(&state).unwrap(), before);
}

#[test]
fn commit_history_and_reset() {
    let (_dir, state) = built();
    let before = std::fs::read(&state).unwrap();
    let o = hypodb(&state, &["observe", "--attr", "s", "--at", "t=3", "--y", "2300", "--sigma", "400", "--commit"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("committed as step 1"));

    let loaded = State::load(&state).unwrap();
    assert_eq!(loaded.current.history.len(), 1);
    assert_ne!(loaded.current, loaded.baseline);

    let h = hypodb(&state, &["history", "--format", "json"]);
    let steps: Vec<serde_json::Value> = serde_json::from_str(&stdout(&h)).unwrap();
    assert_eq!(steps.len(), 1);
    assert_eq!(steps[0]["step"], 1);

    let o = hypodb(&state, &["reset"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("discarded 1"));
    assert_eq!(std::fs::read(&state).unwrap(), before);
}

#[test]
fn rebuilding_replaces_conditioned_state() {
    let (_dir, state) = built();
    let o = hypodb(&state, &["observe", "--attr", "s", "--at", "t=3", "--y", "2300", "--sigma", "400", "--commit"]);
    assert!(o.status.success());
    let manifest = fixture("fall/project.toml");
    let o = hypodb(&state, &["build", manifest.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(State::load(&state).unwrap().current.history.is_empty());
}

#[test]
fn persisted_state_answers_queries_identically() {
    let (_dir, state) = built();
    let manifest = fixture("fall/project.toml");
    let project = hypodb_cli::manifest::LoadedManifest::load(&manifest).unwrap().project().unwrap();
    let fresh = hypodb_core::build(&project).unwrap();
    let loaded = State::load(&state).unwrap();
    assert_eq!(loaded.current, fresh);

    for (attr, at) in [("s", Some(3.0)), ("v", Some(2.0)), ("a", None)] {
        let dims = at.map(|t| [("t".to_string(), t)].into_iter().collect()).unwrap_or_default();
        let a = hypodb_core::analytics::rank_predictions(&fresh, 1, attr, &dims).unwrap();
        let b = hypodb_core::analytics::rank_predictions(&loaded.current, 1, attr, &dims).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn synth_prints_without_writing_state() {
    let dir = TempDir::new().unwrap();
    let state = dir.path().join("state.json");
    let manifest = fixture("fall/project.toml");
    let o = hypodb(&state, &["synth", manifest.to_str().unwrap(), "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["hypotheses"].as_array().unwrap().len(), 3);
    assert!(!state.exists());
}
