use std::path::Path;
use std::process::{Command, Output};

fn streetbase(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_streetbase")).args(args).output().unwrap()
}

fn text(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn demo_in(dir: &Path) -> String {
    let p = dir.join("project").display().to_string();
    let o = streetbase(&["demo", "--project", &p]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    p
}

fn empty_layer(project: &str, layer: &str) {
    let path = Path::new(project).join("layers").join(format!("{layer}.geojson"));
    std::fs::write(path, r#"{"type":"FeatureCollection","features":[]}"#).unwrap();
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(streetbase(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(streetbase(&["check"]).status.code(), Some(2));
    assert_eq!(streetbase(&[]).status.code(), Some(2));
    let help = streetbase(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(text(&help).contains("generate"));
}

#[test]
fn demo_is_clean_and_fully_generated() {
    let dir = tempfile::tempdir().unwrap();
    let p = demo_in(dir.path());
    let check = streetbase(&["check", "--project", &p]);
    assert_eq!(check.status.code(), Some(0), "{}", text(&check));
    let g = streetbase(&["generate", "--project", &p]);
    assert_eq!(g.status.code(), Some(0));
    assert!(text(&g).contains(" 0 changed"), "{}", text(&g));
    assert_eq!(streetbase(&["demo", "--project", &p]).status.code(), Some(2));
    assert_eq!(streetbase(&["demo", "--project", &p, "--force"]).status.code(), Some(0));
}

#[test]
fn generate_reports_zero_on_second_run() {
    let dir = tempfile::tempdir().unwrap();
    let p = demo_in(dir.path());
    // Emptying the generated surfaces forces real work on the first run.
    empty_layer(&p, "section_surface");
    let first = streetbase(&["generate", "--project", &p]);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(!text(&first).contains(" 0 changed"), "{}", text(&first));
    let second = streetbase(&["generate", "--project", &p]);
    assert!(text(&second).contains(" 0 changed"), "{}", text(&second));
}

#[test]
fn check_fails_on_a_broken_project() {
    let dir = tempfile::tempdir().unwrap();
    let p = demo_in(dir.path());
    empty_layer(&p, "section_surface");
    let o = streetbase(&["check", "--project", &p]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    assert!(text(&o).contains("violations"));
}

#[test]
fn stats_lists_the_demo_grid() {
    let dir = tempfile::tempdir().unwrap();
    let p = demo_in(dir.path());
    let o = streetbase(&["stats", "--project", &p]);
    assert_eq!(o.status.code(), Some(0));
    let out = text(&o);
    let mut lines = out.lines();
    let header: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    assert_eq!(header, ["area", "cells", "todo", "done", "cumulated_ms"]);
    let row: Vec<i64> = lines.next().unwrap().split_whitespace().map(|c| c.parse().unwrap()).collect();
    assert!(row[1] > 0);
    assert_eq!(row[1], row[2] + row[3]);
    assert_eq!(row[4], 0);
}

#[test]
fn missing_project_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("absent").display().to_string();
    let o = streetbase(&["check", "--project", &p]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}
