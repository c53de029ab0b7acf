mod common;

use std::path::{Path, PathBuf};
use std::process::Command as Process;

use common::*;
use germglue::atlas::GluedAtlas;
use germglue::cli::{run, Command, JobSpec, Mode, REPORT_FILE, SUMMARY_FILE};
use germglue::coeff::rat;
use germglue::tep::{TepDoc, TepOrders};
use serde::Serialize;
use tempfile::TempDir;

fn write<T: Serialize>(dir: &Path, name: &str, value: &T) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(value).unwrap()).unwrap();
    p
}

fn job(command: Command) -> JobSpec {
    JobSpec::new(command)
}

#[test]
fn validate_identity_fixture_exits_zero() {
    let dir = TempDir::new().unwrap();
    let atlas = write(dir.path(), "identity.json", &identity_triple(4));
    let out = run(&job(Command::Validate { atlas }));
    assert_eq!(out.exit_code, 0, "{}", out.summary);
    assert_eq!(out.report["status"], "ok");
    assert_eq!(out.report["result"]["validation"]["charts"], 3);
}

#[test]
fn glue_on_perturbed_fixture_exits_two_naming_the_triple() {
    let dir = TempDir::new().unwrap();
    let atlas = write(dir.path(), "perturbed.json", &perturbed_triple(4));
    let out = run(&job(Command::Glue { atlas }));
    assert_eq!(out.exit_code, 2);
    assert_eq!(out.report["error"]["kind"], "validation");
    let violations = out.report["error"]["violations"].as_array().unwrap();
    assert!(violations
        .iter()
        .any(|v| v["check"] == "cocycle" && v["charts"] == serde_json::json!(["1", "2", "3"])));
    assert!(out.summary.contains("cocycle [1,2,3]"));
}

#[test]
fn glue_with_tiny_search_budget_exits_three() {
    let dir = TempDir::new().unwrap();
    let atlas = write(dir.path(), "shear.json", &bounded_shear_pair(6));
    let mut j = job(Command::Glue { atlas });
    j.n_max = 1;
    let out = run(&j);
    assert_eq!(out.exit_code, 3, "{}", out.summary);
    assert_eq!(out.report["error"]["kind"], "shrink-exhausted");
    let mut j = job(Command::Glue {
        atlas: dir.path().join("shear.json"),
    });
    j.samples = 20;
    assert_eq!(run(&j).exit_code, 0);
}

#[test]
fn malformed_inputs_exit_four() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"base_dim\": 1}").unwrap();
    assert_eq!(run(&job(Command::Validate { atlas: bad })).exit_code, 4);
    let missing = dir.path().join("missing.json");
    let out = run(&job(Command::Validate { atlas: missing }));
    assert_eq!(out.exit_code, 4);
    assert_eq!(out.report["error"]["kind"], "io");
}

#[test]
fn glue_report_reparses_as_an_atlas() {
    let dir = TempDir::new().unwrap();
    let atlas = write(dir.path(), "shear.json", &shear_pair(6));
    let mut j = job(Command::Glue { atlas });
    j.samples = 50;
    j.seed = 3;
    let out = run(&j);
    assert_eq!(out.exit_code, 0, "{}", out.summary);
    let glued: GluedAtlas = serde_json::from_value(out.report["result"]["glue"]["atlas"].clone()).unwrap();
    assert_eq!(glued.charts.len(), 2);
    assert_eq!(
        serde_json::to_value(&glued).unwrap(),
        out.report["result"]["glue"]["atlas"]
    );
    assert!(
        out.report["result"]["audit"]["cover"]["lines"]
            .as_array()
            .unwrap()
            .len()
            >= 5
    );
}

#[test]
fn tep_check_reports_axioms_and_hypotheses() {
    let dir = TempDir::new().unwrap();
    let good = write(dir.path(), "swap.json", &swap_tep(TepOrders { t: 3, z: 2 }, 0));
    let mut j = job(Command::TepCheck { tep: good });
    j.points = vec![vec!["1/3".into()]];
    let out = run(&j);
    assert_eq!(out.exit_code, 0, "{}", out.summary);
    let reports = out.report["result"]["tep"].as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0]["ic"], true);
    assert_eq!(reports[0]["gc"]["dims"], serde_json::json!([1, 2]));

    let shifted = write(dir.path(), "shifted.json", &swap_tep(TepOrders { t: 3, z: 2 }, 1));
    assert_eq!(run(&job(Command::TepCheck { tep: shifted })).exit_code, 2);
}

#[test]
fn order_overrides_and_float_mode_are_recorded() {
    let dir = TempDir::new().unwrap();
    let atlas = write(dir.path(), "identity.json", &identity_triple(4));
    let mut j = job(Command::Validate { atlas });
    j.order = Some(2);
    j.mode = Mode::Float;
    j.tolerance = 1e-9;
    let out = run(&j);
    assert_eq!(out.exit_code, 0);
    assert_eq!(out.report["result"]["validation"]["order"], 2);
    assert_eq!(out.report["params"]["tolerance"], 1e-9);
    let exact = run(&job(Command::Validate {
        atlas: dir.path().join("identity.json"),
    }));
    assert!(exact.report["params"].get("tolerance").is_none());
}

fn glue_tep_inputs(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let o = TepOrders { t: 3, z: 1 };
    let charts: Vec<TepDoc> = vec![frobenius_tep("1", o), frobenius_tep("2", o)];
    (
        write(dir, "atlas.json", &identity_charts(3, 2)),
        write(dir, "sheaf.json", &unipotent_sheaf(3, &[("1", rat(0)), ("2", rat(0))])),
        write(dir, "tep.json", &charts),
    )
}

#[test]
fn glue_sheaf_and_glue_tep_succeed_on_product_data() {
    let dir = TempDir::new().unwrap();
    let (atlas, sheaf, tep) = glue_tep_inputs(dir.path());
    let out = run(&job(Command::GlueSheaf {
        atlas: atlas.clone(),
        sheaf: sheaf.clone(),
    }));
    assert_eq!(out.exit_code, 0, "{}", out.summary);
    let out = run(&job(Command::GlueTep { atlas, sheaf, tep }));
    assert_eq!(out.exit_code, 0, "{}", out.summary);
    assert_eq!(out.report["result"]["glue_tep"]["valid"], true);
}

#[test]
fn binary_writes_reports_and_honours_the_environment_default() {
    let dir = TempDir::new().unwrap();
    let atlas = write(dir.path(), "identity.json", &identity_triple(4));
    let out_dir = dir.path().join("from-env");
    let status = Process::new(env!("CARGO_BIN_EXE_germglue"))
        .arg("validate")
        .arg(&atlas)
        .env("GERMGLUE_OUT", &out_dir)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    assert!(out_dir.join(REPORT_FILE).exists());
    let summary = std::fs::read_to_string(out_dir.join(SUMMARY_FILE)).unwrap();
    assert!(summary.contains("status: ok"));

    let flag_dir = dir.path().join("from-flag");
    let status = Process::new(env!("CARGO_BIN_EXE_germglue"))
        .args(["glue", "--n-max", "1", "--out"])
        .arg(&flag_dir)
        .arg(write(dir.path(), "shear.json", &bounded_shear_pair(6)))
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(3));
    assert!(flag_dir.join(REPORT_FILE).exists());

    let status = Process::new(env!("CARGO_BIN_EXE_germglue"))
        .args(["glue", "--radius-floor", "not-a-number"])
        .arg(&atlas)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(4));
}
