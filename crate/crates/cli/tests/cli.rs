//! Exit-code contract and argument handling of the binary.

use std::path::Path;
use std::process::{Command, Output};

fn hydrotwin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hydrotwin"))
        .args(args)
        .current_dir(dir)
        .env_remove("HYDROTWIN_CONSUMPTION")
        .env_remove("HYDROTWIN_METEO")
        .env_remove("HYDROTWIN_OUT")
        .output()
        .unwrap()
}

fn reference_instance() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/examples/reference_instance.toml").to_string_lossy().into_owned()
}

const ONE_TASK: &str = "[work_day]\nstart = 8.0\nend = 9.0\n\
[[vehicles]]\nid = \"Van\"\nfuel_efficiency_km_per_l = 12.0\nemission_factor_kg_per_l = 2.64\n\
[[tasks]]\nid = 1\nprocessing_hours = 2.0\nfuel_l = 1.0\nco2_kg = 2.64\npriority = 1\nrelease_hours = 0.0\nvehicle = \"Van\"\n";

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = hydrotwin(dir.path(), &["schedule", &reference_instance(), "--baseline"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("baseline: Z = "));

    std::fs::write(dir.path().join("long.toml"), ONE_TASK).unwrap();
    let infeasible = hydrotwin(dir.path(), &["schedule", "long.toml"]);
    assert_eq!(infeasible.status.code(), Some(2));

    std::fs::write(dir.path().join("bad.toml"), "[[tasks]]\nid = 1\n").unwrap();
    assert_eq!(hydrotwin(dir.path(), &["schedule", "bad.toml"]).status.code(), Some(3));
    assert_eq!(hydrotwin(dir.path(), &["schedule", "missing.toml"]).status.code(), Some(3));
    assert_eq!(hydrotwin(dir.path(), &["evaluate"]).status.code(), Some(3), "no data files yet");
    assert_eq!(hydrotwin(dir.path(), &["schedule", "--exact", "--baseline"]).status.code(), Some(3));
    assert_eq!(hydrotwin(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.toml"), "seed = 9\noutput_dir = \"reports\"\n[synthetic]\nn_days = 450\n").unwrap();
    let gen = hydrotwin(dir.path(), &["--config", "cfg.toml", "gen-data", "--consumption", "c.csv", "--meteo", "m.csv"]);
    assert_eq!(gen.status.code(), Some(0));
    let rows = std::fs::read_to_string(dir.path().join("c.csv")).unwrap().lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 451);

    let f = hydrotwin(
        dir.path(),
        &["--config", "cfg.toml", "forecast", "--consumption", "c.csv", "--meteo", "m.csv", "--model", "lstm", "--horizon", "0"],
    );
    assert_eq!(f.status.code(), Some(0), "{}", String::from_utf8_lossy(&f.stderr));
    assert_eq!(String::from_utf8_lossy(&f.stdout), "date,predicted\n");
    assert!(dir.path().join("reports/forecast_lstm.csv").exists());

    let unknown = hydrotwin(dir.path(), &["forecast", "--model", "arima", "--horizon", "1"]);
    assert_eq!(unknown.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("unknown model"));

    std::fs::write(dir.path().join("typo.toml"), "sed = 1\n").unwrap();
    assert_eq!(hydrotwin(dir.path(), &["--config", "typo.toml", "compare"]).status.code(), Some(3));
}

#[test]
fn env_overrides_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_hydrotwin"))
        .args(["schedule", &reference_instance(), "--exact"])
        .current_dir(dir.path())
        .env("HYDROTWIN_OUT", "elsewhere")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("elsewhere/schedule_exact.json").exists());
}
