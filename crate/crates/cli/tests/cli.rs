use hotlink_cli::config::parse_override;
use hotlink_cli::{load_config, CliError, Ledger};
use hotlink_core::units::US;
use std::path::Path;
use std::process::{Command, Output};

fn hotlink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hotlink"))
        .args(args)
        .env_remove("HOTLINK_LOG")
        .output()
        .expect("binary runs")
}

fn config_error(overrides: &[&str]) -> String {
    let sets: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    match load_config(None, &sets) {
        Err(e @ CliError::Config(_)) => e.to_string(),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn preset_loads_with_zero_overrides() {
    let cfg = load_config(None, &[]).unwrap();
    assert_eq!(cfg.t_hot_k, 4.0);
    assert_eq!(cfg.ladder.len(), 5);
    assert_eq!(cfg.scan.surfaces.len(), 4);
}

#[test]
fn four_kelvin_row_populates_qubit_a_rate() {
    let cfg = load_config(None, &[]).unwrap();
    let m = cfg.system_model(cfg.row().unwrap());
    assert!((m.qubits[0].kappa - 1.0 / (1.08 * US)).abs() < 1e-6 * m.qubits[0].kappa);
    assert_eq!(m.qubits[0].occupancy, 0.52);
    assert_eq!(m.channel.warm_occupancy, 5.64);
    assert_eq!(m.channel.cooled_occupancy, Some(0.059));
}

#[test]
fn overrides_select_another_temperature() {
    let cfg = load_config(None, &["t_hot_k=1.0".into()]).unwrap();
    assert_eq!(cfg.row().unwrap().t1_a_us, 2.80);
}

#[test]
fn negative_capacitance_is_rejected_by_key() {
    let msg = config_error(&["circuit.coupler.series_capacitance_f=-38.5e-15"]);
    assert!(msg.contains("circuit.coupler.series_capacitance_f"), "{msg}");
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "[system]\nbogus_knob = 1.0\n").unwrap();
    let msg = load_config(Some(&path), &[]).unwrap_err().to_string();
    assert!(msg.contains("bogus_knob"), "{msg}");
    assert!(config_error(&["system.bogus_knob=1"]).contains("system.bogus_knob"));
}

#[test]
fn missing_ladder_row_is_rejected() {
    assert!(config_error(&["t_hot_k=5.0"]).contains("t_hot_k"));
}

#[test]
fn parse_errors_carry_a_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "t_hot_k = 4.0\nseed = \n").unwrap();
    let msg = load_config(Some(&path), &[]).unwrap_err().to_string();
    assert!(msg.contains("line 2"), "{msg}");
}

#[test]
fn user_file_overlays_the_preset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "t_hot_k = 2.0\n[system]\nlevels = 3\n").unwrap();
    let cfg = load_config(Some(&path), &[]).unwrap();
    assert_eq!(cfg.system.levels, 3);
    assert_eq!(cfg.system.g_a_mhz, 5.0);
    assert_eq!(cfg.row().unwrap().n_off_a, 0.92);
}

#[test]
fn override_values_fall_back_to_strings() {
    assert_eq!(parse_override("a.b=3").unwrap().1, toml::Value::Integer(3));
    assert_eq!(parse_override("a=warm-mode").unwrap().1, toml::Value::String("warm-mode".into()));
    let cfg = load_config(None, &["chevron.variant=warm-mode".into(), "system.fock_cutoff=20".into()]).unwrap();
    assert_eq!(cfg.system.fock_cutoff, Some(20));
    assert!(parse_override("novalue").is_err());
}

#[test]
fn config_hash_is_deterministic() {
    let a = load_config(None, &[]).unwrap();
    let b = load_config(None, &[]).unwrap();
    assert_eq!(a.hash(), b.hash());
    let c = load_config(None, &["seed=7".into()]).unwrap();
    assert_ne!(a.hash(), c.hash());
}

#[test]
fn unknown_experiment_is_a_usage_error() {
    let out = hotlink(&["teleport"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "usage");
    assert_eq!(hotlink(&["reproduce", "fig9z"]).status.code(), Some(2));
}

#[test]
fn invalid_config_exits_two() {
    let out = hotlink(&["reset", "--set", "reset.duration_ns=-1"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["message"].as_str().unwrap().contains("reset.duration_ns"));
}

fn mode_frequencies(path: &Path) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["mode_index", "freq_GHz", "Q", "kappa_per_ns", "shift_MHz"]);
    r.records().map(|rec| rec.unwrap()[1].parse().unwrap()).collect()
}

#[test]
fn modes_experiment_finds_the_link_mode() {
    let dir = tempfile::tempdir().unwrap();
    let out = hotlink(&["modes", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let freqs = mode_frequencies(&dir.path().join("modes/modes_on.csv"));
    assert!(freqs.iter().any(|f| (f / 7.48 - 1.0).abs() < 0.01), "{freqs:?}");
    let rows = Ledger::in_dir(dir.path()).entries().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].experiment, "modes");
}

const SHORT_COOLING: [&str; 7] = [
    "cooling",
    "--set",
    "cooling.duration_ns=100",
    "--set",
    "cooling.fit_window_ns=100",
    "--set",
    "run.noise_sigma=0.01",
];

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let mut args = SHORT_COOLING.to_vec();
        args.extend(["--out", d.path().to_str().unwrap()]);
        assert!(hotlink(&args).status.success());
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("cooling/cooling.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn ledger_rows_are_append_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = SHORT_COOLING.to_vec();
    args.extend(["--out", dir.path().to_str().unwrap()]);
    assert!(hotlink(&args).status.success());
    let path = dir.path().join("ledger.jsonl");
    let first = std::fs::read_to_string(&path).unwrap();
    assert!(hotlink(&args).status.success());
    let both = std::fs::read_to_string(&path).unwrap();
    assert!(both.starts_with(&first));
    let rows = Ledger::in_dir(dir.path()).entries().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].config_hash, rows[1].config_hash);
    assert_eq!(rows[0].scalars, rows[1].scalars);
}
