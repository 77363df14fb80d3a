use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
    "trials": 3,
    "memory": {"mode_number": 20},
    "tomography": {"diagonal_trials": 10, "trials_per_phase": 25},
    "phase_sweep": {"n_steps": 4},
    "fidelity_sweep": {"mu_grid": [0.1, 0.3]},
    "rate_sweep": {"mode_numbers": [1, 20], "mu_values": [0.1, 0.3]},
    "mu1": 0.3,
    "mu2": 0.3
}"#;

fn afcsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afcsim")).args(args).output().unwrap()
}

fn run_into(dir: &Path, subcommand: &str, config: &Path, seed: &str) -> Output {
    afcsim(&[
        subcommand,
        "--config",
        config.to_str().unwrap(),
        "--seed",
        seed,
        "--out",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn every_subcommand_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("config.json");
    fs::write(&config, SMALL).unwrap();
    for (subcommand, files) in [
        ("run", &["run.json"][..]),
        ("fidelity-sweep", &["fidelity.csv"][..]),
        ("rate-sweep", &["rate.csv"][..]),
        ("tomography", &["tomography.json", "interference.csv"][..]),
    ] {
        let a = tmp.path().join(format!("{subcommand}-a"));
        let b = tmp.path().join(format!("{subcommand}-b"));
        for dir in [&a, &b] {
            let out = run_into(dir, subcommand, &config, "11");
            assert!(out.status.success(), "{subcommand}: {}", String::from_utf8_lossy(&out.stderr));
        }
        for file in files {
            let left = fs::read(a.join(file)).unwrap();
            assert!(!left.is_empty());
            assert_eq!(left, fs::read(b.join(file)).unwrap(), "{subcommand}/{file}");
        }
    }
}

#[test]
fn outputs_follow_documented_schemas() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("config.json");
    fs::write(&config, SMALL).unwrap();
    let out = tmp.path().join("out");
    for subcommand in ["fidelity-sweep", "rate-sweep", "tomography"] {
        assert!(run_into(&out, subcommand, &config, "5").status.success());
    }
    let fidelity = fs::read_to_string(out.join("fidelity.csv")).unwrap();
    assert_eq!(fidelity.lines().next(), Some("mu1,mu2,fidelity,stderr,n_heralds,n_bins"));
    assert_eq!(fidelity.lines().count(), 5);
    let rate = fs::read_to_string(out.join("rate.csv")).unwrap();
    assert_eq!(rate.lines().next(), Some("M,mu,p_h,p_h_stderr,rate_hz"));
    assert_eq!(rate.lines().count(), 5);
    let interference = fs::read_to_string(out.join("interference.csv")).unwrap();
    assert_eq!(interference.lines().next(), Some("phase_rad,detector,click_prob,stderr,n_samples"));
    assert_eq!(interference.lines().count(), 1 + 4 * 2);
    let tomography = fs::read_to_string(out.join("tomography.json")).unwrap();
    for key in ["\"rho_real\"", "\"rho_imag\"", "\"p00\"", "\"d_abs\"", "\"visibility_per_detector\"", "\"fit_coeffs\""] {
        assert!(tomography.contains(key), "{key}");
    }
}

#[test]
fn different_seeds_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("config.json");
    fs::write(&config, SMALL).unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run_into(&a, "run", &config, "1").status.success());
    assert!(run_into(&b, "run", &config, "2").status.success());
    assert_ne!(fs::read(a.join("run.json")).unwrap(), fs::read(b.join("run.json")).unwrap());
}

#[test]
fn invalid_config_exits_with_one_and_names_field() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.json");
    fs::write(&config, r#"{"memory": {"eta_abs": 1.5}}"#).unwrap();
    let out = run_into(&tmp.path().join("out"), "run", &config, "1");
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("memory.eta_abs"));

    let missing = run_into(&tmp.path().join("out"), "run", &tmp.path().join("absent.json"), "1");
    assert_eq!(missing.status.code(), Some(1));

    let garbage = tmp.path().join("garbage.json");
    fs::write(&garbage, "{not json").unwrap();
    assert_eq!(run_into(&tmp.path().join("out"), "run", &garbage, "1").status.code(), Some(1));
}

#[test]
fn bad_arguments_exit_with_one() {
    assert_eq!(afcsim(&["bogus"]).status.code(), Some(1));
    assert_eq!(afcsim(&["run", "--seed", "x"]).status.code(), Some(1));
    assert_eq!(afcsim(&["--help"]).status.code(), Some(0));
}

#[test]
fn unwritable_output_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("config.json");
    fs::write(&config, SMALL).unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = run_into(&blocker.join("sub"), "run", &config, "1");
    assert_eq!(out.status.code(), Some(2));
}
