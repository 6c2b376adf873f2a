//! End-to-end tests of the `growth-lab` binary: exit codes, determinism of
//! (config, seed) runs, manifest completeness, offline behaviour, and the
//! degenerate-dynamics sanity checks that only make sense at the CLI level.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_growth-lab"));
    // Tests must not inherit offline mode (or anything else) from the
    // invoking environment.
    cmd.env_remove("GROWTH_LAB_OFFLINE");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should spawn")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("could not read {}: {e}", path.display()))
}

fn manifest_json(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&read(&dir.join("manifest.json"))).expect("manifest.json parses")
}

/// A fast synthetic-economy section: few years, few draws. Twelve years is
/// the shortest run the structural pipeline accepts with headroom.
const SMALL_SYNTH: &str = r#"
[synth]
start_year = 2000
years = 12
initial_mean = 12.0
beta_start = 0.17
beta_end = 0.12
theta = [0.02, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02]
epsilon1_sd = 0.005
noise_scale = 1.0
initial_gdp = 28000.0
draws_per_year = 2000
bin_width = 5.0
n_bins = 40
"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn synth_runs_are_byte_identical_for_a_fixed_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL_SYNTH);
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let out_c = tmp.path().join("c");

    for (out, seed) in [(&out_a, "11"), (&out_b, "11"), (&out_c, "12")] {
        let res = run(&[
            "synth",
            "--config",
            config.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "synth failed: {}", stderr_of(&res));
    }

    for name in ["gdp.csv", "income.csv", "truth.json"] {
        assert_eq!(
            read(&out_a.join(name)),
            read(&out_b.join(name)),
            "{name} differs between identical (config, seed) runs"
        );
    }
    assert_ne!(
        read(&out_a.join("gdp.csv")),
        read(&out_c.join("gdp.csv")),
        "different seeds should draw different GDP paths"
    );

    // Identical resolved configs must hash to identical digests.
    let digest_a = manifest_json(&out_a)["config_digest"].as_str().unwrap().to_owned();
    let digest_c = manifest_json(&out_c)["config_digest"].as_str().unwrap().to_owned();
    assert_eq!(digest_a.len(), 64);
    assert!(digest_a.chars().all(|c| c.is_ascii_hexdigit()));
    assert_eq!(digest_a, digest_c, "seed must not enter the config digest");
}

#[test]
fn manifest_lists_exactly_the_written_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL_SYNTH);
    let out = tmp.path().join("run");
    let res = run(&[
        "synth",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "synth failed: {}", stderr_of(&res));

    let manifest = manifest_json(&out);
    assert_eq!(manifest["command"], "synth");
    assert_eq!(manifest["seed"], 5);
    let outputs: Vec<String> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_owned())
        .collect();
    assert_eq!(outputs, ["gdp.csv", "income.csv", "truth.json"]);
    for name in &outputs {
        assert!(out.join(name).exists(), "{name} listed but missing");
    }
    // The config echo must carry the resolved values, not the defaults.
    assert_eq!(manifest["config"]["years"], 12);
    assert_eq!(manifest["config"]["draws_per_year"], 2000);
}

#[test]
fn invalid_simulate_bounds_exit_1_and_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "[simulate]\nstate_bounds = [2.0, 1.0]\n");
    let out = tmp.path().join("run");
    let res = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(1), "stderr: {}", stderr_of(&res));
    assert!(
        stderr_of(&res).contains("simulate.state_bounds"),
        "error should name the offending field: {}",
        stderr_of(&res)
    );
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "[simulate]\nbogus_key = 1\n");
    let res = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        tmp.path().join("run").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(1));
    let err = stderr_of(&res);
    assert!(err.contains("bogus_key"), "unexpected message: {err}");
}

#[test]
fn missing_income_file_is_an_io_failure_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let gdp = tmp.path().join("gdp.csv");
    std::fs::write(&gdp, "date,value\n2000-01-01,100.0\n2001-01-01,105.0\n").unwrap();
    let missing = tmp.path().join("no-such-income.csv");
    let res = run(&[
        "estimate",
        "--gdp",
        gdp.to_str().unwrap(),
        "--income",
        missing.to_str().unwrap(),
        "--out",
        tmp.path().join("run").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(3), "stderr: {}", stderr_of(&res));
    assert!(
        stderr_of(&res).contains("no-such-income.csv"),
        "error should name the missing file: {}",
        stderr_of(&res)
    );
}

#[test]
fn estimate_without_sources_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let res = run(&[
        "estimate",
        "--out",
        tmp.path().join("run").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(1), "stderr: {}", stderr_of(&res));
    let err = stderr_of(&res);
    assert!(err.contains("--gdp"), "should point at the flag: {err}");
}

#[test]
fn offline_mode_refuses_uncached_remote_sources() {
    let tmp = tempfile::tempdir().unwrap();
    let income = tmp.path().join("income.csv");
    std::fs::write(
        &income,
        "year,bin_lower,bin_upper,count\n2000,0,5,10\n2000,5,,3\n",
    )
    .unwrap();
    let config = write_config(
        tmp.path(),
        &format!(
            "[estimate]\ngdp = {{ kind = \"remote_url\", url = \"https://data.invalid/gdp.csv\" }}\n\
             income = {{ kind = \"local_file\", path = \"{}\" }}\n",
            income.display()
        ),
    );

    // Via the flag.
    let res = run(&[
        "estimate",
        "--config",
        config.to_str().unwrap(),
        "--offline",
        "--out",
        tmp.path().join("a").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(3), "stderr: {}", stderr_of(&res));
    let err = stderr_of(&res);
    assert!(
        err.contains("offline") && err.contains("data.invalid"),
        "unexpected message: {err}"
    );

    // Via the environment variable.
    let res = bin()
        .args([
            "estimate",
            "--config",
            config.to_str().unwrap(),
            "--out",
            tmp.path().join("b").to_str().unwrap(),
        ])
        .env("GROWTH_LAB_OFFLINE", "1")
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(3), "stderr: {}", stderr_of(&res));
    assert!(stderr_of(&res).contains("offline"));
}

#[test]
fn estimate_runs_end_to_end_on_synthetic_files() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL_SYNTH);
    let synth_out = tmp.path().join("synth");
    let res = run(&[
        "synth",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "21",
        "--out",
        synth_out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "synth failed: {}", stderr_of(&res));

    let est_out = tmp.path().join("estimate");
    let res = run(&[
        "estimate",
        "--gdp",
        synth_out.join("gdp.csv").to_str().unwrap(),
        "--income",
        synth_out.join("income.csv").to_str().unwrap(),
        "--out",
        est_out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "estimate failed: {}", stderr_of(&res));

    let manifest = manifest_json(&est_out);
    let outputs: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    for name in [
        "ab_path.csv",
        "sf1.csv",
        "endogeneity.csv",
        "filter_check.csv",
        "filter_path.csv",
        "results.json",
    ] {
        assert!(outputs.contains(&name), "missing output {name}: {outputs:?}");
        assert!(est_out.join(name).exists());
    }

    let results: serde_json::Value =
        serde_json::from_slice(&read(&est_out.join("results.json"))).unwrap();
    assert_eq!(results["gdp_observations"], 12);
    assert_eq!(results["laws"].as_array().unwrap().len(), 12);
    // Twelve observations are far below the white-noise-test minimum, so the
    // reduced-form block must be skipped with an explanation, not faked.
    assert!(results["reduced_form_level"].is_null());
    assert!(results["reduced_form_skipped_reason"]
        .as_str()
        .unwrap()
        .contains("observations"));

    // ab_path.csv: header plus one Gamma fit per year.
    let text = String::from_utf8(read(&est_out.join("ab_path.csv"))).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("year,alpha,beta"));
    assert_eq!(lines.count(), 12);
}

#[test]
fn zero_dynamics_kinetics_echoes_the_initial_density() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        r#"
[kinetics]
alpha = 0.0
drift = { mode = "constant", speed = 0.0 }
x_max = 16.0
dx = 0.02
dt = 0.01
horizon = 0.5
n_snapshots = 3
"#,
    );
    let out = tmp.path().join("run");
    let res = run(&[
        "kinetics",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "kinetics failed: {}", stderr_of(&res));

    let text = String::from_utf8(read(&out.join("snapshots.csv"))).unwrap();
    let mut by_time: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for line in text.lines().skip(1) {
        let mut parts = line.split(',');
        let t = parts.next().unwrap().to_owned();
        let _x = parts.next().unwrap();
        let p: f64 = parts.next().unwrap().parse().unwrap();
        by_time.entry(t).or_default().push(p);
    }
    assert_eq!(by_time.len(), 3, "expected three snapshots");
    let reference = by_time.values().next().unwrap().clone();
    for (t, values) in &by_time {
        assert_eq!(values.len(), reference.len());
        for (a, b) in values.iter().zip(&reference) {
            assert!(
                (a - b).abs() <= 1e-9,
                "zero-dynamics density drifted at t = {t}: {a} vs {b}"
            );
        }
    }
}

#[test]
fn relaxed_density_reports_a_residual_below_threshold() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        r#"
[kinetics]
dx = 0.02
dt = 5e-4
"#,
    );
    let out = tmp.path().join("run");
    let res = run(&[
        "kinetics",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "kinetics failed: {}", stderr_of(&res));

    let report: serde_json::Value =
        serde_json::from_slice(&read(&out.join("residual.json"))).unwrap();
    let residual = report["stationary_residual_final"].as_f64().unwrap();
    let threshold = report["stationary_residual_threshold"].as_f64().unwrap();
    assert!(
        report["stationary"].as_bool().unwrap() && residual < threshold,
        "relaxed density not flagged stationary: residual {residual}, threshold {threshold}"
    );
    assert!(
        report["mass_unexplained"].as_f64().unwrap().abs() < 1e-8,
        "mass audit does not balance"
    );
}

#[test]
fn gamma_figure_mode_writes_the_family_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "[kinetics]\nmode = \"gamma_figure\"\n");
    let out = tmp.path().join("run");
    let res = run(&[
        "kinetics",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "kinetics failed: {}", stderr_of(&res));

    let manifest = manifest_json(&out);
    let outputs: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(outputs, ["gamma_curves.csv"]);

    let text = String::from_utf8(read(&out.join("gamma_curves.csv"))).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("alpha,beta,x,p"));
    let mut alphas = std::collections::BTreeSet::new();
    for line in lines {
        let mut parts = line.split(',');
        alphas.insert(parts.next().unwrap().to_owned());
        let p: f64 = parts.nth(2).unwrap().parse().unwrap();
        assert!(p >= 0.0, "density values must be nonnegative");
    }
    // The default family has two (shape, rate) members.
    assert_eq!(alphas.len(), 2);
}

#[test]
fn closure_breakdown_is_a_numerical_failure_with_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    // A negative constant second moment drives the mean-field variance
    // below zero almost immediately.
    let config = write_config(
        tmp.path(),
        r#"
[kinetics]
x_max = 16.0
dx = 0.05
dt = 1e-3
horizon = 0.2
n_snapshots = 2

[kinetics.mean_field]
a2 = { form = "constant", value = -5.0 }
"#,
    );
    let out = tmp.path().join("run");
    let res = run(&[
        "kinetics",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2), "stderr: {}", stderr_of(&res));
    assert!(
        stderr_of(&res).contains("closure"),
        "unexpected message: {}",
        stderr_of(&res)
    );
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn cfl_violations_come_back_with_corrective_advice() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "[kinetics]\ndt = 0.1\n");
    let res = run(&[
        "kinetics",
        "--config",
        config.to_str().unwrap(),
        "--out",
        tmp.path().join("run").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(1), "stderr: {}", stderr_of(&res));
    let err = stderr_of(&res);
    assert!(
        err.contains("CFL") && err.contains("try dt <="),
        "unexpected message: {err}"
    );
}

#[test]
fn help_exits_zero_and_unknown_flags_exit_one() {
    let res = run(&["--help"]);
    assert_eq!(res.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&res.stdout).contains("simulate"));

    let res = run(&["simulate", "--definitely-not-a-flag"]);
    assert_eq!(res.status.code(), Some(1));

    let res = run(&["no-such-subcommand"]);
    assert_eq!(res.status.code(), Some(1));
}
