//! End-to-end checks of the command-line interface: file round trips and
//! the documented exit codes (0 success, 1 configuration error, 2 numerical
//! failure).

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_koopman-mpc"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("koopman-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Tiny but fully valid van-der-Pol scenario: small data set, short horizon,
/// a handful of steps.
fn tiny_scenario() -> String {
    r#"
[system]
kind = "vdp"
dt = 0.05
substeps = 1
nu = 0.1

[dictionary]
max_degree = 2

[data]
count = 30
omega_lo = [-2.0, -2.0]
omega_hi = [2.0, 2.0]
seed = 11

[model]
kind = "bilinear"
propagation = "projected"

[controller]
mode = "offset_free"

[equilibrium]
mode = "known"
x_ref = [0.0, 0.0]
u_ref = [0.0]

[mpc]
horizon = 5
q_diag = [1.0, 1.0]
r_diag = [0.01]
u_lo = [-2.0]
u_hi = [2.0]

[sim]
steps = 4
x0 = [1.0, 1.0]
"#
    .to_string()
}

#[test]
fn fit_then_simulate_round_trips_through_the_model_file() {
    let dir = temp_dir("roundtrip");
    let config = dir.join("scenario.toml");
    let model = dir.join("model.json");
    let trace = dir.join("trace.csv");
    std::fs::write(&config, tiny_scenario()).unwrap();

    let out = bin()
        .args(["fit", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&model)
        .output()
        .unwrap();
    assert!(out.status.success(), "fit failed: {out:?}");
    let model_text = std::fs::read_to_string(&model).unwrap();
    assert!(model_text.contains("koopman-mpc/model-v1"));

    let out = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--model")
        .arg(&model)
        .arg("--out")
        .arg(&trace)
        .output()
        .unwrap();
    assert!(out.status.success(), "simulate failed: {out:?}");
    let csv = std::fs::read_to_string(&trace).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k,x_1,x_2,u_1,dhat_1,dhat_2,xref_1,xref_2,uref_1,\
         err_state_norm,err_output_norm,ocp_iters,ocp_stationarity"
    );
    assert_eq!(lines.count(), 4);

    // Inline fit (no --model) produces the identical trace: seeded
    // determinism end to end.
    let trace2 = dir.join("trace-inline.csv");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&trace2)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(csv, std::fs::read_to_string(&trace2).unwrap());

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn unknown_config_keys_exit_with_code_1() {
    let dir = temp_dir("badkey");
    let config = dir.join("scenario.toml");
    std::fs::write(&config, tiny_scenario() + "\n[mystery]\nknob = 1\n").unwrap();
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .args(["--out", "/dev/null"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_config_file_exits_with_code_1() {
    let out = bin()
        .args([
            "simulate",
            "--config",
            "/nonexistent/nowhere.toml",
            "--out",
            "/dev/null",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_cli_usage_exits_with_code_1() {
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin()
        .args(["benchmark", "--suite", "no-such-suite", "--out-dir", "/tmp"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_with_code_2_and_names_the_step() {
    // A four-tanks run started at a negative level fails in the ground
    // truth at step 0.
    let dir = temp_dir("numfail");
    let config = dir.join("scenario.toml");
    std::fs::write(
        &config,
        r#"
[system]
kind = "four_tanks"
dt = 25.0
substeps = 4

[dictionary]
max_degree = 1

[data]
count = 10
omega_lo = [0.2, 0.2, 0.2, 0.2]
omega_hi = [1.3, 1.3, 1.3, 1.3]
seed = 3

[model]
kind = "bilinear"
propagation = "projected"

[controller]
mode = "standard"

[equilibrium]
mode = "known"
x_ref = [0.65, 0.66, 0.6417, 0.6882]
u_ref = [1.666, 1.974]

[mpc]
horizon = 3
q_diag = [1.0, 1.0, 1.0, 1.0]
r_diag = [0.0001, 0.0001]
u_lo = [0.0, 0.0]
u_hi = [3.26, 4.0]

[sim]
steps = 3
x0 = [-0.5, 1.0, 1.0, 1.0]
"#,
    )
    .unwrap();
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .args(["--out", "/dev/null"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("step"), "stderr: {stderr}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn help_exits_successfully() {
    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("fit"));
    assert!(stdout.contains("simulate"));
    assert!(stdout.contains("benchmark"));
}
