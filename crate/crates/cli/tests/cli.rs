//! End-to-end checks of the binary: catalog listing, validation round trip,
//! run outputs, exit codes, and byte determinism of the iteration log.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mfg"))
}

fn strip_wall(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map(|(head, _)| head).unwrap_or(l))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn list_problems_prints_the_catalog() {
    let out = bin().arg("list-problems").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    assert_eq!(lines.len(), 7);
    for name in ["local-linear", "planning-obstacle", "gauss-viscous"] {
        assert!(text.contains(name), "missing {name}");
    }
}

#[test]
fn validate_echoes_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "problem = \"local-linear\"\nepsilon = 1e-6\n").unwrap();
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let echoed = String::from_utf8(out.stdout).unwrap();
    assert!(echoed.contains("epsilon = 1e-6") || echoed.contains("epsilon = 0.000001"));
    assert!(echoed.contains("local-linear"));
}

#[test]
fn invalid_configs_fail_with_field_names() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "problem = \"local-linear\"\n[schedule]\nkind = \"constant\"\ndelta = 1.5\n",
    )
    .unwrap();
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("schedule.delta"), "{err}");

    fs::write(&cfg, "problem = \"no-such-problem\"\n").unwrap();
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("power-nonlocal"), "{err}");
}

fn small_run_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let cfg = dir.join("run.toml");
    fs::write(
        &cfg,
        format!(
            "problem = \"local-linear\"\nepsilon = 1e-8\nk_max = 200\n{extra}\n[grid]\nn_x = [128]\nn_t = 8\n"
        ),
    )
    .unwrap();
    cfg
}

#[test]
fn run_converges_writes_outputs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_run_config(dir.path(), "");
    let out1 = dir.path().join("out1");
    let out2 = dir.path().join("out2");
    for out_dir in [&out1, &out2] {
        let out = bin()
            .arg("run")
            .arg(&cfg)
            .arg("--out")
            .arg(out_dir)
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(0),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let csv1 = fs::read_to_string(out1.join("iterations.csv")).unwrap();
    let csv2 = fs::read_to_string(out2.join("iterations.csv")).unwrap();
    assert!(csv1.starts_with(
        "k,level,delta,gain,consec_residue,fp_residue,ref_error,cosine,btls_trials,wall_s"
    ));
    assert_eq!(strip_wall(&csv1), strip_wall(&csv2), "runs must be byte-identical modulo wall_s");
    // fields dump in long format
    let fields = fs::read_to_string(out1.join("fields.csv")).unwrap();
    assert!(fields.starts_with("x,t,rho,phi"));
    let rows = fields.lines().count() - 1;
    assert_eq!(rows, 129 * 9);
    // resolved config re-parses
    let echoed = fs::read_to_string(out1.join("resolved-config.toml")).unwrap();
    assert!(echoed.contains("n_x = [128]"));
    // last gain is at most epsilon
    let last = csv1.lines().last().unwrap();
    let gain: f64 = last.split(',').nth(3).unwrap().parse().unwrap();
    assert!(gain.abs() <= 1e-8);
}

#[test]
fn fixed_point_weight_fails_to_converge_with_exit_2() {
    // delta = 1 is the raw fixed-point iteration; at this resolution the
    // best-response map is marginal and does not reach 1e-10 in 60 rounds.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "problem = \"local-linear\"\nepsilon = 1e-10\nk_max = 60\n\
         [schedule]\nkind = \"constant\"\ndelta = 1.0\n\
         [grid]\nn_x = [1000]\nn_t = 30\n",
    )
    .unwrap();
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(2),
        "stdout: {} stderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn infinite_epsilon_stops_after_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_run_config(dir.path(), "");
    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--set")
        .arg("epsilon=inf")
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(out_dir.join("iterations.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "header plus one row:\n{csv}");
}

#[test]
fn two_dimensional_run_emits_binary_dumps_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "problem = \"nonpot-2d\"\nepsilon = 1e-2\nk_max = 80\n[grid]\nn_x = [8, 8]\nn_t = 2\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rho = fs::read(out_dir.join("rho.f64")).unwrap();
    assert_eq!(rho.len(), 9 * 9 * 3 * 8);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("fields.json")).unwrap()).unwrap();
    assert_eq!(meta["dims"]["points_t"], 3);
    assert_eq!(meta["dims"]["points_x"][0], 9);
}
