use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn weylm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weylm")).args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

#[test]
fn selftest_passes() {
    let out = weylm(&["selftest"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 12);
}

#[test]
fn real_spectral_parameter_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let potential = fixture("free_d1.json");
    let out = weylm(&[
        "m-grid",
        "--potential",
        path_str(&potential),
        "--z-re",
        "-1:1:3",
        "--z-im",
        "0,1",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(5));
    assert!(!dir.path().join("m_grid.csv").exists());
}

#[test]
fn non_hermitian_potential_reports_residual() {
    let dir = tempfile::tempdir().unwrap();
    let potential = fixture("non_hermitian.json");
    let out = weylm(&["validate", "--potential", path_str(&potential), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(4));
    // both off-diagonal entries are i, so ‖A − A*‖ = ‖2i‖ = 2
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("residual 2"), "{stderr}");
}

#[test]
fn unconverged_m_grid_has_its_own_code() {
    let dir = tempfile::tempdir().unwrap();
    let potential = fixture("free_d1.json");
    let out = weylm(&[
        "m-grid",
        "--potential",
        path_str(&potential),
        "--z-im",
        "0.01",
        "--b-schedule",
        "1,2",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(6));
    // the trail is still written so that the failure can be inspected
    let csv = fs::read_to_string(dir.path().join("m_grid.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains(",false,"));
}

fn m_grid_bytes(jobs: &str) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let potential = fixture("random_step_d3.json");
    let out = weylm(&[
        "m-grid",
        "--potential",
        path_str(&potential),
        "--z-re",
        "-2:2:5",
        "--z-im",
        "0.5:2:3",
        "--jobs",
        jobs,
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    fs::read(dir.path().join("m_grid.csv")).unwrap()
}

#[test]
fn m_grid_is_reproducible_across_runs_and_jobs() {
    let first = m_grid_bytes("1");
    assert_eq!(first, m_grid_bytes("1"));
    assert_eq!(first, m_grid_bytes("4"));
    assert_eq!(first.iter().filter(|&&b| b == b'\n').count(), 16);
}

#[test]
fn measure_is_reproducible_across_jobs() {
    let run = |jobs: &str| {
        let dir = tempfile::tempdir().unwrap();
        let potential = fixture("free_d1.json");
        let out = weylm(&[
            "spectral-measure",
            "--potential",
            path_str(&potential),
            "--intervals",
            "6",
            "--jobs",
            jobs,
            "--out",
            path_str(dir.path()),
        ]);
        assert_eq!(out.status.code(), Some(0));
        fs::read(dir.path().join("measure.csv")).unwrap()
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn config_file_is_merged_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(fixture("free_d1.json"), dir.path().join("v.json")).unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "potential = \"v.json\"\nz-re = \"0\"\nz-im = \"1\"\nout = \"from_file\"\n").unwrap();

    let out = weylm(&["m-grid", "--config", path_str(&cfg)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("from_file/m_grid.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("0,1,"));

    let flag_out = dir.path().join("from_flag");
    let out = weylm(&["m-grid", "--config", path_str(&cfg), "--z-im", "2", "--out", path_str(&flag_out)]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(flag_out.join("m_grid.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("0,2,"));
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "m-tol = -1\n").unwrap();
    assert_eq!(weylm(&["selftest", "--config", path_str(&cfg)]).status.code(), Some(2));
    fs::write(&cfg, "no-such-key = 1\n").unwrap();
    assert_eq!(weylm(&["selftest", "--config", path_str(&cfg)]).status.code(), Some(2));
}

#[test]
fn green_writes_kernel_and_resolvent() {
    let dir = tempfile::tempdir().unwrap();
    let potential = fixture("diag_1_4.json");
    let out = weylm(&[
        "green",
        "--potential",
        path_str(&potential),
        "--z-im",
        "1",
        "--rhs",
        "1,0",
        "--kernel-points",
        "4",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let kernel = fs::read_to_string(dir.path().join("kernel.csv")).unwrap();
    assert_eq!(kernel.lines().count(), 1 + 16);
    assert!(dir.path().join("resolvent.csv").exists());
}

#[test]
fn herglotz_check_on_synthetic_pole() {
    let dir = tempfile::tempdir().unwrap();
    let model = fixture("synthetic_pole.json");
    let out = weylm(&["herglotz-check", "--synthetic", path_str(&model), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("kernel dimensions 1..=1"), "{stdout}");
}
