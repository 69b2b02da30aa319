use std::path::Path;
use std::process::{Command, Output};

fn qhmft(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qhmft")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&read(p)).unwrap()
}

#[test]
fn optimize_without_j2_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = qhmft(&["optimize", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("j2"), "{}", stderr(&o));
}

#[test]
fn bad_values_name_their_key() {
    let o = qhmft(&["optimize", "--j2", "0", "--grad-mode", "backprop"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("grad_mode"));
    let o = qhmft(&["sweep", "--step", "0"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("step"));
    let o = qhmft(&["optimize", "--j2", "0", "--l", "3"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_config_file_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "l = 2\nrestart = 3\n").unwrap();
    let o = qhmft(&["optimize", "--j2", "0", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("restart"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let o = qhmft(&["optimize", "--j2", "0", "--config", "/nonexistent/run.toml"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn tied_2x2_optimum_matches_reference_energy() {
    let dir = tempfile::tempdir().unwrap();
    let o = qhmft(&["optimize", "--tied", "--j2", "0", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(stdout.contains("result.json") && stdout.contains("trace.csv"));
    let r = json(&dir.path().join("result.json"));
    // self-consistent 2x2 exact diagonalization at J2 = 0
    let e = r["energy"]["e_total"].as_f64().unwrap();
    assert!((e + 0.5840533840205224).abs() < 1e-9, "{e}");
    assert_eq!(r["status"], "converged");
}

#[test]
fn same_seed_gives_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = qhmft(&["optimize", "--j2", "0.3", "--restarts", "3", "--seed", "17", "--out-dir", d.path().to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(read(&a.path().join("result.json")), read(&b.path().join("result.json")));
    assert_eq!(read(&a.path().join("trace.csv")), read(&b.path().join("trace.csv")));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "tied = true\nj2 = 0.9\nseed = 5\nrestarts = 2\n").unwrap();
    let out = dir.path().join("out");
    let o = qhmft(&["optimize", "--config", cfg.to_str().unwrap(), "--j2", "0.1", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json(&out.join("result.json"));
    assert_eq!(r["j2"], 0.1);
    assert_eq!(r["tied"], true);
    assert_eq!(r["seed"], 5);
    assert_eq!(r["starts"].as_array().unwrap().len(), 2);
}

#[test]
fn empty_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = qhmft(&["sweep", "--j2-range", "0.5,0.2", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("j2_range"));
    let o = qhmft(&["oracle", "--j2-range", "0.5,0.2", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn sweep_resumes_from_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let args =
        ["sweep", "--tied", "--j2-range", "0.3,0.6", "--step", "0.05", "--seed", "4", "--out-dir", dir.path().to_str().unwrap()];
    let o = qhmft(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let first = read(&dir.path().join("records.csv"));
    assert_eq!(first.lines().count(), 1 + 2 * 7);
    assert!(dir.path().join("transitions.json").exists());

    // drop the tail of the up chain and the head of the down chain
    let cp = dir.path().join("checkpoints");
    for name in ["up_0005.json", "up_0006.json", "down_0000.json"] {
        std::fs::remove_file(cp.join(name)).unwrap();
    }
    let o = qhmft(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read(&dir.path().join("records.csv")), first);
    assert_eq!(json(&dir.path().join("metadata.json"))["resumed_points"], 11);

    // checkpoints from another configuration are refused
    let mut other = args.to_vec();
    other[6] = "5";
    let o = qhmft(&other);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn oracle_writes_reference_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = qhmft(&["oracle", "--j2-range", "0,1", "--step", "0.05", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = read(&dir.path().join("oracle.csv"));
    assert_eq!(csv.lines().count(), 1 + 2 * 21);
    let t = json(&dir.path().join("transitions.json"));
    assert_eq!(t["transitions"].as_array().unwrap().len(), 2);
}

#[test]
fn variance_table_has_one_row_per_size_and_coupling() {
    let dir = tempfile::tempdir().unwrap();
    let o = qhmft(&[
        "variance",
        "--sizes",
        "2",
        "--tied",
        "--samples",
        "10",
        "--j2-values",
        "0,0.5",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = read(&dir.path().join("variance.csv"));
    assert_eq!(csv.lines().next().unwrap(), "l,tied,n_sites,j2,n_params,n_samples,mean,variance");
    assert_eq!(csv.lines().count(), 3);
    let o = qhmft(&["variance", "--samples", "1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn validate_passes_on_a_clean_build() {
    let dir = tempfile::tempdir().unwrap();
    let o = qhmft(&["validate", "--out-dir", dir.path().to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout).into_owned();
    assert_eq!(code(&o), 0, "{stdout}");
    assert!(!stdout.contains("FAIL"));
    assert!(dir.path().join("validate.json").exists());
}
