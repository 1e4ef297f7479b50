use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lqr-landscape"));
    cmd.env_remove("LQR_LANDSCAPE_THREADS");
    cmd
}

fn run(args: &[&str], out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (String, String, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let stamp = lines.next().unwrap().to_string();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (stamp, header, rows)
}

fn write_instance(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("plant.json");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn solve_single_integrator() {
    let dir = TempDir::new().unwrap();
    let o = run(&["solve", "single-integrator"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&dir.path().join("solve.json"));
    assert!((report["K_star"][0][0].as_f64().unwrap() + 1.0).abs() < 1e-12);
    assert!((report["P_star"][0][0].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((report["J_star"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    let stdout: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stdout, report);
}

#[test]
fn solve_example_3_1() {
    let dir = TempDir::new().unwrap();
    let o = run(
        &["solve", "--builtin", "example-3-1", "--a", "0.1"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let report = read_json(&dir.path().join("solve.json"));
    assert!((report["J_star"].as_f64().unwrap() - 0.909091).abs() < 1e-6);
    let k = &report["K_star"][0];
    assert!((k[0].as_f64().unwrap() - k[1].as_f64().unwrap()).abs() < 1e-8);
}

#[test]
fn undetectable_instance_exits_2() {
    let dir = TempDir::new().unwrap();
    let path = write_instance(
        dir.path(),
        r#"{"A": [[1, 0], [0, -1]], "B": [[1], [1]], "Q": [[0, 0], [0, 1]], "R": [[1]], "W": [[1, 0], [0, 1]]}"#,
    );
    let o = run(&["solve", "--instance", path.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn input_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    let path = write_instance(dir.path(), r#"{"A": [[0]], "B": "#);
    let o = run(&["solve", "--instance", path.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("malformed"));
    assert_eq!(code(&run(&["solve"], dir.path())), 1);
    assert_eq!(
        code(&run(&["solve", "single-integrator", "--bogus"], dir.path())),
        1
    );
    assert_eq!(code(&run(&["solve", "no-such-example"], dir.path())), 1);
    assert_eq!(
        code(&run(
            &["pgd", "single-integrator", "--k0", "1,2"],
            dir.path()
        )),
        1
    );
    assert_eq!(
        code(&run(
            &["pgd", "single-integrator", "--step", "1"],
            dir.path()
        )),
        1
    );
    assert_eq!(
        code(&run(&["examples", "--only", "nothing"], dir.path())),
        1
    );
}

#[test]
fn unstable_initial_gain_exits_3() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        code(&run(&["pgd", "single-integrator", "--k0", "1"], dir.path())),
        3
    );
}

#[test]
fn certify_bundles() {
    let dir = TempDir::new().unwrap();
    let o = run(&["certify", "single-integrator"], dir.path());
    assert_eq!(code(&o), 0);
    let c = read_json(&dir.path().join("certificate.json"));
    assert_eq!(c["complementarity"]["strict"], Value::Bool(true));
    assert!(c["duality_gap"]["gap"].as_f64().unwrap().abs() < 1e-12);

    let o = run(&["certify", "example-3-1", "--a", "0.1"], dir.path());
    assert_eq!(code(&o), 0);
    let c = read_json(&dir.path().join("certificate.json"));
    assert!(c["duality_gap"]["gap"].as_f64().unwrap().abs() <= 1e-8);
}

#[test]
fn certify_random_suite() {
    let dir = TempDir::new().unwrap();
    let o = run(
        &["certify", "--random", "n=4", "m=2", "seeds=100"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_json(&dir.path().join("certify_random.json"));
    assert_eq!(s["passed"], 100);
    assert!(s["results"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["n"] == 4 && r["m"] == 2));
}

#[test]
fn landscape_slice_grid() {
    let dir = TempDir::new().unwrap();
    let o = run(&["landscape", "example-3-1", "--slice", "b=10"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (stamp, header, rows) = csv_rows(&dir.path().join("grid.csv"));
    assert!(stamp.starts_with("# manifest_hash="));
    assert_eq!(header, "k1,k2,J");
    assert_eq!(rows.len(), 401);
    let j: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    let argmin = (0..j.len()).min_by(|&a, &b| j[a].total_cmp(&j[b])).unwrap();
    assert!(argmin > 0 && argmin < j.len() - 1);
    assert!(j[..=argmin].windows(2).all(|w| w[1] <= w[0]));
    assert!(j[argmin..].windows(2).all(|w| w[1] >= w[0]));
    let curvature = |out: &Path| {
        read_json(&out.join("landscape.json"))["curvature_at_minimizer"]
            .as_f64()
            .unwrap()
    };
    let steep = TempDir::new().unwrap();
    assert_eq!(
        code(&run(
            &["landscape", "example-3-1", "--slice", "b=1"],
            steep.path()
        )),
        0
    );
    assert!(curvature(dir.path()) < curvature(steep.path()) / 5.0);
}

#[test]
fn landscape_full_grid_marks_unstable_gains() {
    let dir = TempDir::new().unwrap();
    let o = run(
        &["landscape", "single-integrator", "--k1", "-2:1:4"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let (_, _, rows) = csv_rows(&dir.path().join("grid.csv"));
    let cells: Vec<&str> = rows.iter().map(|r| r[2].as_str()).collect();
    assert_eq!(cells, ["2.5", "2", "nan", "nan"]);
    assert!(rows.iter().all(|r| r[1].is_empty()));
}

#[test]
fn pgd_monotone_cost() {
    let dir = TempDir::new().unwrap();
    let o = run(&["pgd", "single-integrator", "--k0", "-0.5"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, header, rows) = csv_rows(&dir.path().join("pgd.csv"));
    assert_eq!(header, "iter,J,grad_norm,dist_to_Kstar");
    assert_eq!(rows[0], ["0", "2.5", "3", "0.5"]);
    let j: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(j.windows(2).all(|w| w[1] <= w[0] + 1e-12 * (1.0 + w[0])));
    let last: f64 = rows.last().unwrap()[3].parse().unwrap();
    assert!(last <= 1e-6);
}

#[test]
fn pl_example_4_3_has_no_violations() {
    let dir = TempDir::new().unwrap();
    let o = run(
        &["pl", "example-4-3", "--nu-mult", "2", "--samples", "500"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_json(&dir.path().join("pl.json"));
    assert_eq!(s["violations"], 0);
    let (_, header, rows) = csv_rows(&dir.path().join("pl.csv"));
    assert_eq!(header, "sample_id,J,grad_norm_sq,ratio");
    assert_eq!(rows.len(), 501);
}

#[test]
fn pl_without_compact_sublevels_exits_2() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        code(&run(&["pl", "example-3-1", "--samples", "10"], dir.path())),
        2
    );
}

#[test]
fn gramian_example_5_1() {
    let dir = TempDir::new().unwrap();
    let o = run(
        &[
            "gramian",
            "example-5-1",
            "--k",
            "-1",
            "--horizon",
            "40",
            "--dt",
            "0.01",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let g = read_json(&dir.path().join("gramian.json"));
    let z = &g["Z_T"];
    assert!((z[0][0].as_f64().unwrap() - 0.5).abs() < 1e-6);
    assert!((z[0][1].as_f64().unwrap() + 0.5).abs() < 1e-6);
    assert_eq!(g["membership"]["in_v_sdp"], Value::Bool(true));
    let (_, header, rows) = csv_rows(&dir.path().join("trajectory.csv"));
    assert_eq!(header, "t,x_1,u_1");
    assert_eq!(rows[0], ["0", "1", "-1"]);
}

#[test]
fn examples_pass_and_tolerance_plumbing() {
    let dir = TempDir::new().unwrap();
    let o = run(&["examples"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let o = run(&["examples", "--tol", "1e-15"], dir.path());
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("ex5.1-trajectory-gramian"));
    let o = run(&["examples", "--only", "gramian"], dir.path());
    assert_eq!(code(&o), 0);
    let e = read_json(&dir.path().join("examples.json"));
    let checks = e["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 2);
    assert!(checks.iter().all(|c| c["module"] == "gramian"));
}

#[test]
fn outputs_carry_the_manifest_hash() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        code(&run(
            &["pgd", "single-integrator", "--k0", "-0.5"],
            dir.path()
        )),
        0
    );
    let manifest = read_json(&dir.path().join("manifest.json"));
    let hash = manifest["manifest_hash"].as_str().unwrap().to_string();
    assert_eq!(manifest["seed"], 0);
    assert_eq!(manifest["subcommand"], "pgd");
    assert_eq!(manifest["instance"]["source"], "builtin:single-integrator");
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        assert!(text.contains(&hash));
    }
    let other = TempDir::new().unwrap();
    assert_eq!(
        code(&run(
            &["pgd", "single-integrator", "--k0", "-0.6"],
            other.path()
        )),
        0
    );
    assert_ne!(
        read_json(&other.path().join("manifest.json"))["manifest_hash"]
            .as_str()
            .unwrap(),
        hash
    );
}

fn assert_same_outputs(a: &Path, b: &Path) {
    let mut names: Vec<_> = std::fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        let x = std::fs::read(a.join(&name)).unwrap();
        let y = std::fs::read(b.join(&name)).unwrap();
        assert!(x == y, "{name:?} differs");
    }
}

#[test]
fn runs_are_byte_identical_across_thread_counts() {
    let args = ["pl", "example-4-3", "--samples", "100", "--seed", "3"];
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert_eq!(code(&run(&args, a.path())), 0);
    let o = bin()
        .args(args)
        .arg("--out")
        .arg(b.path())
        .env("LQR_LANDSCAPE_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_same_outputs(a.path(), b.path());
}

#[test]
fn invalid_thread_count_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let o = bin()
        .args(["solve", "single-integrator", "--out"])
        .arg(dir.path())
        .env("LQR_LANDSCAPE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}
