use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rcgd(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcgd"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_trajectory_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = rcgd(
        &["run", "--objective", "quadratic", "--H", "1,-1", "--alpha", "0.1", "--x0", "1,1", "--seed", "7", "--iters", "100"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,i,f,grad_norm,x_1,x_2,I_t,S_t");
    assert_eq!(lines.count(), 101);

    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["subcommand"], "run");
    assert_eq!(m["seeds"][0], 7);
    assert_eq!(m["config"]["alpha"], "0.1");
    assert!(m["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    for key in ["version", "outputs"] {
        assert!(m.get(key).is_some(), "manifest lacks {key}");
    }
    assert!(dir.path().join("config.toml").exists());
}

#[test]
fn run_first_row_matches_hand_computation() {
    let dir = tempfile::tempdir().unwrap();
    let o = rcgd(
        &["run", "--H", "1,-1", "--alpha", "0.1", "--x0", "1,1", "--seed", "7", "--iters", "1"],
        dir.path(),
    );
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    // f(1,1) = 0 and one step on coordinate i moves x_i by -0.1 * H_ii.
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 0.0);
    let i: usize = rows[0][1].parse().unwrap();
    let expect = if i == 1 { [0.9, 1.0] } else { [1.0, 1.1] };
    let x: Vec<f64> = rows[1][4..6].iter().map(|v| v.parse().unwrap()).collect();
    assert!((x[0] - expect[0]).abs() < 1e-15 && (x[1] - expect[1]).abs() < 1e-15);
}

#[test]
fn oversized_step_is_a_precondition_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = rcgd(&["run", "--H", "1,-1", "--alpha", "1.5", "--x0", "1,1"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 4] = [
        &["run", "--H", "1,-1", "--alpha", "0.1", "--x0", "1,1", "--no-such-flag"],
        &["run", "--H", "1,-1", "--alpha", "0.1", "--x0", "1,1", "--param", "zz=1"],
        &["run", "--objective", "nope", "--alpha", "0.1", "--x0", "1,1"],
        &["run", "--H", "1,-1", "--x0", "1,1"],
    ];
    for args in cases {
        let o = rcgd(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("in.toml");
    fs::write(&cfg, "objective = \"quadratic\"\nH = \"1,-1\"\nalpha = 0.2\nx0 = [1.0, 1.0]\nmax_iters = 5\n").unwrap();
    let o = rcgd(&["run", "--config", cfg.to_str().unwrap(), "--alpha", "0.1"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["config"]["alpha"], "0.1");
    assert_eq!(m["config"]["max_iters"], "5");

    fs::write(&cfg, "[table]\nx = 1\n").unwrap();
    let o = rcgd(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn lyapunov_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = rcgd(
        &["lyapunov", "--objective", "quadratic", "--H", "1,-1", "--alpha", "0.1", "--horizon", "1000000"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&dir.path().join("spectrum.json"));
    let keys: Vec<&String> = s.as_object().unwrap().keys().collect();
    let mut expected = [
        "exponents",
        "multiplicities",
        "dim_unstable",
        "dim_center_stable",
        "std_errors",
        "horizon",
        "seed",
    ];
    expected.sort();
    let mut keys: Vec<&str> = keys.iter().map(|k| k.as_str()).collect();
    keys.sort();
    assert_eq!(keys, expected);
    let e = s["exponents"].as_array().unwrap();
    let closed = [0.5 * 1.1f64.ln(), 0.5 * 0.9f64.ln()];
    for (got, want) in e.iter().zip(closed) {
        assert!((got.as_f64().unwrap() - want).abs() < 5e-3, "{got} vs {want}");
    }
    assert_eq!(s["dim_unstable"], 1);
    assert_eq!(s["horizon"], 1_000_000);
}

#[test]
fn geometry_reports_positive_constants() {
    let dir = tempfile::tempdir().unwrap();
    let o = rcgd(&["geometry", "--H", "1,-1", "--alpha", "0.1", "--grid", "20000"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let g = json(&dir.path().join("geometry.json"));
    let get = |k: &str| g[k].as_f64().unwrap_or_else(|| panic!("missing {k}"));
    assert!(get("sigma") > 0.0 && get("rho") > 0.0 && get("p") > 0.0);
    assert!(get("rho_H") < get("rho") / 4.0);
    assert!(get("p_minus") < 0.0 && get("p_plus") > 0.0);
}

#[test]
fn escape_is_deterministic_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "escape",
        "--objective",
        "separable-quartic",
        "--alpha",
        "0.05",
        "--trials",
        "40",
        "--seed",
        "11",
    ];
    let mut one = args.to_vec();
    one.extend(["--threads", "1"]);
    let mut four = args.to_vec();
    four.extend(["--threads", "4"]);
    assert!(rcgd(&one, a.path()).status.success());
    assert!(rcgd(&four, b.path()).status.success());
    for f in ["trials.csv", "summary.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
    let s = json(&a.path().join("summary.json"));
    assert_eq!(s["trials"], 40);
    assert_eq!(s["counts"]["to_strict_saddle"], 0);
}

#[test]
fn run_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["run", "--objective", "coupled-saddle", "--alpha", "0.02", "--x0", "0.3,-0.2", "--seed", "5", "--iters", "500", "--plot"];
    assert!(rcgd(&args, a.path()).status.success());
    assert!(rcgd(&args, b.path()).status.success());
    for f in ["trajectory.csv", "plot.svg"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = rcgd(&["check"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let c = json(&dir.path().join("check.json"));
    assert!(c.as_array().unwrap().iter().all(|x| x["passed"] == true));
}
