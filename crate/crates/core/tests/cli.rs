use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../docs/systems")
        .join(name)
        .display()
        .to_string()
}

fn cmd() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rank-recur"));
    c.env_remove("RANK_RECUR_DEFAULT_TOL");
    c
}

fn run(args: &[&str]) -> Output {
    cmd().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn out_dir(tmp: &tempfile::TempDir, tag: &str) -> (PathBuf, String) {
    let d = tmp.path().join(tag);
    let s = d.display().to_string();
    (d, s)
}

#[test]
fn simulate_period_three_tail() {
    let tmp = tempfile::tempdir().unwrap();
    let (d, ds) = out_dir(&tmp, "p3");
    let o = run(&["simulate", "--system", &fixture("period3.toml"), "--force", "--out", &ds]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(d.join("trajectory.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "n,x,phase");
    assert_eq!(rows.len(), 10_001);
    assert_eq!(rows[1], "1,1.0000000000000000e0,1");
    assert_eq!(rows[3], "3,-1.0000000000000000e0,1");
    let xs: Vec<f64> = rows[1..].iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    for w in xs[3..].chunks(3).filter(|c| c.len() == 3) {
        assert_eq!(w, [1.0, 1.0, -1.0]);
    }
    let r = report(&d);
    assert_eq!(r["schema"], "rank-recur/simulate/v1");
    assert_eq!(r["seeds"][0]["orbit"]["period"], 3);
    assert_eq!(r["forced"], true);
    assert_eq!(r["system"]["certified"], false);
}

#[test]
fn simulate_median_settles_on_divisor_of_four() {
    let tmp = tempfile::tempdir().unwrap();
    let (d, ds) = out_dir(&tmp, "median");
    let o = run(&["simulate", "--system", &fixture("median.toml"), "--seeds", "3", "--rng-seed", "11", "--out", &ds]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = report(&d);
    for s in r["seeds"].as_array().unwrap() {
        let p = s["orbit"]["period"].as_u64().unwrap();
        assert_eq!(4 % p, 0);
    }
    for i in 1..=3 {
        assert!(d.join(format!("trajectory-{i}.csv")).exists());
    }
    for row in r["distances"].as_array().unwrap() {
        for v in row.as_array().unwrap() {
            assert!(v.as_f64().unwrap() <= 1e-8);
        }
    }
    assert_eq!(r["rng_seed"], 11);
}

#[test]
fn csv_values_round_trip_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let (d, ds) = out_dir(&tmp, "rt");
    let o = run(&["simulate", "--system", &fixture("median.toml"), "--steps", "400", "--pmax", "8", "--out", &ds]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(d.join("trajectory.csv")).unwrap();
    let r = report(&d);
    let orbit = &r["seeds"][0]["orbit"];
    let last: f64 = csv.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    let p = orbit["period"].as_u64().unwrap() as usize;
    let vals: Vec<f64> = orbit["phase_values"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(last, vals[p - 1]);
}

#[test]
fn malformed_file_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let (d, ds) = out_dir(&tmp, "bad");
    let o = run(&["simulate", "--system", &fixture("malformed.toml"), "--out", &ds]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("load:"));
    assert!(stderr(&o).contains("1:8"));
    assert!(!d.exists());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("none.toml").display().to_string();
    let cases: &[(&[&str], i32)] = &[
        (&["solve", "--system", &fixture("contraction.toml")], 0),
        (&["lipschitz", "--system", &missing], 1),
        (&["simulate"], 2),
        (&["simulate", "--system", &fixture("contraction.toml"), "--seed-values", "1,2"], 2),
        (&["simulate", "--system", &fixture("contraction.toml"), "--seeds", "2", "--seed-values", "1"], 2),
        (&["simulate", "--system", &fixture("contraction.toml"), "--steps", "20", "--pmax", "10"], 2),
        (&["solve", "--system", &fixture("malformed.toml")], 3),
        (&["solve", "--system", &fixture("tent.toml")], 4),
        (&["lipschitz", "--system", &fixture("tent.toml")], 4),
        (&["simulate", "--system", &fixture("blowup.toml"), "--force"], 5),
        (&["simulate", "--system", &fixture("drift.toml"), "--force"], 6),
        (&["solve", "--system", &fixture("period3.toml"), "--force"], 6),
        (&["verify", "--system", &fixture("period3.toml")], 7),
        (&["closed-form", "--system", &fixture("median.toml")], 8),
        (&["closed-form", "--system", &fixture("max-minus-rank.toml")], 8),
        (&["verify", "--suite", "no-such-suite"], 2),
    ];
    for (args, want) in cases {
        let o = run(args);
        assert_eq!(code(&o), *want, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn numeric_failure_keeps_partial_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    let (d, ds) = out_dir(&tmp, "blow");
    let o = run(&["simulate", "--system", &fixture("blowup.toml"), "--force", "--out", &ds]);
    assert_eq!(code(&o), 5);
    let csv = std::fs::read_to_string(d.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(report(&d)["seeds"][0]["failure"].as_str().unwrap().contains("step 5"));
}

#[test]
fn solve_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let (d, ds) = out_dir(&tmp, "solve");
    let o = run(&["solve", "--system", &fixture("affine.toml"), "--out", &ds]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = report(&d);
    assert!(r["fixed_point"]["residual"].as_f64().unwrap() <= 1e-12);
    assert_eq!(r["shift"]["passed"], true);
    let period = r["orbit"]["period"].as_u64().unwrap();
    assert!(period <= 2);
    let solved: Vec<f64> = r["orbit"]["phase_values"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();

    // the simulated orbit agrees
    let (d2, ds2) = out_dir(&tmp, "sim");
    assert_eq!(code(&run(&["simulate", "--system", &fixture("affine.toml"), "--out", &ds2])), 0);
    let s = report(&d2);
    let sim: Vec<f64> = s["seeds"][0]["orbit"]["phase_values"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let anchor = s["seeds"][0]["orbit"]["anchor"].as_u64().unwrap() as usize;
    for (j, v) in sim.iter().enumerate() {
        let n = anchor + j;
        assert!((v - solved[(n - 1) % solved.len()]).abs() <= 1e-9);
    }

    let o = run(&["solve", "--system", &fixture("contraction.toml")]);
    assert!(stdout(&o).contains("orbit period 1: [2.000000000000]"), "{}", stdout(&o));
}

#[test]
fn closed_form_shapes() {
    let tmp = tempfile::tempdir().unwrap();
    for (file, shape, metric) in [
        ("autonomous.toml", "autonomous", "absolute"),
        ("period-two.toml", "period-two-max", "absolute"),
        ("power.toml", "power-law", "relative"),
        ("power-raw.toml", "power-law", "relative"),
    ] {
        let (d, ds) = out_dir(&tmp, file);
        let o = run(&["closed-form", "--system", &fixture(file), "--out", &ds]);
        assert_eq!(code(&o), 0, "{file}: {}", stderr(&o));
        let r = report(&d);
        assert_eq!(r["data"]["shape"], shape);
        assert_eq!(r["metric"], metric);
        assert!(r["solver_discrepancy"].as_f64().unwrap() <= 1e-9);
        assert!(r["simulation_discrepancy"].as_f64().unwrap() <= 1e-9);
    }
}

#[test]
fn closed_form_tolerance_is_enforced() {
    // agreement is at rounding level, so a far smaller tolerance fails the check
    let o = run(&["closed-form", "--system", &fixture("power.toml"), "--tol", "1e-300"]);
    assert_eq!(code(&o), 7);
    assert!(stderr(&o).contains("exceeds 1e-300"), "{}", stderr(&o));
    let o = run(&["closed-form", "--system", &fixture("period-two.toml"), "--tol", "0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_subset_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let mut bodies = Vec::new();
    for i in 0..2 {
        let (d, ds) = out_dir(&tmp, &format!("v{i}"));
        let o = run(&["verify", "--quick", "--suite", "duality", "--suite", "toward-fixed-point", "--rng-seed", "77", "--out", &ds]);
        assert_eq!(code(&o), 0, "{}", stdout(&o));
        bodies.push(std::fs::read(d.join("report.json")).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
    let r: Value = serde_json::from_slice(&bodies[0]).unwrap();
    let names: Vec<&str> = r["suites"].as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["duality", "toward-fixed-point"]);
    assert_eq!(r["rng_seed"], 77);

    let o = run(&["verify", "--list"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("rank-nonexpansive"));
}

#[test]
fn verify_system_battery() {
    let o = run(&["verify", "--system", &fixture("median.toml")]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS system"));
}

#[test]
fn lipschitz_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let (d, ds) = out_dir(&tmp, "tent");
    let o = run(&["lipschitz", "--system", &fixture("tent.toml"), "--out", &ds]);
    assert_eq!(code(&o), 4);
    let r = report(&d);
    assert_eq!(r["flagged"], true);
    assert!(r["certificates"][0]["estimate"]["bound"].as_f64().unwrap() >= 1.0);

    let (d, ds) = out_dir(&tmp, "affine");
    assert_eq!(code(&run(&["lipschitz", "--system", &fixture("affine.toml"), "--out", &ds])), 0);
    let r = report(&d);
    let bounds: Vec<f64> = r["certificates"].as_array().unwrap().iter().map(|c| c["estimate"]["bound"].as_f64().unwrap()).collect();
    assert_eq!(bounds, [0.5, 0.2, 0.3, 0.8]);
    assert_eq!(r["certificates"][0]["estimate"]["method"], "analytic-affine");

    let (d, ds) = out_dir(&tmp, "median");
    assert_eq!(code(&run(&["lipschitz", "--system", &fixture("median.toml"), "--out", &ds])), 0);
    assert!(report(&d)["system"]["alpha"]["bound"].as_f64().unwrap() < 1.0);

    // the default 5% margin flags the median family
    let o = run(&["lipschitz", "--system", &fixture("median.toml"), "--safety-factor", "1.05"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn tolerance_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let (d, ds) = out_dir(&tmp, "env");
    let o = cmd()
        .args(["simulate", "--system", &fixture("affine.toml"), "--out", &ds])
        .env("RANK_RECUR_DEFAULT_TOL", "1e-6")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(report(&d)["detect"]["tol"], 1e-6);

    let (d, ds) = out_dir(&tmp, "flag");
    let o = cmd()
        .args(["simulate", "--system", &fixture("affine.toml"), "--tol", "1e-4", "--out", &ds])
        .env("RANK_RECUR_DEFAULT_TOL", "1e-6")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(report(&d)["detect"]["tol"], 1e-4);

    let o = cmd()
        .args(["solve", "--system", &fixture("affine.toml")])
        .env("RANK_RECUR_DEFAULT_TOL", "tiny")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn help_and_version() {
    let o = run(&["--help"]);
    assert_eq!(code(&o), 0);
    for sub in ["simulate", "solve", "closed-form", "verify", "lipschitz"] {
        assert!(stdout(&o).contains(sub));
    }
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn in_process_runner_matches_binary() {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let c = rank_recur::cli::run(["rank-recur", "solve", "--system", &fixture("contraction.toml")], &mut out, &mut err);
    assert_eq!(c, 0);
    assert_eq!(String::from_utf8(out).unwrap(), stdout(&run(&["solve", "--system", &fixture("contraction.toml")])));
}
