use std::path::Path;
use std::process::{Command, Output};

fn tightlab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tightlab")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn show_lists_and_prints_bundled_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let o = tightlab(&["show"], dir.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o), "gauss-bm-32\nrademacher-ramp\n");
    let o = tightlab(&["show", "rademacher-ramp"], dir.path());
    assert!(stdout(&o).contains("name = \"rademacher-ramp\""));
}

#[test]
fn cover_prints_an_entropy_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = tightlab(&["cover", "rademacher-ramp", "--eps", "0.1,0.3,2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "eps,count,entropy");
    assert_eq!(lines[1], "0.1,5,1.6094379124341003");
    assert_eq!(lines[3], "2,1,0");
}

#[test]
fn calc_reports_the_entropy_route_without_monte_carlo() {
    let dir = tempfile::tempdir().unwrap();
    let o = tightlab(&["calc", "gauss-bm-32"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let j = v["entropy"]["entropy_integral"]["value"].as_f64().unwrap();
    assert!((j - 1.744_983_246_303_503_3).abs() < 1e-9, "{j}");
    assert!(v["entropy"]["tail"].is_null());
    assert!(v["majorizing"].is_null());
    // nothing is written without --out
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn measure_classifies_the_uniform_measure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    let o = tightlab(&["measure", "rademacher-ramp", "--out", out.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["majorizing"]["classification"]["class"], "majorizing");
    assert!(v["entropy"].is_null());
    assert!(out.join("w_matrix.csv").is_file());
}

#[test]
fn verify_twice_gives_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = tightlab(&["verify", "rademacher-ramp", "--reps", "2000", "--out", out.to_str().unwrap()], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stderr(&o).contains("calibrated C"));
    }
    let strip = |p: &Path| {
        let text = std::fs::read_to_string(p.join("report.json")).unwrap();
        tightlab_core::report::without_timestamp(&text).unwrap().replace(p.to_str().unwrap(), "<out>")
    };
    assert_eq!(strip(&a), strip(&b));
    for f in ["entropy_tail.csv", "majorizing_rates.csv", "phi.csv", "w_matrix.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let o = tightlab(&["diff", a.join("report.json").to_str().unwrap(), b.join("report.json").to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "same\n");
}

#[test]
fn a_new_seed_changes_only_monte_carlo_fields() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for seed in ["1", "2"] {
        let out = dir.path().join(seed);
        let o = tightlab(&["verify", "rademacher-ramp", "--reps", "2000", "--seed", seed, "--out", out.to_str().unwrap()], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        paths.push(out.join("report.json"));
    }
    let o = tightlab(&["diff", paths[0].to_str().unwrap(), paths[1].to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).ends_with("Monte Carlo fields only)\n"), "{}", stdout(&o));
}

#[test]
fn simulate_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = tightlab(&["simulate", "rademacher-ramp", "--route", "entropy", "--reps", "500", "--out", "sim"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("# entropy_tail.csv\nu,n,bound,empirical,stderr\n"));
    assert!(dir.path().join("sim/entropy_rates.csv").is_file());
    assert!(!dir.path().join("sim/majorizing_tail.csv").exists());
}

#[test]
fn heavy_tails_exit_with_a_premise_failure() {
    let dir = tempfile::tempdir().unwrap();
    let src = r#"
name = "heavy"
route = "entropy"

[space]
family = "interval"
points = 4

[model]
kind = "heavy-tail"
dof = 3.0
amplitude = [1.0, 0.5, 0.25, 0.1]

[grids]
u = [1.0]
n = [1, 2]

[mc]
seed = 3
"#;
    std::fs::write(dir.path().join("heavy.toml"), src).unwrap();
    let o = tightlab(&["verify", "heavy.toml", "--out", "h"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("InfiniteMgf"), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("h/report.json")).unwrap()).unwrap();
    assert_eq!(v["verdict"]["status"], "premise-failure");
}

#[test]
fn config_errors_name_the_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let src = "name = \"bad\"\n\n[space]\nfamily = \"interval\"\npoints = 3\n\n[model]\nkind = \"rademacher\"\namplitude = 1.0\n\n[grids]\nu = [1.0]\nn = [0, 2]\n\n[mc]\nseed = 1\n";
    std::fs::write(dir.path().join("bad.toml"), src).unwrap();
    let o = tightlab(&["calc", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("line 13") && err.contains("grids.n[0]"), "{err}");

    let o = tightlab(&["verify", "rademacher-ramp", "--reps", "5"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("mc.reps"));

    let o = tightlab(&["verify", "no-such-scenario"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(tightlab(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(tightlab(&["verify"], dir.path()).status.code(), Some(1));
    assert_eq!(tightlab(&["verify", "gauss-bm-32", "--route", "sideways"], dir.path()).status.code(), Some(1));
    assert_eq!(tightlab(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn verify_matches_the_golden_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = tightlab(&["verify", "rademacher-ramp"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/golden/rademacher-ramp.report.json");
    let o = tightlab(
        &["diff", golden.to_str().unwrap(), "rademacher-ramp-out/report.json", "--tol", "1e-9"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}
