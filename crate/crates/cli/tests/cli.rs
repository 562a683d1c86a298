use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn mplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mplab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL_PLAN: &str = r#"
law = "coin.toml"
horizons = [10, 40, 160, 640]
trials = 400
seed = 99
stats = ["gamma", "sigma2", "clt", "berry_esseen"]

[expect]
gamma_hat = [0.45, 0.55]
"#;

/// Temp dir holding the coin law and a plan with the given text.
fn plan_dir(plan: &str) -> tempfile::TempDir {
    let d = tempfile::tempdir().unwrap();
    fs::copy(data("laws/coin.toml"), d.path().join("coin.toml")).unwrap();
    fs::write(d.path().join("plan.toml"), plan).unwrap();
    d
}

#[test]
fn spectral_reports() {
    let o = mplab(&["spectral", p(&data("matrices/two_by_two.txt"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("rho_max = 2\n"), "{s}");
    assert!(s.contains("cyclicity = 1\n"), "{s}");

    let s = stdout(&mplab(&["spectral", p(&data("matrices/thirds.txt"))]));
    assert!(s.contains("rho_max = 2/3\n"), "{s}");
    assert!(s.contains("critical_arcs = (1,2) (2,3) (3,1)\n"), "{s}");
}

#[test]
fn spectral_diagnostics() {
    let o = mplab(&["spectral", p(&data("matrices/dead_row.txt"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not a valid max-plus operator"), "{}", stderr(&o));

    let d = tempfile::tempdir().unwrap();
    let bad = d.path().join("bad.txt");
    fs::write(&bad, "2\n0 0\n0 zz\n").unwrap();
    let o = mplab(&["spectral", p(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn spectral_skips_periodicity_when_reducible() {
    let d = tempfile::tempdir().unwrap();
    let m = d.path().join("m.txt");
    fs::write(&m, "2\n0 1\n-inf 0\n").unwrap();
    let s = stdout(&mplab(&["spectral", p(&m)]));
    assert!(s.contains("period_check = skipped"), "{s}");
}

#[test]
fn spectral_writes_report_file() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("out");
    let o = mplab(&["spectral", p(&data("matrices/thirds.txt")), "--out", p(&out)]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out.join("spectral.txt")).unwrap(), stdout(&o));
}

#[test]
fn certify_verdicts() {
    let s = stdout(&mplab(&["certify", p(&data("laws/zp.toml")), "--gamma", "0"]));
    assert!(s.contains("witness = Z\n"), "{s}");
    assert!(s.contains("degeneracy = degenerate\n"), "{s}");
    assert!(s.contains("arithmetic = lattice (0, 0)\n"), "{s}");

    let s = stdout(&mplab(&["certify", p(&data("laws/mlp_no_zero.toml")), "--depth", "8"]));
    assert!(s.contains("mlp = no"), "{s}");
    assert!(!s.contains("witness ="), "{s}");

    let s = stdout(&mplab(&["certify", p(&data("laws/irrational.toml")), "--seed", "1"]));
    assert!(s.contains("arithmetic = none\n"), "{s}");
    assert!(s.contains("arithmetic_basis = evidence\n"), "{s}");
}

#[test]
fn certify_refuses_parametric_law() {
    let o = mplab(&["certify", p(&data("laws/noisy.toml"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("finite support"), "{}", stderr(&o));
}

#[test]
fn run_writes_csvs_reproducibly() {
    let d = plan_dir(SMALL_PLAN);
    let plan = d.path().join("plan.toml");
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = d.path().join(format!("out{threads}"));
        let o = mplab(&["run", p(&plan), "--out", p(&out), "--threads", threads]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        outputs.push(out);
    }
    for name in ["gamma.csv", "sigma2.csv", "clt.csv", "berry_esseen.csv", "summary.txt"] {
        let a = fs::read(outputs[0].join(name)).unwrap();
        let b = fs::read(outputs[1].join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    let gamma = fs::read_to_string(outputs[0].join("gamma.csv")).unwrap();
    assert!(gamma.starts_with("# tool=mplab version="));
    assert!(gamma.contains("seed=99\nn,stat,value,ci_low,ci_high,trials,seed\n"));
    assert!(gamma.contains("640,gamma_hat,"));
}

#[test]
fn run_flags_override_plan() {
    let d = plan_dir(SMALL_PLAN);
    let plan = d.path().join("plan.toml");
    let out = d.path().join("out");
    let o = mplab(&["run", p(&plan), "--out", p(&out), "--seed", "5"]);
    assert!(o.status.success());
    let gamma = fs::read_to_string(out.join("gamma.csv")).unwrap();
    assert!(gamma.contains("seed=5\n"));
}

#[test]
fn run_threshold_failure_exits_one() {
    let d = plan_dir(&SMALL_PLAN.replace("[0.45, 0.55]", "[0.9, 1.0]"));
    let out = d.path().join("out");
    let o = mplab(&["run", p(&d.path().join("plan.toml")), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("result = FAIL"));
    assert!(out.join("gamma.csv").exists());
}

#[test]
fn run_never_overwrites_without_force() {
    let d = plan_dir(SMALL_PLAN);
    let plan = d.path().join("plan.toml");
    let out = d.path().join("out");
    assert!(mplab(&["run", p(&plan), "--out", p(&out)]).status.success());
    fs::write(out.join("gamma.csv"), "keep").unwrap();
    let o = mplab(&["run", p(&plan), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--force"));
    assert_eq!(fs::read_to_string(out.join("gamma.csv")).unwrap(), "keep");
    assert!(mplab(&["run", p(&plan), "--out", p(&out), "--force"]).status.success());
    assert_ne!(fs::read_to_string(out.join("gamma.csv")).unwrap(), "keep");
}

#[test]
fn run_missing_law_leaves_no_outputs() {
    let d = plan_dir(&SMALL_PLAN.replace("coin.toml", "absent.toml"));
    let out = d.path().join("out");
    let o = mplab(&["run", p(&d.path().join("plan.toml")), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.toml"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn run_degenerate_clt_points_at_certificate() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("out");
    let o = mplab(&["run", p(&data("plans/zp_clt.toml")), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("certificate is degenerate"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn run_needs_seed_and_out() {
    let d = plan_dir(&SMALL_PLAN.replace("seed = 99\n", ""));
    let plan = d.path().join("plan.toml");
    let o = mplab(&["run", p(&plan), "--out", p(&d.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"));
    let o = mplab(&["run", p(&plan), "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--out"));
}

#[test]
fn invariant_samples_of_memory_loss_law() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("out");
    let law = data("laws/mlp_01.toml");
    let o = mplab(&["sample-invariant", p(&law), "--seed", "3", "--samples", "50", "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("invariant.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(rows.len(), 50);
    assert!(rows.iter().all(|r| r.contains(",exact,") && r.ends_with(",0,0")), "{csv}");

    let o = mplab(&["sample-invariant", p(&law)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn coupling_frequencies() {
    let o = mplab(&[
        "coupling",
        p(&data("laws/mlp_no_zero.toml")),
        "--seed",
        "2",
        "--depth",
        "20",
        "--trials",
        "500",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("coupled = 0\n"));
}
