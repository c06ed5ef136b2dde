use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const P_B: &str = "a1=1\nb1=0\nc1=1\na2=4\nb2=1\nc2=1\nL=1\n";

fn shadowkit(out: &Path, cfg: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shadowkit"))
        .args(args)
        .arg("--config")
        .arg(cfg)
        .env("SHADOWKIT_OUT", out)
        .output()
        .unwrap()
}

fn setup(body: &str) -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, body).unwrap();
    (dir, cfg)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn analyze_reports_closed_forms() {
    let (dir, cfg) = setup(P_B);
    let out = shadowkit(dir.path(), &cfg, &["analyze", "--x0=0.25"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let a = json(&dir.path().join("analysis.json"));
    assert!((a["bifurcations"][0]["eps"].as_f64().unwrap() - 0.0506606).abs() < 5e-8);
    assert!((a["pitchfork"]["k2"].as_f64().unwrap() + 0.0200521).abs() < 5e-6);
    assert_eq!(a["pitchfork"]["direction"], "left");
    assert_eq!(a["config"]["command"], "analyze");
    assert!((a["layer"]["targets"]["maxwell_gap"].as_f64().unwrap() + 0.075).abs() < 5e-3);
}

#[test]
fn ordering_violation_exits_two() {
    let (dir, cfg) = setup("a1=2\nb1=1\nc1=1\na2=2\nb2=1\nc2=1\n");
    let out = shadowkit(dir.path(), &cfg, &["analyze"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ordering condition"));
}

#[test]
fn config_errors_exit_one_with_location() {
    let (dir, cfg) = setup(&format!("{P_B}stray line\n"));
    let out = shadowkit(dir.path(), &cfg, &["analyze"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run.cfg:8"));

    let (dir, cfg) = setup(P_B);
    let out = shadowkit(dir.path(), &cfg, &["layer", "--x0=0.25"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`eps`"));
    let out = shadowkit(dir.path(), &cfg, &["stability", "--eps=-2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn layer_outside_window_is_a_precondition_failure() {
    let (dir, cfg) = setup(P_B);
    let out = shadowkit(dir.path(), &cfg, &["layer", "--x0=0.45", "--eps=1e-4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn layer_report_and_profile() {
    let (dir, cfg) = setup(P_B);
    let out = shadowkit(dir.path(), &cfg, &["layer", "--x0=0.25", "--eps=1e-4"]);
    assert!(out.status.success());
    let r = json(&dir.path().join("layer_report.json"));
    assert!((r["lambda_eps"].as_f64().unwrap() - 6.0).abs() < 0.1);
    assert!((r["layer_x"].as_f64().unwrap() - 0.25).abs() < 0.05);
    for key in ["sup_dev", "maxwell_gap", "eps", "x0", "n"] {
        assert!(r.get(key).is_some(), "{key}");
    }
    let csv = fs::read_to_string(dir.path().join("layer_profile.csv")).unwrap();
    assert!(csv.starts_with("# command=layer\n"));
    assert!(csv.contains("\nx,v,V_eps,G_eps\n"));
    assert!(!csv.contains('\r'));
}

#[test]
fn csv_outputs_carry_headers() {
    let (dir, cfg) = setup(P_B);
    for (args, file, columns) in [
        (
            &["detect", "--n=200"][..],
            "bifurcations.csv",
            "k,eps,eps_analytic,rel_err,kernel_mean,purity",
        ),
        (
            &["stability", "--eps=0.03", "--n=50", "--count=3"][..],
            "spectrum.csv",
            "index,re,im",
        ),
        (
            &["maxwell", "--samples=11"][..],
            "maxwell.csv",
            "lambda,v1,v2,gap",
        ),
    ] {
        let out = shadowkit(dir.path(), &cfg, args);
        assert!(out.status.success(), "{args:?}");
        let text = fs::read_to_string(dir.path().join(file)).unwrap();
        let header: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
        assert!(header.contains(&"# a2=4.0") && header.contains(&"# L=1.0"));
        assert_eq!(text.lines().nth(header.len()), Some(columns));
    }
    let spectrum = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert!(spectrum.contains("# verdict=unstable"));
    let bif = fs::read_to_string(dir.path().join("bifurcations.csv")).unwrap();
    assert_eq!(bif.lines().filter(|l| !l.starts_with('#')).count(), 4);
}

#[test]
fn branch_writes_table_profiles_and_summary() {
    let (dir, cfg) = setup(P_B);
    let out = shadowkit(
        dir.path(),
        &cfg,
        &["branch", "--n=100", "--s_max=0.03", "--profile_every=5"],
    );
    assert!(out.status.success());
    let s = json(&dir.path().join("branch_summary.json"));
    assert!(s["fit"]["k2"].as_f64().unwrap() < 0.0);
    assert_eq!(s["end_plus"], "amplitude_reached");
    let profiles = fs::read_dir(dir.path().join("profiles")).unwrap().count();
    assert!(profiles >= 2);
    let table = fs::read_to_string(dir.path().join("branch.csv")).unwrap();
    assert!(table.contains("\ns,eps,lambda,v_min,v_max,v0,vL,leading_eig,stable\n"));
}

#[test]
fn out_dir_key_is_overridden_by_environment() {
    let (dir, cfg) = setup(&format!("{P_B}out_dir=ignored\n"));
    let out = shadowkit(&dir.path().join("env"), &cfg, &["maxwell", "--samples=3"]);
    assert!(out.status.success());
    assert!(dir.path().join("env/maxwell.csv").exists());
    assert!(!Path::new("ignored").exists());
}
