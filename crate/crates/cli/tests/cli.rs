use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ionsim_core::config::DEFAULT_CONFIG_TOML;
use ionsim_core::output::{read_scan, Manifest};

fn ionsim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ionsim"))
        .args(args)
        .current_dir(dir)
        .env_remove("IONSIM_WORKERS")
        .output()
        .expect("ionsim runs")
}

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("corpus").join(name)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_data_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = ionsim(&["run", s(&corpus("heating.ionseq")), "--out", s(&out), "--shots", "20", "--seed", "9"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["axial_heating", "radial_heating"] {
        let f = read_scan(&out.join(format!("{name}.csv"))).unwrap();
        assert_eq!(f.result.points.len(), 11);
        assert_eq!(f.metadata["kind"], "heating");
        assert_eq!(f.metadata["shots"], "20");
    }
    let m: Manifest = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m.seed, 9);
    assert_eq!(m.files.len(), 2);
    assert!(m.sequence.unwrap().contains("measure phonons radial"));
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, seed: &str| {
        let out = dir.path().join(sub);
        let o = ionsim(&["run", s(&corpus("rabi_flop.ionseq")), "--out", s(&out), "--seed", seed, "--shots", "30"], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("flop.csv")).unwrap()
    };
    let a = run("a", "5");
    assert_eq!(a, run("b", "5"));
    assert_ne!(a, run("c", "6"));
}

#[test]
fn validate_reports_blocks_and_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let o = ionsim(&["validate", s(&corpus("sidebands.ionseq"))], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("red_dark: 20 points on axis repeat"));
    assert!(stderr(&o).contains("warning: red sideband"));
}

#[test]
fn invalid_sequence_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.ionseq");
    fs::write(&f, "experiment e {\n  pulse carrier S(-1/2)->D(5/2) pi\n  scan none\n}\n").unwrap();
    let o = ionsim(&["validate", s(&f)], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.ionseq:2:"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ionsim(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(ionsim(&["figure", "fig6"], dir.path()).status.code(), Some(1));
    assert_eq!(ionsim(&["figure", "fig3", "--workers", "0"], dir.path()).status.code(), Some(1));
    let o = ionsim(&["fit", "x.csv", "--model", "cubic"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, DEFAULT_CONFIG_TOML.replace("sigma_shot = 240.0\n", "")).unwrap();
    let o = ionsim(&["validate", s(&corpus("lifetime.ionseq")), "--config", s(&cfg)], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sigma_shot"), "{}", stderr(&o));
}

#[test]
fn figure_then_fit_the_written_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig5");
    let o = ionsim(&["figure", "fig5", "--out", s(&out), "--shots", "200"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("fig5: gaussian tau"));
    for f in ["contrast.csv", "fits.json", "summary.txt", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let report = dir.path().join("report.txt");
    let o = ionsim(
        &["fit", s(&out.join("contrast.csv")), "--model", "gaussian-vs-exponential", "--out", s(&report)],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(report).unwrap();
    assert!(text.contains("preferred model: gaussian"), "{text}");
    let json: serde_json::Value = serde_json::from_str(text.split("--- json ---").nth(1).unwrap()).unwrap();
    let tau = json["fits"][0]["params"][0]["value"].as_f64().unwrap();
    assert!((0.8..1.1).contains(&tau), "{tau}");
}

#[test]
fn fit_rejects_incompatible_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h");
    assert!(ionsim(&["run", s(&corpus("heating.ionseq")), "--out", s(&out), "--shots", "5"], dir.path()).status.success());
    let o = ionsim(&["fit", s(&out.join("axial_heating.csv")), "--model", "line"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model 'line' needs"), "{}", stderr(&o));
    let o = ionsim(&["fit", s(&out.join("axial_heating.csv")), "--model", "linear"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("slope"));
}

#[test]
fn malformed_data_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("d.csv");
    fs::write(&f, "scan_value,p_d,std_err,shots\n1,oops,0,1\n").unwrap();
    let o = ionsim(&["fit", s(&f), "--model", "linear"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn workers_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_ionsim"))
        .args(["validate", s(&corpus("lifetime.ionseq"))])
        .env("IONSIM_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_ionsim"))
        .args(["validate", s(&corpus("lifetime.ionseq"))])
        .current_dir(dir.path())
        .env("IONSIM_WORKERS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
}
