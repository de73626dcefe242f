use std::path::Path;
use std::process::{Command, Output};

fn panosynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_panosynth"))
        .args(args)
        .output()
        .expect("spawn panosynth")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn make_phantom(dir: &Path, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let path = dir.join(name);
    let mut args = vec!["phantom", "--output", s(&path), "--size", "96"];
    args.extend_from_slice(extra);
    let out = panosynth(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn phantom_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = make_phantom(dir.path(), "a.pvol", &["--teeth", "16", "--seed", "1"]);
    let b = make_phantom(dir.path(), "b.pvol", &["--teeth", "16", "--seed", "1"]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let ta = std::fs::read(dir.path().join("a.pvol.truth.txt")).unwrap();
    let tb = std::fs::read(dir.path().join("b.pvol.truth.txt")).unwrap();
    assert_eq!(ta, tb);
}

#[test]
fn phantom_validation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.pvol");
    for bad in [&["--teeth", "0"][..], &["--tilt", "50"], &["--implants", "20"]] {
        let mut args = vec!["phantom", "--output", s(&p), "--size", "32"];
        args.extend_from_slice(bad);
        assert_eq!(panosynth(&args).status.code(), Some(2), "{bad:?}");
    }
    assert!(!p.exists());
}

#[test]
fn phantom_truth_records_tilt() {
    let dir = tempfile::tempdir().unwrap();
    make_phantom(dir.path(), "t.pvol", &["--tilt", "10"]);
    let truth = std::fs::read_to_string(dir.path().join("t.pvol.truth.txt")).unwrap();
    assert!(truth.lines().any(|l| l == "tilt_deg=10.0"), "{truth}");
}

#[test]
fn synthesize_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let vol = make_phantom(dir.path(), "p.pvol", &[]);
    let out = dir.path().join("pano.pgm");
    let r = panosynth(&["synthesize", "--input", s(&vol), "--output", s(&out), "--bits", "8"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let stdout = String::from_utf8(r.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.starts_with("width=")));

    let r = panosynth(&["compare", s(&out), s(&out)]);
    assert_eq!(r.status.code(), Some(0));
    let text = String::from_utf8(r.stdout).unwrap();
    for line in text.lines() {
        let (k, v) = line.split_once('=').expect("key=value line");
        assert!(!k.is_empty() && !v.is_empty());
    }
    assert!(text.lines().any(|l| l == "ssim=1"));
    assert!(text.lines().any(|l| l == "psnr=inf"));
}

#[test]
fn compare_dimension_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.pgm");
    let b = dir.path().join("b.pgm");
    panosynth::image::Image::filled(8, 8, 0.5).write_pgm(&a, 8).unwrap();
    panosynth::image::Image::filled(9, 8, 0.5).write_pgm(&b, 8).unwrap();
    assert_eq!(panosynth(&["compare", s(&a), s(&b)]).status.code(), Some(2));
}

#[test]
fn config_errors_exit_2_and_stage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "preprocess_lo=3000\npreprocess_hi=200\n").unwrap();
    let out = dir.path().join("o.pgm");
    let missing = dir.path().join("missing.pvol");
    let r = panosynth(&["synthesize", "--config", s(&cfg), "--input", s(&missing), "--output", s(&out)]);
    assert_eq!(r.status.code(), Some(2));

    std::fs::write(&cfg, "colour=blue\n").unwrap();
    let r = panosynth(&["synthesize", "--config", s(&cfg), "--input", s(&missing), "--output", s(&out)]);
    assert_eq!(r.status.code(), Some(2));

    let r = panosynth(&["synthesize", "--input", s(&missing), "--output", s(&out), "--beta", "-1"]);
    assert_eq!(r.status.code(), Some(2));

    let r = panosynth(&["synthesize", "--input", s(&missing), "--output", s(&out)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("load stage failed"));
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let vol = make_phantom(dir.path(), "p.pvol", &[]);
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("pano.pgm");
    std::fs::write(&cfg, format!("input={}\noutput={}\nsweep_deg=90\nbeta=0.1\n", s(&vol), s(&out))).unwrap();
    let r = panosynth(&["synthesize", "--config", s(&cfg), "--beta", "0.3", "--no-tilt-correct"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let sidecar = std::fs::read_to_string(dir.path().join("pano.pgm.txt")).unwrap();
    assert!(sidecar.lines().any(|l| l == "sweep_deg=90.0"));
    assert!(sidecar.lines().any(|l| l == "beta=0.3"));
    assert!(sidecar.lines().any(|l| l == "tilt_correct=false"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(panosynth(&["synthesize", "--beam-mode", "oblique"]).status.code(), Some(2));
    assert_eq!(panosynth(&["frobnicate"]).status.code(), Some(2));
}
