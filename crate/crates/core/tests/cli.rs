mod support;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rirforge::audio::{self, SampleFormat};
use rirforge::ImpulseResponse;

use support::{exp_decay_rir, utterance};

const SCENE: &str = r#"{"room_dims":[4,3,2.5],"source":[1,1,1],"receiver":[2.6,2,1.5],"surfaces":{"absorption":0.3}}"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rirforge")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(run(dir.path(), &[]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["simulate-geo", "--scene"]).status.code(), Some(2));
}

#[test]
fn every_subcommand_has_help() {
    let dir = tempfile::tempdir().unwrap();
    for sub in [
        "simulate-wave", "simulate-geo", "simulate-hybrid", "analyze", "energy-curve", "srmr", "wpe", "sample",
        "convolve", "build-dataset", "correlate",
    ] {
        let o = run(dir.path(), &[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        assert!(stdout(&o).contains("Usage"), "{sub}");
    }
}

#[test]
fn runtime_errors_exit_one_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"room_dims":[4,3,2.5],"source":[9,1,1],"receiver":[1,1,1]}"#).unwrap();
    let o = run(dir.path(), &["simulate-geo", "--scene", "bad.json", "--out", "x.wav"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    let o = run(dir.path(), &["analyze", "missing.wav"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("scene.json"), SCENE).unwrap();
    let o = run(dir.path(), &["simulate-geo", "--scene", "scene.json", "--out", "geo.wav", "--rays", "2000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rir = ImpulseResponse::read(dir.path().join("geo.wav")).unwrap();
    assert_eq!(rir.method, rirforge::Method::Geometric);
    assert!(rir.scene_digest.is_some());
    let o = run(dir.path(), &["analyze", "geo.wav"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("geo.wav"));
}

#[test]
fn convolve_wpe_srmr_chain() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    audio::write_wav(p.join("clean.wav"), &utterance(3, 16_000.0, 2.0), 16_000, SampleFormat::F32).unwrap();
    audio::write_wav(p.join("rir.wav"), &exp_decay_rir(0.7, 16_000.0, 0.8, 4), 16_000, SampleFormat::F32).unwrap();
    let steps: [&[&str]; 3] = [
        &["convolve", "--clean", "clean.wav", "--rir", "rir.wav", "--out", "wet.wav"],
        &["wpe", "--input", "wet.wav", "--out", "dry.wav"],
        &["srmr", "wet.wav", "dry.wav"],
    ];
    for args in steps {
        let o = run(p, args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(audio::read_wav(p.join("dry.wav")).unwrap().samples.len(), audio::read_wav(p.join("wet.wav")).unwrap().samples.len());
}

#[test]
fn energy_curve_and_sample() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    audio::write_wav(p.join("rir.wav"), &exp_decay_rir(0.5, 16_000.0, 0.6, 1), 16_000, SampleFormat::F32).unwrap();
    let o = run(p, &["energy-curve", "rir.wav"]);
    assert!(o.status.success());
    let last = stdout(&o).lines().last().unwrap().to_string();
    let cols: Vec<f64> = last.split_whitespace().map(|c| c.parse().unwrap()).collect();
    assert_eq!(cols, vec![8000.0, 1.0]);

    fs::create_dir(p.join("pool")).unwrap();
    for (k, t) in [0.25, 0.45, 0.85, 1.45].into_iter().enumerate() {
        let h = exp_decay_rir(t, 16_000.0, 1.2 * t, 10 + k as u64);
        audio::write_wav(p.join(format!("pool/r{k}.wav")), &h, 16_000, SampleFormat::F32).unwrap();
    }
    fs::write(p.join("target.txt"), "0.84\n0.86\n").unwrap();
    let o = run(p, &["sample", "--pool", "pool", "--target", "target.txt", "-n", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let picks: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(picks.len(), 3);
    assert!(picks.iter().all(|l| l.ends_with("r2.wav")), "{picks:?}");
}

#[test]
fn geometric_simulation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("scene.json"), SCENE).unwrap();
    for out in ["a.wav", "b.wav"] {
        let o = run(dir.path(), &["--workers", "2", "simulate-geo", "--scene", "scene.json", "--out", out, "--rays", "1500"]);
        assert!(o.status.success());
    }
    assert_eq!(fs::read(dir.path().join("a.wav")).unwrap(), fs::read(dir.path().join("b.wav")).unwrap());
}
