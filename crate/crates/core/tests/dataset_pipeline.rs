mod support;

use std::fs;
use std::path::Path;

use rirforge::analysis::estimate_t60;
use rirforge::audio::{self, SampleFormat};
use rirforge::dataset::{self, build_dataset, DatasetConfig, DatasetManifest, Pairing, Split, PEAK_TARGET};
use rirforge::{ImpulseResponse, Method};

use support::{exp_decay_rir, gaussian_noise, utterance};

fn write_clean(dir: &Path, names: &[&str]) {
    for (k, name) in names.iter().enumerate() {
        audio::write_wav(dir.join(format!("{name}.wav")), &utterance(k as u64, 16_000.0, 1.0), 16_000, SampleFormat::F32)
            .unwrap();
    }
}

fn write_rir(path: &Path, samples: Vec<f64>) {
    ImpulseResponse::new(samples, 16_000, Method::Recorded).unwrap().write(path).unwrap();
}

#[test]
fn cross_pairing_covers_every_combination() {
    let tmp = tempfile::tempdir().unwrap();
    let (clean, rirs, out) = (tmp.path().join("clean"), tmp.path().join("rirs"), tmp.path().join("out"));
    fs::create_dir_all(&clean).unwrap();
    fs::create_dir_all(&rirs).unwrap();
    write_clean(&clean, &["a", "b"]);
    write_rir(&rirs.join("r1.wav"), exp_decay_rir(0.4, 16_000.0, 0.5, 1));
    write_rir(&rirs.join("r2.wav"), exp_decay_rir(0.9, 16_000.0, 1.0, 2));

    let summary = build_dataset(&clean, &rirs, &out, &DatasetConfig::default()).unwrap();
    assert!(summary.skipped.is_empty() && summary.failed.is_empty());
    let m = &summary.manifest;
    assert_eq!(m.records.len(), 4);
    for r in &m.records {
        assert!(r.output_path.exists());
        let wet = audio::read_wav(&r.output_path).unwrap();
        let peak = wet.samples.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!((peak - PEAK_TARGET).abs() < 1e-6);
        assert!(r.applied_gain > 0.0);
        // the manifest's T60 is the one the analyser reports for that RIR
        let t60 = estimate_t60(&ImpulseResponse::read(&r.rir_path).unwrap()).unwrap().seconds;
        assert_eq!(r.t60, Some(t60));
    }
    let text = fs::read_to_string(out.join("manifest.jsonl")).unwrap();
    assert_eq!(DatasetManifest::from_jsonl(&text).unwrap(), *m);
    assert_eq!(m.split_counts().values().sum::<usize>(), 4);
}

#[test]
fn delta_rirs_give_back_the_clean_signal() {
    let tmp = tempfile::tempdir().unwrap();
    let (clean, rirs, out) = (tmp.path().join("clean"), tmp.path().join("rirs"), tmp.path().join("out"));
    fs::create_dir_all(&clean).unwrap();
    fs::create_dir_all(&rirs).unwrap();
    write_clean(&clean, &["x"]);
    write_rir(&rirs.join("delta.wav"), vec![1.0]);
    let summary = build_dataset(&clean, &rirs, &out, &DatasetConfig::default()).unwrap();
    let r = &summary.manifest.records[0];
    assert_eq!(r.t60, None);
    let x = audio::read_wav(clean.join("x.wav")).unwrap().samples;
    let y = audio::read_wav(&r.output_path).unwrap().samples;
    assert_eq!(x.len(), y.len());
    for (a, b) in x.iter().zip(&y) {
        assert!((a * r.applied_gain - b).abs() < 1e-6);
    }
}

#[test]
fn random_pairing_and_rir_level_splits() {
    let tmp = tempfile::tempdir().unwrap();
    let (clean, rirs, out) = (tmp.path().join("clean"), tmp.path().join("rirs"), tmp.path().join("out"));
    fs::create_dir_all(&clean).unwrap();
    fs::create_dir_all(&rirs).unwrap();
    write_clean(&clean, &["a", "b", "c"]);
    for k in 0..10 {
        write_rir(&rirs.join(format!("r{k}.wav")), exp_decay_rir(0.3 + 0.05 * k as f64, 16_000.0, 0.4, k));
    }
    let cfg = DatasetConfig { pairing: Pairing::Random, pairs_per_clean: 4, workers: 2, ..Default::default() };
    let summary = build_dataset(&clean, &rirs, &out, &cfg).unwrap();
    assert_eq!(summary.manifest.records.len(), 12);
    let mut split_of = std::collections::HashMap::new();
    for r in &summary.manifest.records {
        let prev = split_of.insert(r.rir_path.clone(), r.split);
        assert!(prev.is_none() || prev == Some(r.split), "one RIR in two splits");
        assert!(r.output_path.starts_with(out.join(r.split.to_string())));
    }
    // same seed, same dataset
    let again = build_dataset(&clean, &rirs, &tmp.path().join("out2"), &cfg).unwrap();
    let pairs = |m: &DatasetManifest| m.records.iter().map(|r| (r.clean_path.clone(), r.rir_path.clone())).collect::<Vec<_>>();
    assert_eq!(pairs(&summary.manifest), pairs(&again.manifest));
}

#[test]
fn unreadable_rirs_are_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    let (clean, rirs, out) = (tmp.path().join("clean"), tmp.path().join("rirs"), tmp.path().join("out"));
    fs::create_dir_all(&clean).unwrap();
    fs::create_dir_all(&rirs).unwrap();
    write_clean(&clean, &["a"]);
    write_rir(&rirs.join("good.wav"), exp_decay_rir(0.4, 16_000.0, 0.5, 1));
    fs::write(rirs.join("broken.wav"), b"not audio").unwrap();
    let summary = build_dataset(&clean, &rirs, &out, &DatasetConfig::default()).unwrap();
    assert_eq!(summary.skipped.len(), 1);
    assert_eq!(summary.manifest.records.len(), 1);
}

#[test]
fn splits_follow_the_ratio() {
    let s = dataset::make_splits(100, (0.7, 0.2, 0.1), 3).unwrap();
    let count = |k| s.iter().filter(|x| **x == k).count();
    assert_eq!((count(Split::Train), count(Split::Dev), count(Split::Test)), (70, 20, 10));
}

#[test]
fn convolution_is_linear_in_the_rir() {
    let x = gaussian_noise(3000, 1);
    let h = gaussian_noise(400, 2);
    let a = ImpulseResponse::new(h.clone(), 16_000, Method::Recorded).unwrap();
    let b = ImpulseResponse::new(h.iter().map(|v| 3.0 * v).collect(), 16_000, Method::Recorded).unwrap();
    let (ya, ga) = dataset::convolve(&x, 16_000, &a, false).unwrap();
    let (yb, gb) = dataset::convolve(&x, 16_000, &b, false).unwrap();
    assert!((ga / gb - 3.0).abs() < 1e-9);
    for (u, v) in ya.iter().zip(&yb) {
        assert!((u - v).abs() < 1e-9);
    }
}

#[test]
fn resampling_is_opt_in() {
    let x = gaussian_noise(3000, 1);
    let rir = ImpulseResponse::new(exp_decay_rir(0.2, 48_000.0, 0.2, 3), 48_000, Method::Recorded).unwrap();
    assert!(dataset::convolve(&x, 16_000, &rir, false).is_err());
    let (y, _) = dataset::convolve(&x, 16_000, &rir, true).unwrap();
    assert!(y.len() >= x.len());
}
