//! Synthetic signals shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn gaussian_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            let v: f64 = rng.random_range(0.0..1.0);
            (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos()
        })
        .collect()
}

/// `n(t) * 10^(-3 t / T)`: exactly 60 dB of energy decay after `t60` seconds.
pub fn exp_decay_rir(t60: f64, rate: f64, seconds: f64, seed: u64) -> Vec<f64> {
    let len = (seconds * rate) as usize;
    gaussian_noise(len, seed)
        .iter()
        .enumerate()
        .map(|(i, v)| v * 10f64.powf(-3.0 * i as f64 / rate / t60))
        .collect()
}

/// Speech-like test utterance: voiced syllables with gliding pitch and
/// formant-shaped harmonics, some fricative noise bursts, and pauses.
pub fn utterance(seed: u64, rate: f64, seconds: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (seconds * rate) as usize;
    let mut out = vec![0.0; n];
    let mut t = rng.random_range(0.05..0.2);
    let mut phase = 0.0;
    while t < seconds - 0.15 {
        let dur: f64 = rng.random_range(0.12..0.32);
        let start = (t * rate) as usize;
        let len = ((dur * rate) as usize).min(n - start);
        let voiced = rng.random_bool(0.8);
        let level: f64 = rng.random_range(0.3..1.0);
        if voiced {
            let f0a: f64 = rng.random_range(95.0..220.0);
            let f0b = f0a * rng.random_range(0.8..1.2);
            let formants = [
                rng.random_range(300.0..900.0),
                rng.random_range(900.0..2400.0),
                rng.random_range(2300.0..3300.0),
            ];
            for k in 0..len {
                let x = k as f64 / len as f64;
                let f0 = f0a + (f0b - f0a) * x + 3.0 * (2.0 * PI * 5.5 * k as f64 / rate).sin();
                phase += 2.0 * PI * f0 / rate;
                let env = (PI * x).sin().powf(0.7);
                let mut s = 0.0;
                let mut h = 1;
                while (h as f64) * f0 < 0.45 * rate && h < 60 {
                    let f = h as f64 * f0;
                    let amp: f64 = formants
                        .iter()
                        .enumerate()
                        .map(|(i, fm)| (1.0 / (i + 1) as f64) * (-((f - fm) / 180.0).powi(2)).exp())
                        .sum::<f64>()
                        + 0.02;
                    s += amp * (h as f64 * phase).sin();
                    h += 1;
                }
                out[start + k] += level * env * s;
            }
        } else {
            let noise = gaussian_noise(len + 1, rng.random());
            for k in 0..len {
                let x = k as f64 / len as f64;
                let env = (PI * x).sin();
                out[start + k] += 0.3 * level * env * (noise[k + 1] - noise[k]);
            }
        }
        t += dur + rng.random_range(0.03..0.15);
        if rng.random_bool(0.15) {
            t += rng.random_range(0.15..0.4);
        }
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v *= 0.5 / peak);
    }
    out
}

/// Quadratic-time reference convolution.
pub fn direct_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Magnitude spectrum of `x` zero-padded to `n`, with bin spacing `rate/n`.
pub fn magnitude_spectrum(x: &[f64], n: usize) -> Vec<f64> {
    rirforge::dsp::rfft(x, n)[..n / 2 + 1].iter().map(|c| c.norm()).collect()
}

/// Energy of `x` below (`below = true`) or above `cutoff` Hz.
pub fn band_energy(x: &[f64], rate: f64, cutoff: f64, below: bool) -> f64 {
    let total: f64 = x.iter().map(|v| v * v).sum();
    let frac = rirforge::analysis::band_energy_fraction(x, rate, cutoff).unwrap();
    if below {
        total * frac
    } else {
        total * (1.0 - frac)
    }
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}
