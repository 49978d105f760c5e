//! Single-channel weighted prediction error dereverberation in the STFT domain.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WpeConfig {
    pub stft_window: usize,
    pub stft_hop: usize,
    /// Prediction delay in frames. Below `stft_window / stft_hop` the
    /// predictor frames overlap the current one and eat the direct sound.
    pub delay: usize,
    /// Prediction filter length in frames.
    pub taps: usize,
    pub iterations: usize,
    /// Variance floor relative to the mean time-frequency power.
    pub variance_floor: f64,
}

impl Default for WpeConfig {
    fn default() -> Self {
        WpeConfig { stft_window: 512, stft_hop: 128, delay: 4, taps: 10, iterations: 3, variance_floor: 1e-6 }
    }
}

impl WpeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.delay < 1 || self.taps < 1 || self.iterations < 1 {
            return bad("delay, taps and iterations must all be at least 1");
        }
        if self.stft_hop == 0 || self.stft_window < self.stft_hop {
            return bad("need stft_window >= stft_hop > 0");
        }
        if !(self.variance_floor > 0.0) {
            return bad("variance_floor must be positive");
        }
        Ok(())
    }
}

fn dereverb_bin(x: &[Complex64], cfg: &WpeConfig, floor: f64) -> Result<Vec<Complex64>> {
    let (d, k) = (cfg.delay, cfg.taps);
    let frames = x.len();
    let delayed = |t: usize, j: usize| -> Complex64 {
        let lag = d + j;
        if t >= lag {
            x[t - lag]
        } else {
            Complex64::default()
        }
    };
    let mut out = x.to_vec();
    for _ in 0..cfg.iterations {
        let mut r = DMatrix::<Complex64>::zeros(k, k);
        let mut p = DVector::<Complex64>::zeros(k);
        for t in d..frames {
            let w = 1.0 / out[t].norm_sqr().max(floor);
            for i in 0..k {
                let xi = delayed(t, i);
                if xi == Complex64::default() {
                    continue;
                }
                p[i] += xi * x[t].conj() * w;
                for j in 0..k {
                    r[(i, j)] += xi * delayed(t, j).conj() * w;
                }
            }
        }
        let trace: f64 = (0..k).map(|i| r[(i, i)].re).sum();
        if trace <= 0.0 {
            return Ok(x.to_vec());
        }
        for i in 0..k {
            r[(i, i)] += Complex64::new(1e-8 * trace, 0.0);
        }
        let g = r.cholesky().ok_or_else(|| Error::Singular("prediction normal equations".into()))?.solve(&p);
        for t in 0..frames {
            let mut pred = Complex64::default();
            for i in 0..k {
                pred += g[i].conj() * delayed(t, i);
            }
            out[t] = x[t] - pred;
        }
    }
    Ok(out)
}

/// Dereverberates `signal`. The output has the same length as the input.
pub fn wpe(signal: &[f64], cfg: &WpeConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("signal contains non-finite samples".into()));
    }
    let (win, hop) = (cfg.stft_window, cfg.stft_hop);
    let pad = win - hop;
    let mut padded = vec![0.0; pad];
    padded.extend_from_slice(signal);
    let frames_needed = (padded.len().saturating_sub(win)).div_ceil(hop) + 1;
    padded.resize((frames_needed - 1) * hop + win + pad, 0.0);
    let window = dsp::hann(win, true);
    let spec = dsp::stft(&padded, &window, hop);
    if spec.len() < cfg.delay + cfg.taps + 1 {
        return Err(Error::TooShort(format!(
            "{} STFT frames, need at least {}",
            spec.len(),
            cfg.delay + cfg.taps + 1
        )));
    }
    let bins = spec[0].len();
    let mean_power = spec.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>() / (spec.len() * bins) as f64;
    if mean_power == 0.0 {
        return Ok(vec![0.0; signal.len()]);
    }
    let floor = cfg.variance_floor * mean_power;

    let per_bin: Vec<Vec<Complex64>> = (0..bins)
        .into_par_iter()
        .map(|b| {
            let column: Vec<Complex64> = spec.iter().map(|f| f[b]).collect();
            dereverb_bin(&column, cfg, floor)
        })
        .collect::<Result<_>>()?;
    let frames: Vec<Vec<Complex64>> = (0..spec.len()).map(|t| per_bin.iter().map(|col| col[t]).collect()).collect();
    let y = dsp::istft(&frames, &window, &window, hop, padded.len());
    Ok(y[pad..pad + signal.len()].to_vec())
}
