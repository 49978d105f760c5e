//! Speech-to-reverberation modulation energy ratio.
//!
//! Gammatone filterbank, Hilbert envelopes, a bank of band-pass modulation
//! filters, framed energies averaged over time, then the ratio of the
//! lowest modulation bands to the highest.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{self, Biquad};
use crate::error::{Error, Result};

const EAR_Q: f64 = 9.26449;
const MIN_BW: f64 = 24.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrmrConfig {
    pub acoustic_bands: usize,
    pub low_frequency: f64,
    pub high_frequency: f64,
    pub modulation_bands: usize,
    pub min_modulation: f64,
    pub max_modulation: f64,
    pub modulation_q: f64,
    pub frame_seconds: f64,
    pub hop_seconds: f64,
    /// 1-based inclusive modulation band ranges.
    pub numerator: (usize, usize),
    pub denominator: (usize, usize),
    /// Limit each band's frame energies to 30 dB under the overall peak.
    pub clip_dynamic_range: bool,
}

impl Default for SrmrConfig {
    fn default() -> Self {
        SrmrConfig {
            acoustic_bands: 23,
            low_frequency: 125.0,
            high_frequency: 8000.0,
            modulation_bands: 8,
            min_modulation: 4.0,
            max_modulation: 128.0,
            modulation_q: 2.0,
            frame_seconds: 0.256,
            hop_seconds: 0.064,
            numerator: (1, 4),
            denominator: (5, 8),
            clip_dynamic_range: false,
        }
    }
}

impl SrmrConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        let (n0, n1) = self.numerator;
        let (d0, d1) = self.denominator;
        if self.acoustic_bands == 0 || self.modulation_bands == 0 {
            return bad("band counts must be positive");
        }
        if n0 == 0 || d0 == 0 || n0 > n1 || d0 > d1 || n1.max(d1) > self.modulation_bands {
            return bad("numerator/denominator band ranges must be non-empty and within the modulation bank");
        }
        if n1 >= d0 && d1 >= n0 {
            return bad("numerator and denominator band ranges overlap");
        }
        if !(self.low_frequency > 0.0 && self.low_frequency < self.high_frequency) {
            return bad("acoustic frequency range is empty");
        }
        if !(self.hop_seconds > 0.0 && self.frame_seconds >= self.hop_seconds) {
            return bad("need frame >= hop > 0");
        }
        Ok(())
    }

    /// Modulation filter centres, log-spaced from min to max.
    pub fn modulation_centres(&self) -> Vec<f64> {
        let m = self.modulation_bands;
        if m == 1 {
            return vec![self.min_modulation];
        }
        let ratio = self.max_modulation / self.min_modulation;
        (0..m).map(|k| self.min_modulation * ratio.powf(k as f64 / (m - 1) as f64)).collect()
    }
}

/// `n` centre frequencies equally spaced on the ERB scale, ascending.
pub fn erb_space(low: f64, high: f64, n: usize) -> Vec<f64> {
    let c = EAR_Q * MIN_BW;
    let step = ((low + c).ln() - (high + c).ln()) / n as f64;
    let mut f: Vec<f64> = (1..=n).map(|i| -c + ((i as f64) * step).exp() * (high + c)).collect();
    f.reverse();
    f
}

/// Fourth-order gammatone band, realised as four cascaded complex one-pole
/// low-passes around the band centre. Unit gain at the centre frequency.
fn gammatone(x: &[f64], centre: f64, rate: f64) -> Vec<f64> {
    let erb = centre / EAR_Q + MIN_BW;
    let a = (-2.0 * PI * 1.019 * erb / rate).exp();
    let w = 2.0 * PI * centre / rate;
    let rot = Complex64::from_polar(1.0, w);
    let mut phase = Complex64::new(1.0, 0.0);
    let mut s = [Complex64::default(); 4];
    x.iter()
        .enumerate()
        .map(|(n, &v)| {
            let mut u = Complex64::new(v, 0.0) * phase.conj();
            for st in s.iter_mut() {
                *st = u * (1.0 - a) + *st * a;
                u = *st;
            }
            let y = 2.0 * (u * phase).re;
            phase *= rot;
            if n % 1024 == 1023 {
                phase /= phase.norm();
            }
            y
        })
        .collect()
}

/// Mean framed energy per modulation band for one acoustic band.
fn band_modulation_energy(band: &[f64], mods: &[Biquad], frame: usize, hop: usize) -> Vec<Vec<f64>> {
    let env: Vec<f64> = dsp::analytic_signal(band).iter().map(|c| c.norm()).collect();
    let win = dsp::hann(frame, true);
    mods.iter()
        .map(|bq| {
            let m = bq.process(&env);
            let frames = dsp::frame_count(m.len(), frame, hop);
            (0..frames)
                .map(|f| m[f * hop..f * hop + frame].iter().zip(&win).map(|(v, w)| (v * w).powi(2)).sum())
                .collect()
        })
        .collect()
}

pub fn srmr(signal: &[f64], rate: f64, cfg: &SrmrConfig) -> Result<f64> {
    cfg.validate()?;
    if rate < 8000.0 {
        return Err(Error::InvalidArgument(format!("sample rate {rate} Hz is below 8 kHz")));
    }
    if (signal.len() as f64) < rate {
        return Err(Error::TooShort("SRMR needs at least one second of signal".into()));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("signal contains non-finite samples".into()));
    }
    if signal.iter().all(|v| *v == 0.0) {
        return Err(Error::Silent);
    }
    let high = cfg.high_frequency.min(rate / 2.0);
    let centres = erb_space(cfg.low_frequency, high, cfg.acoustic_bands);
    let mods: Vec<Biquad> =
        cfg.modulation_centres().iter().map(|&f| Biquad::bandpass(f, cfg.modulation_q, rate)).collect();
    let frame = (cfg.frame_seconds * rate).round() as usize;
    let hop = (cfg.hop_seconds * rate).round() as usize;

    // [acoustic][modulation][frame]
    let per_band: Vec<Vec<Vec<f64>>> = centres
        .par_iter()
        .map(|&cf| band_modulation_energy(&gammatone(signal, cf, rate), &mods, frame, hop))
        .collect();

    let frames = per_band[0][0].len().max(1) as f64;
    let peak = per_band.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(*v));
    let floor = if cfg.clip_dynamic_range { peak * 1e-3 } else { 0.0 };
    let mut energy = vec![0.0; cfg.modulation_bands];
    for band in &per_band {
        for (k, series) in band.iter().enumerate() {
            energy[k] += series.iter().map(|v| v.max(floor)).sum::<f64>() / frames;
        }
    }
    let sum = |(a, b): (usize, usize)| energy[a - 1..b].iter().sum::<f64>();
    let (num, den) = (sum(cfg.numerator), sum(cfg.denominator));
    let peak_band = energy.iter().fold(0.0f64, |m, v| m.max(*v));
    if peak_band == 0.0 || den < 1e-12 * peak_band {
        return Err(Error::Silent);
    }
    Ok(num / den)
}
