//! Room-acoustic measures on impulse responses and plain signals.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};
use crate::rir::ImpulseResponse;

pub const LPS_EPSILON: f64 = 1e-10;
const MIN_FIT_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayFit {
    T20,
    T30,
}

impl fmt::Display for DecayFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecayFit::T20 => "t20",
            DecayFit::T30 => "t30",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct T60Estimate {
    pub seconds: f64,
    pub method: DecayFit,
}

/// Schroeder energy decay curve in dB (0 dB at the start), integrated up to
/// the point where the short-time energy first sinks to the noise floor.
fn decay_curve(energy: &[f64], dt: f64) -> Vec<f64> {
    let n = energy.len();
    let tail = (n / 10).max(1);
    let noise = energy[n - tail..].iter().sum::<f64>() / tail as f64;
    let peak = energy.iter().enumerate().fold(0, |best, (i, e)| if *e > energy[best] { i } else { best });

    let span = ((0.01 / dt).round() as usize).max(1);
    let mut end = n;
    let mut acc = 0.0;
    for i in peak..n {
        acc += energy[i];
        if i >= peak + span {
            acc -= energy[i - span];
        }
        if i >= peak + span && acc / span as f64 <= noise {
            end = i + 1 - span / 2;
            break;
        }
    }

    let mut edc = vec![0.0; end];
    let mut sum = 0.0;
    for i in (0..end).rev() {
        sum += energy[i];
        edc[i] = sum;
    }
    let total = edc.first().copied().unwrap_or(0.0);
    edc.iter().map(|e| if *e > 0.0 { 10.0 * (e / total).log10() } else { f64::NEG_INFINITY }).collect()
}

/// Least-squares slope (dB/s) of the curve between the first crossings of `hi` and `lo` dB.
fn fit_slope(edc: &[f64], dt: f64, hi: f64, lo: f64) -> Option<f64> {
    let start = edc.iter().position(|v| *v <= hi)?;
    let stop = edc.iter().position(|v| *v <= lo)?;
    if stop <= start || stop - start < MIN_FIT_POINTS || !edc[stop - 1].is_finite() {
        return None;
    }
    let pts = &edc[start..stop];
    let m = pts.len() as f64;
    let mean_t = (start + stop - 1) as f64 / 2.0 * dt;
    let mean_y = pts.iter().sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, y) in pts.iter().enumerate() {
        let t = (start + k) as f64 * dt - mean_t;
        sxy += t * (y - mean_y);
        sxx += t * t;
    }
    let slope = sxy / sxx;
    (slope < 0.0).then_some(slope)
}

/// T60 from a sequence of energies sampled every `dt` seconds (squared RIR
/// samples or a ray-tracing histogram).
pub fn t60_from_energy(energy: &[f64], dt: f64) -> Result<T60Estimate> {
    if energy.is_empty() || energy.iter().all(|e| *e == 0.0) {
        return Err(Error::InsufficientDecay);
    }
    let edc = decay_curve(energy, dt);
    if let Some(s) = fit_slope(&edc, dt, -5.0, -25.0) {
        return Ok(T60Estimate { seconds: -60.0 / s, method: DecayFit::T20 });
    }
    if let Some(s) = fit_slope(&edc, dt, -5.0, -35.0) {
        return Ok(T60Estimate { seconds: -60.0 / s, method: DecayFit::T30 });
    }
    Err(Error::InsufficientDecay)
}

pub fn estimate_t60(rir: &ImpulseResponse) -> Result<T60Estimate> {
    if rir.duration() < 0.01 {
        return Err(Error::TooShort("impulse response shorter than 10 ms".into()));
    }
    let energy: Vec<f64> = rir.samples.iter().map(|v| v * v).collect();
    t60_from_energy(&energy, 1.0 / rir.sample_rate as f64)
}

/// Early decay time: the 0 to -10 dB slope extrapolated to 60 dB.
pub fn edt(rir: &ImpulseResponse) -> Result<f64> {
    let dt = 1.0 / rir.sample_rate as f64;
    let energy: Vec<f64> = rir.samples.iter().map(|v| v * v).collect();
    if energy.iter().all(|e| *e == 0.0) {
        return Err(Error::InsufficientDecay);
    }
    let edc = decay_curve(&energy, dt);
    fit_slope(&edc, dt, 0.0, -10.0).map(|s| -60.0 / s).ok_or(Error::InsufficientDecay)
}

/// Direct-to-reverberant ratio in dB with a +-2.5 ms direct window. A
/// response with no energy outside the window gives `+inf`.
pub fn drr(samples: &[f64], rate: u32) -> Result<f64> {
    let energy: Vec<f64> = samples.iter().map(|v| v * v).collect();
    let Some((peak, &pe)) = energy.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) else {
        return Err(Error::NoDirectArrival);
    };
    let tail = (energy.len() / 10).max(1);
    let noise = energy[energy.len() - tail..].iter().sum::<f64>() / tail as f64;
    if pe <= 0.0 || pe <= 100.0 * noise {
        return Err(Error::NoDirectArrival);
    }
    let half = (0.0025 * rate as f64).round() as usize;
    let lo = peak.saturating_sub(half);
    let hi = (peak + half + 1).min(energy.len());
    let direct: f64 = energy[lo..hi].iter().sum();
    let rest: f64 = energy.iter().sum::<f64>() - direct;
    if rest <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (direct / rest).log10())
}

/// One-sided power spectrum with Parseval weights, paired with bin frequencies.
fn weighted_power(signal: &[f64], rate: f64) -> Result<Vec<(f64, f64)>> {
    if signal.is_empty() || signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("signal must be non-empty and finite".into()));
    }
    let n = signal.len();
    let spec = dsp::rfft(signal, n);
    let out: Vec<(f64, f64)> = (0..=n / 2)
        .map(|k| {
            let w = if k == 0 || (n.is_multiple_of(2) && k == n / 2) { 1.0 } else { 2.0 };
            (k as f64 * rate / n as f64, w * spec[k].norm_sqr())
        })
        .collect();
    if out.iter().all(|(_, p)| *p == 0.0) {
        return Err(Error::Silent);
    }
    Ok(out)
}

/// Fraction of the signal's energy strictly below `cutoff` Hz.
pub fn band_energy_fraction(signal: &[f64], rate: f64, cutoff: f64) -> Result<f64> {
    if !(cutoff > 0.0 && cutoff < rate / 2.0) {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} Hz must lie in (0, {})", rate / 2.0)));
    }
    let power = weighted_power(signal, rate)?;
    let total: f64 = power.iter().map(|(_, p)| p).sum();
    let below: f64 = power.iter().filter(|(f, _)| *f < cutoff).map(|(_, p)| p).sum();
    Ok(below / total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeCurve {
    /// `(f, fraction of energy strictly below f)`, starting at `(0, 0)` and ending at `(rate/2, 1)`.
    pub points: Vec<(f64, f64)>,
}

impl CumulativeCurve {
    /// Fraction of energy strictly below `freq`.
    pub fn at(&self, freq: f64) -> f64 {
        self.points.iter().find(|(f, _)| *f >= freq).map_or(1.0, |p| p.1)
    }

    /// Two whitespace-separated columns for plotting.
    pub fn to_columns(&self) -> String {
        self.points.iter().map(|(f, c)| format!("{f:.4} {c:.4}\n")).collect()
    }
}

pub fn cumulative_energy_curve(signal: &[f64], rate: f64) -> Result<CumulativeCurve> {
    let power = weighted_power(signal, rate)?;
    let total: f64 = power.iter().map(|(_, p)| p).sum();
    let mut points = Vec::with_capacity(power.len() + 1);
    let mut acc = 0.0;
    for (f, p) in &power {
        points.push((*f, (acc / total).min(1.0)));
        acc += p;
    }
    if points.last().is_some_and(|(f, _)| *f >= rate / 2.0) {
        points.pop();
    }
    points.push((rate / 2.0, 1.0));
    Ok(CumulativeCurve { points })
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("pearson needs two sequences of equal length >= 2".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogPowerSpectrogram {
    /// frames x bins
    pub values: Vec<Vec<f64>>,
    pub frame_hop: usize,
    pub window_size: usize,
    pub sample_rate: f64,
    pub floor: f64,
}

pub fn log_power_spectrogram(signal: &[f64], rate: f64, window: usize, hop: usize) -> Result<LogPowerSpectrogram> {
    if hop == 0 || window < hop {
        return Err(Error::InvalidArgument("need window >= hop > 0".into()));
    }
    if signal.len() < window {
        return Err(Error::TooShort(format!("{} samples, window is {window}", signal.len())));
    }
    let win = dsp::hann(window, true);
    let values = dsp::stft(signal, &win, hop)
        .into_iter()
        .map(|frame| frame.iter().map(|c| (c.norm_sqr() + LPS_EPSILON).ln()).collect())
        .collect();
    Ok(LogPowerSpectrogram { values, frame_hop: hop, window_size: window, sample_rate: rate, floor: LPS_EPSILON.ln() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcousticReport {
    pub t60: Option<f64>,
    pub estimation_method: Option<DecayFit>,
    pub edt: Option<f64>,
    pub drr: Option<f64>,
    pub band_energy_fraction: BTreeMap<String, f64>,
}

/// Every measure that applies; measures that cannot be computed are `None`.
pub fn analyze(rir: &ImpulseResponse, cutoffs: &[f64]) -> Result<AcousticReport> {
    let t60 = estimate_t60(rir).ok();
    let rate = rir.sample_rate as f64;
    let mut fractions = BTreeMap::new();
    for &c in cutoffs {
        fractions.insert(format!("{c}"), band_energy_fraction(&rir.samples, rate, c)?);
    }
    Ok(AcousticReport {
        t60: t60.map(|t| t.seconds),
        estimation_method: t60.map(|t| t.method),
        edt: edt(rir).ok(),
        drr: drr(&rir.samples, rir.sample_rate).ok(),
        band_energy_fraction: fractions,
    })
}

/// Mean and sample standard deviation, printed as `mean ± std` with four decimals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Summary { mean, std, count: values.len() })
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.std)
    }
}
