//! Combines a wave-based RIR (below the crossover) with a geometric RIR
//! (above it) through a complementary linear-phase FIR pair.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dsp;
use crate::error::{Error, Result};
use crate::fdtd::{self, FdtdConfig};
use crate::geo::{self, GeoConfig};
use crate::rir::{ImpulseResponse, Method};
use crate::scene::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    AnalyticDelay,
    PeakMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    DirectEnergyMatch,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossoverSpec {
    pub crossover_frequency: f64,
    /// Odd FIR length.
    pub filter_length: usize,
    pub alignment: Alignment,
    pub calibration: Calibration,
}

impl Default for CrossoverSpec {
    fn default() -> Self {
        CrossoverSpec {
            crossover_frequency: 1400.0,
            filter_length: 511,
            alignment: Alignment::AnalyticDelay,
            calibration: Calibration::DirectEnergyMatch,
        }
    }
}

impl CrossoverSpec {
    pub fn validate(&self, rate: u32) -> Result<()> {
        if !(self.crossover_frequency > 0.0 && self.crossover_frequency < rate as f64 / 2.0) {
            return Err(Error::InvalidConfig(format!(
                "crossover {} Hz must lie between 0 and the Nyquist frequency {} Hz",
                self.crossover_frequency,
                rate as f64 / 2.0
            )));
        }
        if self.filter_length.is_multiple_of(2) {
            return Err(Error::InvalidConfig("filter_length must be odd".into()));
        }
        Ok(())
    }

    pub fn group_delay(&self) -> usize {
        (self.filter_length - 1) / 2
    }

    pub fn lowpass(&self, rate: u32) -> Vec<f64> {
        dsp::lowpass_fir(self.crossover_frequency, rate as f64, self.filter_length)
    }
}

/// `LP * wave + HP * geo`, delayed by the filter group delay.
pub fn merge(wave: &ImpulseResponse, geo: &ImpulseResponse, spec: &CrossoverSpec) -> Result<ImpulseResponse> {
    if wave.sample_rate != geo.sample_rate {
        return Err(Error::RateMismatch(wave.sample_rate, geo.sample_rate));
    }
    spec.validate(wave.sample_rate)?;
    if wave.scene_digest != geo.scene_digest {
        log::warn!("merging responses from different scenes ({:?} vs {:?})", wave.scene_digest, geo.scene_digest);
    }
    let lp = spec.lowpass(wave.sample_rate);
    let hp = dsp::complementary_highpass(&lp);
    let len = wave.samples.len().max(geo.samples.len()) + spec.filter_length - 1;
    let mut out = vec![0.0; len];
    for (o, v) in out.iter_mut().zip(dsp::fft_convolve(&wave.samples, &lp)) {
        *o += v;
    }
    for (o, v) in out.iter_mut().zip(dsp::fft_convolve(&geo.samples, &hp)) {
        *o += v;
    }
    let digest = geo.scene_digest.clone().or_else(|| wave.scene_digest.clone());
    let mut rir = ImpulseResponse::new(out, wave.sample_rate, Method::Hybrid)?;
    rir.scene_digest = digest;
    rir.set_meta("crossover_hz", spec.crossover_frequency);
    rir.set_meta("filter_length", spec.filter_length);
    rir.set_meta("group_delay_samples", spec.group_delay());
    rir.set_meta("wave_digest", json!(wave.scene_digest));
    rir.set_meta("geo_digest", json!(geo.scene_digest));
    Ok(rir)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentReport {
    /// Samples the wave branch was moved by (positive = later).
    pub shift: i64,
    pub gain: f64,
    /// Why calibration was skipped, if it was.
    pub calibration_skipped: Option<String>,
}

/// Index of the first strong arrival: the first sample reaching half the
/// global peak, refined to the local maximum within the following 1 ms.
fn arrival_index(x: &[f64], rate: u32) -> Option<usize> {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak < 1e-4 {
        return None;
    }
    let onset = x.iter().position(|v| v.abs() >= 0.5 * peak)?;
    let span = (rate as f64 * 1e-3).round() as usize;
    let end = (onset + span + 1).min(x.len());
    (onset..end).max_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs()))
}

fn window_energy(x: &[f64], centre: usize, half: usize) -> f64 {
    let lo = centre.saturating_sub(half);
    let hi = (centre + half + 1).min(x.len());
    if lo >= hi {
        return 0.0;
    }
    x[lo..hi].iter().map(|v| v * v).sum()
}

/// Shifts the wave branch so its direct arrival lands where the geometric
/// one does, then scales it so the direct-sound energies (compared below
/// the crossover, within +-1 ms) agree.
pub fn calibrate_and_align(
    wave: &ImpulseResponse,
    geo: &ImpulseResponse,
    scene: Option<&Scene>,
    spec: &CrossoverSpec,
) -> Result<(ImpulseResponse, AlignmentReport)> {
    if wave.sample_rate != geo.sample_rate {
        return Err(Error::RateMismatch(wave.sample_rate, geo.sample_rate));
    }
    spec.validate(wave.sample_rate)?;
    let rate = wave.sample_rate;
    let arrival = arrival_index(&wave.samples, rate).ok_or(Error::NoDirectArrival)?;
    let target = match spec.alignment {
        Alignment::AnalyticDelay => {
            let scene = scene.ok_or_else(|| {
                Error::InvalidArgument("analytic_delay alignment needs the scene geometry".into())
            })?;
            (rate as f64 * scene.source_receiver_distance() / scene.speed_of_sound).round() as usize
        }
        Alignment::PeakMatch => arrival_index(&geo.samples, rate).ok_or(Error::NoDirectArrival)?,
    };
    let shift = target as i64 - arrival as i64;
    let n = wave.samples.len();
    let shifted: Vec<f64> = (0..n as i64)
        .map(|i| {
            let j = i - shift;
            if (0..n as i64).contains(&j) {
                wave.samples[j as usize]
            } else {
                0.0
            }
        })
        .collect();

    let mut gain = 1.0;
    let mut skipped = None;
    match spec.calibration {
        Calibration::None => skipped = Some("disabled".to_string()),
        Calibration::DirectEnergyMatch => {
            if scene.is_some_and(|s| !s.line_of_sight()) {
                skipped = Some("no line of sight".to_string());
            } else {
                let lp = dsp::lowpass_fir(0.7 * spec.crossover_frequency, rate as f64, spec.filter_length);
                let half = (rate as f64 * 1e-3).round() as usize;
                let ew = window_energy(&dsp::zero_phase_filter(&shifted, &lp), target, half);
                let eg = window_energy(&dsp::zero_phase_filter(&geo.samples, &lp), target, half);
                if eg <= 0.0 {
                    skipped = Some("geometric branch has no direct sound".to_string());
                } else if ew <= 0.0 {
                    return Err(Error::NoDirectArrival);
                } else {
                    gain = (eg / ew).sqrt();
                }
            }
        }
    }

    let mut out = wave.clone();
    out.samples = shifted.iter().map(|v| v * gain).collect();
    out.set_meta("alignment_shift_samples", shift);
    out.set_meta("calibration_gain", gain);
    Ok((out, AlignmentReport { shift, gain, calibration_skipped: skipped }))
}

/// Runs both solvers on `scene`, aligns and calibrates the wave branch, and
/// merges. The filter group delay is removed so the direct sound stays at d/c.
pub fn simulate_hybrid(
    scene: &Scene,
    fdtd_cfg: &FdtdConfig,
    geo_cfg: &GeoConfig,
    spec: &CrossoverSpec,
) -> Result<ImpulseResponse> {
    if fdtd_cfg.output_rate != geo_cfg.output_rate {
        return Err(Error::RateMismatch(fdtd_cfg.output_rate, geo_cfg.output_rate));
    }
    spec.validate(geo_cfg.output_rate)?;
    let wave = fdtd::simulate_wave(scene, fdtd_cfg)?;
    let geo = geo::simulate_geometric(scene, geo_cfg)?;
    let (aligned, report) = calibrate_and_align(&wave, &geo, Some(scene), spec)?;
    let merged = merge(&aligned, &geo, spec)?;
    let delay = spec.group_delay();
    let keep = wave.samples.len().max(geo.samples.len());
    let mut rir = ImpulseResponse::new(merged.samples[delay..delay + keep].to_vec(), merged.sample_rate, Method::Hybrid)?
        .with_digest(scene.digest());
    rir.metadata = merged.metadata;
    rir.set_meta("group_delay_removed", true);
    rir.set_meta("alignment", serde_json::to_value(&report)?);
    rir.set_meta("crossover", serde_json::to_value(spec)?);
    rir.set_meta("fdtd", wave.metadata.get("config").cloned().unwrap_or_default());
    rir.set_meta("geometric", geo.metadata.get("config").cloned().unwrap_or_default());
    Ok(rir)
}
