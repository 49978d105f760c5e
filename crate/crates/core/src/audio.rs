//! Mono WAV reading/writing.

use std::path::Path;

use hound::{SampleFormat as HoundFormat, WavReader, WavSpec, WavWriter};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SampleFormat {
    #[default]
    F32,
    Pcm16,
}

/// Decoded audio, mixed down to mono.
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Audio> {
    let path = path.as_ref();
    let wav_err = |source| Error::Wav { path: path.to_path_buf(), source };
    let mut reader = WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        HoundFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(wav_err)?,
        HoundFormat::Int => {
            let scale = 1.0 / (1_i64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<Result<_, _>>()
                .map_err(wav_err)?
        }
    };
    let samples = interleaved
        .chunks(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    Ok(Audio { samples, sample_rate: spec.sample_rate })
}

pub fn write_wav(path: impl AsRef<Path>, samples: &[f64], sample_rate: u32, format: SampleFormat) -> Result<()> {
    let path = path.as_ref();
    let wav_err = |source| Error::Wav { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let spec = match format {
        SampleFormat::F32 => WavSpec { channels: 1, sample_rate, bits_per_sample: 32, sample_format: HoundFormat::Float },
        SampleFormat::Pcm16 => WavSpec { channels: 1, sample_rate, bits_per_sample: 16, sample_format: HoundFormat::Int },
    };
    let mut w = WavWriter::create(path, spec).map_err(wav_err)?;
    for &s in samples {
        match format {
            SampleFormat::F32 => w.write_sample(s as f32),
            SampleFormat::Pcm16 => w.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16),
        }
        .map_err(wav_err)?;
    }
    w.finalize().map_err(wav_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let x = vec![0.0, 0.5, -0.25, 1e-3];
        write_wav(&p, &x, 16_000, SampleFormat::F32).unwrap();
        let a = read_wav(&p).unwrap();
        assert_eq!(a.sample_rate, 16_000);
        for (r, w) in a.samples.iter().zip(&x) {
            assert_eq!(*r, *w as f32 as f64);
        }
    }

    #[test]
    fn pcm16_quantizes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.wav");
        write_wav(&p, &[0.5, -2.0], 8_000, SampleFormat::Pcm16).unwrap();
        let a = read_wav(&p).unwrap();
        assert!((a.samples[0] - 0.5).abs() < 1e-4);
        assert!((a.samples[1] + 32767.0 / 32768.0).abs() < 1e-9);
    }
}
