//! Impulse responses and their WAV + JSON sidecar on-disk form.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::audio::{self, SampleFormat};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fdtd,
    Geometric,
    Hybrid,
    /// Loaded from disk without a sidecar (e.g. a measured response).
    Recorded,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Fdtd => "fdtd",
            Method::Geometric => "geometric",
            Method::Hybrid => "hybrid",
            Method::Recorded => "recorded",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub method: Method,
    pub scene_digest: Option<String>,
    pub metadata: Map<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    method: Method,
    sample_rate: u32,
    length: usize,
    #[serde(default)]
    scene_digest: Option<String>,
    #[serde(default)]
    metadata: Map<String, Value>,
}

impl ImpulseResponse {
    pub fn new(samples: Vec<f64>, sample_rate: u32, method: Method) -> Result<Self> {
        let rir = ImpulseResponse { samples, sample_rate, method, scene_digest: None, metadata: Map::new() };
        rir.validate()?;
        Ok(rir)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::InvalidArgument("impulse response is empty".into()));
        }
        if self.sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if self.samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("impulse response has non-finite samples".into()));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum()
    }

    pub fn with_digest(mut self, digest: impl Into<String>) -> Self {
        self.scene_digest = Some(digest.into());
        self
    }

    pub fn set_meta(&mut self, key: &str, value: impl Into<Value>) {
        self.metadata.insert(key.to_string(), value.into());
    }

    /// Sidecar path for a WAV path: same stem, `.json` extension.
    pub fn sidecar_path(wav: &Path) -> PathBuf {
        wav.with_extension("json")
    }

    pub fn sidecar_json(&self) -> String {
        let doc = Sidecar {
            method: self.method,
            sample_rate: self.sample_rate,
            length: self.samples.len(),
            scene_digest: self.scene_digest.clone(),
            metadata: self.metadata.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("sidecar serializes") + "\n"
    }

    /// Writes a 32-bit float WAV and its metadata sidecar.
    pub fn write(&self, wav: impl AsRef<Path>) -> Result<()> {
        let wav = wav.as_ref();
        audio::write_wav(wav, &self.samples, self.sample_rate, SampleFormat::F32)?;
        let side = Self::sidecar_path(wav);
        std::fs::write(&side, self.sidecar_json()).map_err(|e| Error::io(side, e))
    }

    /// Reads a WAV; picks up the sidecar when present, else tags it `recorded`.
    pub fn read(wav: impl AsRef<Path>) -> Result<Self> {
        let wav = wav.as_ref();
        let audio = audio::read_wav(wav)?;
        let side = Self::sidecar_path(wav);
        let mut rir = ImpulseResponse {
            samples: audio.samples,
            sample_rate: audio.sample_rate,
            method: Method::Recorded,
            scene_digest: None,
            metadata: Map::new(),
        };
        if side.exists() {
            let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
            let doc: Sidecar = serde_json::from_str(&text)?;
            rir.method = doc.method;
            rir.scene_digest = doc.scene_digest;
            rir.metadata = doc.metadata;
        }
        rir.validate()?;
        Ok(rir)
    }
}
