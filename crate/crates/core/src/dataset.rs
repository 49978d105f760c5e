//! Reverberant-speech dataset generation: T60-matched RIR sampling, clean
//! speech convolution, train/dev/test splits and a line-delimited manifest.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::audio::{self, SampleFormat};
use crate::dsp;
use crate::error::{Error, Result};
use crate::rir::{ImpulseResponse, Method};

pub const PEAK_TARGET: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub clean_path: PathBuf,
    pub rir_path: PathBuf,
    pub output_path: PathBuf,
    pub split: Split,
    pub applied_gain: f64,
    pub rir_method: Method,
    pub t60: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&serde_json::to_string(r)?);
            s.push('\n');
        }
        Ok(s)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<_, _>>()?;
        Ok(DatasetManifest { records })
    }

    pub fn split_counts(&self) -> BTreeMap<Split, usize> {
        let mut m = BTreeMap::new();
        for r in &self.records {
            *m.entry(r.split).or_insert(0) += 1;
        }
        m
    }
}

/// Counts of T60 values in contiguous bins `[k*w, (k+1)*w)` starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T60Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl T60Histogram {
    pub fn from_values(values: &[f64], bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0) {
            return Err(Error::InvalidArgument("bin width must be positive".into()));
        }
        let mut counts = Vec::new();
        for &v in values {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("T60 value {v} is not a non-negative number")));
            }
            let b = (v / bin_width) as usize;
            if b >= counts.len() {
                counts.resize(b + 1, 0);
            }
            counts[b] += 1;
        }
        Ok(T60Histogram { bin_width, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_of(&self, t60: f64) -> usize {
        (t60 / self.bin_width) as usize
    }
}

/// Largest-remainder apportionment of `n` items over `weights`.
fn apportion(weights: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = n - quota.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if weights[i] > 0.0 {
            quota[i] += 1;
            left -= 1;
        }
    }
    quota
}

/// Draws `n` pool indices whose T60 histogram follows `target`.
///
/// Target bins with no pool entries hand their share to the nearest
/// non-empty pool bins, split in proportion to those bins' pool sizes.
pub fn sample_matched(pool_t60: &[f64], target: &T60Histogram, n: usize, seed: u64) -> Result<Vec<usize>> {
    if pool_t60.is_empty() || n == 0 {
        return Err(Error::InvalidArgument("need a non-empty pool and n >= 1".into()));
    }
    if target.total() == 0 {
        return Err(Error::InvalidArgument("target histogram is empty".into()));
    }
    let mut pool_bins: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &t) in pool_t60.iter().enumerate() {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidArgument(format!("pool T60 value {t} is not a non-negative number")));
        }
        pool_bins.entry(target.bin_of(t)).or_default().push(i);
    }
    let support: Vec<usize> = (0..target.counts.len()).filter(|&b| target.counts[b] > 0).collect();
    if !support.iter().any(|b| pool_bins.contains_key(b)) {
        return Err(Error::DisjointSupport);
    }

    let mut weight: BTreeMap<usize, f64> = BTreeMap::new();
    for &b in &support {
        let w = target.counts[b] as f64;
        if pool_bins.contains_key(&b) {
            *weight.entry(b).or_insert(0.0) += w;
            continue;
        }
        let dist = pool_bins.keys().map(|&k| k.abs_diff(b)).min().unwrap_or(0);
        let near: Vec<usize> = pool_bins.keys().copied().filter(|&k| k.abs_diff(b) == dist).collect();
        let size: usize = near.iter().map(|k| pool_bins[k].len()).sum();
        for k in near {
            *weight.entry(k).or_insert(0.0) += w * pool_bins[&k].len() as f64 / size as f64;
        }
    }

    let bins: Vec<usize> = weight.keys().copied().collect();
    let quotas = apportion(&weight.values().copied().collect::<Vec<_>>(), n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = Vec::with_capacity(n);
    for (b, q) in bins.iter().zip(quotas) {
        let members = &pool_bins[b];
        if q <= members.len() {
            let mut m = members.clone();
            let (chosen, _) = m.partial_shuffle(&mut rng, q);
            picks.extend_from_slice(chosen);
        } else {
            picks.extend((0..q).map(|_| members[rng.random_range(0..members.len())]));
        }
    }
    picks.shuffle(&mut rng);
    Ok(picks)
}

/// Full linear convolution of `clean` with the RIR, peak-normalised to
/// 0.9. Returns the output and the gain applied.
pub fn convolve(clean: &[f64], clean_rate: u32, rir: &ImpulseResponse, allow_resample: bool) -> Result<(Vec<f64>, f64)> {
    if clean.is_empty() || rir.samples.is_empty() {
        return Err(Error::InvalidArgument("clean signal and RIR must be non-empty".into()));
    }
    let h = if rir.sample_rate == clean_rate {
        rir.samples.clone()
    } else if allow_resample {
        let scale = rir.sample_rate as f64 / clean_rate as f64;
        dsp::resample(&rir.samples, rir.sample_rate as f64, clean_rate as f64).iter().map(|v| v * scale).collect()
    } else {
        return Err(Error::RateMismatch(clean_rate, rir.sample_rate));
    };
    let mut out = dsp::fft_convolve(clean, &h);
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gain = if peak > 0.0 { PEAK_TARGET / peak } else { 1.0 };
    out.iter_mut().for_each(|v| *v *= gain);
    Ok((out, gain))
}

/// Shuffled partition of `n` items. Dev and test get the floor of their
/// share and train takes the remainder.
pub fn make_splits(n: usize, ratio: (f64, f64, f64), seed: u64) -> Result<Vec<Split>> {
    let (tr, dv, ts) = ratio;
    if [tr, dv, ts].iter().any(|r| !(*r > 0.0)) || (tr + dv + ts - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("split ratios must be positive and sum to 1".into()));
    }
    let n_dev = (dv * n as f64 + 1e-9).floor() as usize;
    let n_test = (ts * n as f64 + 1e-9).floor() as usize;
    if n_dev == 0 || n_test == 0 || n_dev + n_test >= n {
        return Err(Error::InvalidArgument(format!("{n} items are too few for a three-way split")));
    }
    Ok(assign(n, n_dev, n_test, seed))
}

fn assign(n: usize, n_dev: usize, n_test: usize, seed: u64) -> Vec<Split> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = vec![Split::Train; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = if rank < n_dev {
            Split::Dev
        } else if rank < n_dev + n_test {
            Split::Test
        } else {
            Split::Train
        };
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    /// Every clean file with every RIR.
    Cross,
    /// Each clean file with `pairs_per_clean` RIRs drawn at random.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub pairing: Pairing,
    pub pairs_per_clean: usize,
    pub seed: u64,
    pub format: SampleFormat,
    pub ratio: (f64, f64, f64),
    pub workers: usize,
    pub allow_resample: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            pairing: Pairing::Cross,
            pairs_per_clean: 1,
            seed: 42,
            format: SampleFormat::F32,
            ratio: (0.8, 0.1, 0.1),
            workers: 1,
            allow_resample: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildSummary {
    pub manifest: DatasetManifest,
    pub manifest_path: PathBuf,
    /// Inputs that could not be read, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
    /// Jobs that failed while convolving or writing.
    pub failed: Vec<(PathBuf, String)>,
}

/// WAV files under `dir`, recursively, in sorted order.
pub fn list_wavs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let path = entry.map_err(|e| Error::io(&d, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// RIR paths from a directory of WAVs or a list file (one path per line,
/// relative paths resolved against the list's directory, `#` comments).
pub fn resolve_rir_list(source: &Path) -> Result<Vec<PathBuf>> {
    if source.is_dir() {
        return list_wavs(source);
    }
    let text = fs::read_to_string(source).map_err(|e| Error::io(source, e))?;
    let base = source.parent().unwrap_or(Path::new("."));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let p = PathBuf::from(l);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        })
        .collect())
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "x".into())
}

struct LoadedRir {
    path: PathBuf,
    rir: ImpulseResponse,
    t60: Option<f64>,
    split: Split,
}

/// Convolves clean speech with RIRs and writes `out_dir/<split>/<clean>__<rir>.wav`
/// plus `out_dir/manifest.jsonl`. Splits are made over RIRs, so no room
/// appears in more than one split.
pub fn build_dataset(clean_dir: &Path, rir_source: &Path, out_dir: &Path, cfg: &DatasetConfig) -> Result<BuildSummary> {
    if cfg.workers == 0 {
        return Err(Error::InvalidConfig("workers must be at least 1".into()));
    }
    if !clean_dir.is_dir() {
        return Err(Error::InvalidArgument(format!("{} is not a directory", clean_dir.display())));
    }
    let mut summary = BuildSummary::default();
    let clean_paths = list_wavs(clean_dir)?;

    let mut rirs = Vec::new();
    for path in resolve_rir_list(rir_source)? {
        match ImpulseResponse::read(&path) {
            Ok(rir) => {
                let t60 = analysis::estimate_t60(&rir).ok().map(|t| t.seconds);
                rirs.push(LoadedRir { path, rir, t60, split: Split::Train });
            }
            Err(e) => {
                log::warn!("skipping RIR {}: {e}", path.display());
                summary.skipped.push((path, e.to_string()));
            }
        }
    }
    if clean_paths.is_empty() || rirs.is_empty() {
        return Err(Error::InvalidArgument("need at least one clean file and one RIR".into()));
    }
    let splits = match make_splits(rirs.len(), cfg.ratio, cfg.seed) {
        Ok(s) => s,
        Err(_) => {
            log::warn!("{} RIRs are too few for a three-way split; dev/test get their floor share", rirs.len());
            let n = rirs.len();
            let dev = (cfg.ratio.1 * n as f64 + 1e-9).floor() as usize;
            let test = (cfg.ratio.2 * n as f64 + 1e-9).floor() as usize;
            assign(n, dev, test, cfg.seed)
        }
    };
    for (r, s) in rirs.iter_mut().zip(splits) {
        r.split = s;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut jobs: Vec<(usize, usize)> = Vec::new();
    for ci in 0..clean_paths.len() {
        match cfg.pairing {
            Pairing::Cross => jobs.extend((0..rirs.len()).map(|ri| (ci, ri))),
            Pairing::Random => jobs.extend((0..cfg.pairs_per_clean).map(|_| (ci, rng.random_range(0..rirs.len())))),
        }
    }

    let mut used = HashSet::new();
    let outputs: Vec<PathBuf> = jobs
        .iter()
        .map(|&(ci, ri)| {
            let base = format!("{}__{}", stem(&clean_paths[ci]), stem(&rirs[ri].path));
            let dir = out_dir.join(rirs[ri].split.to_string());
            let mut name = format!("{base}.wav");
            let mut k = 1;
            while !used.insert(dir.join(&name)) {
                name = format!("{base}__{k}.wav");
                k += 1;
            }
            dir.join(name)
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let results: Vec<Result<f64>> = pool.install(|| {
        jobs.par_iter()
            .zip(&outputs)
            .map(|(&(ci, ri), out)| {
                let clean = audio::read_wav(&clean_paths[ci])?;
                let (wet, gain) = convolve(&clean.samples, clean.sample_rate, &rirs[ri].rir, cfg.allow_resample)?;
                audio::write_wav(out, &wet, clean.sample_rate, cfg.format)?;
                Ok(gain)
            })
            .collect()
    });

    for ((&(ci, ri), out), res) in jobs.iter().zip(&outputs).zip(results) {
        match res {
            Ok(gain) => summary.manifest.records.push(ManifestRecord {
                clean_path: clean_paths[ci].clone(),
                rir_path: rirs[ri].path.clone(),
                output_path: out.clone(),
                split: rirs[ri].split,
                applied_gain: gain,
                rir_method: rirs[ri].rir.method,
                t60: rirs[ri].t60,
            }),
            Err(e) => {
                log::warn!("{} with {}: {e}", clean_paths[ci].display(), rirs[ri].path.display());
                summary.failed.push((clean_paths[ci].clone(), e.to_string()));
            }
        }
    }

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let manifest_path = out_dir.join("manifest.jsonl");
    let mut f = fs::File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    f.write_all(summary.manifest.to_jsonl()?.as_bytes()).map_err(|e| Error::io(&manifest_path, e))?;
    summary.manifest_path = manifest_path;
    Ok(summary)
}
