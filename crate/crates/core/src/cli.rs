//! Command-line front end. Every flag can also be set through a
//! `RIRFORGE_*` environment variable.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{self, Summary};
use crate::audio::{self, SampleFormat};
use crate::dataset::{self, DatasetConfig, Pairing, T60Histogram};
use crate::error::{Error, Result};
use crate::fdtd::{self, FdtdConfig};
use crate::geo::{self, GeoConfig};
use crate::hybrid::{self, Alignment, Calibration, CrossoverSpec};
use crate::rir::ImpulseResponse;
use crate::scene::{self, Scene};
use crate::srmr::{self, SrmrConfig};
use crate::wpe::{self, WpeConfig};

#[derive(Debug, Parser)]
#[command(name = "rirforge", version, about = "Room impulse response simulation and reverberant speech tooling")]
struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "RIRFORGE_WORKERS", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    workers: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Wave-based (FDTD) RIR, valid up to --max-frequency.
    SimulateWave(WaveArgs),
    /// Geometric RIR: image sources plus diffuse ray tracing.
    SimulateGeo(GeoArgs),
    /// Both solvers merged at a crossover frequency.
    SimulateHybrid(HybridArgs),
    /// T60, EDT, DRR and low-band energy fraction per RIR, plus corpus statistics.
    Analyze(AnalyzeArgs),
    /// Cumulative energy against frequency, as two columns.
    EnergyCurve(EnergyCurveArgs),
    /// Speech-to-reverberation modulation energy ratio per file and corpus mean.
    Srmr(SrmrArgs),
    /// Weighted prediction error dereverberation.
    Wpe(WpeArgs),
    /// Draw RIRs from a pool so their T60 histogram matches a target.
    Sample(SampleArgs),
    /// Convolve one clean file with one RIR.
    Convolve(ConvolveArgs),
    /// Convolve a clean corpus with RIRs, write splits and a manifest.
    BuildDataset(BuildArgs),
    /// Pearson correlation between two table columns.
    Correlate(CorrelateArgs),
}

#[derive(Debug, Args)]
struct SceneOut {
    /// Scene description (JSON).
    #[arg(long, env = "RIRFORGE_SCENE")]
    scene: PathBuf,
    /// Output WAV; a JSON sidecar is written next to it.
    #[arg(long, env = "RIRFORGE_OUT")]
    out: PathBuf,
    /// Output sample rate in Hz.
    #[arg(long, env = "RIRFORGE_RATE", default_value_t = 48_000)]
    rate: u32,
}

#[derive(Debug, Args)]
struct FdtdArgs {
    /// Highest frequency the grid resolves (Hz).
    #[arg(long, env = "RIRFORGE_MAX_FREQUENCY", default_value_t = 1400.0)]
    max_frequency: f64,
    #[arg(long, env = "RIRFORGE_PPW", default_value_t = 10.0)]
    points_per_wavelength: f64,
    #[arg(long, env = "RIRFORGE_CFL", default_value_t = 0.9)]
    cfl_fraction: f64,
    /// Simulated time in seconds.
    #[arg(long, env = "RIRFORGE_WAVE_DURATION", default_value_t = 0.5)]
    wave_duration: f64,
    #[arg(long, env = "RIRFORGE_MAX_CELLS", default_value_t = 50_000_000)]
    max_cells: usize,
}

impl FdtdArgs {
    fn config(&self, rate: u32) -> FdtdConfig {
        FdtdConfig {
            max_frequency: self.max_frequency,
            points_per_wavelength: self.points_per_wavelength,
            cfl_fraction: self.cfl_fraction,
            duration: self.wave_duration,
            output_rate: rate,
            max_cells: self.max_cells,
            ..FdtdConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct GeoFlags {
    #[arg(long, env = "RIRFORGE_ISM_ORDER", default_value_t = 6)]
    ism_order: u32,
    #[arg(long, env = "RIRFORGE_RAYS", default_value_t = 20_000)]
    rays: usize,
    #[arg(long, env = "RIRFORGE_MAX_BOUNCES", default_value_t = 50)]
    max_bounces: u32,
    /// Ray termination level in dB below launch energy.
    #[arg(long, env = "RIRFORGE_THRESHOLD_DB", default_value_t = -60.0, allow_hyphen_values = true)]
    threshold_db: f64,
    #[arg(long, env = "RIRFORGE_SEED", default_value_t = 42)]
    seed: u64,
    /// Cap on response length in seconds.
    #[arg(long, env = "RIRFORGE_MAX_DURATION", default_value_t = 10.0)]
    max_duration: f64,
}

impl GeoFlags {
    fn config(&self, rate: u32) -> GeoConfig {
        GeoConfig {
            ism_max_order: self.ism_order,
            ray_count: self.rays,
            max_ray_bounces: self.max_bounces,
            energy_threshold_db: self.threshold_db,
            output_rate: rate,
            rng_seed: self.seed,
            histogram_bin: 32.0 / rate as f64,
            max_duration: self.max_duration,
            ..GeoConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct WaveArgs {
    #[command(flatten)]
    io: SceneOut,
    #[command(flatten)]
    fdtd: FdtdArgs,
}

#[derive(Debug, Args)]
struct GeoArgs {
    #[command(flatten)]
    io: SceneOut,
    #[command(flatten)]
    geo: GeoFlags,
    /// Also write the diffuse energy histogram as text columns.
    #[arg(long)]
    histogram: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct HybridArgs {
    #[command(flatten)]
    io: SceneOut,
    #[command(flatten)]
    fdtd: FdtdArgs,
    #[command(flatten)]
    geo: GeoFlags,
    #[arg(long, env = "RIRFORGE_CROSSOVER", default_value_t = 1400.0)]
    crossover: f64,
    #[arg(long, env = "RIRFORGE_FILTER_LENGTH", default_value_t = 511)]
    filter_length: usize,
    #[arg(long, value_enum, default_value_t = Alignment::AnalyticDelay)]
    alignment: Alignment,
    #[arg(long, value_enum, default_value_t = Calibration::DirectEnergyMatch)]
    calibration: Calibration,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// RIR files or directories of them.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// Low-band cutoff for the energy fraction (Hz).
    #[arg(long, env = "RIRFORGE_CUTOFF", default_value_t = 250.0)]
    cutoff: f64,
}

#[derive(Debug, Args)]
struct EnergyCurveArgs {
    input: PathBuf,
    /// Write here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SrmrArgs {
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// Apply the dynamic-range clipping normalisation.
    #[arg(long)]
    normalized: bool,
}

#[derive(Debug, Args)]
struct WpeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 512)]
    window: usize,
    #[arg(long, default_value_t = 128)]
    hop: usize,
    #[arg(long, default_value_t = 4)]
    delay: usize,
    #[arg(long, default_value_t = 10)]
    taps: usize,
    #[arg(long, default_value_t = 3)]
    iterations: usize,
    #[arg(long, value_enum, default_value_t = SampleFormat::F32)]
    format: SampleFormat,
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// Candidate RIRs: a directory of WAVs or a list file of paths.
    #[arg(long)]
    pool: PathBuf,
    /// Target T60s: a directory of RIRs, or a file with one T60 (seconds) or RIR path per line.
    #[arg(long)]
    target: PathBuf,
    #[arg(long, short)]
    n: usize,
    #[arg(long, env = "RIRFORGE_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    bin_width: f64,
    /// Write the chosen paths here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConvolveArgs {
    #[arg(long)]
    clean: PathBuf,
    #[arg(long)]
    rir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Fail instead of resampling an RIR at a different rate.
    #[arg(long)]
    no_resample: bool,
    #[arg(long, value_enum, default_value_t = SampleFormat::F32)]
    format: SampleFormat,
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[arg(long, env = "RIRFORGE_CLEAN_DIR")]
    clean_dir: PathBuf,
    /// Directory of RIR WAVs or a list file (for example the output of `sample`).
    #[arg(long, env = "RIRFORGE_RIRS")]
    rirs: PathBuf,
    #[arg(long, env = "RIRFORGE_OUT_DIR")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Pairing::Cross)]
    pairing: Pairing,
    #[arg(long, default_value_t = 1)]
    pairs_per_clean: usize,
    #[arg(long, env = "RIRFORGE_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SampleFormat::F32)]
    format: SampleFormat,
    #[arg(long)]
    no_resample: bool,
}

#[derive(Debug, Args)]
struct CorrelateArgs {
    /// Whitespace- or tab-separated table: label, x, y per row. A non-numeric first row is a header.
    #[arg(long, conflicts_with_all = ["x", "y"])]
    table: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "y")]
    x: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "x")]
    y: Vec<f64>,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit status: 0 on success, 2 on usage errors, 1 on failures.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    dispatch_to(argv, &mut std::io::stdout().lock())
}

/// Like [`dispatch`] but with report output going to `out`.
pub fn dispatch_to<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("RIRFORGE_LOG", level)).try_init();
    let workers = cli.workers as usize;
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match pool.install(|| run(cli.command, workers)) {
        Ok(text) => match out.write_all(text.as_bytes()) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn load_scene(path: &Path) -> Result<Scene> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    scene::parse_scene(&text)
}

fn collect_wavs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            files.extend(dataset::list_wavs(p)?);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_infinite() => "inf".into(),
        Some(x) => format!("{x:.4}"),
        None => "-".into(),
    }
}

/// Runs one command and returns its report for standard output.
fn run(command: Command, workers: usize) -> Result<String> {
    match command {
        Command::SimulateWave(a) => {
            let scene = load_scene(&a.io.scene)?;
            let rir = fdtd::simulate_wave(&scene, &a.fdtd.config(a.io.rate))?;
            rir.write(&a.io.out)?;
            Ok(String::new())
        }
        Command::SimulateGeo(a) => {
            let scene = load_scene(&a.io.scene)?;
            let cfg = a.geo.config(a.io.rate);
            let rir = geo::simulate_geometric(&scene, &cfg)?;
            rir.write(&a.io.out)?;
            if let Some(path) = a.histogram {
                let hist = geo::trace_diffuse(&scene, &cfg);
                fs::write(&path, hist.to_columns()).map_err(|e| Error::io(&path, e))?;
            }
            Ok(String::new())
        }
        Command::SimulateHybrid(a) => {
            let scene = load_scene(&a.io.scene)?;
            let spec = CrossoverSpec {
                crossover_frequency: a.crossover,
                filter_length: a.filter_length,
                alignment: a.alignment,
                calibration: a.calibration,
            };
            let rir = hybrid::simulate_hybrid(&scene, &a.fdtd.config(a.io.rate), &a.geo.config(a.io.rate), &spec)?;
            rir.write(&a.io.out)?;
            Ok(String::new())
        }
        Command::Analyze(a) => {
            let files = collect_wavs(&a.paths)?;
            let mut text = format!("file\tt60\tmethod\tedt\tdrr\tfraction_below_{}\n", a.cutoff);
            let mut t60s = Vec::new();
            for f in &files {
                let rir = ImpulseResponse::read(f)?;
                let rep = analysis::analyze(&rir, &[a.cutoff])?;
                if let Some(t) = rep.t60 {
                    t60s.push(t);
                }
                let frac = rep.band_energy_fraction.values().next().copied();
                text.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\n",
                    f.display(),
                    fmt_opt(rep.t60),
                    rep.estimation_method.map_or("-".into(), |m| m.to_string()),
                    fmt_opt(rep.edt),
                    fmt_opt(rep.drr),
                    fmt_opt(frac)
                ));
            }
            match Summary::of(&t60s) {
                Some(s) => text.push_str(&format!("t60 {s} (n={})\n", s.count)),
                None => text.push_str("t60 - (n=0)\n"),
            }
            Ok(text)
        }
        Command::EnergyCurve(a) => {
            let audio = audio::read_wav(&a.input)?;
            let curve = analysis::cumulative_energy_curve(&audio.samples, audio.sample_rate as f64)?;
            match a.out {
                Some(p) => fs::write(&p, curve.to_columns()).map(|_| String::new()).map_err(|e| Error::io(&p, e)),
                None => Ok(curve.to_columns()),
            }
        }
        Command::Srmr(a) => {
            let cfg = SrmrConfig { clip_dynamic_range: a.normalized, ..SrmrConfig::default() };
            let files = collect_wavs(&a.paths)?;
            let mut scores = Vec::new();
            let mut text = String::new();
            for f in &files {
                let audio = audio::read_wav(f)?;
                let s = srmr::srmr(&audio.samples, audio.sample_rate as f64, &cfg)?;
                scores.push(s);
                text.push_str(&format!("{}\t{s:.4}\n", f.display()));
            }
            if let Some(s) = Summary::of(&scores) {
                text.push_str(&format!("mean\t{:.4}\n", s.mean));
            }
            Ok(text)
        }
        Command::Wpe(a) => {
            let audio = audio::read_wav(&a.input)?;
            let cfg = WpeConfig {
                stft_window: a.window,
                stft_hop: a.hop,
                delay: a.delay,
                taps: a.taps,
                iterations: a.iterations,
                ..WpeConfig::default()
            };
            let y = wpe::wpe(&audio.samples, &cfg)?;
            audio::write_wav(&a.out, &y, audio.sample_rate, a.format)?;
            Ok(String::new())
        }
        Command::Sample(a) => {
            let mut pool_paths = Vec::new();
            let mut pool_t60 = Vec::new();
            for p in dataset::resolve_rir_list(&a.pool)? {
                match ImpulseResponse::read(&p).and_then(|r| analysis::estimate_t60(&r)) {
                    Ok(t) => {
                        pool_paths.push(p);
                        pool_t60.push(t.seconds);
                    }
                    Err(e) => log::warn!("pool entry {} skipped: {e}", p.display()),
                }
            }
            let target = T60Histogram::from_values(&target_t60s(&a.target)?, a.bin_width)?;
            let picks = dataset::sample_matched(&pool_t60, &target, a.n, a.seed)?;
            let text: String = picks.iter().map(|&i| format!("{}\n", pool_paths[i].display())).collect();
            match a.out {
                Some(p) => fs::write(&p, text).map(|_| String::new()).map_err(|e| Error::io(&p, e)),
                None => Ok(text),
            }
        }
        Command::Convolve(a) => {
            let clean = audio::read_wav(&a.clean)?;
            let rir = ImpulseResponse::read(&a.rir)?;
            let (y, gain) = dataset::convolve(&clean.samples, clean.sample_rate, &rir, !a.no_resample)?;
            audio::write_wav(&a.out, &y, clean.sample_rate, a.format)?;
            Ok(format!("gain {gain:.4}\n"))
        }
        Command::BuildDataset(a) => {
            let cfg = DatasetConfig {
                pairing: a.pairing,
                pairs_per_clean: a.pairs_per_clean,
                seed: a.seed,
                format: a.format,
                workers,
                allow_resample: !a.no_resample,
                ..DatasetConfig::default()
            };
            let summary = dataset::build_dataset(&a.clean_dir, &a.rirs, &a.out_dir, &cfg)?;
            let mut text = String::new();
            for (split, n) in summary.manifest.split_counts() {
                text.push_str(&format!("{split}\t{n}\n"));
            }
            text.push_str(&format!(
                "records\t{}\nskipped\t{}\nfailed\t{}\nmanifest\t{}\n",
                summary.manifest.records.len(),
                summary.skipped.len(),
                summary.failed.len(),
                summary.manifest_path.display()
            ));
            
            if summary.failed.is_empty() {
                Ok(text)
            } else {
                eprint!("{text}");
                Err(Error::InvalidArgument(format!("{} dataset jobs failed", summary.failed.len())))
            }
        }
        Command::Correlate(a) => {
            let (labels, x, y) = match a.table {
                Some(p) => read_table(&p)?,
                None => ((1..=a.x.len()).map(|i| i.to_string()).collect(), a.x, a.y),
            };
            let r = analysis::pearson(&x, &y)?;
            let mut text = String::from("label\tx\ty\n");
            for ((l, u), v) in labels.iter().zip(&x).zip(&y) {
                text.push_str(&format!("{l}\t{u:.4}\t{v:.4}\n"));
            }
            text.push_str(&format!("r = {r:.4}\n"));
            Ok(text)
        }
    }
}

fn target_t60s(source: &Path) -> Result<Vec<f64>> {
    let from_rirs = |paths: Vec<PathBuf>| -> Vec<f64> {
        paths
            .iter()
            .filter_map(|p| match ImpulseResponse::read(p).and_then(|r| analysis::estimate_t60(&r)) {
                Ok(t) => Some(t.seconds),
                Err(e) => {
                    log::warn!("target entry {} skipped: {e}", p.display());
                    None
                }
            })
            .collect()
    };
    if source.is_dir() {
        return Ok(from_rirs(dataset::list_wavs(source)?));
    }
    let text = fs::read_to_string(source).map_err(|e| Error::io(source, e))?;
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
    if lines.iter().all(|l| l.parse::<f64>().is_ok()) {
        return Ok(lines.iter().map(|l| l.parse().unwrap_or(0.0)).collect());
    }
    Ok(from_rirs(dataset::resolve_rir_list(source)?))
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<f64>, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (mut labels, mut x, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).enumerate() {
        let cols: Vec<&str> = if line.contains('\t') { line.split('\t').collect() } else { line.split_whitespace().collect() };
        if cols.len() < 3 {
            return Err(Error::InvalidArgument(format!("table row {} needs label, x and y", i + 1)));
        }
        let n = cols.len();
        match (cols[n - 2].trim().parse::<f64>(), cols[n - 1].trim().parse::<f64>()) {
            (Ok(a), Ok(b)) => {
                labels.push(cols[..n - 2].join(" "));
                x.push(a);
                y.push(b);
            }
            _ if i == 0 => continue,
            _ => return Err(Error::InvalidArgument(format!("table row {} is not numeric", i + 1))),
        }
    }
    Ok((labels, x, y))
}
