//! C interface to rirforge.
//!
//! Scenes and impulse responses are opaque handles owned by the caller and
//! released with `rf_scene_free` / `rf_rir_free`. Every call returns an
//! [`RfStatus`]; on failure `rf_last_error_message` describes what went wrong
//! on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use rirforge::analysis;
use rirforge::fdtd::{simulate_wave, FdtdConfig};
use rirforge::geo::{simulate_geometric, GeoConfig};
use rirforge::hybrid::{simulate_hybrid, CrossoverSpec};
use rirforge::scene::Scene;
use rirforge::srmr::{srmr, SrmrConfig};
use rirforge::{Error, ImpulseResponse, Method};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The scene document is malformed or physically invalid.
    Scene = 3,
    /// A solver refused the configuration or became unstable.
    Simulation = 4,
    /// The signal does not support the requested measure.
    Analysis = 5,
    Io = 6,
    /// A bug inside the library; the message has details.
    Panic = 7,
}

/// Opaque room description.
pub struct RfScene(Scene);

/// Opaque impulse response.
pub struct RfRir(ImpulseResponse);

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RfGeoOptions {
    pub ray_count: u32,
    pub ism_max_order: u32,
    pub rng_seed: u64,
    pub sample_rate: u32,
    /// Upper bound on the response length in seconds.
    pub max_duration: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RfWaveOptions {
    pub max_frequency: f64,
    pub duration: f64,
    pub sample_rate: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> RfStatus {
    match err {
        Error::SceneSchema(_) | Error::InvalidScene(_) => RfStatus::Scene,
        Error::InvalidConfig(_) | Error::InvalidArgument(_) | Error::RateMismatch(..) => RfStatus::InvalidArgument,
        Error::GridTooLarge { .. } | Error::NotInAir { .. } | Error::Unstable { .. } | Error::Singular(_) => {
            RfStatus::Simulation
        }
        Error::InsufficientDecay
        | Error::NoDirectArrival
        | Error::Silent
        | Error::TooShort(_)
        | Error::ZeroVariance
        | Error::DisjointSupport => RfStatus::Analysis,
        Error::Wav { .. } | Error::Io { .. } | Error::Json(_) => RfStatus::Io,
    }
}

/// Runs `f`, turning errors and panics into a status plus a thread-local message.
fn guard(f: impl FnOnce() -> Result<(), (RfStatus, String)>) -> RfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RfStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            RfStatus::Panic
        }
    }
}

fn core<T>(r: rirforge::Result<T>) -> Result<T, (RfStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (RfStatus, String) {
    (RfStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, (RfStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (RfStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn samples<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (RfStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (RfStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (RfStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn boxed_rir(out: &mut *mut RfRir, rir: ImpulseResponse) {
    *out = Box::into_raw(Box::new(RfRir(rir)));
}

fn geo_config(opts: Option<&RfGeoOptions>) -> GeoConfig {
    let mut cfg = GeoConfig::default();
    if let Some(o) = opts {
        cfg.ray_count = o.ray_count as usize;
        cfg.ism_max_order = o.ism_max_order;
        cfg.rng_seed = o.rng_seed;
        cfg.output_rate = o.sample_rate;
        cfg.histogram_bin = 32.0 / o.sample_rate.max(1) as f64;
        cfg.max_duration = o.max_duration;
    }
    cfg
}

fn wave_config(opts: Option<&RfWaveOptions>) -> FdtdConfig {
    let mut cfg = FdtdConfig::default();
    if let Some(o) = opts {
        cfg.max_frequency = o.max_frequency;
        cfg.duration = o.duration;
        cfg.output_rate = o.sample_rate;
    }
    cfg
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn rf_geo_options_default() -> RfGeoOptions {
    let d = GeoConfig::default();
    RfGeoOptions {
        ray_count: d.ray_count as u32,
        ism_max_order: d.ism_max_order,
        rng_seed: d.rng_seed,
        sample_rate: d.output_rate,
        max_duration: d.max_duration,
    }
}

#[no_mangle]
pub extern "C" fn rf_wave_options_default() -> RfWaveOptions {
    let d = FdtdConfig::default();
    RfWaveOptions { max_frequency: d.max_frequency, duration: d.duration, sample_rate: d.output_rate }
}

/// Parses a JSON scene document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_scene_parse(json: *const c_char, out: *mut *mut RfScene) -> RfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let scene = core(rirforge::parse_scene(text(json, "json")?))?;
        *out = Box::into_raw(Box::new(RfScene(scene)));
        Ok(())
    })
}

/// # Safety
/// `scene` must come from `rf_scene_parse` and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn rf_scene_free(scene: *mut RfScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rf_scene_line_of_sight(scene: *const RfScene, out: *mut bool) -> RfStatus {
    guard(|| {
        let s = borrow(scene, "scene")?;
        *out_ptr(out, "out")? = s.0.line_of_sight();
        Ok(())
    })
}

/// Image sources plus diffuse ray tracing. `opts` may be NULL for defaults.
///
/// # Safety
/// Pointers must be valid; `*out` receives a new handle on success.
#[no_mangle]
pub unsafe extern "C" fn rf_simulate_geometric(
    scene: *const RfScene,
    opts: *const RfGeoOptions,
    out: *mut *mut RfRir,
) -> RfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let s = borrow(scene, "scene")?;
        let rir = core(simulate_geometric(&s.0, &geo_config(opts.as_ref())))?;
        boxed_rir(out, rir);
        Ok(())
    })
}

/// FDTD wave simulation. `opts` may be NULL for defaults.
///
/// # Safety
/// Pointers must be valid; `*out` receives a new handle on success.
#[no_mangle]
pub unsafe extern "C" fn rf_simulate_wave(
    scene: *const RfScene,
    opts: *const RfWaveOptions,
    out: *mut *mut RfRir,
) -> RfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let s = borrow(scene, "scene")?;
        let rir = core(simulate_wave(&s.0, &wave_config(opts.as_ref())))?;
        boxed_rir(out, rir);
        Ok(())
    })
}

/// Both solvers merged at `crossover_hz`. Either options pointer may be NULL.
///
/// # Safety
/// Pointers must be valid; `*out` receives a new handle on success.
#[no_mangle]
pub unsafe extern "C" fn rf_simulate_hybrid(
    scene: *const RfScene,
    wave: *const RfWaveOptions,
    geo: *const RfGeoOptions,
    crossover_hz: f64,
    out: *mut *mut RfRir,
) -> RfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let s = borrow(scene, "scene")?;
        let spec = CrossoverSpec { crossover_frequency: crossover_hz, ..Default::default() };
        let rir = core(simulate_hybrid(&s.0, &wave_config(wave.as_ref()), &geo_config(geo.as_ref()), &spec))?;
        boxed_rir(out, rir);
        Ok(())
    })
}

/// Wraps caller samples (copied) as an impulse response.
///
/// # Safety
/// `samples` must hold `len` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rf_rir_from_samples(
    samples_ptr: *const f64,
    len: usize,
    sample_rate: u32,
    out: *mut *mut RfRir,
) -> RfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let x = samples(samples_ptr, len, "samples")?;
        let rir = core(ImpulseResponse::new(x.to_vec(), sample_rate, Method::Recorded))?;
        boxed_rir(out, rir);
        Ok(())
    })
}

/// # Safety
/// `rir` must be a valid handle or NULL (gives 0).
#[no_mangle]
pub unsafe extern "C" fn rf_rir_len(rir: *const RfRir) -> usize {
    rir.as_ref().map_or(0, |r| r.0.samples.len())
}

/// # Safety
/// `rir` must be a valid handle or NULL (gives 0).
#[no_mangle]
pub unsafe extern "C" fn rf_rir_sample_rate(rir: *const RfRir) -> u32 {
    rir.as_ref().map_or(0, |r| r.0.sample_rate)
}

/// Borrowed view of the samples, valid while the handle lives.
///
/// # Safety
/// `rir` must be a valid handle or NULL (gives NULL).
#[no_mangle]
pub unsafe extern "C" fn rf_rir_samples(rir: *const RfRir) -> *const f64 {
    rir.as_ref().map_or(ptr::null(), |r| r.0.samples.as_ptr())
}

/// Writes a 32-bit float WAV plus its JSON sidecar.
///
/// # Safety
/// `rir` must be valid and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rf_rir_write_wav(rir: *const RfRir, path: *const c_char) -> RfStatus {
    guard(|| {
        let r = borrow(rir, "rir")?;
        core(r.0.write(text(path, "path")?))
    })
}

/// # Safety
/// `rir` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn rf_rir_free(rir: *mut RfRir) {
    if !rir.is_null() {
        drop(Box::from_raw(rir));
    }
}

/// Reverberation time in seconds from the Schroeder decay.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rf_estimate_t60(rir: *const RfRir, out: *mut f64) -> RfStatus {
    guard(|| {
        let r = borrow(rir, "rir")?;
        let out = out_ptr(out, "out")?;
        *out = core(analysis::estimate_t60(&r.0))?.seconds;
        Ok(())
    })
}

/// Share of signal energy below `cutoff_hz`.
///
/// # Safety
/// `samples` must hold `len` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rf_band_energy_fraction(
    samples_ptr: *const f64,
    len: usize,
    sample_rate: f64,
    cutoff_hz: f64,
    out: *mut f64,
) -> RfStatus {
    guard(|| {
        let x = samples(samples_ptr, len, "samples")?;
        let out = out_ptr(out, "out")?;
        *out = core(analysis::band_energy_fraction(x, sample_rate, cutoff_hz))?;
        Ok(())
    })
}

/// Pearson correlation of two equally long series.
///
/// # Safety
/// `x` and `y` must each hold `len` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rf_pearson(x: *const f64, y: *const f64, len: usize, out: *mut f64) -> RfStatus {
    guard(|| {
        let (a, b) = (samples(x, len, "x")?, samples(y, len, "y")?);
        let out = out_ptr(out, "out")?;
        *out = core(analysis::pearson(a, b))?;
        Ok(())
    })
}

/// Speech-to-reverberation modulation energy ratio with default settings.
///
/// # Safety
/// `samples` must hold `len` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rf_srmr(samples_ptr: *const f64, len: usize, sample_rate: f64, out: *mut f64) -> RfStatus {
    guard(|| {
        let x = samples(samples_ptr, len, "samples")?;
        let out = out_ptr(out, "out")?;
        *out = core(srmr(x, sample_rate, &SrmrConfig::default()))?;
        Ok(())
    })
}
