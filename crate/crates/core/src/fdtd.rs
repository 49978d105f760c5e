//! Wave-based low-frequency solver: second-order leapfrog FDTD on a cubic
//! grid with a 7-point Laplacian.
//!
//! Cells are voxel centred, so a wall sits half a cell beyond the outermost
//! air cell. Each air cell's update is written in flux form over its six
//! faces: air faces contribute `p_nb - p`, wall and obstacle faces contribute
//! a locally reacting admittance term `beta * dp/dt`. With `beta = 0` this is
//! the rigid mirror condition; the per-face admittance comes from the
//! 125 Hz absorption coefficient through `R = sqrt(1 - alpha)`,
//! `beta = (1 - R) / (1 + R)`.
//!
//! The update is symmetric in source and receiver, so swapping them gives
//! the same response.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dsp;
use crate::error::{Error, Result};
use crate::rir::{ImpulseResponse, Method};
use crate::scene::{Scene, Vec3};

/// ln(1000): a Gaussian spectrum 3.717 standard deviations out is at -60 dB.
const SIXTY_DB_SIGMAS: f64 = 3.716_922_188_849_838;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    GaussianPulse,
}

/// Source signal. The spectrum is a Gaussian around `center_frequency`
/// whose width is chosen so it falls to -60 dB at the solver's maximum
/// frequency when `bandwidth` is 1; smaller values narrow it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceExcitation {
    pub kind: PulseKind,
    pub center_frequency: f64,
    pub bandwidth: f64,
    pub amplitude: f64,
}

impl Default for SourceExcitation {
    fn default() -> Self {
        SourceExcitation { kind: PulseKind::GaussianPulse, center_frequency: 0.0, bandwidth: 1.0, amplitude: 1.0 }
    }
}

impl SourceExcitation {
    /// Pulse samples at interval `dt` for a solver limited to `max_frequency`.
    pub fn samples(&self, max_frequency: f64, dt: f64) -> Vec<f64> {
        let spectral_sigma = self.bandwidth * (max_frequency - self.center_frequency) / SIXTY_DB_SIGMAS;
        let sigma_t = 1.0 / (2.0 * PI * spectral_sigma);
        let t0 = 6.0 * sigma_t;
        let len = ((2.0 * t0) / dt).ceil() as usize + 1;
        (0..len)
            .map(|n| {
                let t = n as f64 * dt - t0;
                self.amplitude * (-t * t / (2.0 * sigma_t * sigma_t)).exp() * (2.0 * PI * self.center_frequency * t).cos()
            })
            .collect()
    }

    fn validate(&self, max_frequency: f64) -> Result<()> {
        if !(self.center_frequency >= 0.0 && self.center_frequency < max_frequency) {
            return Err(Error::InvalidConfig("pulse center frequency must lie in [0, max_frequency)".into()));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth <= 1.0) {
            return Err(Error::InvalidConfig("pulse bandwidth must be in (0, 1]".into()));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidConfig("pulse amplitude must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdtdConfig {
    pub max_frequency: f64,
    pub points_per_wavelength: f64,
    /// Fraction of the 3D Courant limit `1/sqrt(3)`.
    pub cfl_fraction: f64,
    pub duration: f64,
    pub source_pulse: SourceExcitation,
    pub output_rate: u32,
    pub max_cells: usize,
    /// Lower edge of the valid band; the closed-room pressure mode at DC is removed below it.
    pub min_frequency: f64,
}

impl Default for FdtdConfig {
    fn default() -> Self {
        FdtdConfig {
            max_frequency: 1400.0,
            points_per_wavelength: 10.0,
            cfl_fraction: 0.9,
            duration: 0.5,
            source_pulse: SourceExcitation::default(),
            output_rate: 48_000,
            max_cells: 50_000_000,
            min_frequency: 20.0,
        }
    }
}

impl FdtdConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.max_frequency > 0.0) {
            return bad("max_frequency must be positive");
        }
        if !(self.points_per_wavelength >= 4.0) {
            return bad("points_per_wavelength must be at least 4");
        }
        if !(self.cfl_fraction > 0.0 && self.cfl_fraction <= 1.0) {
            return bad("cfl_fraction must be in (0, 1]");
        }
        if !(self.duration > 0.0) {
            return bad("duration must be positive");
        }
        if self.output_rate == 0 || 1.25 * self.max_frequency >= self.output_rate as f64 / 2.0 {
            return bad("output rate must exceed 2.5x max_frequency");
        }
        if !(self.min_frequency >= 0.0 && self.min_frequency < self.max_frequency) {
            return bad("min_frequency must be in [0, max_frequency)");
        }
        self.source_pulse.validate(self.max_frequency)
    }

    pub fn grid_spacing(&self, c: f64) -> f64 {
        c / (self.max_frequency * self.points_per_wavelength)
    }

    pub fn courant(&self) -> f64 {
        self.cfl_fraction / 3f64.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellFlag {
    Air,
    Rigid,
    AbsorbingBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Walls,
    Periodic,
}

#[derive(Debug, Clone, Copy)]
struct Coeffs {
    /// 1 / (1 + lambda * B / 2)
    scale: f32,
    /// 2 - lambda^2 * K
    centre: f32,
    /// 1 - lambda * B / 2
    prev: f32,
    flag: CellFlag,
}

/// Description of a grid before coefficients are assembled.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub dx: f64,
    pub courant: f64,
    /// Face admittance of the six walls, `SURFACE_NAMES` order.
    pub wall_admittance: [f64; 6],
    pub edges: [Edge; 3],
    /// Per interior cell: `None` for air, `Some(beta)` for a solid cell whose faces have admittance `beta`.
    pub solid: Vec<Option<f32>>,
}

impl GridSpec {
    pub fn empty(dims: [usize; 3], dx: f64, courant: f64) -> Self {
        GridSpec {
            dims,
            dx,
            courant,
            wall_admittance: [0.0; 6],
            edges: [Edge::Walls; 3],
            solid: vec![None; dims[0] * dims[1] * dims[2]],
        }
    }

    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }
}

/// Pressure field state with one halo cell around the interior.
#[derive(Debug, Clone)]
pub struct PressureGrid {
    dims: [usize; 3],
    padded: [usize; 3],
    dx: f64,
    courant: f64,
    edges: [Edge; 3],
    current: Vec<f32>,
    previous: Vec<f32>,
    class: Vec<u16>,
    table: Vec<Coeffs>,
    limit: f32,
    steps: usize,
}

impl PressureGrid {
    pub fn new(spec: &GridSpec) -> Result<Self> {
        let [nx, ny, nz] = spec.dims;
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::InvalidConfig("grid dimensions must be positive".into()));
        }
        if !(spec.courant > 0.0 && spec.courant <= 1.0 / 3f64.sqrt() + 1e-12) {
            return Err(Error::InvalidConfig(format!("courant number {} violates the CFL bound", spec.courant)));
        }
        let padded = [nx + 2, ny + 2, nz + 2];
        let total = padded.iter().product();
        let lam = spec.courant;
        let is_air = |i: isize, j: isize, k: isize| -> bool {
            spec.solid[spec.index(i as usize, j as usize, k as usize)].is_none()
        };

        let mut keys: HashMap<(u8, u32), u16> = HashMap::new();
        let mut table = vec![Coeffs { scale: 0.0, centre: 0.0, prev: 0.0, flag: CellFlag::Rigid }];
        let mut class = vec![0u16; total];
        let dims = [nx as isize, ny as isize, nz as isize];
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    if spec.solid[spec.index(i, j, k)].is_some() {
                        continue;
                    }
                    let pos = [i as isize, j as isize, k as isize];
                    let mut air_faces = 0u8;
                    let mut beta_sum = 0.0f64;
                    for axis in 0..3 {
                        for (side, step) in [(0usize, -1isize), (1, 1)] {
                            let mut nb = pos;
                            nb[axis] += step;
                            if nb[axis] < 0 || nb[axis] >= dims[axis] {
                                match spec.edges[axis] {
                                    Edge::Periodic => nb[axis] = nb[axis].rem_euclid(dims[axis]),
                                    Edge::Walls => {
                                        beta_sum += spec.wall_admittance[2 * axis + side];
                                        continue;
                                    }
                                }
                            }
                            if is_air(nb[0], nb[1], nb[2]) {
                                air_faces += 1;
                            } else {
                                let beta = spec.solid[spec.index(nb[0] as usize, nb[1] as usize, nb[2] as usize)];
                                beta_sum += beta.unwrap_or(0.0) as f64;
                            }
                        }
                    }
                    let beta_key = (beta_sum as f32).to_bits();
                    let next_id = table.len();
                    let id = *keys.entry((air_faces, beta_key)).or_insert_with(|| {
                        let half = lam * beta_sum / 2.0;
                        table.push(Coeffs {
                            scale: (1.0 / (1.0 + half)) as f32,
                            centre: (2.0 - lam * lam * air_faces as f64) as f32,
                            prev: (1.0 - half) as f32,
                            flag: if beta_sum > 0.0 { CellFlag::AbsorbingBoundary } else { CellFlag::Air },
                        });
                        next_id as u16
                    });
                    class[((i + 1) * padded[1] + j + 1) * padded[2] + k + 1] = id;
                }
            }
        }
        Ok(PressureGrid {
            dims: spec.dims,
            padded,
            dx: spec.dx,
            courant: lam,
            edges: spec.edges,
            current: vec![0.0; total],
            previous: vec![0.0; total],
            class,
            table,
            limit: f32::MAX,
            steps: 0,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// `c * dt / dx`
    pub fn courant(&self) -> f64 {
        self.courant
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        ((i + 1) * self.padded[1] + j + 1) * self.padded[2] + k + 1
    }

    pub fn flag(&self, i: usize, j: usize, k: usize) -> CellFlag {
        self.table[self.class[self.idx(i, j, k)] as usize].flag
    }

    pub fn is_air(&self, i: usize, j: usize, k: usize) -> bool {
        self.flag(i, j, k) != CellFlag::Rigid
    }

    /// Pressure at the current time level.
    pub fn pressure(&self, i: usize, j: usize, k: usize) -> f64 {
        self.current[self.idx(i, j, k)] as f64
    }

    /// Pressure one step earlier.
    pub fn previous_pressure(&self, i: usize, j: usize, k: usize) -> f64 {
        self.previous[self.idx(i, j, k)] as f64
    }

    /// Sets both time levels, i.e. an initial displacement at rest.
    pub fn set_initial(&mut self, i: usize, j: usize, k: usize, value: f64) {
        self.set_levels(i, j, k, value, value);
    }

    pub fn set_levels(&mut self, i: usize, j: usize, k: usize, current: f64, previous: f64) {
        let id = self.idx(i, j, k);
        if self.table[self.class[id] as usize].flag != CellFlag::Rigid {
            self.current[id] = current as f32;
            self.previous[id] = previous as f32;
        }
    }

    /// Abort threshold on |p| checked after every step.
    pub fn set_divergence_limit(&mut self, limit: f64) {
        self.limit = limit.min(f32::MAX as f64) as f32;
    }

    fn fill_periodic_halo(&mut self) {
        let [px, py, pz] = self.padded;
        let plane = py * pz;
        let f = &mut self.current;
        if self.edges[0] == Edge::Periodic {
            f.copy_within((px - 2) * plane..(px - 1) * plane, 0);
            f.copy_within(plane..2 * plane, (px - 1) * plane);
        }
        if self.edges[1] == Edge::Periodic {
            for i in 0..px {
                let b = i * plane;
                f.copy_within(b + (py - 2) * pz..b + (py - 1) * pz, b);
                f.copy_within(b + pz..b + 2 * pz, b + (py - 1) * pz);
            }
        }
        if self.edges[2] == Edge::Periodic {
            for i in 0..px {
                for j in 0..py {
                    let b = i * plane + j * pz;
                    f[b] = f[b + pz - 2];
                    f[b + pz - 1] = f[b + 1];
                }
            }
        }
    }

    /// Advance one time step. Errors if any cell becomes non-finite or exceeds the divergence limit.
    pub fn step(&mut self) -> Result<()> {
        self.advance(None)
    }

    fn advance(&mut self, forcing: Option<(usize, f32)>) -> Result<()> {
        self.fill_periodic_halo();
        let [px, py, pz] = self.padded;
        let plane = py * pz;
        let lam2 = (self.courant * self.courant) as f32;
        let cur = &self.current;
        let class = &self.class;
        let table = &self.table;
        let peak = self
            .previous
            .par_chunks_mut(plane)
            .enumerate()
            .filter(|(i, _)| *i > 0 && *i < px - 1)
            .map(|(i, out)| {
                let mut peak = 0.0f32;
                for j in 1..py - 1 {
                    let row = i * plane + j * pz;
                    for k in 1..pz - 1 {
                        let id = row + k;
                        let c = table[class[id] as usize];
                        let sum = cur[id - 1] + cur[id + 1] + cur[id - pz] + cur[id + pz] + cur[id - plane] + cur[id + plane];
                        let o = &mut out[j * pz + k];
                        let v = c.scale * (c.centre * cur[id] + lam2 * sum - c.prev * *o);
                        *o = v;
                        // NaN compares false, so it propagates as +inf here
                        let a = v.abs();
                        peak = if a > peak || a.is_nan() { if a.is_nan() { f32::INFINITY } else { a } } else { peak };
                    }
                }
                peak
            })
            .reduce(|| 0.0f32, f32::max);
        if let Some((id, value)) = forcing {
            let c = self.table[self.class[id] as usize];
            self.previous[id] += c.scale * value;
        }
        std::mem::swap(&mut self.current, &mut self.previous);
        self.steps += 1;
        if !peak.is_finite() || peak > self.limit {
            return Err(Error::Unstable {
                step: self.steps,
                detail: format!("peak |p| = {peak:e} exceeds limit {:e}", self.limit),
            });
        }
        Ok(())
    }
}

/// Metadata describing how the scene was gridded.
#[derive(Debug, Clone, Serialize)]
pub struct GridLayout {
    pub dims: [usize; 3],
    pub dx: f64,
    pub dt: f64,
    pub source_cell: [usize; 3],
    pub receiver_cell: [usize; 3],
    pub source_snap: f64,
    pub receiver_snap: f64,
}

fn admittance_from_absorption(alpha: f64) -> f64 {
    let r = (1.0 - alpha).max(0.0).sqrt();
    (1.0 - r) / (1.0 + r)
}

/// Voxelizes the scene: wall admittances, rigid obstacle cells, snapped source/receiver.
pub fn voxelize(scene: &Scene, cfg: &FdtdConfig) -> Result<(GridSpec, GridLayout)> {
    let c = scene.speed_of_sound;
    let dx = cfg.grid_spacing(c);
    let dims: [usize; 3] = std::array::from_fn(|a| ((scene.room_dims[a] / dx).round() as usize).max(1));
    let cells: usize = dims.iter().map(|n| n + 2).product();
    if cells > cfg.max_cells {
        return Err(Error::GridTooLarge { cells, cap: cfg.max_cells });
    }
    let mut spec = GridSpec::empty(dims, dx, cfg.courant());
    spec.wall_admittance = std::array::from_fn(|w| admittance_from_absorption(scene.surfaces[w].absorption[0]));
    for ob in &scene.obstacles {
        let beta = admittance_from_absorption(ob.material.absorption[0]) as f32;
        let lo: [usize; 3] = std::array::from_fn(|a| ((ob.bounds.min[a] / dx - 0.5).ceil().max(0.0)) as usize);
        let hi: [usize; 3] = std::array::from_fn(|a| {
            let top = (ob.bounds.max[a] / dx - 0.5).floor();
            if top < 0.0 { 0 } else { (top as usize + 1).min(dims[a]) }
        });
        for i in lo[0]..hi[0] {
            for j in lo[1]..hi[1] {
                for k in lo[2]..hi[2] {
                    let id = spec.index(i, j, k);
                    spec.solid[id] = Some(beta);
                }
            }
        }
    }
    let snap = |p: Vec3, what: &'static str| -> Result<([usize; 3], f64)> {
        let cell: [usize; 3] = std::array::from_fn(|a| ((p[a] / dx).floor().max(0.0) as usize).min(dims[a] - 1));
        if spec.solid[spec.index(cell[0], cell[1], cell[2])].is_some() {
            return Err(Error::NotInAir { what });
        }
        let centre = Vec3::new((cell[0] as f64 + 0.5) * dx, (cell[1] as f64 + 0.5) * dx, (cell[2] as f64 + 0.5) * dx);
        Ok((cell, centre.distance(p)))
    };
    let (source_cell, source_snap) = snap(scene.source, "source")?;
    let (receiver_cell, receiver_snap) = snap(scene.receiver, "receiver")?;
    if source_cell == receiver_cell {
        return Err(Error::InvalidScene("source and receiver snap to the same grid cell".into()));
    }
    let dt = cfg.courant() * dx / c;
    Ok((spec, GridLayout { dims, dx, dt, source_cell, receiver_cell, source_snap, receiver_snap }))
}

/// Raw receiver pressure trace driven by the soft source.
pub struct WaveTrace {
    pub trace: Vec<f64>,
    pub forcing: Vec<f64>,
    pub layout: GridLayout,
}

/// Runs the grid for `duration` plus the pulse length and records the receiver.
///
/// The injected forcing is the second time difference of the pulse, which
/// adds no net mass to a closed room, so the uniform pressure mode stays bounded.
pub fn run_trace(scene: &Scene, cfg: &FdtdConfig) -> Result<WaveTrace> {
    cfg.validate()?;
    scene.validate()?;
    let (spec, layout) = voxelize(scene, cfg)?;
    let mut grid = PressureGrid::new(&spec)?;
    let pulse = cfg.source_pulse.samples(cfg.max_frequency, layout.dt);
    let mut forcing = vec![0.0; pulse.len() + 2];
    for (n, &g) in pulse.iter().enumerate() {
        forcing[n] += g;
        forcing[n + 1] -= 2.0 * g;
        forcing[n + 2] += g;
    }
    let peak = forcing.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        grid.set_divergence_limit(1e6 * peak);
    }
    let steps = (cfg.duration / layout.dt).ceil() as usize + forcing.len();
    let [si, sj, sk] = layout.source_cell;
    let [ri, rj, rk] = layout.receiver_cell;
    let src = grid.idx(si, sj, sk);
    let mut trace = Vec::with_capacity(steps);
    for n in 0..steps {
        let f = forcing.get(n).copied().unwrap_or(0.0) as f32;
        grid.advance(Some((src, f)))?;
        trace.push(grid.pressure(ri, rj, rk));
    }
    Ok(WaveTrace { trace, forcing, layout })
}

fn band_weight(f: f64, lo: f64, hi: f64) -> f64 {
    let rise = if lo <= 0.0 || f >= lo {
        1.0
    } else if f <= lo / 2.0 {
        0.0
    } else {
        let x = (f - lo / 2.0) / (lo / 2.0);
        (0.5 - 0.5 * (PI * x).cos()).clamp(0.0, 1.0)
    };
    let top = 1.25 * hi;
    let fall = if f <= hi {
        1.0
    } else if f >= top {
        0.0
    } else {
        0.5 + 0.5 * (PI * (f - hi) / (top - hi)).cos()
    };
    rise * fall
}

/// Regularized spectral division of the trace by the forcing, band-limited
/// to `[min_frequency, max_frequency]` with raised-cosine tapers.
pub fn deconvolve(trace: &[f64], forcing: &[f64], rate: f64, cfg: &FdtdConfig, keep: usize) -> Vec<f64> {
    let peak_f = forcing.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak_f == 0.0 {
        return vec![0.0; keep];
    }
    let n = (2 * (trace.len() + forcing.len())).next_power_of_two();
    let p = dsp::rfft(trace, n);
    let f = dsp::rfft(forcing, n);
    let spec_peak = f.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    let eps2 = (1e-6 * spec_peak).powi(2);
    let h: Vec<Complex64> = p
        .iter()
        .zip(&f)
        .enumerate()
        .map(|(k, (pk, fk))| {
            let freq = k.min(n - k) as f64 * rate / n as f64;
            let w = band_weight(freq, cfg.min_frequency, cfg.max_frequency);
            if w == 0.0 {
                Complex64::default()
            } else {
                pk * fk.conj() / (fk.norm_sqr() + eps2) * w
            }
        })
        .collect();
    let mut out = dsp::irfft(&h);
    out.truncate(keep);
    out
}

/// Wave-based RIR of `scene`, valid up to `cfg.max_frequency`, at `cfg.output_rate`.
///
/// Scaled so a free-field direct arrival integrates to `1 / (4 pi r)`, the
/// same convention as the geometric solver.
pub fn simulate_wave(scene: &Scene, cfg: &FdtdConfig) -> Result<ImpulseResponse> {
    let WaveTrace { trace, forcing, layout } = run_trace(scene, cfg)?;
    let native = 1.0 / layout.dt;
    let keep = (cfg.duration * native).ceil() as usize;
    let lam = cfg.courant();
    let mut h = deconvolve(&trace, &forcing, native, cfg, keep);
    let physical = lam * lam / layout.dx;
    h.iter_mut().for_each(|v| *v *= physical);
    let out_rate = cfg.output_rate as f64;
    let mut samples = dsp::resample(&h, native, out_rate);
    let ratio = native / out_rate;
    samples.iter_mut().for_each(|v| *v *= ratio);
    samples.truncate(((cfg.duration * out_rate).round() as usize).max(1));
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Unstable { step: trace.len(), detail: "non-finite output after deconvolution".into() });
    }

    let mut rir = ImpulseResponse::new(samples, cfg.output_rate, Method::Fdtd)?.with_digest(scene.digest());
    rir.set_meta("method", "fdtd");
    rir.set_meta("config", serde_json::to_value(cfg)?);
    rir.set_meta("grid", serde_json::to_value(&layout)?);
    rir.set_meta("native_rate", native);
    rir.set_meta("steps", trace.len());
    rir.set_meta("source_snap_m", layout.source_snap);
    rir.set_meta("receiver_snap_m", layout.receiver_snap);
    rir.set_meta("valid_band_hz", json!([cfg.min_frequency, cfg.max_frequency]));
    rir.set_meta("source_receiver_distance_m", scene.source_receiver_distance());
    Ok(rir)
}
