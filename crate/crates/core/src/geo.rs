//! Full-band geometric RIRs: image sources for the specular part, Monte
//! Carlo ray tracing for the diffuse/late part.
//!
//! Surface index order everywhere is `SURFACE_NAMES`:
//! x_min, x_max, y_min, y_max, floor (z_min), ceiling (z_max).
//!
//! Image sources ignore obstacles when they are generated, but every image
//! path is checked for occlusion segment by segment. The ray tracer only
//! registers energy the image sources cannot account for: rays that have
//! scattered at least once, touched an obstacle, or exceeded the image
//! order. That keeps the two parts from counting the same path twice.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};
use crate::rir::{ImpulseResponse, Method};
use crate::scene::{Bands, Scene, SurfaceMaterial, Vec3, NUM_BANDS, OCTAVE_BANDS};

/// Air attenuation in dB/m per octave band (20 C, 50 % relative humidity).
const AIR_DB_PER_M: Bands = [0.00044, 0.00131, 0.00273, 0.00466, 0.00986, 0.0294];

const RAYS_PER_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoConfig {
    pub ism_max_order: u32,
    pub ray_count: usize,
    pub max_ray_bounces: u32,
    /// Rays stop once every band is this many dB below their launch energy.
    pub energy_threshold_db: f64,
    pub output_rate: u32,
    pub rng_seed: u64,
    /// Diffuse histogram bin width in seconds.
    pub histogram_bin: f64,
    pub receiver_radius: f64,
    /// Hard cap on the response length in seconds.
    pub max_duration: f64,
    /// Length of the octave band-split filters (odd).
    pub band_filter_taps: usize,
}

impl Default for GeoConfig {
    fn default() -> Self {
        GeoConfig {
            ism_max_order: 6,
            ray_count: 20_000,
            max_ray_bounces: 50,
            energy_threshold_db: -60.0,
            output_rate: 48_000,
            rng_seed: 42,
            histogram_bin: 32.0 / 48_000.0,
            receiver_radius: 0.1,
            max_duration: 10.0,
            band_filter_taps: 2047,
        }
    }
}

impl GeoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.output_rate == 0 {
            return bad("output_rate must be positive");
        }
        if !(self.histogram_bin > 0.0) {
            return bad("histogram_bin must be positive");
        }
        if !(self.receiver_radius > 0.0) {
            return bad("receiver_radius must be positive");
        }
        if !(self.max_duration > 0.0) {
            return bad("max_duration must be positive");
        }
        if self.band_filter_taps.is_multiple_of(2) {
            return bad("band_filter_taps must be odd");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSource {
    pub position: Vec3,
    pub order: u32,
    /// Reflection count off each surface.
    pub reflections: [u32; 6],
    /// Product of per-band pressure reflection factors `sqrt(1 - alpha)`.
    pub attenuation: Bands,
}

struct AxisImage {
    coord: f64,
    order: u32,
    low: u32,
    high: u32,
}

fn axis_images(src: f64, len: f64, max_order: u32) -> Vec<AxisImage> {
    let n = max_order as i64;
    let mut out = Vec::new();
    for l in -n..=n {
        for u in 0..=1i64 {
            let low = (l - u).unsigned_abs() as u32;
            let high = l.unsigned_abs() as u32;
            if low + high <= max_order {
                out.push(AxisImage { coord: (1 - 2 * u) as f64 * src + 2.0 * l as f64 * len, order: low + high, low, high });
            }
        }
    }
    out
}

/// All shoebox images up to `max_order` reflections (obstacles ignored).
pub fn enumerate_images(scene: &Scene, max_order: u32) -> Vec<ImageSource> {
    let per_axis: Vec<Vec<AxisImage>> =
        (0..3).map(|a| axis_images(scene.source[a], scene.room_dims[a], max_order)).collect();
    let refl = scene.surfaces.map(|m| m.reflection());
    let mut out = Vec::new();
    for ix in &per_axis[0] {
        for iy in &per_axis[1] {
            if ix.order + iy.order > max_order {
                continue;
            }
            for iz in &per_axis[2] {
                let order = ix.order + iy.order + iz.order;
                if order > max_order {
                    continue;
                }
                let reflections = [ix.low, ix.high, iy.low, iy.high, iz.low, iz.high];
                let attenuation = std::array::from_fn(|b| {
                    reflections.iter().zip(&refl).map(|(&n, r)| r[b].powi(n as i32)).product()
                });
                out.push(ImageSource {
                    position: Vec3::new(ix.coord, iy.coord, iz.coord),
                    order,
                    reflections,
                    attenuation,
                });
            }
        }
    }
    out
}

fn fold(x: f64, len: f64) -> f64 {
    let m = x.rem_euclid(2.0 * len);
    if m > len {
        2.0 * len - m
    } else {
        m
    }
}

/// Checks every leg of the reflected path from `image` to the receiver
/// against the obstacles by unfolding the straight line through the mirrored rooms.
pub fn image_path_visible(scene: &Scene, image: &Vec3) -> bool {
    if scene.obstacles.is_empty() {
        return true;
    }
    let a = scene.receiver;
    let d = *image - a;
    let mut cuts = vec![0.0, 1.0];
    for axis in 0..3 {
        if d[axis].abs() < 1e-12 {
            continue;
        }
        let len = scene.room_dims[axis];
        let (lo, hi) = if d[axis] > 0.0 { (a[axis], image[axis]) } else { (image[axis], a[axis]) };
        let mut m = (lo / len).floor() as i64 + 1;
        while (m as f64) * len < hi {
            cuts.push((m as f64 * len - a[axis]) / d[axis]);
            m += 1;
        }
    }
    cuts.sort_by(f64::total_cmp);
    let fold_pt = |t: f64| -> Vec3 {
        let p = a + d * t;
        Vec3::new(fold(p.x, scene.room_dims.x), fold(p.y, scene.room_dims.y), fold(p.z, scene.room_dims.z))
    };
    cuts.windows(2).filter(|w| w[1] - w[0] > 1e-12).all(|w| {
        let p0 = fold_pt(w[0] + 1e-9 * (w[1] - w[0]));
        let p1 = fold_pt(w[1] - 1e-9 * (w[1] - w[0]));
        scene.segment_clear(p0, p1)
    })
}

/// Linear-phase octave-band split whose six filters sum to a centred unit impulse.
#[derive(Debug, Clone)]
pub struct BandFilterBank {
    pub filters: Vec<Vec<f64>>,
}

impl BandFilterBank {
    pub fn new(rate: f64, taps: usize) -> Self {
        let edges: Vec<f64> = OCTAVE_BANDS.windows(2).map(|w| (w[0] * w[1]).sqrt()).collect();
        let lows: Vec<Vec<f64>> = edges.iter().map(|&e| dsp::lowpass_fir(e.min(0.49 * rate), rate, taps)).collect();
        let mut filters = Vec::with_capacity(NUM_BANDS);
        filters.push(lows[0].clone());
        for w in lows.windows(2) {
            filters.push(w[1].iter().zip(&w[0]).map(|(h, l)| h - l).collect());
        }
        filters.push(dsp::complementary_highpass(&lows[lows.len() - 1]));
        BandFilterBank { filters }
    }

    /// Zero-phase filters `signals[b]` through band `b` and sums the bands.
    pub fn synthesize(&self, signals: &[Vec<f64>]) -> Vec<f64> {
        let len = signals.iter().map(Vec::len).max().unwrap_or(0);
        let mut out = vec![0.0; len];
        for (sig, taps) in signals.iter().zip(&self.filters) {
            if sig.iter().all(|v| *v == 0.0) {
                continue;
            }
            for (o, v) in out.iter_mut().zip(dsp::zero_phase_filter(sig, taps)) {
                *o += v;
            }
        }
        out
    }
}

/// Per-band energy arriving at the receiver, binned in time.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyHistogram {
    pub bin_width: f64,
    pub bins: Vec<Bands>,
}

impl EnergyHistogram {
    fn new(bin_width: f64) -> Self {
        EnergyHistogram { bin_width, bins: Vec::new() }
    }

    fn add(&mut self, time: f64, energy: &Bands) {
        let bin = (time / self.bin_width) as usize;
        if bin >= self.bins.len() {
            self.bins.resize(bin + 1, [0.0; NUM_BANDS]);
        }
        for (acc, e) in self.bins[bin].iter_mut().zip(energy) {
            *acc += e;
        }
    }

    fn merge(&mut self, other: &EnergyHistogram) {
        if other.bins.len() > self.bins.len() {
            self.bins.resize(other.bins.len(), [0.0; NUM_BANDS]);
        }
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn total(&self) -> Bands {
        let mut t = [0.0; NUM_BANDS];
        for bin in &self.bins {
            for (a, e) in t.iter_mut().zip(bin) {
                *a += e;
            }
        }
        t
    }

    /// Band-summed energy per bin.
    pub fn broadband(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.iter().sum()).collect()
    }

    /// Whitespace-separated columns: bin start time then one energy per band.
    pub fn to_columns(&self) -> String {
        let mut s = String::from("# time_s");
        for f in OCTAVE_BANDS {
            s.push_str(&format!(" e{}", f as u32));
        }
        s.push('\n');
        for (i, bin) in self.bins.iter().enumerate() {
            s.push_str(&format!("{:.6}", i as f64 * self.bin_width));
            for e in bin {
                s.push_str(&format!(" {e:.6e}"));
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Copy)]
struct Hit {
    t: f64,
    axis: usize,
    material: SurfaceMaterial,
    obstacle: bool,
}

fn nearest_hit(scene: &Scene, pos: Vec3, dir: Vec3) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for axis in 0..3 {
        if dir[axis].abs() < 1e-15 {
            continue;
        }
        let (bound, wall) = if dir[axis] > 0.0 { (scene.room_dims[axis], 2 * axis + 1) } else { (0.0, 2 * axis) };
        let t = (bound - pos[axis]) / dir[axis];
        if t > 0.0 && best.is_none_or(|b| t < b.t) {
            best = Some(Hit { t, axis, material: scene.surfaces[wall], obstacle: false });
        }
    }
    for ob in &scene.obstacles {
        let (mut t0, mut t1, mut hit_axis) = (f64::NEG_INFINITY, f64::INFINITY, 0);
        let mut miss = false;
        for axis in 0..3 {
            if dir[axis].abs() < 1e-15 {
                if pos[axis] < ob.bounds.min[axis] || pos[axis] > ob.bounds.max[axis] {
                    miss = true;
                    break;
                }
                continue;
            }
            let inv = 1.0 / dir[axis];
            let mut a = (ob.bounds.min[axis] - pos[axis]) * inv;
            let mut b = (ob.bounds.max[axis] - pos[axis]) * inv;
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            if a > t0 {
                t0 = a;
                hit_axis = axis;
            }
            t1 = t1.min(b);
        }
        if !miss && t0 <= t1 && t0 > 1e-9 && best.is_none_or(|b| t0 < b.t) {
            best = Some(Hit { t: t0, axis: hit_axis, material: ob.material, obstacle: true });
        }
    }
    best
}

fn uniform_sphere(rng: &mut ChaCha8Rng) -> Vec3 {
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi = rng.random_range(0.0..2.0 * PI);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Cosine-weighted direction in the hemisphere around `normal_axis` with sign `sign`.
fn lambert(rng: &mut ChaCha8Rng, normal_axis: usize, sign: f64) -> Vec3 {
    let u: f64 = rng.random_range(0.0..1.0);
    let phi = rng.random_range(0.0..2.0 * PI);
    let r = u.sqrt();
    let (a, b, n) = (r * phi.cos(), r * phi.sin(), (1.0 - u).max(0.0).sqrt() * sign);
    match normal_axis {
        0 => Vec3::new(n, a, b),
        1 => Vec3::new(a, n, b),
        _ => Vec3::new(a, b, n),
    }
}

fn trace_ray(scene: &Scene, cfg: &GeoConfig, index: usize, hist: &mut EnergyHistogram) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(index as u64);
    let start = 1.0 / cfg.ray_count as f64;
    let threshold = start * 10f64.powf(cfg.energy_threshold_db / 10.0);
    let radius = cfg.receiver_radius;
    let weight = 1.0 / (4.0 * PI * PI * radius * radius);
    let c = scene.speed_of_sound;
    let max_path = cfg.max_duration * c;

    let mut pos = scene.source;
    let mut dir = uniform_sphere(&mut rng);
    let mut energy = [start; NUM_BANDS];
    let mut path = 0.0;
    let mut bounces = 0u32;
    let mut late = false;
    while let Some(hit) = nearest_hit(scene, pos, dir) {
        if late {
            let to_rcv = scene.receiver - pos;
            let t = to_rcv.dot(dir).clamp(0.0, hit.t);
            if (pos + dir * t).distance(scene.receiver) <= radius {
                let mut e = energy;
                if scene.air_absorption {
                    let d = path + t;
                    for (v, m) in e.iter_mut().zip(AIR_DB_PER_M) {
                        *v *= 10f64.powf(-m * d / 10.0);
                    }
                }
                e.iter_mut().for_each(|v| *v *= weight);
                hist.add((path + t) / c, &e);
            }
        }
        path += hit.t;
        if bounces >= cfg.max_ray_bounces || path > max_path {
            break;
        }
        pos = pos + dir * hit.t;
        bounces += 1;
        for (e, a) in energy.iter_mut().zip(&hit.material.absorption) {
            *e *= 1.0 - a;
        }
        if hit.obstacle || bounces > cfg.ism_max_order {
            late = true;
        }
        let p_scatter = hit.material.scattering.iter().sum::<f64>() / NUM_BANDS as f64;
        let reflected_sign = -dir[hit.axis].signum();
        if p_scatter > 0.0 && rng.random_range(0.0..1.0) < p_scatter {
            for (e, s) in energy.iter_mut().zip(&hit.material.scattering) {
                *e *= s / p_scatter;
            }
            dir = lambert(&mut rng, hit.axis, reflected_sign);
            late = true;
        } else {
            if p_scatter > 0.0 {
                for (e, s) in energy.iter_mut().zip(&hit.material.scattering) {
                    *e *= (1.0 - s) / (1.0 - p_scatter);
                }
            }
            dir = dir.with_axis(hit.axis, -dir[hit.axis]);
        }
        // keep the ray strictly inside the air volume
        pos = pos.with_axis(hit.axis, pos[hit.axis] + reflected_sign * 1e-9);
        if energy.iter().all(|e| *e < threshold) {
            break;
        }
    }
}

/// Monte Carlo diffuse/late energy histogram. Each band launches unit total energy.
pub fn trace_diffuse(scene: &Scene, cfg: &GeoConfig) -> EnergyHistogram {
    let chunks: Vec<EnergyHistogram> = (0..cfg.ray_count.div_ceil(RAYS_PER_CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut h = EnergyHistogram::new(cfg.histogram_bin);
            let lo = chunk * RAYS_PER_CHUNK;
            for ray in lo..(lo + RAYS_PER_CHUNK).min(cfg.ray_count) {
                trace_ray(scene, cfg, ray, &mut h);
            }
            h
        })
        .collect();
    // fixed merge order keeps the sum bit-identical for any thread count
    let mut total = EnergyHistogram::new(cfg.histogram_bin);
    for h in &chunks {
        total.merge(h);
    }
    total
}

/// Geometric RIR: visible image-source arrivals plus a noise-carried diffuse tail.
pub fn simulate_geometric(scene: &Scene, cfg: &GeoConfig) -> Result<ImpulseResponse> {
    cfg.validate()?;
    scene.validate()?;
    let rate = cfg.output_rate as f64;
    let c = scene.speed_of_sound;
    let cap = (cfg.max_duration * rate).ceil() as usize;

    let images = enumerate_images(scene, cfg.ism_max_order);
    let mut arrivals: Vec<(usize, Bands)> = Vec::new();
    let mut occluded = 0usize;
    for img in &images {
        if !image_path_visible(scene, &img.position) {
            occluded += 1;
            continue;
        }
        let d = img.position.distance(scene.receiver);
        let n = (rate * d / c).round() as usize;
        if n >= cap {
            continue;
        }
        let amp: Bands = std::array::from_fn(|b| {
            let air = if scene.air_absorption { 10f64.powf(-AIR_DB_PER_M[b] * d / 20.0) } else { 1.0 };
            img.attenuation[b] * air / (4.0 * PI * d)
        });
        if amp.iter().any(|a| *a > 0.0) {
            arrivals.push((n, amp));
        }
    }

    let hist = if cfg.ray_count > 0 { trace_diffuse(scene, cfg) } else { EnergyHistogram::new(cfg.histogram_bin) };
    let bin_samples = cfg.histogram_bin * rate;
    let last_bin = hist.bins.iter().rposition(|b| b.iter().any(|e| *e > 0.0)).map_or(0, |i| i + 1);
    let diffuse_len = ((last_bin as f64 * bin_samples).ceil() as usize).min(cap);
    let spec_len = arrivals.iter().map(|(n, _)| n + 1).max().unwrap_or(0);
    let direct = (rate * scene.source_receiver_distance() / c).round() as usize;
    let len = spec_len.max(diffuse_len).max(direct + 1).min(cap.max(1));

    let mut specular = vec![vec![0.0; len]; NUM_BANDS];
    for (n, amp) in &arrivals {
        for b in 0..NUM_BANDS {
            specular[b][*n] += amp[b];
        }
    }
    let bank = BandFilterBank::new(rate, cfg.band_filter_taps);
    let mut out = bank.synthesize(&specular);
    if diffuse_len > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        rng.set_stream(u64::MAX);
        let noise: Vec<f64> = (0..len).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        for b in 0..NUM_BANDS {
            // per-sample energy density, interpolated linearly between bin centres
            let density: Vec<f64> = hist.bins.iter().map(|e| e[b] / bin_samples).collect();
            if density.iter().all(|d| *d == 0.0) {
                continue;
            }
            let carrier = dsp::zero_phase_filter(&noise, &bank.filters[b]);
            for (n, (o, cv)) in out.iter_mut().zip(&carrier).enumerate().take(diffuse_len) {
                let x = (n as f64 + 0.5) / bin_samples - 0.5;
                let dens = if x <= 0.0 {
                    density[0]
                } else {
                    let i = x.floor() as usize;
                    let frac = x - i as f64;
                    let at = |k: usize| density.get(k).copied().unwrap_or(0.0);
                    at(i) * (1.0 - frac) + at(i + 1) * frac
                };
                *o += dens.sqrt() * cv;
            }
        }
    }
    let mut rir = ImpulseResponse::new(out, cfg.output_rate, Method::Geometric)?.with_digest(scene.digest());
    rir.set_meta("method", "geometric");
    rir.set_meta("config", serde_json::to_value(cfg)?);
    rir.set_meta("specular_arrivals", arrivals.len());
    rir.set_meta("occluded_images", occluded);
    rir.set_meta("diffuse_energy", serde_json::to_value(hist.total())?);
    rir.set_meta("line_of_sight", scene.line_of_sight());
    rir.set_meta("source_receiver_distance_m", scene.source_receiver_distance());
    Ok(rir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::AxisAlignedBox;

    fn room(alpha: f64, scattering: f64) -> Scene {
        Scene::shoebox(
            Vec3::new(4.0, 3.0, 2.5),
            SurfaceMaterial::uniform(alpha, scattering),
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(2.5, 1.0, 1.0),
        )
        .unwrap()
    }

    /// Brute-force oracle: mirror across the six planes breadth-first.
    fn mirror_oracle(scene: &Scene, max_order: u32) -> Vec<(Vec3, u32)> {
        let planes: Vec<(usize, f64)> = (0..3).flat_map(|a| [(a, 0.0), (a, scene.room_dims[a])]).collect();
        let mut found: Vec<(Vec3, u32)> = vec![(scene.source, 0)];
        let mut frontier = vec![(scene.source, usize::MAX)];
        for order in 1..=max_order {
            let mut next = Vec::new();
            for (p, last) in &frontier {
                for (pi, (axis, plane)) in planes.iter().enumerate() {
                    if pi == *last {
                        continue;
                    }
                    let q = p.with_axis(*axis, 2.0 * plane - p[*axis]);
                    if !found.iter().any(|(f, _)| f.distance(q) < 1e-9) {
                        found.push((q, order));
                        next.push((q, pi));
                    }
                }
            }
            frontier = next;
        }
        found
    }

    #[test]
    fn order_zero_is_the_source() {
        let s = room(0.3, 0.1);
        let imgs = enumerate_images(&s, 0);
        assert_eq!(imgs.len(), 1);
        assert_eq!(imgs[0].position, s.source);
    }

    #[test]
    fn first_order_has_seven_images() {
        let s = room(0.3, 0.1);
        let imgs = enumerate_images(&s, 1);
        assert_eq!(imgs.len(), 7);
        assert_eq!(mirror_oracle(&s, 1).len(), 7);
        assert!(imgs.iter().any(|i| i.position == Vec3::new(-1.0, 1.0, 1.0) && i.reflections[0] == 1));
    }

    #[test]
    fn images_match_mirror_oracle() {
        let s = room(0.3, 0.1);
        for order in 0..=3 {
            let fast = enumerate_images(&s, order);
            let slow = mirror_oracle(&s, order);
            assert_eq!(fast.len(), slow.len(), "order {order}");
            for img in &fast {
                let m = slow.iter().find(|(p, _)| p.distance(img.position) < 1e-9).expect("image in oracle");
                assert_eq!(m.1, img.order);
            }
        }
    }

    #[test]
    fn attenuation_non_increasing_with_order() {
        let s = room(0.3, 0.1);
        for img in enumerate_images(&s, 4) {
            let expect = (0.7f64).sqrt().powi(img.order as i32);
            assert!((img.attenuation[0] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn anechoic_room_gives_single_impulse() {
        let s = room(1.0, 0.0);
        let cfg = GeoConfig::default();
        let rir = simulate_geometric(&s, &cfg).unwrap();
        let (imax, vmax) = rir
            .samples
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        assert_eq!(imax, 210);
        assert!((vmax - 1.0 / (4.0 * PI * 1.5)).abs() < 1e-9, "{vmax}");
        let rest: f64 = rir.samples.iter().enumerate().filter(|(i, _)| *i != 210).map(|(_, v)| v.abs()).fold(0.0, f64::max);
        assert!(rest < 1e-9, "{rest}");
    }

    #[test]
    fn fully_absorbing_histogram_is_empty() {
        let s = room(1.0, 0.5);
        let h = trace_diffuse(&s, &GeoConfig { ray_count: 2000, ..Default::default() });
        assert!(h.total().iter().all(|e| *e == 0.0));
    }

    #[test]
    fn rigid_room_histogram_does_not_decay() {
        let s = room(0.0, 0.5);
        let cfg = GeoConfig { ray_count: 4000, max_ray_bounces: 200, max_duration: 0.4, ..Default::default() };
        let h = trace_diffuse(&s, &cfg);
        let e = h.broadband();
        let per = (0.05 / cfg.histogram_bin) as usize;
        let window = |t0: f64| -> f64 {
            let i = (t0 / cfg.histogram_bin) as usize;
            e[i..i + per].iter().sum()
        };
        let (early, late) = (window(0.1), window(0.3));
        let slope_db = 10.0 * (late / early).log10() / 0.2;
        assert!(slope_db.abs() < 5.0, "slope {slope_db} dB/s");
        // registered energy keeps accumulating
        let half: f64 = e[..e.len() / 2].iter().sum();
        assert!(e.iter().sum::<f64>() > 1.5 * half);
    }

    #[test]
    fn occluded_direct_path_is_removed() {
        let s = Scene::shoebox(
            Vec3::new(4.0, 3.0, 2.5),
            SurfaceMaterial::uniform(1.0, 0.0),
            Vec3::new(0.5, 1.5, 1.2),
            Vec3::new(3.5, 1.5, 1.2),
        )
        .unwrap()
        .with_obstacle(
            AxisAlignedBox::new(Vec3::new(1.4, 1.0, 0.7), Vec3::new(1.6, 2.0, 1.7)),
            SurfaceMaterial::uniform(1.0, 0.0),
        )
        .unwrap();
        assert!(!image_path_visible(&s, &s.source));
        let rir = simulate_geometric(&s, &GeoConfig { ray_count: 0, ..Default::default() }).unwrap();
        let direct = (48_000.0 * 3.0 / 343.0_f64).round() as usize;
        assert!(rir.samples[direct - 3..].iter().take(7).all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn unfolded_visibility_catches_reflected_leg() {
        // first-order floor image: the reflection point sits at x = 2 on the floor
        let s = room(0.3, 0.0)
            .with_obstacle(
                AxisAlignedBox::new(Vec3::new(1.7, 0.5, 0.0), Vec3::new(1.9, 1.5, 0.3)),
                SurfaceMaterial::uniform(0.3, 0.0),
            )
            .unwrap();
        let floor_img = Vec3::new(1.0, 1.0, -1.0);
        assert!(!image_path_visible(&s, &floor_img));
        assert!(image_path_visible(&s, &s.source));
    }

    #[test]
    fn direct_amplitude_halves_with_distance() {
        let mk = |x: f64| {
            Scene::shoebox(
                Vec3::new(8.0, 3.0, 3.0),
                SurfaceMaterial::uniform(1.0, 0.0),
                Vec3::new(1.0, 1.5, 1.5),
                Vec3::new(1.0 + x, 1.5, 1.5),
            )
            .unwrap()
        };
        let cfg = GeoConfig { ray_count: 0, ..Default::default() };
        let peak = |s: &Scene| simulate_geometric(s, &cfg).unwrap().samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let ratio = peak(&mk(1.5)) / peak(&mk(3.0));
        assert!((ratio - 2.0).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let s = room(0.3, 0.3);
        let cfg = GeoConfig { ray_count: 3000, ..Default::default() };
        let a = simulate_geometric(&s, &cfg).unwrap();
        let b = simulate_geometric(&s, &cfg).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn band_bank_sums_to_impulse() {
        let bank = BandFilterBank::new(48_000.0, 1023);
        let mid = 511;
        for i in 0..1023 {
            let s: f64 = bank.filters.iter().map(|f| f[i]).sum();
            assert!((s - if i == mid { 1.0 } else { 0.0 }).abs() < 1e-14);
        }
    }
}
