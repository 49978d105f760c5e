//! Signal-processing building blocks shared by the solvers and analysis code.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Forward FFT of a real signal zero-padded (or truncated) to `n` points.
pub fn rfft(signal: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = signal.iter().take(n).map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf
}

/// Inverse FFT (normalized by 1/n) returning the real part.
pub fn irfft(spectrum: &[Complex64]) -> Vec<f64> {
    let n = spectrum.len();
    let mut buf = spectrum.to_vec();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|c| c.re * scale).collect()
}

/// Full linear convolution (`a.len() + b.len() - 1` samples) by overlap-add
/// of FFT blocks.
pub fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    // kernel is the shorter input
    let (x, h) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let out_len = x.len() + h.len() - 1;
    let n = (2 * h.len()).next_power_of_two().max(256);
    let block = n - h.len() + 1;

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut kernel: Vec<Complex64> = h.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    kernel.resize(n, Complex64::default());
    fwd.process(&mut kernel);

    let mut out = vec![0.0; out_len];
    let mut buf = vec![Complex64::default(); n];
    let scale = 1.0 / n as f64;
    for (bi, chunk) in x.chunks(block).enumerate() {
        buf.iter_mut().for_each(|c| *c = Complex64::default());
        for (c, &v) in buf.iter_mut().zip(chunk) {
            c.re = v;
        }
        fwd.process(&mut buf);
        for (c, k) in buf.iter_mut().zip(&kernel) {
            *c *= k;
        }
        inv.process(&mut buf);
        let start = bi * block;
        let valid = (chunk.len() + h.len() - 1).min(out_len - start);
        for (o, c) in out[start..start + valid].iter_mut().zip(&buf) {
            *o += c.re * scale;
        }
    }
    out
}

/// Hann window. `periodic` selects the DFT-even form used for STFT framing.
pub fn hann(n: usize, periodic: bool) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = if periodic { n } else { n - 1 } as f64;
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / denom).cos()).collect()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Linear-phase Hann-windowed sinc low-pass with unit DC gain. `taps` must be odd.
pub fn lowpass_fir(cutoff_hz: f64, rate: f64, taps: usize) -> Vec<f64> {
    assert!(taps % 2 == 1, "linear-phase design needs an odd tap count");
    let m = (taps - 1) as f64 / 2.0;
    let fc = cutoff_hz / rate;
    let win = hann(taps, false);
    let mut h: Vec<f64> = (0..taps)
        .map(|i| 2.0 * fc * sinc(2.0 * fc * (i as f64 - m)) * win[i])
        .collect();
    let dc: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= dc);
    h
}

/// Exact complement of a linear-phase low-pass: centre impulse minus taps.
pub fn complementary_highpass(lowpass: &[f64]) -> Vec<f64> {
    let mid = lowpass.len() / 2;
    lowpass
        .iter()
        .enumerate()
        .map(|(i, &v)| if i == mid { 1.0 - v } else { -v })
        .collect()
}

/// Convolve with an odd-length linear-phase FIR and drop its group delay so
/// the output is time-aligned with the input (same length as input).
pub fn zero_phase_filter(signal: &[f64], taps: &[f64]) -> Vec<f64> {
    let delay = taps.len() / 2;
    let full = fft_convolve(signal, taps);
    full[delay..delay + signal.len()].to_vec()
}

/// Band-limited resampling by windowed-sinc interpolation at arbitrary ratio.
///
/// Amplitude-preserving for signals: a constant stays the same constant.
/// Callers resampling an impulse response must scale by `from / to`.
pub fn resample(signal: &[f64], from: f64, to: f64) -> Vec<f64> {
    if signal.is_empty() {
        return Vec::new();
    }
    if (from - to).abs() < 1e-9 {
        return signal.to_vec();
    }
    const ZERO_CROSSINGS: f64 = 16.0;
    let cutoff = 0.5 * from.min(to) * 0.94;
    let half_width = ZERO_CROSSINGS / (2.0 * cutoff); // seconds
    let out_len = ((signal.len() as f64) * to / from).ceil() as usize;
    let gain = 2.0 * cutoff / from;
    (0..out_len)
        .map(|m| {
            let t = m as f64 / to;
            let centre = t * from;
            let lo = ((t - half_width) * from).ceil().max(0.0) as usize;
            let hi = (((t + half_width) * from).floor() as usize).min(signal.len() - 1);
            let mut acc = 0.0;
            for (n, &x) in signal.iter().enumerate().take(hi + 1).skip(lo) {
                let dt = (n as f64 - centre) / from;
                let w = 0.5 + 0.5 * (PI * dt / half_width).cos();
                acc += x * gain * sinc(2.0 * cutoff * dt) * w;
            }
            acc
        })
        .collect()
}

/// Number of frames of length `window` at `hop` that fit in `len` samples.
pub fn frame_count(len: usize, window: usize, hop: usize) -> usize {
    if len < window {
        0
    } else {
        1 + (len - window) / hop
    }
}

/// One-sided STFT, frames x (window/2 + 1) bins, with the given analysis window.
pub fn stft(signal: &[f64], analysis: &[f64], hop: usize) -> Vec<Vec<Complex64>> {
    let window = analysis.len();
    let bins = window / 2 + 1;
    let fft = FftPlanner::new().plan_fft_forward(window);
    let frames = frame_count(signal.len(), window, hop);
    let mut buf = vec![Complex64::default(); window];
    (0..frames)
        .map(|f| {
            let seg = &signal[f * hop..f * hop + window];
            for ((c, &x), &w) in buf.iter_mut().zip(seg).zip(analysis) {
                *c = Complex64::new(x * w, 0.0);
            }
            fft.process(&mut buf);
            buf[..bins].to_vec()
        })
        .collect()
}

/// Weighted overlap-add inverse of [`stft`] producing `len` samples.
pub fn istft(frames: &[Vec<Complex64>], analysis: &[f64], synthesis: &[f64], hop: usize, len: usize) -> Vec<f64> {
    let window = synthesis.len();
    let ifft = FftPlanner::new().plan_fft_inverse(window);
    let mut out = vec![0.0; len];
    let mut norm = vec![0.0; len];
    let mut buf = vec![Complex64::default(); window];
    for (f, spec) in frames.iter().enumerate() {
        buf[..spec.len()].copy_from_slice(spec);
        for k in spec.len()..window {
            buf[k] = spec[window - k].conj();
        }
        ifft.process(&mut buf);
        let start = f * hop;
        for i in 0..window {
            if start + i >= len {
                break;
            }
            out[start + i] += buf[i].re / window as f64 * synthesis[i];
            norm[start + i] += analysis[i] * synthesis[i];
        }
    }
    for (o, n) in out.iter_mut().zip(&norm) {
        if *n > 1e-8 {
            *o /= n;
        }
    }
    out
}

/// Analytic signal via the FFT (one-sided spectrum doubling).
pub fn analytic_signal(signal: &[f64]) -> Vec<Complex64> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let mut spec = rfft(signal, n);
    for (k, c) in spec.iter_mut().enumerate() {
        let w = if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *c *= w;
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    let s = 1.0 / n as f64;
    spec.iter().map(|c| c * s).collect()
}

/// Second-order IIR section (transposed direct form II).
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    /// Constant 0 dB peak-gain band-pass.
    pub fn bandpass(centre: f64, q: f64, rate: f64) -> Self {
        let w0 = 2.0 * PI * centre / rate;
        let alpha = w0.sin() / (2.0 * q);
        let a0 = 1.0 + alpha;
        Biquad {
            b: [alpha / a0, 0.0, -alpha / a0],
            a: [-2.0 * w0.cos() / a0, (1.0 - alpha) / a0],
        }
    }

    pub fn process(&self, x: &[f64]) -> Vec<f64> {
        let (mut s1, mut s2) = (0.0, 0.0);
        x.iter()
            .map(|&v| {
                let y = self.b[0] * v + s1;
                s1 = self.b[1] * v - self.a[0] * y + s2;
                s2 = self.b[2] * v - self.a[1] * y;
                y
            })
            .collect()
    }
}
