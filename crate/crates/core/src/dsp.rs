//! Small DSP building blocks shared by the renderer, metrics and sources.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Periodic Hann window. Sums to a constant at 50% overlap.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Blackman window evaluated at offset `t` within a kernel of half-width
/// `half` (zero outside).
fn blackman_at(t: f64, half: f64) -> f64 {
    if t.abs() >= half {
        return 0.0;
    }
    let u = (t + half) / (2.0 * half);
    0.42 - 0.5 * (2.0 * PI * u).cos() + 0.08 * (4.0 * PI * u).cos()
}

/// Windowed-sinc low-pass kernel value at offset `t` (in input samples) for a
/// normalized cutoff `cutoff` (1.0 = Nyquist).
pub fn windowed_sinc(t: f64, cutoff: f64, half: f64) -> f64 {
    cutoff * sinc(cutoff * t) * blackman_at(t, half)
}

/// Forward/inverse complex FFT pair of one size.
#[derive(Clone)]
pub struct FftPair {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftPair {
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftPair {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Spectrum of a real buffer, zero-padded or truncated to the FFT size.
    pub fn forward_real(&self, input: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = input
            .iter()
            .take(self.size)
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        buf.resize(self.size, Complex64::new(0.0, 0.0));
        self.forward.process(&mut buf);
        buf
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Normalized inverse transform in place (1/N applied).
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let scale = 1.0 / self.size as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }
}

/// Makes a full-length spectrum Hermitian using bins 0..=K/2 as the source
/// of truth, so its inverse transform is real.
pub fn enforce_conjugate_symmetry(spec: &mut [Complex64]) {
    let k = spec.len();
    if k == 0 {
        return;
    }
    spec[0].im = 0.0;
    if k.is_multiple_of(2) {
        spec[k / 2].im = 0.0;
    }
    for i in 1..k.div_ceil(2) {
        spec[k - i] = spec[i].conj();
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Rational windowed-sinc resampler.
pub fn resample(input: &[f64], from_rate: u32, to_rate: u32) -> Vec<f64> {
    if from_rate == to_rate || input.is_empty() {
        return input.to_vec();
    }
    let g = gcd(from_rate as u64, to_rate as u64);
    let up = to_rate as u64 / g;
    let down = from_rate as u64 / g;
    let cutoff = (to_rate as f64 / from_rate as f64).min(1.0) * 0.95;
    let half = 16.0 / cutoff;
    let out_len = ((input.len() as u64 * up).div_ceil(down)) as usize;
    let step = down as f64 / up as f64;
    (0..out_len)
        .map(|n| {
            let t = n as f64 * step;
            let lo = (t - half).ceil().max(0.0) as usize;
            let hi = ((t + half).floor() as usize).min(input.len() - 1);
            (lo..=hi).map(|k| input[k] * windowed_sinc(t - k as f64, cutoff, half)).sum()
        })
        .collect()
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn peak(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Energy of `x` restricted to [lo_hz, hi_hz], via one zero-padded FFT.
pub fn band_energy(x: &[f64], sample_rate: u32, lo_hz: f64, hi_hz: f64) -> f64 {
    let n = x.len().max(1).next_power_of_two();
    let spec = FftPair::new(n).forward_real(x);
    let bin_hz = sample_rate as f64 / n as f64;
    let mut total = 0.0;
    for (k, v) in spec.iter().enumerate().take(n / 2 + 1) {
        let f = k as f64 * bin_hz;
        if f >= lo_hz && f <= hi_hz {
            let w = if k == 0 || k == n / 2 { 1.0 } else { 2.0 };
            total += w * v.norm_sqr();
        }
    }
    total / n as f64
}
