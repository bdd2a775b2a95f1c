//! Frame-wise Fourier-domain rendering.
//!
//! Each Hann-windowed frame is zero-padded to K, transformed, multiplied per
//! ear by `Σ_c σ(c,k) · exp(-i ω_k φ(c,k))` with `ω_k = 2πk/K`, transformed
//! back and overlap-added. Hann at 50% overlap sums to one, so the synthesis
//! stage is a plain sum and an identity field reproduces the input.
//!
//! Delays are phase ramps. When the smallest shift in a frame exceeds one hop,
//! whole multiples of the hop are moved out of the ramp and into the frame's
//! output offset instead, which is the same linear-phase term without the
//! circular wrap a K-point buffer would impose.

use std::io::Write;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{self, FftPair};
use crate::source::MonoClip;
use crate::spatializer::{Ear, EarTransfer, TransferField};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("spectrum has {got} bins, field expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("plan mismatch: {0}")]
    PlanMismatch(String),
    #[error("invalid frame plan: {0}")]
    BadPlan(String),
    #[error("shift spread of {spread:.1} samples does not fit the {room}-sample zero padding of a frame")]
    ShiftExceedsFrame { spread: f64, room: usize },
    #[error("writing spectra dump: {0}")]
    Dump(#[from] std::io::Error),
}

/// Analysis/synthesis schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FramePlan {
    pub fft_size: usize,
    pub frame_length: usize,
    pub hop: usize,
    /// Samples appended after the input to hold delayed energy.
    pub pad: usize,
}

impl Default for FramePlan {
    fn default() -> Self {
        FramePlan { fft_size: 2048, frame_length: 1024, hop: 512, pad: 0 }
    }
}

impl FramePlan {
    pub fn new(fft_size: usize, frame_length: usize) -> Result<Self, RenderError> {
        let plan = FramePlan { fft_size, frame_length, hop: frame_length / 2, pad: 0 };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        let bad = |m: String| Err(RenderError::BadPlan(m));
        if !self.fft_size.is_power_of_two() || self.fft_size < 2 {
            return bad(format!("FFT size {} is not a power of two", self.fft_size));
        }
        if self.frame_length < 2 || !self.frame_length.is_multiple_of(2) {
            return bad(format!("frame length {} must be even and >= 2", self.frame_length));
        }
        if self.frame_length > self.fft_size {
            return bad(format!("frame length {} exceeds FFT size {}", self.frame_length, self.fft_size));
        }
        if self.hop * 2 != self.frame_length {
            return bad(format!("hop {} must be half the frame length for Hann overlap-add", self.hop));
        }
        Ok(())
    }

    /// Frames needed to cover `len` samples; the first frame starts one hop
    /// before t=0 so every sample sees two overlapping windows.
    pub fn frame_count(&self, len: usize) -> usize {
        len.div_ceil(self.hop) + 1
    }

    pub fn frame_start(&self, frame: usize) -> isize {
        frame as isize * self.hop as isize - self.hop as isize
    }

    /// Same plan with `pad = ceil(max φ)` of the field.
    pub fn padded_for(self, field: &TransferField) -> Self {
        FramePlan { pad: field.max_shift().ceil() as usize, ..self }
    }
}

/// Two-channel audio.
#[derive(Debug, Clone, PartialEq)]
pub struct BinauralClip {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub sample_rate: u32,
}

impl BinauralClip {
    /// Panics if the channel lengths differ.
    pub fn new(left: Vec<f64>, right: Vec<f64>, sample_rate: u32) -> Self {
        assert_eq!(left.len(), right.len(), "binaural channels must have equal length");
        BinauralClip { left, right, sample_rate }
    }

    pub fn silent(len: usize, sample_rate: u32) -> Self {
        BinauralClip { left: vec![0.0; len], right: vec![0.0; len], sample_rate }
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn channel(&self, ear: Ear) -> &[f64] {
        match ear {
            Ear::Left => &self.left,
            Ear::Right => &self.right,
        }
    }

    pub fn peak(&self) -> f64 {
        dsp::peak(&self.left).max(dsp::peak(&self.right))
    }

    pub fn is_finite(&self) -> bool {
        self.left.iter().chain(&self.right).all(|v| v.is_finite())
    }

    pub fn swapped(&self) -> BinauralClip {
        BinauralClip { left: self.right.clone(), right: self.left.clone(), sample_rate: self.sample_rate }
    }

    pub fn scaled(&self, gain: f64) -> BinauralClip {
        BinauralClip {
            left: self.left.iter().map(|v| v * gain).collect(),
            right: self.right.iter().map(|v| v * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Zero-pads or truncates both channels to `len`.
    pub fn resized(&self, len: usize) -> BinauralClip {
        let mut out = self.clone();
        out.left.resize(len, 0.0);
        out.right.resize(len, 0.0);
        out
    }
}

fn ear_spectrum(spectrum: &[Complex64], ear: &EarTransfer, bulk: f64) -> Vec<Complex64> {
    let k_size = spectrum.len();
    let channels = ear.scale.len() / k_size;
    let mut out: Vec<Complex64> = (0..k_size)
        .map(|k| {
            let omega = 2.0 * std::f64::consts::PI * k as f64 / k_size as f64;
            let transfer: Complex64 = (0..channels)
                .map(|c| {
                    let i = c * k_size + k;
                    Complex64::from_polar(ear.scale[i], -omega * (ear.shift[i] - bulk))
                })
                .sum();
            transfer * spectrum[k]
        })
        .collect();
    dsp::enforce_conjugate_symmetry(&mut out);
    out
}

/// Applies one frame of the transfer field to a K-point spectrum of a real
/// frame, returning the left and right spectra (Hermitian again).
/// `frame` indexes into `field`.
pub fn apply_transfer(
    spectrum: &[Complex64],
    field: &TransferField,
    frame: usize,
) -> Result<(Vec<Complex64>, Vec<Complex64>), RenderError> {
    let k_size = field.fft_size;
    if spectrum.len() != k_size {
        return Err(RenderError::ShapeMismatch { expected: k_size, got: spectrum.len() });
    }
    let frame = field.frames.get(frame).ok_or_else(|| {
        RenderError::PlanMismatch(format!("frame {frame} out of range ({} frames)", field.frame_count()))
    })?;
    let cells = field.channels * k_size;
    for ear in [&frame.left, &frame.right] {
        if ear.scale.len() != cells || ear.shift.len() != cells {
            return Err(RenderError::ShapeMismatch { expected: cells, got: ear.scale.len() });
        }
    }
    Ok((ear_spectrum(spectrum, &frame.left, 0.0), ear_spectrum(spectrum, &frame.right, 0.0)))
}

/// Reusable renderer holding the FFT plans and analysis window for one plan.
pub struct Renderer {
    plan: FramePlan,
    fft: FftPair,
    window: Vec<f64>,
}

impl Renderer {
    pub fn new(plan: FramePlan) -> Result<Self, RenderError> {
        plan.validate()?;
        Ok(Renderer { plan, fft: FftPair::new(plan.fft_size), window: dsp::hann(plan.frame_length) })
    }

    pub fn plan(&self) -> &FramePlan {
        &self.plan
    }

    pub fn render(&self, clip: &MonoClip, field: &TransferField) -> Result<BinauralClip, RenderError> {
        self.render_impl(clip, field, None)
    }

    /// Like [`Renderer::render`], also writing every frame's output spectra
    /// (bins 0..=K/2) as CSV rows `frame,ear,bin,re,im`.
    pub fn render_with_dump(
        &self,
        clip: &MonoClip,
        field: &TransferField,
        dump: &mut dyn Write,
    ) -> Result<BinauralClip, RenderError> {
        writeln!(dump, "frame,ear,bin,re,im")?;
        self.render_impl(clip, field, Some(dump))
    }

    fn render_impl(
        &self,
        clip: &MonoClip,
        field: &TransferField,
        mut dump: Option<&mut dyn Write>,
    ) -> Result<BinauralClip, RenderError> {
        let plan = &self.plan;
        let (k_size, frame_len) = (plan.fft_size, plan.frame_length);
        let n = clip.len();
        let frames = plan.frame_count(n);
        if field.fft_size != k_size {
            return Err(RenderError::PlanMismatch(format!(
                "field FFT size {} != plan FFT size {k_size}",
                field.fft_size
            )));
        }
        if field.frame_count() != frames {
            return Err(RenderError::PlanMismatch(format!(
                "field has {} frames, plan needs {frames} for {n} samples",
                field.frame_count()
            )));
        }
        let needed = field.max_shift().ceil() as usize;
        if plan.pad < needed {
            return Err(RenderError::PlanMismatch(format!("pad {} < ceil(max shift) = {needed}", plan.pad)));
        }
        let out_len = n + plan.pad;
        let mut left = vec![0.0; out_len];
        let mut right = vec![0.0; out_len];
        let mut buf = vec![Complex64::new(0.0, 0.0); k_size];

        for f in 0..frames {
            let start = plan.frame_start(f);
            buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            let mut any = false;
            for (i, (b, w)) in buf.iter_mut().zip(&self.window).enumerate() {
                let t = start + i as isize;
                if t >= 0 && (t as usize) < n {
                    b.re = clip.samples[t as usize] * w;
                    any |= b.re != 0.0;
                }
            }
            if !any && dump.is_none() {
                continue;
            }
            self.fft.forward(&mut buf);
            let frame = &field.frames[f];
            for (ear, out) in [(Ear::Left, &mut left), (Ear::Right, &mut right)] {
                let transfer = frame.ear(ear);
                if !transfer.scale.len().is_multiple_of(k_size) {
                    return Err(RenderError::ShapeMismatch { expected: k_size, got: transfer.scale.len() });
                }
                let min_shift = transfer.min_shift();
                let bulk = (min_shift / plan.hop as f64).floor().max(0.0) * plan.hop as f64;
                let content_end = frame_len as f64 + (transfer.max_shift() - bulk).ceil();
                if content_end > k_size as f64 {
                    return Err(RenderError::ShiftExceedsFrame {
                        spread: transfer.max_shift() - bulk,
                        room: k_size - frame_len,
                    });
                }
                let mut spec = ear_spectrum(&buf, transfer, bulk);
                if let Some(d) = dump.as_deref_mut() {
                    let tag = if ear == Ear::Left { "L" } else { "R" };
                    for (k, v) in spec.iter().enumerate().take(k_size / 2 + 1) {
                        writeln!(d, "{f},{tag},{k},{:e},{:e}", v.re, v.im)?;
                    }
                }
                self.fft.inverse(&mut spec);
                debug_assert!(spec.iter().all(|v| v.im.abs() <= 1e-9 * (1.0 + v.re.abs())), "non-real frame output");
                // indices past the midpoint of the unused tail are pre-ringing
                // wrapped from negative time
                let split = (content_end as usize + k_size) / 2;
                let base = start + bulk as isize;
                for (i, v) in spec.iter().enumerate() {
                    let offset = if i >= split { i as isize - k_size as isize } else { i as isize };
                    let t = base + offset;
                    if t >= 0 && (t as usize) < out_len {
                        out[t as usize] += v.re;
                    }
                }
            }
        }
        Ok(BinauralClip { left, right, sample_rate: clip.sample_rate })
    }
}

/// Renders one event's mono clip through its transfer field.
pub fn render_event(clip: &MonoClip, field: &TransferField, plan: &FramePlan) -> Result<BinauralClip, RenderError> {
    Renderer::new(*plan)?.render(clip, field)
}

/// Analysis followed by synthesis with the identity transfer.
pub fn wola_roundtrip(clip: &MonoClip, plan: &FramePlan) -> Result<MonoClip, RenderError> {
    let plan = FramePlan { pad: 0, ..*plan };
    let field = TransferField::identity(plan.fft_size, plan.frame_count(clip.len()));
    let out = render_event(clip, &field, &plan)?;
    Ok(MonoClip { samples: out.left, sample_rate: clip.sample_rate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::SourcePose;
    use crate::source::{synth_test_signal, SignalKind};
    use crate::spatializer::{parametric_field, SpatialConfig};
    use proptest::prelude::*;

    const SR: u32 = 16_000;

    fn small_plan() -> FramePlan {
        FramePlan { fft_size: 256, frame_length: 128, hop: 64, pad: 0 }
    }

    #[test]
    fn identity_transfer_is_exact() {
        let fft = FftPair::new(64);
        let x: Vec<f64> = (0..64).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let spec = fft.forward_real(&x);
        let field = TransferField::identity(64, 1);
        let (l, r) = apply_transfer(&spec, &field, 0).unwrap();
        for (a, b) in l.iter().chain(&r).zip(spec.iter().chain(&spec)) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn half_scale_halves_each_bin() {
        let fft = FftPair::new(64);
        let x: Vec<f64> = (0..64).map(|i| (i as f64 * 0.3).sin()).collect();
        let spec = fft.forward_real(&x);
        let field = TransferField::uniform(64, 1, 0.5, 0.0);
        let (l, _) = apply_transfer(&spec, &field, 0).unwrap();
        for (a, b) in l.iter().zip(&spec) {
            assert!((a - b * 0.5).norm() < 1e-12);
        }
    }

    #[test]
    fn integer_shift_moves_impulse() {
        let fft = FftPair::new(64);
        let mut x = vec![0.0; 64];
        x[5] = 1.0;
        let field = TransferField::uniform(64, 1, 1.0, 7.0);
        let (mut l, _) = apply_transfer(&fft.forward_real(&x), &field, 0).unwrap();
        fft.inverse(&mut l);
        for (i, v) in l.iter().enumerate() {
            let want = if i == 12 { 1.0 } else { 0.0 };
            assert!((v.re - want).abs() < 1e-12 && v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch() {
        let field = TransferField::identity(64, 1);
        let spec = vec![Complex64::new(0.0, 0.0); 32];
        assert!(matches!(apply_transfer(&spec, &field, 0), Err(RenderError::ShapeMismatch { .. })));
        let spec = vec![Complex64::new(0.0, 0.0); 64];
        assert!(matches!(apply_transfer(&spec, &field, 1), Err(RenderError::PlanMismatch(_))));
    }

    #[test]
    fn roundtrip_noise_and_silence() {
        let plan = FramePlan::default();
        let noise = synth_test_signal(SignalKind::Noise, 1.0, SR, 11);
        let back = wola_roundtrip(&noise, &plan).unwrap();
        assert_eq!(back.len(), noise.len());
        let err = back.samples.iter().zip(&noise.samples).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        let zeros = MonoClip { samples: vec![0.0; 5000], sample_rate: SR };
        assert!(wola_roundtrip(&zeros, &plan).unwrap().samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn roundtrip_sine_snr() {
        let sine = synth_test_signal(SignalKind::Sine { freq_hz: 440.0 }, 1.0, SR, 0);
        let back = wola_roundtrip(&sine, &FramePlan::default()).unwrap();
        let noise: f64 = back.samples.iter().zip(&sine.samples).map(|(a, b)| (a - b).powi(2)).sum();
        let snr = 10.0 * (dsp::energy(&sine.samples) / noise).log10();
        assert!(snr > 100.0, "{snr}");
    }

    #[test]
    fn plan_mismatch_and_validation() {
        let plan = small_plan();
        let clip = synth_test_signal(SignalKind::Noise, 0.05, SR, 1);
        let wrong = TransferField::identity(256, 3);
        assert!(matches!(render_event(&clip, &wrong, &plan), Err(RenderError::PlanMismatch(_))));
        let shifted = TransferField::uniform(256, plan.frame_count(clip.len()), 1.0, 10.0);
        assert!(matches!(render_event(&clip, &shifted, &plan), Err(RenderError::PlanMismatch(_))));
        assert!(render_event(&clip, &shifted, &plan.padded_for(&shifted)).is_ok());
        assert!(FramePlan { hop: 100, ..FramePlan::default() }.validate().is_err());
        assert!(FramePlan::new(1000, 500).is_err());
        assert!(FramePlan::new(512, 1024).is_err());
    }

    #[test]
    fn front_source_is_symmetric_and_distance_bulk_is_exact() {
        let plan = FramePlan::default();
        let clip = synth_test_signal(SignalKind::Noise, 0.5, SR, 2);
        let pose = SourcePose::from_spherical(0.0, 0.0, 20.0);
        let field = parametric_field(&pose, plan.frame_count(clip.len()), 2048, SR, &SpatialConfig::default()).unwrap();
        let plan = plan.padded_for(&field);
        let out = render_event(&clip, &field, &plan).unwrap();
        assert_eq!(out.len(), clip.len() + plan.pad);
        assert_eq!(out.left, out.right);
        // 20 m → 932.94 samples: a bulk of one hop plus a fractional phase ramp
        let g = 20.0 * SR as f64 / 343.0;
        let gain = SR as f64 / 343.0 / g;
        let e_out = dsp::energy(&out.left);
        let lead = g.floor() as usize - 40;
        assert!(dsp::energy(&out.left[..lead]) < 1e-4 * e_out);
        let e_in = dsp::energy(&clip.samples) * gain * gain;
        assert!((e_out / e_in - 1.0).abs() < 0.02, "{}", e_out / e_in);
    }

    #[test]
    fn dump_writes_rows() {
        let plan = small_plan();
        let clip = synth_test_signal(SignalKind::Click, 0.01, SR, 0);
        let field = TransferField::identity(256, plan.frame_count(clip.len()));
        let mut out = Vec::new();
        Renderer::new(plan).unwrap().render_with_dump(&clip, &field, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 1 + plan.frame_count(clip.len()) * 2 * 129);
    }

    fn bandlimited(len: usize, seed: u64) -> MonoClip {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let tones: Vec<(f64, f64)> =
            (0..40).map(|_| (rng.random_range(50.0..3000.0), rng.random_range(0.0..std::f64::consts::TAU))).collect();
        let samples = (0..len)
            .map(|n| {
                let t = n as f64 / SR as f64;
                tones.iter().map(|(f, p)| (2.0 * std::f64::consts::PI * f * t + p).sin()).sum::<f64>() / 40.0
            })
            .collect();
        MonoClip { samples, sample_rate: SR }
    }

    #[test]
    fn fractional_delay_matches_windowed_sinc() {
        let plan = FramePlan::default();
        let clip = bandlimited(16_000, 3);
        let field = TransferField::uniform(2048, plan.frame_count(clip.len()), 1.0, 2.5);
        let out = render_event(&clip, &field, &plan.padded_for(&field)).unwrap();
        let x = &clip.samples;
        let (mut sig, mut err) = (0.0, 0.0);
        for n in 2000..14_000 {
            let want: f64 = (n - 80..n + 80).map(|m| x[m] * dsp::windowed_sinc(n as f64 - m as f64 - 2.5, 1.0, 80.0)).sum();
            sig += want * want;
            err += (out.left[n] - want).powi(2);
        }
        let snr = 10.0 * (sig / err).log10();
        assert!(snr > 60.0, "{snr}");
    }

    #[test]
    fn lateral_lag_matches_woodworth() {
        let plan = FramePlan::default();
        let clip = synth_test_signal(SignalKind::Noise, 0.5, SR, 4);
        let cfg = SpatialConfig::default();
        let pose = SourcePose::from_spherical(90.0, 0.0, 1.0);
        let field = parametric_field(&pose, plan.frame_count(clip.len()), 2048, SR, &cfg).unwrap();
        let out = render_event(&clip, &field, &plan.padded_for(&field)).unwrap();
        let xcorr = |lag: i64| -> f64 {
            (0..out.len() as i64)
                .filter_map(|n| {
                    let m = n - lag;
                    (m >= 0 && (m as usize) < out.len()).then(|| out.left[n as usize] * out.right[m as usize])
                })
                .sum()
        };
        let best = (-30..=30).max_by(|a, b| xcorr(*a).total_cmp(&xcorr(*b))).unwrap();
        let itd = cfg.head_radius * (std::f64::consts::FRAC_PI_2 + 1.0) / cfg.speed_of_sound * SR as f64;
        assert!((best as f64 - itd).abs() <= 1.0, "{best} vs {itd}");
    }

    proptest! {
        #[test]
        fn linearity(gain in -1.0f64..1.0, seed in 0u64..50, az in -180.0f64..180.0) {
            let plan = small_plan();
            let clip = synth_test_signal(SignalKind::Noise, 0.03, SR, seed);
            let pose = SourcePose::from_spherical(az, 0.0, 1.0);
            let field = parametric_field(&pose, plan.frame_count(clip.len()), 256, SR, &SpatialConfig::default()).unwrap();
            let plan = plan.padded_for(&field);
            let a = render_event(&clip.scaled(gain), &field, &plan).unwrap();
            let b = render_event(&clip, &field, &plan).unwrap().scaled(gain);
            let scale = b.peak().max(1e-300);
            for (x, y) in a.left.iter().chain(&a.right).zip(b.left.iter().chain(&b.right)) {
                prop_assert!((x - y).abs() <= 1e-9 * scale);
            }
        }
    }
}
