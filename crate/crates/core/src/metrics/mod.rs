//! Objective comparison of binaural renders and a cue-based direction oracle.
//!
//! The loss terms follow the usual training-loss structure for binaural
//! synthesis: a waveform ℓ₂ term, a gated phase term, an interaural intensity
//! term and a multi-resolution STFT term, combined with fixed weights. A
//! plain spectral magnitude error is reported alongside but not weighted.

mod direction;
mod reference;
mod stft;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::renderer::BinauralClip;

pub use direction::{estimate_direction, gcc_phat_lag, DirectionEstimate, FrontRear, Lateral, Templates, Vertical};
pub use reference::reference_render;
pub use stft::{stft, Stft};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("clips differ in length: {pred} vs {reference} samples")]
    LengthMismatch { pred: usize, reference: usize },
    #[error("clips differ in sample rate: {pred} vs {reference} Hz")]
    RateMismatch { pred: u32, reference: u32 },
    #[error("clip of {seconds:.3} s is too short; at least {min} s needed")]
    TooShort { seconds: f64, min: f64 },
    #[error("invalid metric config: {0}")]
    BadConfig(String),
}

/// One STFT resolution: FFT size and hop, Hann window of the FFT size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub fft: usize,
    pub hop: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// Weights of l2, L_phs, L_IID and L_STFT.
    pub weights: [f64; 4],
    pub resolutions: Vec<Resolution>,
    pub iid_frame: usize,
    /// Resolution used for L_phs and L_mag.
    pub phase_resolution: Resolution,
    /// Bins whose reference level is at or below this (dBFS) are ignored by L_phs.
    pub phase_gate_db: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            weights: [1e3, 1.0, 10.0, 1.0],
            resolutions: vec![
                Resolution { fft: 512, hop: 128 },
                Resolution { fft: 1024, hop: 256 },
                Resolution { fft: 2048, hop: 512 },
            ],
            iid_frame: 1024,
            phase_resolution: Resolution { fft: 1024, hop: 256 },
            phase_gate_db: -60.0,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<(), MetricError> {
        let bad = |m: &str| Err(MetricError::BadConfig(m.into()));
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return bad("weights must be finite and non-negative");
        }
        if self.resolutions.len() < 2 {
            return bad("at least two STFT resolutions are required");
        }
        for r in self.resolutions.iter().chain([&self.phase_resolution]) {
            if r.fft < 2 || r.hop == 0 || r.hop > r.fft {
                return bad("each resolution needs fft >= 2 and 0 < hop <= fft");
            }
        }
        if self.iid_frame == 0 {
            return bad("IID frame length must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub l2: f64,
    pub l_phs: f64,
    pub l_iid: f64,
    pub l_stft: f64,
    pub l_mag: f64,
    pub total: f64,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "l2,l_phs,l_iid,l_stft,l_mag,total";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{},{}", self.l2, self.l_phs, self.l_iid, self.l_stft, self.l_mag, self.total)
    }

    /// `Σ λᵢ · termᵢ` over l2, L_phs, L_IID, L_STFT.
    pub fn weighted_total(&self, weights: &[f64; 4]) -> f64 {
        weights[0] * self.l2 + weights[1] * self.l_phs + weights[2] * self.l_iid + weights[3] * self.l_stft
    }
}

const EPS: f64 = 1e-10;

fn check_pair(pred: &BinauralClip, reference: &BinauralClip) -> Result<(), MetricError> {
    if pred.sample_rate != reference.sample_rate {
        return Err(MetricError::RateMismatch { pred: pred.sample_rate, reference: reference.sample_rate });
    }
    if pred.len() != reference.len() {
        return Err(MetricError::LengthMismatch { pred: pred.len(), reference: reference.len() });
    }
    Ok(())
}

fn channels(c: &BinauralClip) -> [&[f64]; 2] {
    [&c.left, &c.right]
}

/// RMS of the sample difference, averaged over the two channels.
pub fn l2(pred: &BinauralClip, reference: &BinauralClip) -> f64 {
    let n = pred.len().max(1) as f64;
    channels(pred)
        .iter()
        .zip(channels(reference))
        .map(|(p, r)| (p.iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n).sqrt())
        .sum::<f64>()
        / 2.0
}

fn wrap_phase(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

/// Mean absolute wrapped phase difference over bins where the reference is
/// above the gate. Zero when no bin passes.
pub fn phase_loss(pred: &BinauralClip, reference: &BinauralClip, cfg: &MetricConfig) -> f64 {
    let res = cfg.phase_resolution;
    // a full-scale sinusoid peaks at Σw/2 = fft/4 for a periodic Hann
    let full_scale = res.fft as f64 / 4.0;
    let gate = full_scale * 10f64.powf(cfg.phase_gate_db / 20.0);
    let (mut sum, mut count) = (0.0, 0usize);
    for (p, r) in channels(pred).iter().zip(channels(reference)) {
        let (sp, sr) = (stft(p, res.fft, res.hop), stft(r, res.fft, res.hop));
        for (a, b) in sp.bins.iter().zip(&sr.bins) {
            if b.norm() > gate {
                sum += wrap_phase(a.arg() - b.arg()).abs();
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Per-frame interaural level difference in dB over non-overlapping frames.
pub fn iid_track(clip: &BinauralClip, frame: usize) -> Vec<f64> {
    clip.left
        .chunks(frame)
        .zip(clip.right.chunks(frame))
        .map(|(l, r)| {
            let el: f64 = l.iter().map(|v| v * v).sum();
            let er: f64 = r.iter().map(|v| v * v).sum();
            10.0 * ((el + EPS) / (er + EPS)).log10()
        })
        .collect()
}

/// RMS over frames of the IID difference.
pub fn iid_loss(pred: &BinauralClip, reference: &BinauralClip, frame: usize) -> f64 {
    let (a, b) = (iid_track(pred, frame), iid_track(reference, frame));
    if a.is_empty() {
        return 0.0;
    }
    (a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Spectral convergence plus mean log-magnitude L1, summed over resolutions
/// and averaged over channels.
pub fn mrstft_loss(pred: &BinauralClip, reference: &BinauralClip, resolutions: &[Resolution]) -> f64 {
    let mut total = 0.0;
    for res in resolutions {
        for (p, r) in channels(pred).iter().zip(channels(reference)) {
            let (sp, sr) = (stft(p, res.fft, res.hop), stft(r, res.fft, res.hop));
            let (mut diff, mut norm, mut log_l1) = (0.0, 0.0, 0.0);
            for (a, b) in sp.magnitudes().zip(sr.magnitudes()) {
                diff += (b - a).powi(2);
                norm += b * b;
                log_l1 += ((b + EPS).ln() - (a + EPS).ln()).abs();
            }
            let sc = if diff == 0.0 { 0.0 } else { diff.sqrt() / norm.sqrt().max(EPS) };
            total += (sc + log_l1 / sp.bins.len().max(1) as f64) / 2.0;
        }
    }
    total
}

/// Mean per-bin absolute magnitude difference, both channels.
pub fn magnitude_error(pred: &BinauralClip, reference: &BinauralClip, res: Resolution) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for (p, r) in channels(pred).iter().zip(channels(reference)) {
        let (sp, sr) = (stft(p, res.fft, res.hop), stft(r, res.fft, res.hop));
        for (a, b) in sp.magnitudes().zip(sr.magnitudes()) {
            sum += (a - b).abs();
            count += 1;
        }
    }
    sum / count.max(1) as f64
}

/// Computes every metric for one aligned pair.
pub fn eval_pair(pred: &BinauralClip, reference: &BinauralClip, cfg: &MetricConfig) -> Result<MetricReport, MetricError> {
    cfg.validate()?;
    check_pair(pred, reference)?;
    let mut report = MetricReport {
        l2: l2(pred, reference),
        l_phs: phase_loss(pred, reference, cfg),
        l_iid: iid_loss(pred, reference, cfg.iid_frame),
        l_stft: mrstft_loss(pred, reference, &cfg.resolutions),
        l_mag: magnitude_error(pred, reference, cfg.phase_resolution),
        total: 0.0,
    };
    report.total = report.weighted_total(&cfg.weights);
    Ok(report)
}
