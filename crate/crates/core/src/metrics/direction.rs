use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::dsp::{self, FftPair};
use crate::renderer::BinauralClip;
use crate::spatializer::HrirSet;

use super::MetricError;

pub const MIN_SECONDS: f64 = 0.25;
const WELCH_FFT: usize = 1024;
const BANDS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Lateral {
    Left,
    Right,
    Center,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FrontRear {
    Front,
    Rear,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Vertical {
    Above,
    Level,
    Below,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionEstimate {
    pub lateral: Lateral,
    pub front_rear: FrontRear,
    pub vertical: Vertical,
    /// Confidence of the left/right decision, in [0, 1].
    pub confidence: f64,
    /// Positive when the left channel lags, i.e. the source is to the right.
    pub lag_samples: f64,
    /// `10·log10(E_L/E_R)`.
    pub ild_db: f64,
    /// Grid direction of the best-matching template, if templates were given.
    pub template: Option<(f64, f64)>,
}

/// Interaural spectral templates, one per grid direction of an HRIR set.
#[derive(Debug, Clone)]
pub struct Templates {
    sample_rate: u32,
    edges: Vec<usize>,
    entries: Vec<(f64, f64, Vec<f64>)>,
}

fn band_edges(sample_rate: u32) -> Vec<usize> {
    let hi = 7500f64.min(0.47 * sample_rate as f64);
    let lo = 300f64.min(hi / 2.0);
    let bin = |f: f64| (f * WELCH_FFT as f64 / sample_rate as f64).round() as usize;
    let mut edges: Vec<usize> =
        (0..=BANDS).map(|i| bin(lo * (hi / lo).powf(i as f64 / BANDS as f64))).collect();
    edges.dedup();
    edges
}

/// Log band energies of both ears with one common mean removed, so overall
/// level drops out but the interaural difference stays.
fn features(psd_left: &[f64], psd_right: &[f64], edges: &[usize]) -> Vec<f64> {
    let mut v: Vec<f64> = [psd_left, psd_right]
        .iter()
        .flat_map(|psd| edges.windows(2).map(|w| 10.0 * (psd[w[0]..w[1]].iter().sum::<f64>() + 1e-20).log10()))
        .collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    v
}

fn welch(x: &[f64], fft: &FftPair, window: &[f64]) -> Vec<f64> {
    let n = fft.size();
    let mut psd = vec![0.0; n / 2 + 1];
    let mut frames = 0;
    let mut start = 0;
    let mut buf = vec![0.0; n];
    while start + n <= x.len() || frames == 0 {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = x.get(start + i).map_or(0.0, |v| v * window[i]);
        }
        for (p, v) in psd.iter_mut().zip(fft.forward_real(&buf)) {
            *p += v.norm_sqr();
        }
        frames += 1;
        start += n / 2;
    }
    psd.iter_mut().for_each(|p| *p /= frames as f64);
    psd
}

impl Templates {
    pub fn from_hrir_set(set: &HrirSet) -> Self {
        let fft = FftPair::new(WELCH_FFT);
        let edges = band_edges(set.sample_rate);
        let power = |h: &[f64]| -> Vec<f64> {
            let mut buf = vec![0.0; WELCH_FFT];
            for (b, v) in buf.iter_mut().zip(h) {
                *b = *v;
            }
            fft.forward_real(&buf)[..WELCH_FFT / 2 + 1].iter().map(|v| v.norm_sqr()).collect()
        };
        let entries = set
            .points()
            .iter()
            .map(|p| (p.azimuth, p.elevation, features(&power(&p.left), &power(&p.right), &edges)))
            .collect();
        Templates { sample_rate: set.sample_rate, edges, entries }
    }

    fn nearest(&self, feat: &[f64], lateral: Lateral) -> Option<(f64, f64)> {
        let side_ok = |az: f64| {
            let s = az.to_radians().sin();
            match lateral {
                Lateral::Left => s < 1e-9,
                Lateral::Right => s > -1e-9,
                Lateral::Center => s.abs() < 0.5,
            }
        };
        self.entries
            .iter()
            .filter(|(az, _, _)| side_ok(*az))
            .map(|(az, el, t)| (az, el, t.iter().zip(feat).map(|(a, b)| (a - b).powi(2)).sum::<f64>()))
            .min_by(|a, b| a.2.total_cmp(&b.2))
            .map(|(az, el, _)| (*az, *el))
    }
}

/// GCC-PHAT delay of the left channel relative to the right, searched over
/// `±max_lag` samples and refined by a parabola through the peak.
pub fn gcc_phat_lag(left: &[f64], right: &[f64], max_lag: usize) -> f64 {
    let n = (left.len() + right.len()).next_power_of_two();
    let fft = FftPair::new(n);
    let pad = |x: &[f64]| {
        let mut v = x.to_vec();
        v.resize(n, 0.0);
        fft.forward_real(&v)
    };
    let (l, r) = (pad(left), pad(right));
    let mut cross: Vec<Complex64> = l
        .iter()
        .zip(&r)
        .map(|(a, b)| {
            let c = a * b.conj();
            let m = c.norm();
            if m > 1e-12 {
                c / m
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    fft.inverse(&mut cross);
    let max_lag = max_lag.min(n / 2 - 1) as isize;
    let at = |lag: isize| cross[lag.rem_euclid(n as isize) as usize].re;
    let best = (-max_lag..=max_lag).max_by(|a, b| at(*a).total_cmp(&at(*b))).unwrap_or(0);
    if best.abs() == max_lag {
        return best as f64;
    }
    let (y0, y1, y2) = (at(best - 1), at(best), at(best + 1));
    let denom = y0 - 2.0 * y1 + y2;
    let offset = if denom.abs() > 1e-12 { (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    best as f64 + offset
}

/// Classifies a binaural clip by its interaural cues. Left/right comes from
/// the GCC-PHAT lag within ±1 ms, with the level difference breaking ties.
/// Front/rear and above/below need `templates`; without them they are
/// reported as unknown.
pub fn estimate_direction(clip: &BinauralClip, templates: Option<&Templates>) -> Result<DirectionEstimate, MetricError> {
    let sr = clip.sample_rate;
    let seconds = clip.len() as f64 / sr as f64;
    if seconds < MIN_SECONDS {
        return Err(MetricError::TooShort { seconds, min: MIN_SECONDS });
    }
    let max_lag = (sr as f64 * 1e-3).round() as usize;
    let lag = gcc_phat_lag(&clip.left, &clip.right, max_lag);
    let (el, er) = (dsp::energy(&clip.left), dsp::energy(&clip.right));
    let ild_db = 10.0 * ((el + 1e-20) / (er + 1e-20)).log10();

    let ild_side = match ild_db {
        d if d > 1.0 => Lateral::Left,
        d if d < -1.0 => Lateral::Right,
        _ => Lateral::Center,
    };
    let (lateral, confidence) = if lag.abs() >= 0.5 {
        let side = if lag > 0.0 { Lateral::Right } else { Lateral::Left };
        let mut c = 0.5 + 0.5 * (lag.abs() / 2.0).min(1.0);
        if ild_side != Lateral::Center && ild_side != side {
            c -= 0.25;
        }
        (side, c)
    } else if ild_side != Lateral::Center {
        (ild_side, 0.5)
    } else {
        (Lateral::Center, 0.5 * lag.abs().min(0.5) + 0.25)
    };

    let (front_rear, vertical, template) = match templates {
        Some(t) if t.sample_rate == sr => {
            let fft = FftPair::new(WELCH_FFT);
            let window = dsp::hann(WELCH_FFT);
            let feat = features(&welch(&clip.left, &fft, &window), &welch(&clip.right, &fft, &window), &t.edges);
            match t.nearest(&feat, lateral) {
                Some((az, el)) => {
                    let fr = if az.abs() <= 90.0 { FrontRear::Front } else { FrontRear::Rear };
                    let v = match el {
                        e if e > 0.0 => Vertical::Above,
                        e if e < 0.0 => Vertical::Below,
                        _ => Vertical::Level,
                    };
                    (fr, v, Some((az, el)))
                }
                None => (FrontRear::Unknown, Vertical::Unknown, None),
            }
        }
        _ => (FrontRear::Unknown, Vertical::Unknown, None),
    };
    Ok(DirectionEstimate { lateral, front_rear, vertical, confidence, lag_samples: lag, ild_db, template })
}
