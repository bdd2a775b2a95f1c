//! Gridded head-related impulse responses.
//!
//! On disk a set is a directory of stereo WAVs named `az<A>_el<E>.wav` plus an
//! `index.txt` listing `sample_rate <Hz>` followed by `<az> <el> <file>` rows.

use std::f64::consts::PI;
use std::path::Path;

use super::field::{shift_cap, Ear, EarTransfer, FieldFrame, TransferField};
use super::{bin_hz, check_fft_size, distance_gain, geometric_delay, SpatialConfig, SpatialError};
use crate::dsp::FftPair;
use crate::scene::{normalize_azimuth, SourcePose};
use crate::wav::{self, WavEncoding};

pub const HRIR_INDEX_FILE: &str = "index.txt";

const MAX_AZIMUTH_GAP: f64 = 15.0;

#[derive(Debug, Clone, PartialEq)]
pub struct HrirPoint {
    pub azimuth: f64,
    pub elevation: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl HrirPoint {
    pub fn ear(&self, ear: Ear) -> &[f64] {
        match ear {
            Ear::Left => &self.left,
            Ear::Right => &self.right,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Ring {
    elevation: f64,
    /// Point indices sorted by azimuth.
    members: Vec<usize>,
}

/// Immutable HRIR grid. Every elevation ring must cover the full azimuth
/// circle with gaps of at most 15°.
#[derive(Debug, Clone, PartialEq)]
pub struct HrirSet {
    pub sample_rate: u32,
    points: Vec<HrirPoint>,
    rings: Vec<Ring>,
}

/// Up to four grid points and their bilinear weights; the first corner is
/// the lower-azimuth, lower-elevation neighbour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrirInterpolation {
    pub corners: [(usize, f64); 4],
}

impl HrirSet {
    pub fn new(points: Vec<HrirPoint>, sample_rate: u32) -> Result<Self, SpatialError> {
        if points.is_empty() {
            return Err(SpatialError::GridTooSparse("no measurement points".into()));
        }
        let mut points = points;
        for p in &mut points {
            if p.left.iter().chain(&p.right).any(|v| !v.is_finite()) {
                return Err(SpatialError::HrirFormat(format!(
                    "non-finite sample at az {} el {}",
                    p.azimuth, p.elevation
                )));
            }
            if !(-90.0..=90.0).contains(&p.elevation) || !p.azimuth.is_finite() {
                return Err(SpatialError::HrirFormat(format!("bad direction az {} el {}", p.azimuth, p.elevation)));
            }
            p.azimuth = normalize_azimuth(p.azimuth);
        }
        let mut elevations: Vec<f64> = points.iter().map(|p| p.elevation).collect();
        elevations.sort_by(f64::total_cmp);
        elevations.dedup();
        let mut rings = Vec::with_capacity(elevations.len());
        for el in elevations {
            let mut members: Vec<usize> = (0..points.len()).filter(|&i| points[i].elevation == el).collect();
            members.sort_by(|&a, &b| points[a].azimuth.total_cmp(&points[b].azimuth));
            let az: Vec<f64> = members.iter().map(|&i| points[i].azimuth).collect();
            let wrap_gap = az[0] + 360.0 - az[az.len() - 1];
            let widest = az.windows(2).map(|w| w[1] - w[0]).fold(wrap_gap, f64::max);
            if widest > MAX_AZIMUTH_GAP + 1e-9 {
                return Err(SpatialError::GridTooSparse(format!(
                    "elevation {el}: azimuth gap of {widest}° exceeds {MAX_AZIMUTH_GAP}°"
                )));
            }
            if az.windows(2).any(|w| w[0] == w[1]) {
                return Err(SpatialError::HrirFormat(format!("duplicate point in elevation ring {el}")));
            }
            rings.push(Ring { elevation: el, members });
        }
        Ok(HrirSet { sample_rate, points, rings })
    }

    pub fn points(&self) -> &[HrirPoint] {
        &self.points
    }

    pub fn elevations(&self) -> Vec<f64> {
        self.rings.iter().map(|r| r.elevation).collect()
    }

    pub fn max_response_len(&self) -> usize {
        self.points.iter().map(|p| p.left.len().max(p.right.len())).max().unwrap_or(0)
    }

    fn ring_bracket(&self, ring: &Ring, az: f64) -> ((usize, usize), f64) {
        let m = &ring.members;
        let azimuths: Vec<f64> = m.iter().map(|&i| self.points[i].azimuth).collect();
        let n = azimuths.len();
        if n == 1 {
            return ((m[0], m[0]), 0.0);
        }
        match azimuths.iter().rposition(|&a| a <= az) {
            Some(i) if i + 1 < n => {
                let t = (az - azimuths[i]) / (azimuths[i + 1] - azimuths[i]);
                ((m[i], m[i + 1]), t)
            }
            // between the last point and the first one, across ±180
            _ => {
                let span = azimuths[0] + 360.0 - azimuths[n - 1];
                let t = (az - azimuths[n - 1]).rem_euclid(360.0) / span;
                ((m[n - 1], m[0]), t)
            }
        }
    }

    /// Bilinear weights over the two bracketing elevation rings. Elevations
    /// outside the grid clamp to the nearest ring.
    pub fn interpolation(&self, azimuth: f64, elevation: f64) -> HrirInterpolation {
        let az = normalize_azimuth(azimuth);
        let last = self.rings.len() - 1;
        let (lo, hi, te) = if elevation <= self.rings[0].elevation {
            (0, 0, 0.0)
        } else if elevation >= self.rings[last].elevation {
            (last, last, 0.0)
        } else {
            let i = self.rings.iter().rposition(|r| r.elevation <= elevation).unwrap();
            let (a, b) = (self.rings[i].elevation, self.rings[i + 1].elevation);
            (i, i + 1, (elevation - a) / (b - a))
        };
        let ((a0, a1), ta) = self.ring_bracket(&self.rings[lo], az);
        let ((b0, b1), tb) = self.ring_bracket(&self.rings[hi], az);
        HrirInterpolation {
            corners: [
                (a0, (1.0 - te) * (1.0 - ta)),
                (a1, (1.0 - te) * ta),
                (b0, te * (1.0 - tb)),
                (b1, te * tb),
            ],
        }
    }

    /// Weighted blend of the neighbouring responses for one ear.
    pub fn interpolate(&self, azimuth: f64, elevation: f64, ear: Ear) -> Vec<f64> {
        let w = self.interpolation(azimuth, elevation);
        let len = self.max_response_len();
        let mut out = vec![0.0; len];
        for (idx, weight) in w.corners {
            if weight == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.points[idx].ear(ear)) {
                *o += weight * v;
            }
        }
        out
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, SpatialError> {
        let dir = dir.as_ref();
        let fmt = |m: String| SpatialError::HrirFormat(m);
        let index = std::fs::read_to_string(dir.join(HRIR_INDEX_FILE))
            .map_err(|e| fmt(format!("{}: {e}", dir.join(HRIR_INDEX_FILE).display())))?;
        let mut sample_rate = None;
        let mut points = Vec::new();
        for (n, raw) in index.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                ["sample_rate", sr] => {
                    sample_rate = Some(sr.parse::<u32>().map_err(|_| fmt(format!("line {}: bad rate", n + 1)))?)
                }
                [az, el, file] => {
                    let parse = |s: &str| s.parse::<f64>().map_err(|_| fmt(format!("line {}: bad angle {s:?}", n + 1)));
                    let data = wav::read_wav(dir.join(file)).map_err(|e| fmt(format!("{file}: {e}")))?;
                    if data.channels.len() != 2 {
                        return Err(fmt(format!("{file}: expected a stereo file")));
                    }
                    let sr = *sample_rate.get_or_insert(data.sample_rate);
                    if data.sample_rate != sr {
                        return Err(fmt(format!("{file}: {} Hz, index says {sr} Hz", data.sample_rate)));
                    }
                    let mut ch = data.channels.into_iter();
                    points.push(HrirPoint {
                        azimuth: parse(az)?,
                        elevation: parse(el)?,
                        left: ch.next().unwrap(),
                        right: ch.next().unwrap(),
                    });
                }
                _ => return Err(fmt(format!("line {}: expected `<az> <el> <file>`", n + 1))),
            }
        }
        let sample_rate = sample_rate.ok_or_else(|| fmt("index has no sample_rate and no entries".into()))?;
        HrirSet::new(points, sample_rate)
    }

    /// Writes the set as float32 stereo WAVs plus the index.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<(), SpatialError> {
        let dir = dir.as_ref();
        let io = |e: std::io::Error| SpatialError::HrirFormat(e.to_string());
        std::fs::create_dir_all(dir).map_err(io)?;
        let mut index = format!("# az el file\nsample_rate {}\n", self.sample_rate);
        for p in &self.points {
            let name = format!("az{}_el{}.wav", p.azimuth, p.elevation);
            let len = p.left.len().max(p.right.len());
            let (mut l, mut r) = (p.left.clone(), p.right.clone());
            l.resize(len, 0.0);
            r.resize(len, 0.0);
            wav::write_wav(dir.join(&name), &[&l, &r], self.sample_rate, WavEncoding::Float32)
                .map_err(|e| SpatialError::HrirFormat(e.to_string()))?;
            index.push_str(&format!("{} {} {name}\n", p.azimuth, p.elevation));
        }
        std::fs::write(dir.join(HRIR_INDEX_FILE), index).map_err(io)
    }

    /// A deterministic KEMAR-like grid built from a spherical-head model with
    /// added pinna cues: an elevation-dependent notch and a high-frequency
    /// shelf for rear sources. Elevations -45..=45 in 15° steps, azimuths
    /// every 15°, 256-tap responses.
    pub fn synthetic(sample_rate: u32, cfg: &SpatialConfig) -> Self {
        let mut points = Vec::new();
        for el in (-3..=3).map(|i| i as f64 * 15.0) {
            for az in (-12..12).map(|i| i as f64 * 15.0) {
                points.push(HrirPoint {
                    azimuth: az,
                    elevation: el,
                    left: synthetic_response(az, el, Ear::Left, sample_rate, cfg),
                    right: synthetic_response(az, el, Ear::Right, sample_rate, cfg),
                });
            }
        }
        HrirSet::new(points, sample_rate).expect("synthetic grid is complete")
    }
}

const SYNTH_LEN: usize = 256;
const SYNTH_FFT: usize = 512;

/// Frequency response of the synthetic head + pinna model for one ear.
pub(crate) fn synthetic_magnitude(az: f64, el: f64, ear: Ear, f: f64, cfg: &SpatialConfig) -> f64 {
    let (azr, elr) = (az.to_radians(), el.to_radians());
    let front = elr.cos() * azr.cos();
    let cos_psi = (ear.side() * elr.cos() * azr.sin()).clamp(-1.0, 1.0);
    let psi = cos_psi.acos();
    // spherical-head shadow with a 150° minimum
    let (alpha_min, psi_min) = (0.1, 150f64.to_radians());
    let alpha = (1.0 + alpha_min / 2.0) + (1.0 - alpha_min / 2.0) * (psi / psi_min * PI).cos();
    let w0 = cfg.speed_of_sound / cfg.head_radius;
    let r = 2.0 * PI * f / (2.0 * w0);
    let shadow = ((1.0 + (alpha * r).powi(2)) / (1.0 + r * r)).sqrt();
    // pinna notch sweeping 3 kHz → 7 kHz with elevation
    let notch_hz = 5000.0 + 2000.0 * (el / 45.0).clamp(-1.0, 1.0);
    let notch = 1.0 - 0.85 * (-((f - notch_hz) / 600.0).powi(2)).exp();
    // rear sources lose high frequencies
    let rear = (-front).max(0.0);
    let shelf = 1.0 / (1.0 + 1.5 * rear * (f / 4000.0).powi(2)).sqrt();
    shadow * notch * shelf
}

/// Arrival delay in seconds at one ear, relative to a fixed onset.
fn synthetic_delay(az: f64, el: f64, ear: Ear, cfg: &SpatialConfig) -> f64 {
    let (azr, elr) = (az.to_radians(), el.to_radians());
    let psi = (ear.side() * elr.cos() * azr.sin()).clamp(-1.0, 1.0).acos();
    let a_c = cfg.head_radius / cfg.speed_of_sound;
    let around = if psi < PI / 2.0 { -a_c * psi.cos() } else { a_c * (psi - PI / 2.0) };
    0.0005 + a_c + around
}

fn synthetic_response(az: f64, el: f64, ear: Ear, sample_rate: u32, cfg: &SpatialConfig) -> Vec<f64> {
    use rustfft::num_complex::Complex64;
    let fft = FftPair::new(SYNTH_FFT);
    let delay = synthetic_delay(az, el, ear, cfg) * sample_rate as f64;
    let mut spec: Vec<Complex64> = (0..SYNTH_FFT)
        .map(|k| {
            let f = bin_hz(k, SYNTH_FFT, sample_rate);
            let w = 2.0 * PI * k as f64 / SYNTH_FFT as f64;
            Complex64::from_polar(synthetic_magnitude(az, el, ear, f, cfg), -w * delay)
        })
        .collect();
    crate::dsp::enforce_conjugate_symmetry(&mut spec);
    fft.inverse(&mut spec);
    let taper = 32;
    (0..SYNTH_LEN)
        .map(|n| {
            let fade = if n + taper >= SYNTH_LEN {
                let t = (SYNTH_LEN - n) as f64 / taper as f64;
                0.5 - 0.5 * (PI * t).cos()
            } else {
                1.0
            };
            spec[n].re * fade
        })
        .collect()
}

/// Energy-weighted mean group delay (samples) of a response, from the
/// unwrapped phase of its K-point transform.
pub(crate) fn group_delay(response: &[f64], fft: &FftPair) -> f64 {
    let k = fft.size();
    let spec = fft.forward_real(response);
    let (mut num, mut den) = (0.0, 0.0);
    let bin_w = 2.0 * PI / k as f64;
    for i in 0..k / 2 {
        let (a, b) = (spec[i], spec[i + 1]);
        let weight = a.norm_sqr().min(b.norm_sqr());
        if weight == 0.0 {
            continue;
        }
        // phase step between adjacent bins, wrapped into (-π, π]
        let step = (b * a.conj()).arg();
        num += weight * (-step / bin_w);
        den += weight;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// HRIR-table field with one channel per ear. Magnitudes come from the
/// K-point transform of the interpolated response; phase is reduced to a
/// single broadband group delay.
pub fn hrir_field(
    pose: &SourcePose,
    frames: usize,
    fft_size: usize,
    set: &HrirSet,
    cfg: &SpatialConfig,
) -> Result<TransferField, SpatialError> {
    check_fft_size(fft_size)?;
    let half = fft_size / 2;
    let len = set.max_response_len();
    if len > half {
        return Err(SpatialError::ResponseTooLong { len, half });
    }
    let sample_rate = set.sample_rate;
    let g = geometric_delay(pose, Ear::Right, sample_rate, 0.0, cfg.speed_of_sound)?;
    let fft = FftPair::new(fft_size);
    let (az, el) = (pose.azimuth_deg(), pose.elevation_deg());
    let ear_transfer = |ear: Ear| {
        let response = set.interpolate(az, el, ear);
        let tau = group_delay(&response, &fft).clamp(0.0, shift_cap(fft_size));
        let gain = distance_gain(tau + g, g, sample_rate, cfg);
        let spec = fft.forward_real(&response);
        let raw_scale = spec.iter().map(|v| v.norm() * gain).collect();
        EarTransfer::from_raw(raw_scale, vec![tau; fft_size], g, fft_size)
    };
    let frame = FieldFrame { left: ear_transfer(Ear::Left), right: ear_transfer(Ear::Right) };
    Ok(TransferField::constant(frame, fft_size, frames))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SR: u32 = 16_000;

    fn set() -> HrirSet {
        HrirSet::synthetic(SR, &SpatialConfig::default())
    }

    #[test]
    fn on_grid_weights_are_identity() {
        let s = set();
        let w = s.interpolation(45.0, 15.0);
        let p = &s.points()[w.corners[0].0];
        assert_eq!((p.azimuth, p.elevation), (45.0, 15.0));
        assert_eq!(w.corners.map(|c| c.1), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.interpolate(45.0, 15.0, Ear::Left), p.left);
    }

    #[test]
    fn weights_sum_to_one_and_wrap() {
        let s = set();
        for (az, el) in [(172.0, 3.0), (-179.0, -44.0), (7.5, 7.5), (0.0, 80.0), (-100.0, -90.0)] {
            let w = s.interpolation(az, el);
            let total: f64 = w.corners.iter().map(|c| c.1).sum();
            assert!((total - 1.0).abs() < 1e-12, "{az} {el}");
            assert!(w.corners.iter().all(|c| c.1 >= 0.0));
        }
        let w = s.interpolation(172.5, 0.0);
        let (a, b) = (&s.points()[w.corners[0].0], &s.points()[w.corners[1].0]);
        assert_eq!((a.azimuth, b.azimuth), (165.0, -180.0));
        assert!((w.corners[0].1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sparse_grid_rejected() {
        let p = |az: f64| HrirPoint { azimuth: az, elevation: 0.0, left: vec![1.0], right: vec![1.0] };
        let err = HrirSet::new((0..12).map(|i| p(i as f64 * 30.0)).collect(), SR).unwrap_err();
        assert!(matches!(err, SpatialError::GridTooSparse(_)));
    }

    #[test]
    fn lateral_source_has_positive_ild() {
        let s = set();
        let idx = s.interpolation(90.0, 0.0).corners[0].0;
        let p = &s.points()[idx];
        let e = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        assert!(10.0 * (e(&p.right) / e(&p.left)).log10() > 3.0);
        let field = hrir_field(&SourcePose::from_spherical(90.0, 0.0, 1.0), 1, 1024, &s, &SpatialConfig::default())
            .unwrap();
        field.check_invariants().unwrap();
        let f = &field.frames[0];
        assert!(f.left.shift[0] > f.right.shift[0]);
    }

    #[test]
    fn group_delay_of_pure_delay() {
        let fft = FftPair::new(512);
        let mut x = vec![0.0; 64];
        x[17] = 1.0;
        assert!((group_delay(&x, &fft) - 17.0).abs() < 1e-9);
    }

    #[test]
    fn response_too_long() {
        let s = set();
        let err = hrir_field(&SourcePose::from_spherical(0.0, 0.0, 1.0), 1, 256, &s, &SpatialConfig::default());
        assert!(matches!(err, Err(SpatialError::ResponseTooLong { len: 256, half: 128 })));
    }

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = set();
        s.save_dir(dir.path()).unwrap();
        let back = HrirSet::load_dir(dir.path()).unwrap();
        assert_eq!(back.sample_rate, SR);
        assert_eq!(back.points().len(), s.points().len());
        for (a, b) in s.points().iter().zip(back.points()) {
            assert_eq!((a.azimuth, a.elevation), (b.azimuth, b.elevation));
            for (x, y) in a.left.iter().zip(&b.left) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }
}
