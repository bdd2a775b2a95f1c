//! Transfer-field backends.
//!
//! A backend turns a static [`SourcePose`] into per-frame magnitude scales and
//! phase shifts for each ear. Two deterministic backends are provided: a
//! parametric spherical-head model (Woodworth ITD, one-zero head shadow) and a
//! lookup into a measured or synthetic HRIR grid.
//!
//! Distance enters through the geometric delay `g` (samples from source to
//! head centre). The derived scale is `σ = ς / φ²` with `φ = ϕ + g`; both
//! backends fold `φ² · g₁ / max(g, floor)` into `ς`, so the rendered amplitude
//! falls as `1/d` (energy as `1/d²`) and a source at 1 m has unit gain.

mod field;
mod hrir;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::SourcePose;

pub use field::{shift_cap, Ear, EarTransfer, FieldFrame, TransferField};
pub use hrir::{hrir_field, HrirInterpolation, HrirPoint, HrirSet, HRIR_INDEX_FILE};

#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("source is {distance:.4} m from the {ear:?} ear; at least 0.01 m required")]
    DegenerateDistance { ear: Ear, distance: f64 },
    #[error("HRIR grid too sparse: {0}")]
    GridTooSparse(String),
    #[error("HRIR response of {len} samples exceeds K/2 = {half}")]
    ResponseTooLong { len: usize, half: usize },
    #[error("FFT size {0} must be a power of two >= 2")]
    BadFftSize(usize),
    #[error("HRIR set: {0}")]
    HrirFormat(String),
    #[error("HRIR set sample rate {set} Hz does not match {requested} Hz")]
    RateMismatch { set: u32, requested: u32 },
}

/// Physical constants used by both backends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialConfig {
    /// Meters.
    pub head_radius: f64,
    /// Meters per second.
    pub speed_of_sound: f64,
    /// Inverse-distance law is clamped below this distance (meters).
    pub distance_floor: f64,
}

impl Default for SpatialConfig {
    fn default() -> Self {
        SpatialConfig { head_radius: 0.0875, speed_of_sound: 343.0, distance_floor: 0.1 }
    }
}

const MIN_EAR_DISTANCE: f64 = 0.01;

/// Direct-path propagation delay in samples from the source to one ear,
/// with the ears at `(0, ±head_radius, 0)`.
pub fn geometric_delay(
    pose: &SourcePose,
    ear: Ear,
    sample_rate: u32,
    head_radius: f64,
    speed_of_sound: f64,
) -> Result<f64, SpatialError> {
    let [x, y, z] = pose.position;
    let dy = y - ear.side() * head_radius;
    let distance = (x * x + dy * dy + z * z).sqrt();
    if distance < MIN_EAR_DISTANCE {
        return Err(SpatialError::DegenerateDistance { ear, distance });
    }
    Ok(distance * sample_rate as f64 / speed_of_sound)
}

fn check_fft_size(k: usize) -> Result<(), SpatialError> {
    if k >= 2 && k.is_power_of_two() {
        Ok(())
    } else {
        Err(SpatialError::BadFftSize(k))
    }
}

/// Bin frequency in Hz, folded so bins above K/2 mirror the lower half.
pub(crate) fn bin_hz(k: usize, fft_size: usize, sample_rate: u32) -> f64 {
    let folded = k.min(fft_size - k);
    folded as f64 * sample_rate as f64 / fft_size as f64
}

/// Multiplier folded into ς: `φ² · g₁ / max(g, floor)`, where `g₁` is the
/// delay of one meter in samples.
pub(crate) fn distance_gain(phi: f64, g: f64, sample_rate: u32, cfg: &SpatialConfig) -> f64 {
    phi * phi * distance_attenuation(g, sample_rate, cfg)
}

/// Free-field amplitude `g₁ / max(g, floor)` for a delay of `g` samples;
/// unity at one meter.
pub fn distance_attenuation(g: f64, sample_rate: u32, cfg: &SpatialConfig) -> f64 {
    let per_meter = sample_rate as f64 / cfg.speed_of_sound;
    per_meter / g.max(cfg.distance_floor * per_meter)
}

/// Lateral angle in radians: 0 on the median plane, π/2 on the ear axis.
pub fn lateral_angle(pose: &SourcePose) -> f64 {
    let d = pose.distance();
    if d == 0.0 {
        0.0
    } else {
        (pose.position[1].abs() / d).clamp(0.0, 1.0).asin()
    }
}

/// Woodworth interaural delay in seconds for a lateral angle.
pub fn woodworth_itd(lateral: f64, cfg: &SpatialConfig) -> f64 {
    cfg.head_radius * (lateral + lateral.sin()) / cfg.speed_of_sound
}

/// Magnitude of the one-zero head-shadow filter
/// `(1 + i α f/f₀) / (1 + i f/f₀)`, `f₀ = c / (2π a)`.
pub fn head_shadow_magnitude(f_hz: f64, alpha: f64, cfg: &SpatialConfig) -> f64 {
    let f0 = cfg.speed_of_sound / (2.0 * std::f64::consts::PI * cfg.head_radius);
    let r = f_hz / f0;
    ((1.0 + (alpha * r).powi(2)) / (1.0 + r * r)).sqrt()
}

/// Spherical-head field with one channel per ear.
///
/// The near ear gets no extra shift and unit raw magnitude; the far ear is
/// delayed by the Woodworth ITD and low-passed by the head shadow with
/// `α = 1 + cos θ_shadow`, where θ_shadow is the angle between the far ear's
/// axis and the source. On the median plane both ears are treated as near.
pub fn parametric_field(
    pose: &SourcePose,
    frames: usize,
    fft_size: usize,
    sample_rate: u32,
    cfg: &SpatialConfig,
) -> Result<TransferField, SpatialError> {
    check_fft_size(fft_size)?;
    // Interaural timing lives in ϕ, so g is measured to the head centre.
    let g = geometric_delay(pose, Ear::Right, sample_rate, 0.0, cfg.speed_of_sound)?;
    let lateral = lateral_angle(pose);
    let itd = woodworth_itd(lateral, cfg) * sample_rate as f64;
    let far = match pose.position[1] {
        y if y > 0.0 => Some(Ear::Left),
        y if y < 0.0 => Some(Ear::Right),
        _ => None,
    };
    let alpha = 1.0 + (std::f64::consts::FRAC_PI_2 + lateral).cos();

    let ear_transfer = |ear: Ear| {
        let is_far = far == Some(ear);
        let raw_shift = if is_far { itd } else { 0.0 };
        let phi = raw_shift.min(shift_cap(fft_size)) + g;
        let gain = distance_gain(phi, g, sample_rate, cfg);
        let raw_scale: Vec<f64> = (0..fft_size)
            .map(|k| {
                let shadow =
                    if is_far { head_shadow_magnitude(bin_hz(k, fft_size, sample_rate), alpha, cfg) } else { 1.0 };
                shadow * gain
            })
            .collect();
        EarTransfer::from_raw(raw_scale, vec![raw_shift; fft_size], g, fft_size)
    };
    let frame = FieldFrame { left: ear_transfer(Ear::Left), right: ear_transfer(Ear::Right) };
    Ok(TransferField::constant(frame, fft_size, frames))
}

/// Selects the backend used to build transfer fields.
#[derive(Debug, Clone)]
pub enum Spatializer {
    Parametric(SpatialConfig),
    Hrir { set: std::sync::Arc<HrirSet>, config: SpatialConfig },
}

impl Spatializer {
    pub fn field(
        &self,
        pose: &SourcePose,
        frames: usize,
        fft_size: usize,
        sample_rate: u32,
    ) -> Result<TransferField, SpatialError> {
        match self {
            Spatializer::Parametric(cfg) => parametric_field(pose, frames, fft_size, sample_rate, cfg),
            Spatializer::Hrir { set, config } => {
                if set.sample_rate != sample_rate {
                    return Err(SpatialError::RateMismatch { set: set.sample_rate, requested: sample_rate });
                }
                hrir_field(pose, frames, fft_size, set, config)
            }
        }
    }

    pub fn config(&self) -> &SpatialConfig {
        match self {
            Spatializer::Parametric(cfg) => cfg,
            Spatializer::Hrir { config, .. } => config,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SR: u32 = 16_000;

    #[test]
    fn front_delay_hand_value() {
        // 3.43 m · 16000 / 343 = 160 samples
        let pose = SourcePose::from_spherical(0.0, 0.0, 3.43);
        for ear in [Ear::Left, Ear::Right] {
            let g = geometric_delay(&pose, ear, SR, 0.0, 343.0).unwrap();
            assert!((g - 160.0).abs() < 1e-9, "{g}");
        }
    }

    #[test]
    fn right_source_reaches_right_ear_first() {
        let pose = SourcePose::from_spherical(90.0, 0.0, 2.0);
        let gl = geometric_delay(&pose, Ear::Left, SR, 0.0875, 343.0).unwrap();
        let gr = geometric_delay(&pose, Ear::Right, SR, 0.0875, 343.0).unwrap();
        assert!(gr < gl);
    }

    #[test]
    fn degenerate_distance() {
        let pose = SourcePose::from_spherical(0.0, 0.0, 0.005);
        assert!(matches!(
            geometric_delay(&pose, Ear::Left, SR, 0.0, 343.0),
            Err(SpatialError::DegenerateDistance { .. })
        ));
        assert!(parametric_field(&pose, 1, 64, SR, &SpatialConfig::default()).is_err());
    }

    #[test]
    fn front_field_is_symmetric() {
        let pose = SourcePose::from_spherical(0.0, 0.0, 2.0);
        let field = parametric_field(&pose, 3, 256, SR, &SpatialConfig::default()).unwrap();
        let f = &field.frames[0];
        assert_eq!(f.left, f.right);
        field.check_invariants().unwrap();
    }

    #[test]
    fn lateral_itd_hand_value() {
        // 0.0875 · (π/2 + 1) / 343 = 6.5586e-4 s = 10.494 samples at 16 kHz
        let pose = SourcePose::from_spherical(90.0, 0.0, 2.0);
        let field = parametric_field(&pose, 1, 2048, SR, &SpatialConfig::default()).unwrap();
        let f = &field.frames[0];
        let extra = f.left.shift[0] - f.right.shift[0];
        assert!((extra / SR as f64 - 6.5586e-4).abs() < 1e-7, "{extra}");
        assert!((extra - 10.4937).abs() < 1e-3);
        assert!(f.right.raw_shift.iter().all(|&s| s == 0.0));
        // far ear is low-passed, near ear is flat
        assert!(f.left.scale[500] < f.left.scale[1]);
        assert_eq!(f.right.scale[500], f.right.scale[1]);
    }

    #[test]
    fn doubling_distance_quarters_sigma_energy() {
        let cfg = SpatialConfig::default();
        for az in [0.0, 37.0, 90.0, -120.0] {
            let near = parametric_field(&SourcePose::from_spherical(az, 10.0, 2.0), 1, 512, SR, &cfg).unwrap();
            let far = parametric_field(&SourcePose::from_spherical(az, 10.0, 4.0), 1, 512, SR, &cfg).unwrap();
            for ear in [Ear::Left, Ear::Right] {
                let (a, b) = (near.frames[0].ear(ear), far.frames[0].ear(ear));
                for k in 0..512 {
                    let ratio = (b.scale[k] / a.scale[k]).powi(2);
                    assert!((ratio - 0.25).abs() < 1e-6, "az {az} k {k}: {ratio}");
                }
            }
        }
    }

    #[test]
    fn unit_gain_at_one_meter_and_floor() {
        let cfg = SpatialConfig::default();
        let field = parametric_field(&SourcePose::from_spherical(0.0, 0.0, 1.0), 1, 64, SR, &cfg).unwrap();
        assert!((field.frames[0].left.scale[0] - 1.0).abs() < 1e-12);
        let close = parametric_field(&SourcePose::from_spherical(0.0, 0.0, 0.05), 1, 64, SR, &cfg).unwrap();
        assert!((close.frames[0].left.scale[0] - 10.0).abs() < 1e-9);
        close.check_invariants().unwrap();
    }

    #[test]
    fn rejects_bad_fft_size() {
        let pose = SourcePose::from_spherical(0.0, 0.0, 1.0);
        assert!(matches!(
            parametric_field(&pose, 1, 1000, SR, &SpatialConfig::default()),
            Err(SpatialError::BadFftSize(1000))
        ));
    }

    proptest! {
        #[test]
        fn parametric_invariants(az in -180.0f64..180.0, el in -90.0f64..=90.0, d in 0.05f64..100.0) {
            let pose = SourcePose::from_spherical(az, el, d);
            let field = parametric_field(&pose, 2, 128, SR, &SpatialConfig::default()).unwrap();
            prop_assert!(field.check_invariants().is_ok());
            prop_assert!(field.frames[0].left.raw_shift.iter().all(|&s| s < 64.0));
        }

        #[test]
        fn mirror_symmetry(az in -180.0f64..180.0, el in -90.0f64..=90.0, d in 0.2f64..20.0) {
            let cfg = SpatialConfig::default();
            let a = parametric_field(&SourcePose::from_spherical(az, el, d), 1, 128, SR, &cfg).unwrap();
            let b = parametric_field(&SourcePose::from_spherical(-az, el, d), 1, 128, SR, &cfg).unwrap();
            let (fa, fb) = (&a.frames[0], &b.frames[0]);
            for (x, y) in [(&fa.left, &fb.right), (&fa.right, &fb.left)] {
                for k in 0..128 {
                    prop_assert!((x.scale[k] - y.scale[k]).abs() <= 1e-9 * x.scale[k].abs().max(1.0));
                    prop_assert!((x.shift[k] - y.shift[k]).abs() <= 1e-9 * x.shift[k].abs().max(1.0));
                }
            }
        }
    }
}
