use crate::dsp;
use crate::renderer::BinauralClip;
use crate::scene::SourcePose;
use crate::source::MonoClip;
use crate::spatializer::{distance_attenuation, geometric_delay, Ear, HrirSet, SpatialConfig};

use super::MetricError;

const SINC_HALF: isize = 32;

fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; x.len() + h.len() - 1];
    for (i, xv) in x.iter().enumerate() {
        if *xv != 0.0 {
            for (j, hv) in h.iter().enumerate() {
                out[i + j] += xv * hv;
            }
        }
    }
    out
}

/// Benchmark render: direct convolution with the interpolated HRIR pair,
/// then the source-to-head delay (windowed-sinc fractional part) and the
/// free-field attenuation. Output length is `len + taps - 1 + floor(g) + 33`.
pub fn reference_render(
    clip: &MonoClip,
    pose: &SourcePose,
    set: &HrirSet,
    cfg: &SpatialConfig,
) -> Result<BinauralClip, MetricError> {
    if clip.sample_rate != set.sample_rate {
        return Err(MetricError::RateMismatch { pred: clip.sample_rate, reference: set.sample_rate });
    }
    let sr = clip.sample_rate;
    let g = geometric_delay(pose, Ear::Right, sr, 0.0, cfg.speed_of_sound)
        .map_err(|e| MetricError::BadConfig(e.to_string()))?;
    let gain = distance_attenuation(g, sr, cfg);
    let whole = g.floor() as isize;
    let frac = g - g.floor();
    let kernel: Vec<(isize, f64)> = (-SINC_HALF + 1..=SINC_HALF)
        .map(|j| (j, gain * dsp::windowed_sinc(j as f64 - frac, 1.0, SINC_HALF as f64)))
        .collect();
    let (az, el) = (pose.azimuth_deg(), pose.elevation_deg());
    let ear = |e: Ear| {
        let wet = convolve(&clip.samples, &set.interpolate(az, el, e));
        let len = clip.len() + set.max_response_len().max(1) - 1 + whole as usize + SINC_HALF as usize + 1;
        let mut out = vec![0.0; len];
        for (m, v) in wet.iter().enumerate() {
            for &(j, k) in &kernel {
                let n = m as isize + whole + j;
                if n >= 0 && (n as usize) < len {
                    out[n as usize] += v * k;
                }
            }
        }
        out
    };
    Ok(BinauralClip::new(ear(Ear::Left), ear(Ear::Right), sr))
}
