//! Timeline placement and summation of rendered events.

use serde::Serialize;
use thiserror::Error;

use crate::renderer::BinauralClip;

#[derive(Debug, Error)]
pub enum MixError {
    #[error("clip {index} has sample rate {found}, timeline uses {expected}")]
    SampleRateMismatch { index: usize, expected: u32, found: u32 },
    #[error("start time {0} is negative or not finite")]
    BadStart(f64),
}

#[derive(Debug, Clone)]
pub struct Placement {
    pub clip: BinauralClip,
    /// Seconds.
    pub start_time: f64,
}

impl Placement {
    pub fn start_sample(&self, sample_rate: u32) -> usize {
        (self.start_time * sample_rate as f64).round() as usize
    }
}

#[derive(Debug, Clone)]
pub struct Timeline {
    pub placements: Vec<Placement>,
    pub sample_rate: u32,
}

impl Timeline {
    pub fn new(sample_rate: u32) -> Self {
        Timeline { placements: Vec::new(), sample_rate }
    }

    pub fn place(&mut self, clip: BinauralClip, start_time: f64) -> Result<(), MixError> {
        if !start_time.is_finite() || start_time < 0.0 {
            return Err(MixError::BadStart(start_time));
        }
        self.placements.push(Placement { clip, start_time });
        Ok(())
    }

    /// Samples: the furthest end over all placements.
    pub fn total_length(&self) -> usize {
        self.placements
            .iter()
            .map(|p| p.start_sample(self.sample_rate) + p.clip.len())
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixReport {
    /// Pre-normalization peak of each placement, in insertion order.
    pub event_peaks: Vec<f64>,
    pub mix_peak: f64,
    /// Global gain applied to the sum; 1 when no normalization was needed.
    pub gain: f64,
    pub length_samples: usize,
    pub length_seconds: f64,
}

/// Sums all placements. Placements are added in ascending start order (ties
/// by insertion index). If the sum peaks above 1 it is scaled by `0.99/peak`.
pub fn mix(timeline: &Timeline) -> Result<(BinauralClip, MixReport), MixError> {
    let sr = timeline.sample_rate;
    for (index, p) in timeline.placements.iter().enumerate() {
        if p.clip.sample_rate != sr {
            return Err(MixError::SampleRateMismatch { index, expected: sr, found: p.clip.sample_rate });
        }
    }
    let total = timeline.total_length();
    let mut out = BinauralClip::silent(total, sr);
    let mut order: Vec<usize> = (0..timeline.placements.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&timeline.placements[a], &timeline.placements[b]);
        pa.start_sample(sr).cmp(&pb.start_sample(sr)).then(a.cmp(&b))
    });
    for i in order {
        let p = &timeline.placements[i];
        let s = p.start_sample(sr);
        for (dst, src) in out.left[s..].iter_mut().zip(&p.clip.left) {
            *dst += src;
        }
        for (dst, src) in out.right[s..].iter_mut().zip(&p.clip.right) {
            *dst += src;
        }
    }
    let mix_peak = out.peak();
    let gain = if mix_peak > 1.0 { 0.99 / mix_peak } else { 1.0 };
    if gain != 1.0 {
        log::info!("mix peak {mix_peak:.3} > 1, applying gain {gain:.4}");
        out = out.scaled(gain);
    }
    let report = MixReport {
        event_peaks: timeline.placements.iter().map(|p| p.clip.peak()).collect(),
        mix_peak,
        gain,
        length_samples: total,
        length_seconds: total as f64 / sr as f64,
    };
    Ok((out, report))
}
