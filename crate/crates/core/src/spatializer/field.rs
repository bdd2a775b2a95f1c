use std::sync::Arc;

use serde::Serialize;

/// Which ear a quantity belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Ear {
    Left,
    Right,
}

impl Ear {
    /// -1 for left, +1 for right (the y axis points right).
    pub fn side(self) -> f64 {
        match self {
            Ear::Left => -1.0,
            Ear::Right => 1.0,
        }
    }
}

/// Per-ear transfer for one frame, stored channel-major (`c * K + k`).
///
/// `raw_scale` and `raw_shift` are what a backend predicts; `shift` is the
/// raw shift plus the geometric delay and `scale` is the raw scale divided
/// by the squared total shift.
#[derive(Debug, Clone, PartialEq)]
pub struct EarTransfer {
    pub raw_scale: Vec<f64>,
    pub raw_shift: Vec<f64>,
    /// Samples.
    pub geometric_delay: f64,
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
}

impl EarTransfer {
    /// Derives `shift` and `scale` from the raw arrays. Raw shifts are capped
    /// just under `K/2`. Where the total shift is zero the raw scale passes
    /// through unchanged.
    pub fn from_raw(raw_scale: Vec<f64>, raw_shift: Vec<f64>, geometric_delay: f64, fft_size: usize) -> Self {
        assert_eq!(raw_scale.len(), raw_shift.len(), "raw arrays differ in length");
        let cap = shift_cap(fft_size);
        let raw_shift: Vec<f64> = raw_shift.into_iter().map(|s| s.clamp(0.0, cap)).collect();
        let shift: Vec<f64> = raw_shift.iter().map(|s| s + geometric_delay).collect();
        let scale = raw_scale
            .iter()
            .zip(&shift)
            .map(|(r, p)| if *p > 0.0 { r / (p * p) } else { *r })
            .collect();
        EarTransfer { raw_scale, raw_shift, geometric_delay, scale, shift }
    }

    pub fn channels(&self, fft_size: usize) -> usize {
        self.scale.len() / fft_size
    }

    pub fn max_shift(&self) -> f64 {
        self.shift.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_shift(&self) -> f64 {
        self.shift.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Largest admissible raw shift for an FFT size: strictly below `K/2`.
pub fn shift_cap(fft_size: usize) -> f64 {
    let half = fft_size as f64 / 2.0;
    half - half * f64::EPSILON * 4.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldFrame {
    pub left: EarTransfer,
    pub right: EarTransfer,
}

impl FieldFrame {
    pub fn ear(&self, ear: Ear) -> &EarTransfer {
        match ear {
            Ear::Left => &self.left,
            Ear::Right => &self.right,
        }
    }
}

/// Frame-wise, per-ear, per-channel, per-bin transfer consumed by the
/// renderer. Static sources share one frame across the whole schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferField {
    pub fft_size: usize,
    pub channels: usize,
    pub frames: Vec<Arc<FieldFrame>>,
}

impl TransferField {
    /// Repeats one frame `count` times.
    pub fn constant(frame: FieldFrame, fft_size: usize, count: usize) -> Self {
        let channels = frame.left.channels(fft_size);
        let shared = Arc::new(frame);
        TransferField { fft_size, channels, frames: vec![shared; count] }
    }

    /// σ ≡ `scale`, φ ≡ `shift` on both ears with one channel. The shift is
    /// carried as raw shift with zero geometric delay, so it must stay under
    /// `K/2`.
    pub fn uniform(fft_size: usize, frame_count: usize, scale: f64, shift: f64) -> Self {
        let raw_scale = if shift > 0.0 { scale * shift * shift } else { scale };
        let ear = EarTransfer::from_raw(vec![raw_scale; fft_size], vec![shift; fft_size], 0.0, fft_size);
        Self::constant(FieldFrame { left: ear.clone(), right: ear }, fft_size, frame_count)
    }

    pub fn identity(fft_size: usize, frame_count: usize) -> Self {
        Self::uniform(fft_size, frame_count, 1.0, 0.0)
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn max_shift(&self) -> f64 {
        self.frames
            .iter()
            .map(|f| f.left.max_shift().max(f.right.max_shift()))
            .fold(0.0, f64::max)
    }

    /// Checks the structural identities every field must satisfy; returns the
    /// first violation found.
    pub fn check_invariants(&self) -> Result<(), String> {
        let k = self.fft_size;
        let cap = k as f64 / 2.0;
        for (f, frame) in self.frames.iter().enumerate() {
            for (name, ear) in [("left", &frame.left), ("right", &frame.right)] {
                let n = self.channels * k;
                if [ear.raw_scale.len(), ear.raw_shift.len(), ear.scale.len(), ear.shift.len()] != [n; 4] {
                    return Err(format!("frame {f} {name}: array length != C*K"));
                }
                for i in 0..n {
                    let (rs, rp) = (ear.raw_scale[i], ear.raw_shift[i]);
                    if !rs.is_finite() || rs < 0.0 {
                        return Err(format!("frame {f} {name} bin {i}: raw scale {rs}"));
                    }
                    if !(0.0..cap).contains(&rp) {
                        return Err(format!("frame {f} {name} bin {i}: raw shift {rp} outside [0, K/2)"));
                    }
                    let phi = rp + ear.geometric_delay;
                    if (ear.shift[i] - phi).abs() > 1e-12 * phi.abs().max(1.0) {
                        return Err(format!("frame {f} {name} bin {i}: shift != raw shift + delay"));
                    }
                    if phi > 0.0 {
                        let sigma = rs / (phi * phi);
                        if (ear.scale[i] - sigma).abs() > 1e-12 * sigma.abs() {
                            return Err(format!("frame {f} {name} bin {i}: scale != raw scale / shift^2"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
