use rustfft::num_complex::Complex64;

use crate::dsp::{self, FftPair};

/// One-sided STFT, frames stored row-major with `fft/2 + 1` bins each.
#[derive(Debug, Clone)]
pub struct Stft {
    pub fft: usize,
    pub frames: usize,
    pub bins: Vec<Complex64>,
}

impl Stft {
    pub fn bins_per_frame(&self) -> usize {
        self.fft / 2 + 1
    }

    pub fn frame(&self, f: usize) -> &[Complex64] {
        let b = self.bins_per_frame();
        &self.bins[f * b..(f + 1) * b]
    }

    pub fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.bins.iter().map(|v| v.norm())
    }
}

/// Hann-windowed STFT. Frames start at 0 and advance by `hop` while they
/// still overlap the signal; the tail is zero-padded. A signal shorter than
/// one frame yields one frame.
pub fn stft(x: &[f64], fft: usize, hop: usize) -> Stft {
    let pair = FftPair::new(fft);
    let window = dsp::hann(fft);
    let frames = if x.len() <= fft { 1 } else { (x.len() - fft).div_ceil(hop) + 1 };
    let half = fft / 2 + 1;
    let mut bins = Vec::with_capacity(frames * half);
    let mut buf = vec![0.0; fft];
    for f in 0..frames {
        let start = f * hop;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = x.get(start + i).map_or(0.0, |v| v * window[i]);
        }
        bins.extend_from_slice(&pair.forward_real(&buf)[..half]);
    }
    Stft { fft, frames, bins }
}
