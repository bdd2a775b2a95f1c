//! WAV read/write for PCM 16-bit and IEEE float32, mono or stereo.

use std::io::{Cursor, Read, Seek, Write};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("wav: {0}")]
    Codec(#[from] hound::Error),
    #[error("wav: unsupported format ({0})")]
    Unsupported(String),
    #[error("wav: non-finite sample at index {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavEncoding {
    #[default]
    Float32,
    Pcm16,
}

/// Deinterleaved audio as loaded from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct WavData {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: u32,
}

impl WavData {
    /// Averages all channels into one.
    pub fn to_mono(&self) -> Vec<f64> {
        let n = self.channels.first().map_or(0, Vec::len);
        let c = self.channels.len().max(1) as f64;
        (0..n).map(|i| self.channels.iter().map(|ch| ch[i]).sum::<f64>() / c).collect()
    }
}

fn decode<R: Read>(reader: WavReader<R>) -> Result<WavData, WavError> {
    let spec = reader.spec();
    let nch = spec.channels as usize;
    if nch == 0 || nch > 2 {
        return Err(WavError::Unsupported(format!("{nch} channels")));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<Result<_, _>>()?
        }
        (fmt, bits) => return Err(WavError::Unsupported(format!("{fmt:?} {bits}-bit"))),
    };
    if let Some(i) = interleaved.iter().position(|v| !v.is_finite()) {
        return Err(WavError::NonFinite(i));
    }
    let mut channels = vec![Vec::with_capacity(interleaved.len() / nch); nch];
    for frame in interleaved.chunks_exact(nch) {
        for (ch, &v) in channels.iter_mut().zip(frame) {
            ch.push(v);
        }
    }
    Ok(WavData { channels, sample_rate: spec.sample_rate })
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<WavData, WavError> {
    decode(WavReader::open(path)?)
}

pub fn read_wav_bytes(bytes: &[u8]) -> Result<WavData, WavError> {
    decode(WavReader::new(Cursor::new(bytes))?)
}

fn encode<W: Write + Seek>(
    writer: W,
    channels: &[&[f64]],
    sample_rate: u32,
    encoding: WavEncoding,
) -> Result<(), WavError> {
    let nch = channels.len();
    if nch == 0 || nch > 2 {
        return Err(WavError::Unsupported(format!("{nch} channels")));
    }
    let len = channels[0].len();
    if channels.iter().any(|c| c.len() != len) {
        return Err(WavError::Unsupported("unequal channel lengths".into()));
    }
    let spec = WavSpec {
        channels: nch as u16,
        sample_rate,
        bits_per_sample: match encoding {
            WavEncoding::Float32 => 32,
            WavEncoding::Pcm16 => 16,
        },
        sample_format: match encoding {
            WavEncoding::Float32 => SampleFormat::Float,
            WavEncoding::Pcm16 => SampleFormat::Int,
        },
    };
    let mut w = WavWriter::new(writer, spec)?;
    for i in 0..len {
        for ch in channels {
            let v = ch[i];
            if !v.is_finite() {
                return Err(WavError::NonFinite(i));
            }
            match encoding {
                WavEncoding::Float32 => w.write_sample(v as f32)?,
                WavEncoding::Pcm16 => {
                    w.write_sample((v * 32768.0).round().clamp(-32768.0, 32767.0) as i16)?
                }
            }
        }
    }
    w.finalize()?;
    Ok(())
}

pub fn write_wav(
    path: impl AsRef<Path>,
    channels: &[&[f64]],
    sample_rate: u32,
    encoding: WavEncoding,
) -> Result<(), WavError> {
    let file = std::io::BufWriter::new(std::fs::File::create(path).map_err(hound::Error::from)?);
    encode(file, channels, sample_rate, encoding)
}

pub fn wav_bytes(
    channels: &[&[f64]],
    sample_rate: u32,
    encoding: WavEncoding,
) -> Result<Vec<u8>, WavError> {
    let mut cursor = Cursor::new(Vec::new());
    encode(&mut cursor, channels, sample_rate, encoding)?;
    Ok(cursor.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_stereo_round_trip_is_exact_for_f32_values() {
        let l: Vec<f64> = (0..100).map(|i| (i as f32 * 0.01).sin() as f64).collect();
        let r: Vec<f64> = l.iter().map(|v| -v).collect();
        let bytes = wav_bytes(&[&l, &r], 16_000, WavEncoding::Float32).unwrap();
        let back = read_wav_bytes(&bytes).unwrap();
        assert_eq!(back.sample_rate, 16_000);
        assert_eq!(back.channels, vec![l, r]);
    }

    #[test]
    fn pcm16_mono_round_trip_within_quantization() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.05).sin() * 0.9).collect();
        let bytes = wav_bytes(&[&x], 22_050, WavEncoding::Pcm16).unwrap();
        let back = read_wav_bytes(&bytes).unwrap();
        assert_eq!(back.channels.len(), 1);
        for (a, b) in x.iter().zip(&back.channels[0]) {
            assert!((a - b).abs() < 1.0 / 32767.0);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_wav_bytes(b"definitely not a wav").is_err());
        assert!(wav_bytes(&[&[f64::NAN]], 8000, WavEncoding::Float32).is_err());
    }
}
