use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::CorpusError;

/// Decoded, mono-mixed audio at its native rate.
#[derive(Debug, Clone)]
pub struct DecodedAudio {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub channels: u16,
    /// Frames per channel in the file.
    pub frames: u64,
}

fn decode_err(path: &Path, e: impl std::fmt::Display) -> CorpusError {
    CorpusError::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Reads PCM 16/24/32-bit integer or 32-bit float WAV and mixes down to mono
/// by channel mean.
pub fn read_wav_mono(path: &Path) -> Result<DecodedAudio, CorpusError> {
    let mut reader = WavReader::open(path).map_err(|e| decode_err(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .collect::<Result<_, _>>()
            .map_err(|e| decode_err(path, e))?,
        (SampleFormat::Int, bits @ (16 | 24 | 32)) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| (v as f64 * scale) as f32))
                .collect::<Result<_, _>>()
                .map_err(|e| decode_err(path, e))?
        }
        (fmt, bits) => {
            return Err(decode_err(
                path,
                format!("unsupported sample format {fmt:?} at {bits} bits"),
            ))
        }
    };
    let samples: Vec<f32> = interleaved
        .chunks(channels)
        .map(|frame| (frame.iter().map(|&s| s as f64).sum::<f64>() / channels as f64) as f32)
        .collect();
    if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
        return Err(decode_err(path, format!("non-finite sample at frame {i}")));
    }
    Ok(DecodedAudio {
        frames: samples.len() as u64,
        samples,
        sample_rate: spec.sample_rate,
        channels: spec.channels,
    })
}

/// Writes mono 32-bit float WAV.
pub fn write_wav_f32(path: &Path, samples: &[f32], sample_rate: u32) -> Result<(), CorpusError> {
    let spec = WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let io = |e: hound::Error| CorpusError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = WavWriter::create(path, spec).map_err(io)?;
    for &s in samples {
        w.write_sample(s).map_err(io)?;
    }
    w.finalize().map_err(io)
}

/// Writes interleaved 16-bit PCM WAV with `channels` channels.
pub fn write_wav_i16(
    path: &Path,
    interleaved: &[f32],
    channels: u16,
    sample_rate: u32,
) -> Result<(), CorpusError> {
    let spec = WavSpec {
        channels,
        sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let io = |e: hound::Error| CorpusError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = WavWriter::create(path, spec).map_err(io)?;
    for &s in interleaved {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        w.write_sample(v).map_err(io)?;
    }
    w.finalize().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let x = vec![0.0, 0.25, -0.5, 0.999];
        write_wav_f32(&p, &x, 48_000).unwrap();
        let back = read_wav_mono(&p).unwrap();
        assert_eq!(back.samples, x);
        assert_eq!((back.sample_rate, back.channels, back.frames), (48_000, 1, 4));
    }

    #[test]
    fn stereo_pcm16_mixes_to_mean() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        write_wav_i16(&p, &[0.5, 0.0, -0.5, -0.5], 2, 44_100).unwrap();
        let back = read_wav_mono(&p).unwrap();
        assert_eq!(back.channels, 2);
        assert_eq!(back.frames, 2);
        assert!((back.samples[0] - 0.25).abs() < 1e-4);
        assert!((back.samples[1] + 0.5).abs() < 1e-4);
    }

    #[test]
    fn pcm24_is_decoded() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 48_000,
            bits_per_sample: 24,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&p, spec).unwrap();
        w.write_sample(1 << 22).unwrap();
        w.write_sample(-(1 << 23)).unwrap();
        w.finalize().unwrap();
        let back = read_wav_mono(&p).unwrap();
        assert_eq!(back.samples, vec![0.5, -1.0]);
    }

    #[test]
    fn garbage_is_a_decode_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.wav");
        std::fs::write(&p, b"not a wav file at all").unwrap();
        assert!(matches!(read_wav_mono(&p), Err(CorpusError::Decode { .. })));
    }
}
