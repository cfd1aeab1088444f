//! Minimal RIFF/WAVE reader and writer.
//!
//! Reading accepts 16-bit integer PCM and 32-bit IEEE float with one or two
//! channels (including the `WAVE_FORMAT_EXTENSIBLE` wrapper around those two
//! encodings). Writing always produces 16-bit PCM mono.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{AudioClip, AudioError};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Scale between 16-bit integer samples and the unit interval.
pub const PCM16_SCALE: f64 = 32768.0;

#[derive(Debug, Clone, Copy)]
struct FmtChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

fn u16_at(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk, AudioError> {
    if body.len() < 16 {
        return Err(AudioError::Format(format!(
            "fmt chunk is {} bytes, expected at least 16",
            body.len()
        )));
    }
    let mut format = u16_at(body, 0);
    if format == FORMAT_EXTENSIBLE {
        if body.len() < 26 {
            return Err(AudioError::Format(
                "extensible fmt chunk is truncated".into(),
            ));
        }
        // First two bytes of the sub-format GUID carry the actual format tag.
        format = u16_at(body, 24);
    }
    Ok(FmtChunk {
        format,
        channels: u16_at(body, 2),
        sample_rate: u32_at(body, 4),
        bits_per_sample: u16_at(body, 14),
    })
}

/// Decodes an in-memory WAV file.
pub fn decode_wav(bytes: &[u8], clip_id: impl Into<String>) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::Format("missing RIFF/WAVE header".into()));
    }

    let mut fmt = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let start = pos + 8;
        // Tolerate a truncated final data chunk (common with streamed writers).
        let end = start.saturating_add(size).min(bytes.len());
        match id {
            b"fmt " => fmt = Some(parse_fmt(&bytes[start..end])?),
            b"data" => data = Some(&bytes[start..end]),
            _ => {}
        }
        pos = start.saturating_add(size);
        if size % 2 == 1 {
            pos += 1;
        }
    }

    let fmt = fmt.ok_or_else(|| AudioError::Format("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| AudioError::Format("no data chunk".into()))?;

    if fmt.channels == 0 || fmt.channels > 2 {
        return Err(AudioError::Unsupported(format!(
            "{} channels (only mono and stereo are read)",
            fmt.channels
        )));
    }
    if fmt.sample_rate == 0 {
        return Err(AudioError::Format("sample rate is zero".into()));
    }

    let channels = fmt.channels as usize;
    let interleaved: Vec<f64> = match (fmt.format, fmt.bits_per_sample) {
        (FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / PCM16_SCALE)
            .collect(),
        (FORMAT_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect(),
        (format, bits) => {
            return Err(AudioError::Unsupported(format!(
                "format tag {format} with {bits} bits per sample"
            )))
        }
    };
    if interleaved.iter().any(|s| !s.is_finite()) {
        return Err(AudioError::Format("non-finite sample in data chunk".into()));
    }

    let samples = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();

    Ok(AudioClip::new(samples, fmt.sample_rate, clip_id))
}

/// Encodes a clip as 16-bit PCM mono.
pub fn encode_wav(clip: &AudioClip) -> Result<Vec<u8>, AudioError> {
    if clip.is_empty() {
        return Err(AudioError::EmptyClip);
    }
    let data_len = clip.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        out.extend_from_slice(&quantize_pcm16(s).to_le_bytes());
    }
    Ok(out)
}

/// Rounds a unit-range sample to the nearest 16-bit code, clamping out-of-range values.
pub fn quantize_pcm16(sample: f64) -> i16 {
    (sample * PCM16_SCALE)
        .round()
        .clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

/// Reads a WAV file; the clip id is the file stem.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| AudioError::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode_wav(&bytes, id)
}

/// Writes `clip` as a 16-bit PCM mono WAV file.
pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<(), AudioError> {
    let path = path.as_ref();
    let bytes = encode_wav(clip)?;
    let mut file = fs::File::create(path).map_err(|e| AudioError::io(path, e))?;
    file.write_all(&bytes).map_err(|e| AudioError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(format: u16, channels: u16, bits: u16, data: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&((36 + data.len()) as u32).to_le_bytes());
        out.extend_from_slice(b"WAVEfmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&format.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&16000u32.to_le_bytes());
        let block = channels * bits / 8;
        out.extend_from_slice(&(16000 * block as u32).to_le_bytes());
        out.extend_from_slice(&block.to_le_bytes());
        out.extend_from_slice(&bits.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(data);
        out
    }

    #[test]
    fn pcm16_value_scales_by_32768() {
        let bytes = header(FORMAT_PCM, 1, 16, &16384i16.to_le_bytes());
        let clip = decode_wav(&bytes, "x").unwrap();
        assert_eq!(clip.samples, vec![0.5]);
    }

    #[test]
    fn stereo_float_is_averaged() {
        let mut data = Vec::new();
        data.extend_from_slice(&0.2f32.to_le_bytes());
        data.extend_from_slice(&0.6f32.to_le_bytes());
        let clip = decode_wav(&header(FORMAT_FLOAT, 2, 32, &data), "x").unwrap();
        assert!((clip.samples[0] - 0.4).abs() < 1e-7);
    }

    #[test]
    fn compressed_encoding_is_unsupported() {
        // 0x0055 is MPEG layer 3.
        let bytes = header(0x0055, 1, 16, &[0, 0]);
        assert!(matches!(
            decode_wav(&bytes, "x"),
            Err(AudioError::Unsupported(_))
        ));
    }

    #[test]
    fn garbage_is_a_format_error() {
        assert!(matches!(
            decode_wav(b"not a wav file at all", "x"),
            Err(AudioError::Format(_))
        ));
        let mut no_data = header(FORMAT_PCM, 1, 16, &[]);
        no_data.truncate(36);
        assert!(matches!(decode_wav(&no_data, "x"), Err(AudioError::Format(_))));
    }

    #[test]
    fn full_scale_clamps_to_max_code() {
        assert_eq!(quantize_pcm16(1.0), 32767);
        assert_eq!(quantize_pcm16(-1.0), -32768);
        assert_eq!(quantize_pcm16(3.0), 32767);
    }

    #[test]
    fn empty_clip_cannot_be_written() {
        let clip = AudioClip::new(vec![], 16000, "e");
        assert!(matches!(encode_wav(&clip), Err(AudioError::EmptyClip)));
    }

    #[test]
    fn data_chunk_is_two_bytes_per_sample() {
        let clip = AudioClip::new(vec![0.1; 160], 16000, "c");
        let bytes = encode_wav(&clip).unwrap();
        assert_eq!(&bytes[36..40], b"data");
        assert_eq!(u32_at(&bytes, 40), 320);
        assert_eq!(bytes.len(), 44 + 320);
    }
}
