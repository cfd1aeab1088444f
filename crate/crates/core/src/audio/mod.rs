//! Audio clips and the canonicalisation steps applied before feature
//! extraction: resampling, silence trimming, peak normalisation,
//! segmentation, and optional spectral-gating noise reduction.

mod wav;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{self, HannStft};

pub use wav::{decode_wav, encode_wav, quantize_pcm16, read_wav, write_wav, PCM16_SCALE};

/// Canonical sample rate of every clip entering the feature extractors.
pub const CANONICAL_RATE: u32 = 16_000;
/// Peak amplitude after normalisation; leaves headroom for augmentation.
pub const NORMALIZED_PEAK: f64 = 0.95;
/// Default silence gate in dB below the loudest analysis window.
pub const DEFAULT_TRIM_DB: f64 = 30.0;
/// Default maximum segment duration in seconds.
pub const DEFAULT_MAX_SECONDS: f64 = 10.0;

const ANALYSIS_WINDOW_MS: f64 = 20.0;
const SEGMENT_SEARCH_S: f64 = 0.5;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed WAV: {0}")]
    Format(String),
    #[error("unsupported WAV encoding: {0}")]
    Unsupported(String),
    #[error("clip is empty")]
    EmptyClip,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl AudioError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        AudioError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// A mono sample buffer at a known rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub clip_id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32, clip_id: impl Into<String>) -> Self {
        Self {
            samples,
            sample_rate,
            clip_id: clip_id.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Mean squared amplitude.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }

    fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self::new(samples, self.sample_rate, self.clip_id.clone())
    }

    fn window_len(&self) -> usize {
        ((ANALYSIS_WINDOW_MS / 1000.0) * self.sample_rate as f64).round().max(1.0) as usize
    }
}

fn rms(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    (samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64).sqrt()
}

/// Band-limited resampling with a 64-tap Kaiser-windowed sinc kernel.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, AudioError> {
    if target_rate == 0 {
        return Err(AudioError::InvalidParameter("target rate must be > 0".into()));
    }
    if target_rate == clip.sample_rate {
        return Ok(clip.clone());
    }
    let ratio = target_rate as f64 / clip.sample_rate as f64;
    let out_len = (clip.len() as f64 * ratio).round() as usize;
    let samples = dsp::sinc_resample(&clip.samples, out_len, 1.0 / ratio);
    Ok(AudioClip::new(samples, target_rate, clip.clip_id.clone()))
}

/// Removes leading and trailing 20 ms windows (50% overlap) whose RMS lies
/// more than `threshold_db` below the loudest window. An entirely silent clip
/// yields an empty clip.
pub fn trim_silence(clip: &AudioClip, threshold_db: f64) -> Result<AudioClip, AudioError> {
    if clip.is_empty() {
        return Err(AudioError::EmptyClip);
    }
    let win = clip.window_len();
    let hop = (win / 2).max(1);
    let len = clip.len();

    // Only full windows are scored; a clip shorter than one window is one window.
    let starts: Vec<usize> = if len <= win {
        vec![0]
    } else {
        (0..=(len - win) / hop).map(|i| i * hop).collect()
    };
    let levels: Vec<f64> = starts
        .iter()
        .map(|&s| rms(&clip.samples[s..(s + win).min(len)]))
        .collect();

    let peak = levels.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(clip.with_samples(Vec::new()));
    }
    let gate = peak * 10f64.powf(-threshold_db / 20.0);
    let first = levels.iter().position(|&l| l >= gate).unwrap_or(0);
    let last = levels.iter().rposition(|&l| l >= gate).unwrap_or(0);

    let start = starts[first];
    let end = if last + 1 == starts.len() {
        len
    } else {
        starts[last] + win
    };
    Ok(clip.with_samples(clip.samples[start..end].to_vec()))
}

/// Scales the clip so that its peak magnitude is 0.95. Silent clips are returned unchanged.
pub fn normalize_peak(clip: &AudioClip) -> AudioClip {
    let peak = clip.peak();
    if peak == 0.0 {
        return clip.clone();
    }
    let scale = NORMALIZED_PEAK / peak;
    if scale == 1.0 {
        return clip.clone();
    }
    clip.with_samples(clip.samples.iter().map(|s| s * scale).collect())
}

/// Splits a long clip into pieces of at most `max_seconds`, cutting at the
/// quietest 20 ms window in the half second before each nominal boundary.
pub fn segment(clip: &AudioClip, max_seconds: f64) -> Result<Vec<AudioClip>, AudioError> {
    if !(max_seconds > 0.0) {
        return Err(AudioError::InvalidParameter(format!(
            "max_seconds must be > 0, got {max_seconds}"
        )));
    }
    if clip.is_empty() {
        return Ok(Vec::new());
    }
    let max_len = ((max_seconds * clip.sample_rate as f64).floor() as usize).max(1);
    if clip.len() <= max_len {
        return Ok(vec![clip.clone()]);
    }

    let win = clip.window_len();
    let hop = (win / 2).max(1);
    let search = (SEGMENT_SEARCH_S * clip.sample_rate as f64).round() as usize;

    let mut cuts = vec![0usize];
    let mut pos = 0usize;
    while clip.len() - pos > max_len {
        let nominal = pos + max_len;
        let lowest = nominal.saturating_sub(search).max(pos + 1);
        let mut best = nominal;
        let mut best_level = f64::INFINITY;
        // Scan from the boundary backwards so ties keep the longer segment.
        let mut cut = nominal;
        loop {
            let a = cut.saturating_sub(win / 2);
            let b = (cut + win - win / 2).min(clip.len());
            let level = rms(&clip.samples[a..b]);
            if level < best_level {
                best_level = level;
                best = cut;
            }
            if cut < lowest + hop {
                break;
            }
            cut -= hop;
        }
        cuts.push(best);
        pos = best;
    }
    cuts.push(clip.len());

    Ok(cuts
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            AudioClip::new(
                clip.samples[w[0]..w[1]].to_vec(),
                clip.sample_rate,
                format!("{}_seg{:03}", clip.clip_id, i),
            )
        })
        .collect())
}

/// Spectral gating: the noise profile is the mean magnitude spectrum of the
/// quietest 10% of frames; it is subtracted from every frame with a floor of
/// 5% of the original magnitude. Phase is kept.
pub fn reduce_noise(clip: &AudioClip) -> AudioClip {
    const FLOOR: f64 = 0.05;
    if clip.len() < 2 {
        return clip.clone();
    }
    let stft = HannStft::new(512, 128);
    let mut frames = stft.analyze(&clip.samples);
    if frames.is_empty() {
        return clip.clone();
    }

    let mut by_energy: Vec<(f64, usize)> = frames
        .iter()
        .enumerate()
        .map(|(i, f)| (f.iter().map(|c| c.norm_sqr()).sum::<f64>(), i))
        .collect();
    by_energy.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let quiet = (frames.len() / 10).max(1);

    let mut noise = vec![0.0; stft.bins()];
    for &(_, i) in &by_energy[..quiet] {
        for (n, c) in noise.iter_mut().zip(&frames[i]) {
            *n += c.norm() / quiet as f64;
        }
    }

    for frame in frames.iter_mut() {
        for (c, n) in frame.iter_mut().zip(&noise) {
            let mag = c.norm();
            if mag > 0.0 {
                let gated = (mag - n).max(FLOOR * mag);
                *c *= gated / mag;
            }
        }
    }
    clip.with_samples(stft.synthesize(&frames, clip.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(freq: f64, seconds: f64, rate: u32) -> AudioClip {
        let n = (seconds * rate as f64).round() as usize;
        AudioClip::new(
            (0..n)
                .map(|i| 0.5 * (2.0 * PI * freq * i as f64 / rate as f64).sin())
                .collect(),
            rate,
            "tone",
        )
    }

    #[test]
    fn resample_identity_and_length() {
        let c = tone(440.0, 1.0, 16000);
        assert_eq!(resample(&c, 16000).unwrap(), c);
        let c = tone(440.0, 1.0, 44100);
        assert_eq!(resample(&c, 16000).unwrap().len(), 16000);
        assert!(resample(&c, 0).is_err());
    }

    #[test]
    fn trim_all_zero_gives_empty() {
        let c = AudioClip::new(vec![0.0; 8000], 16000, "z");
        assert!(trim_silence(&c, 30.0).unwrap().is_empty());
    }

    #[test]
    fn trim_leaves_loud_clip_alone() {
        let c = tone(300.0, 0.77, 16000);
        assert_eq!(trim_silence(&c, 30.0).unwrap(), c);
    }

    #[test]
    fn trim_finds_tone_onset() {
        let mut samples = vec![0.0; 8000];
        samples.extend(tone(440.0, 1.0, 16000).samples);
        samples.extend(vec![0.0; 4000]);
        let c = AudioClip::new(samples, 16000, "t");
        let t = trim_silence(&c, 30.0).unwrap();
        // Locate the trimmed clip inside the original to recover the cut point.
        let start = (0..c.len())
            .find(|&s| c.samples[s..s + t.len()] == t.samples[..])
            .unwrap();
        assert!((start as i64 - 8000).abs() <= 400, "start={start}");
        assert!(start + t.len() >= 24000);
    }

    #[test]
    fn trim_rejects_empty() {
        let c = AudioClip::new(vec![], 16000, "e");
        assert!(matches!(trim_silence(&c, 30.0), Err(AudioError::EmptyClip)));
    }

    #[test]
    fn normalize_cases() {
        let c = AudioClip::new(vec![0.95, -0.5, 0.1], 16000, "n");
        assert_eq!(normalize_peak(&c), c);
        let c = AudioClip::new(vec![0.475, -0.2], 16000, "n");
        assert_eq!(normalize_peak(&c).samples, vec![0.95, -0.4]);
        let z = AudioClip::new(vec![0.0; 10], 16000, "n");
        assert_eq!(normalize_peak(&z), z);
    }

    #[test]
    fn segment_short_and_long() {
        let c = tone(200.0, 4.0, 16000);
        let s = segment(&c, 10.0).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].samples, c.samples);

        let c = tone(200.0, 25.0, 16000);
        let s = segment(&c, 10.0).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|p| p.len() <= 160_000));
        let joined: Vec<f64> = s.iter().flat_map(|p| p.samples.iter().copied()).collect();
        assert_eq!(joined, c.samples);

        let empty = AudioClip::new(vec![], 16000, "e");
        assert!(segment(&empty, 10.0).unwrap().is_empty());
        assert!(segment(&c, 0.0).is_err());
    }

    #[test]
    fn segment_prefers_quiet_cut() {
        // Loud noise-like signal with a silent gap at 9.7 s.
        let mut samples: Vec<f64> = (0..16000 * 15)
            .map(|i| (((i * 7919) % 1000) as f64 / 1000.0) - 0.5)
            .collect();
        let gap = (9.7 * 16000.0) as usize;
        for s in &mut samples[gap - 400..gap + 400] {
            *s = 0.0;
        }
        let c = AudioClip::new(samples, 16000, "g");
        let s = segment(&c, 10.0).unwrap();
        assert_eq!(s.len(), 2);
        let cut = s[0].len();
        assert!((cut as i64 - gap as i64).abs() <= 240, "cut={cut}");
    }

    #[test]
    fn denoise_attenuates_stationary_noise() {
        let mut c = tone(440.0, 1.0, 16000);
        for (i, s) in c.samples.iter_mut().enumerate() {
            if i < 4000 {
                *s = 0.0;
            }
            *s += 0.01 * ((((i * 7919) % 1013) as f64 / 1013.0) - 0.5);
        }
        let quiet_before = rms(&c.samples[500..3500]);
        let d = reduce_noise(&c);
        assert_eq!(d.len(), c.len());
        let quiet_after = rms(&d.samples[500..3500]);
        assert!(quiet_after < 0.5 * quiet_before, "{quiet_after} vs {quiet_before}");
    }
}
