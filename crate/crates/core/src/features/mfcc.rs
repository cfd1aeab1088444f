use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureKind, FeatureMatrix};
use crate::audio::AudioClip;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    pub n_coeffs: usize,
    pub win_ms: f64,
    pub hop_ms: f64,
    pub n_fft: usize,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            n_coeffs: 13,
            win_ms: 25.0,
            hop_ms: 10.0,
            n_fft: 512,
            n_mels: 26,
            fmin: 0.0,
            fmax: 8000.0,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn win_samples(&self, sample_rate: u32) -> usize {
        (self.win_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        (self.hop_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn validate(&self, sample_rate: u32) -> Result<(), FeatureError> {
        let fail = |m: String| Err(FeatureError::Config(m));
        if self.n_coeffs == 0 || self.n_coeffs > self.n_mels {
            return fail(format!(
                "n_coeffs ({}) must be in 1..=n_mels ({})",
                self.n_coeffs, self.n_mels
            ));
        }
        let win = self.win_samples(sample_rate);
        if win < 2 || win > self.n_fft {
            return fail(format!("window of {win} samples does not fit n_fft {}", self.n_fft));
        }
        if self.hop_samples(sample_rate) == 0 {
            return fail("hop must be at least one sample".into());
        }
        if !(self.fmin >= 0.0 && self.fmin < self.fmax) || self.fmax > sample_rate as f64 / 2.0 {
            return fail(format!(
                "frequency range [{}, {}] invalid for {} Hz audio",
                self.fmin, self.fmax, sample_rate
            ));
        }
        if !(self.log_floor > 0.0) {
            return fail("log_floor must be positive".into());
        }
        Ok(())
    }
}

/// One-sided complex spectrogram, stored frame by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub n_fft: usize,
    pub frames: Vec<Vec<Complex<f64>>>,
}

impl Spectrogram {
    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }
}

fn hamming(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Hamming-windowed STFT with no padding: frames that would run past the end
/// of the signal are dropped.
pub fn stft(clip: &AudioClip, cfg: &MfccConfig) -> Result<Spectrogram, FeatureError> {
    cfg.validate(clip.sample_rate)?;
    let win = cfg.win_samples(clip.sample_rate);
    let hop = cfg.hop_samples(clip.sample_rate);
    if clip.len() < win {
        return Err(FeatureError::TooShort {
            len: clip.len(),
            needed: win,
        });
    }
    let n_frames = 1 + (clip.len() - win) / hop;
    let window = hamming(win);
    let fft = FftPlanner::new().plan_fft_forward(cfg.n_fft);
    let bins = cfg.n_fft / 2 + 1;

    let mut buf = vec![Complex::new(0.0, 0.0); cfg.n_fft];
    let frames = (0..n_frames)
        .map(|f| {
            let frame = &clip.samples[f * hop..f * hop + win];
            buf.fill(Complex::new(0.0, 0.0));
            for ((b, x), w) in buf.iter_mut().zip(frame).zip(&window) {
                b.re = x * w;
            }
            fft.process(&mut buf);
            buf[..bins].to_vec()
        })
        .collect();

    Ok(Spectrogram {
        n_fft: cfg.n_fft,
        frames,
    })
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with centres uniformly spaced on the mel scale.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `n_mels` rows of `n_fft/2 + 1` weights.
    pub weights: Vec<Vec<f64>>,
    /// `(lower edge, centre, upper edge)` of each filter in Hz.
    pub edges_hz: Vec<(f64, f64, f64)>,
    pub bin_hz: f64,
}

impl MelFilterbank {
    pub fn n_mels(&self) -> usize {
        self.weights.len()
    }

    /// Filter energies `S_m = Σ_k P(k) H_m(k)` of one power spectrum.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

pub fn mel_filterbank(cfg: &MfccConfig, sample_rate: u32) -> Result<MelFilterbank, FeatureError> {
    cfg.validate(sample_rate)?;
    let bins = cfg.n_fft / 2 + 1;
    let bin_hz = sample_rate as f64 / cfg.n_fft as f64;
    let (lo, hi) = (hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax));
    let points: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();

    let mut weights = Vec::with_capacity(cfg.n_mels);
    let mut edges_hz = Vec::with_capacity(cfg.n_mels);
    for m in 0..cfg.n_mels {
        let (left, centre, right) = (points[m], points[m + 1], points[m + 2]);
        let row: Vec<f64> = (0..bins)
            .map(|k| {
                let f = k as f64 * bin_hz;
                let rising = (f - left) / (centre - left);
                let falling = (right - f) / (right - centre);
                rising.min(falling).max(0.0)
            })
            .collect();
        if row.iter().all(|&w| w == 0.0) {
            return Err(FeatureError::EmptyFilter(m));
        }
        weights.push(row);
        edges_hz.push((left, centre, right));
    }
    Ok(MelFilterbank {
        weights,
        edges_hz,
        bin_hz,
    })
}

/// `MFCC_n = Σ_{m=1}^{M} log(S_m) cos[nπ/M (m − 0.5)]` for `n = 0..n_coeffs`,
/// with no orthonormal scaling.
pub fn mfcc(clip: &AudioClip, cfg: &MfccConfig) -> Result<FeatureMatrix, FeatureError> {
    let spec = stft(clip, cfg)?;
    let bank = mel_filterbank(cfg, clip.sample_rate)?;
    let m = cfg.n_mels as f64;
    let dct: Vec<Vec<f64>> = (0..cfg.n_coeffs)
        .map(|n| {
            (1..=cfg.n_mels)
                .map(|j| (n as f64 * PI / m * (j as f64 - 0.5)).cos())
                .collect()
        })
        .collect();

    let n_frames = spec.n_frames();
    let mut data = vec![0.0; cfg.n_coeffs * n_frames];
    let mut power = vec![0.0; spec.n_bins()];
    for (f, frame) in spec.frames.iter().enumerate() {
        for (p, x) in power.iter_mut().zip(frame) {
            *p = x.norm_sqr();
        }
        let log_energy: Vec<f64> = bank
            .apply(&power)
            .into_iter()
            .map(|s| s.max(cfg.log_floor).ln())
            .collect();
        for (n, basis) in dct.iter().enumerate() {
            data[n * n_frames + f] = basis.iter().zip(&log_energy).map(|(c, l)| c * l).sum();
        }
    }
    Ok(FeatureMatrix::new(
        FeatureKind::Mfcc,
        clip.clip_id.clone(),
        cfg.n_coeffs,
        n_frames,
        data,
    ))
}
