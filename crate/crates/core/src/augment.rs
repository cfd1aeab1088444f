//! Data augmentation: pitch shift, time stretch, speed perturbation and
//! white-noise injection, with a reproducible random stream per
//! (seed, clip, copy).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audio::{normalize_peak, AudioClip};
use crate::dsp::{sinc_resample, HannStft};

const VOCODER_FFT: usize = 1024;
const VOCODER_HOP: usize = 256;
/// Largest magnitude an augmented copy may reach before it is re-normalised.
pub const HEADROOM_LIMIT: f64 = 1.05;

#[derive(Debug, Error, PartialEq)]
pub enum AugmentError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("clip has zero power; SNR is undefined")]
    ZeroPower,
    #[error("bad augment config entry `{0}`")]
    Config(String),
}

/// Closed interval `[lo, hi]` from which a parameter is drawn uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.hi > self.lo {
            rng.gen_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.lo, self.hi)
    }
}

impl FromStr for Range {
    type Err = AugmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AugmentError::Config(s.to_string());
        let (lo, hi) = s.split_once(',').ok_or_else(bad)?;
        let lo = lo.trim().parse().map_err(|_| bad())?;
        let hi = hi.trim().parse().map_err(|_| bad())?;
        Ok(Range::new(lo, hi))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub pitch_semitones: Range,
    pub stretch_rate: Range,
    pub snr_db: Range,
    pub speed_factor: Range,
    pub copies_per_clip: usize,
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            pitch_semitones: Range::new(-2.0, 2.0),
            stretch_rate: Range::new(0.9, 1.1),
            snr_db: Range::new(10.0, 20.0),
            speed_factor: Range::new(0.9, 1.1),
            copies_per_clip: 2,
            seed: 0,
        }
    }
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<(), AugmentError> {
        let ranges = [
            ("pitch_semitones", self.pitch_semitones),
            ("stretch_rate", self.stretch_rate),
            ("snr_db", self.snr_db),
            ("speed_factor", self.speed_factor),
        ];
        for (name, r) in ranges {
            if !(r.lo <= r.hi) {
                return Err(AugmentError::InvalidParameter(format!(
                    "{name} range {r} is not ordered"
                )));
            }
        }
        for (name, r) in [
            ("stretch_rate", self.stretch_rate),
            ("speed_factor", self.speed_factor),
        ] {
            if !(r.lo > 0.5 && r.hi < 2.0) {
                return Err(AugmentError::InvalidParameter(format!(
                    "{name} range {r} must lie inside (0.5, 2.0)"
                )));
            }
        }
        if self.pitch_semitones.lo < -12.0 || self.pitch_semitones.hi > 12.0 {
            return Err(AugmentError::InvalidParameter(
                "pitch range must lie inside [-12, 12]".into(),
            ));
        }
        Ok(())
    }

    /// Flat `key=value` lines.
    pub fn to_kv(&self) -> String {
        format!(
            "pitch_semitones={}\nstretch_rate={}\nsnr_db={}\nspeed_factor={}\ncopies_per_clip={}\nseed={}\n",
            self.pitch_semitones,
            self.stretch_rate,
            self.snr_db,
            self.speed_factor,
            self.copies_per_clip,
            self.seed
        )
    }

    /// Parses `key=value` lines; missing keys keep their defaults.
    pub fn from_kv(text: &str) -> Result<Self, AugmentError> {
        let mut spec = AugmentSpec::default();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| AugmentError::Config(line.to_string()))?;
            let value = value.trim();
            let bad = || AugmentError::Config(line.to_string());
            match key.trim() {
                "pitch_semitones" => spec.pitch_semitones = value.parse()?,
                "stretch_rate" => spec.stretch_rate = value.parse()?,
                "snr_db" => spec.snr_db = value.parse()?,
                "speed_factor" => spec.speed_factor = value.parse()?,
                "copies_per_clip" => spec.copies_per_clip = value.parse().map_err(|_| bad())?,
                "seed" => spec.seed = value.parse().map_err(|_| bad())?,
                _ => return Err(bad()),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Phase-vocoder time scaling. `rate > 1` shortens the signal.
fn vocoder_stretch(samples: &[f64], rate: f64) -> Vec<f64> {
    let out_len = (samples.len() as f64 / rate).round() as usize;
    let stft = HannStft::new(VOCODER_FFT, VOCODER_HOP);
    let frames = stft.analyze(samples);
    if frames.is_empty() {
        return vec![0.0; out_len];
    }
    let bins = stft.bins();
    let advance: Vec<f64> = (0..bins)
        .map(|k| 2.0 * PI * stft.hop() as f64 * k as f64 / stft.n_fft() as f64)
        .collect();

    let mut phase: Vec<f64> = frames[0].iter().map(|c| c.arg()).collect();
    let zero = vec![Default::default(); bins];
    let mut out = Vec::new();
    let mut step = 0.0;
    while step < frames.len() as f64 {
        let i = step.floor() as usize;
        let alpha = step - i as f64;
        let a = &frames[i];
        let b = frames.get(i + 1).unwrap_or(&zero);
        let frame = (0..bins)
            .map(|k| {
                let mag = (1.0 - alpha) * a[k].norm() + alpha * b[k].norm();
                rustfft::num_complex::Complex::from_polar(mag, phase[k])
            })
            .collect();
        out.push(frame);
        for k in 0..bins {
            let mut dphi = b[k].arg() - a[k].arg() - advance[k];
            dphi -= 2.0 * PI * (dphi / (2.0 * PI)).round();
            phase[k] += advance[k] + dphi;
        }
        step += rate;
    }
    stft.synthesize(&out, out_len)
}

/// Changes speaking rate without changing pitch.
pub fn time_stretch(clip: &AudioClip, rate: f64) -> Result<AudioClip, AugmentError> {
    if !(0.5..=2.0).contains(&rate) {
        return Err(AugmentError::InvalidParameter(format!(
            "stretch rate {rate} outside [0.5, 2.0]"
        )));
    }
    Ok(AudioClip::new(
        vocoder_stretch(&clip.samples, rate),
        clip.sample_rate,
        clip.clip_id.clone(),
    ))
}

/// Shifts pitch by `semitones` while keeping the length exactly.
pub fn pitch_shift(clip: &AudioClip, semitones: f64) -> Result<AudioClip, AugmentError> {
    if !(semitones.abs() <= 12.0) {
        return Err(AugmentError::InvalidParameter(format!(
            "pitch shift of {semitones} semitones exceeds one octave"
        )));
    }
    if semitones == 0.0 || clip.is_empty() {
        return Ok(clip.clone());
    }
    let ratio = 2f64.powf(semitones / 12.0);
    let stretched = vocoder_stretch(&clip.samples, 1.0 / ratio);
    let step = stretched.len() as f64 / clip.len() as f64;
    let samples = sinc_resample(&stretched, clip.len(), step);
    Ok(AudioClip::new(samples, clip.sample_rate, clip.clip_id.clone()))
}

/// Playback-rate change: duration shrinks and frequencies rise by `factor`.
pub fn speed_perturb(clip: &AudioClip, factor: f64) -> Result<AudioClip, AugmentError> {
    if !(0.5..=2.0).contains(&factor) {
        return Err(AugmentError::InvalidParameter(format!(
            "speed factor {factor} outside [0.5, 2.0]"
        )));
    }
    if factor == 1.0 {
        return Ok(clip.clone());
    }
    let out_len = (clip.len() as f64 / factor).round() as usize;
    Ok(AudioClip::new(
        sinc_resample(&clip.samples, out_len, factor),
        clip.sample_rate,
        clip.clip_id.clone(),
    ))
}

/// Adds white Gaussian noise scaled so the measured SNR equals `snr_db`.
pub fn add_noise(clip: &AudioClip, snr_db: f64, seed: u64) -> Result<AudioClip, AugmentError> {
    let signal_power = clip.power();
    if !(signal_power > 0.0) {
        return Err(AugmentError::ZeroPower);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..clip.len()).map(|_| rng.sample(StandardNormal)).collect();
    let noise_power = noise.iter().map(|n| n * n).sum::<f64>() / noise.len() as f64;
    let target = signal_power / 10f64.powf(snr_db / 10.0);
    let scale = (target / noise_power).sqrt();
    Ok(AudioClip::new(
        clip.samples
            .iter()
            .zip(&noise)
            .map(|(s, n)| s + scale * n)
            .collect(),
        clip.sample_rate,
        clip.clip_id.clone(),
    ))
}

/// Seed of the random stream for one augmented copy.
pub fn copy_seed(seed: u64, clip_id: &str, copy: usize) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((clip_id.len() as u64).to_le_bytes());
    hasher.update(clip_id.as_bytes());
    hasher.update((copy as u64).to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest has 32 bytes"))
}

/// Parameters drawn for one augmented copy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentDraw {
    pub speed_factor: f64,
    pub stretch_rate: f64,
    pub pitch_semitones: f64,
    pub snr_db: f64,
    pub noise_seed: u64,
}

impl AugmentDraw {
    pub fn sample(spec: &AugmentSpec, clip_id: &str, copy: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(copy_seed(spec.seed, clip_id, copy));
        Self {
            speed_factor: spec.speed_factor.sample(&mut rng),
            stretch_rate: spec.stretch_rate.sample(&mut rng),
            pitch_semitones: spec.pitch_semitones.sample(&mut rng),
            snr_db: spec.snr_db.sample(&mut rng),
            noise_seed: rng.gen(),
        }
    }
}

/// Id given to the `copy`-th augmented version of `clip_id`.
pub fn augmented_id(clip_id: &str, copy: usize) -> String {
    format!("{clip_id}__aug{copy}")
}

/// Source clip id of an augmented copy, if `clip_id` names one.
pub fn augmented_source(clip_id: &str) -> Option<&str> {
    let (source, copy) = clip_id.rsplit_once("__aug")?;
    copy.parse::<usize>().ok().map(|_| source)
}

/// Produces one augmented copy: speed, stretch, pitch, then noise. A copy
/// whose peak exceeds the headroom limit is re-normalised.
pub fn augment_copy(
    clip: &AudioClip,
    spec: &AugmentSpec,
    copy: usize,
) -> Result<AudioClip, AugmentError> {
    let draw = AugmentDraw::sample(spec, &clip.clip_id, copy);
    let mut out = speed_perturb(clip, draw.speed_factor)?;
    out = time_stretch(&out, draw.stretch_rate)?;
    out = pitch_shift(&out, draw.pitch_semitones)?;
    out = add_noise(&out, draw.snr_db, draw.noise_seed)?;
    if out.peak() > HEADROOM_LIMIT {
        out = normalize_peak(&out);
    }
    out.clip_id = augmented_id(&clip.clip_id, copy);
    Ok(out)
}

/// All `copies_per_clip` augmented versions of one clip.
pub fn augment_clip(clip: &AudioClip, spec: &AugmentSpec) -> Result<Vec<AudioClip>, AugmentError> {
    spec.validate()?;
    (0..spec.copies_per_clip)
        .map(|k| augment_copy(clip, spec, k))
        .collect()
}
