use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureKind, FeatureMatrix};
use crate::audio::AudioClip;

/// Daubechies wavelet with four vanishing moments (8 taps), orthonormal
/// scaling filter. Computed by spectral factorisation to full precision.
pub const DB4_LOW_PASS: [f64; 8] = [
    0.230_377_813_308_896_5,
    0.714_846_570_552_915_6,
    0.630_880_767_929_858_9,
    -0.027_983_769_416_859_854,
    -0.187_034_811_719_093_08,
    0.030_841_381_835_560_764,
    0.032_883_011_666_885_2,
    -0.010_597_401_785_069_032,
];

/// Quadrature-mirror partner of [`DB4_LOW_PASS`]: `g[k] = (-1)^k h[7-k]`.
pub const DB4_HIGH_PASS: [f64; 8] = [
    -0.010_597_401_785_069_032,
    -0.032_883_011_666_885_2,
    0.030_841_381_835_560_764,
    0.187_034_811_719_093_08,
    -0.027_983_769_416_859_854,
    -0.630_880_767_929_858_9,
    0.714_846_570_552_915_6,
    -0.230_377_813_308_896_5,
];

pub const WAVELET_LEVEL: usize = 3;
/// Samples per wavelet frame.
pub const WAVELET_FRAME: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletDecomposition {
    /// Approximation coefficients at the deepest level.
    pub approx: Vec<f64>,
    /// Detail coefficients, finest first: `[d1, d2, ..., d_level]`.
    pub details: Vec<Vec<f64>>,
    pub level: usize,
}

fn analyze_once(signal: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let len = signal.len();
    let half = len / 2;
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for n in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for k in 0..8 {
            let x = signal[(2 * n + k) % len];
            a += DB4_LOW_PASS[k] * x;
            d += DB4_HIGH_PASS[k] * x;
        }
        approx[n] = a;
        detail[n] = d;
    }
    (approx, detail)
}

fn synthesize_once(approx: &[f64], detail: &[f64]) -> Vec<f64> {
    let len = approx.len() * 2;
    let mut out = vec![0.0; len];
    for n in 0..approx.len() {
        for k in 0..8 {
            out[(2 * n + k) % len] += DB4_LOW_PASS[k] * approx[n] + DB4_HIGH_PASS[k] * detail[n];
        }
    }
    out
}

/// Mallat decomposition with periodic extension. The signal length must be
/// divisible by `2^level`.
pub fn dwt(signal: &[f64], level: usize) -> Result<WaveletDecomposition, FeatureError> {
    if level == 0 {
        return Err(FeatureError::Config("decomposition level must be >= 1".into()));
    }
    let block = 1usize << level;
    if signal.is_empty() || !signal.len().is_multiple_of(block) {
        return Err(FeatureError::Length {
            len: signal.len(),
            level,
        });
    }
    let mut approx = signal.to_vec();
    let mut details = Vec::with_capacity(level);
    for _ in 0..level {
        let (a, d) = analyze_once(&approx);
        details.push(d);
        approx = a;
    }
    Ok(WaveletDecomposition {
        approx,
        details,
        level,
    })
}

pub fn inverse_dwt(dec: &WaveletDecomposition) -> Result<Vec<f64>, FeatureError> {
    if dec.details.len() != dec.level || dec.level == 0 {
        return Err(FeatureError::Subbands(format!(
            "{} detail bands for level {}",
            dec.details.len(),
            dec.level
        )));
    }
    let mut approx = dec.approx.clone();
    for (j, detail) in dec.details.iter().enumerate().rev() {
        if detail.len() != approx.len() {
            return Err(FeatureError::Subbands(format!(
                "d{} has {} coefficients, approximation has {}",
                j + 1,
                detail.len(),
                approx.len()
            )));
        }
        approx = synthesize_once(&approx, detail);
    }
    Ok(approx)
}

/// Non-overlapping 512-sample frames (last one zero-padded), each decomposed
/// to level 3 and flattened as `[a3 | d3 | d2 | d1]`.
pub fn wavelet_features(clip: &AudioClip) -> Result<FeatureMatrix, FeatureError> {
    wavelet_features_with_level(clip, WAVELET_LEVEL)
}

/// As [`wavelet_features`] with another decomposition depth; the column is
/// `[a_L | d_L | ... | d1]` and always holds 512 coefficients.
pub fn wavelet_features_with_level(clip: &AudioClip, level: usize) -> Result<FeatureMatrix, FeatureError> {
    if clip.is_empty() {
        return Err(FeatureError::TooShort {
            len: 0,
            needed: WAVELET_FRAME,
        });
    }
    let n_frames = clip.len().div_ceil(WAVELET_FRAME);
    let mut data = vec![0.0; WAVELET_FRAME * n_frames];
    let mut frame = vec![0.0; WAVELET_FRAME];
    for f in 0..n_frames {
        frame.fill(0.0);
        let chunk = &clip.samples[f * WAVELET_FRAME..((f + 1) * WAVELET_FRAME).min(clip.len())];
        frame[..chunk.len()].copy_from_slice(chunk);
        let dec = dwt(&frame, level)?;
        let column = dec
            .approx
            .iter()
            .chain(dec.details.iter().rev().flatten());
        for (d, v) in column.enumerate() {
            data[d * n_frames + f] = *v;
        }
    }
    Ok(FeatureMatrix::new(
        FeatureKind::Wavelet,
        clip.clip_id.clone(),
        WAVELET_FRAME,
        n_frames,
        data,
    ))
}
