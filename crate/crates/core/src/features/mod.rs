//! Feature extraction: MFCC and multilevel db4 wavelet decompositions, and
//! the binary feature-cache format.

mod cache;
mod mfcc;
mod wavelet;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{decode_features, encode_features, read_features, write_features, CACHE_VERSION};
pub use mfcc::{mel_filterbank, mel_to_hz, hz_to_mel, mfcc, stft, MelFilterbank, MfccConfig, Spectrogram};
pub use wavelet::{
    dwt, inverse_dwt, wavelet_features, wavelet_features_with_level, WaveletDecomposition, DB4_HIGH_PASS, DB4_LOW_PASS,
    WAVELET_FRAME, WAVELET_LEVEL,
};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("clip has {len} samples, shorter than one {needed}-sample window")]
    TooShort { len: usize, needed: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("mel filter {0} covers no FFT bin; reduce n_mels or raise n_fft")]
    EmptyFilter(usize),
    #[error("signal length {len} is not divisible by 2^{level}")]
    Length { len: usize, level: usize },
    #[error("inconsistent subband lengths: {0}")]
    Subbands(String),
    #[error("malformed feature cache: {0}")]
    Cache(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Mfcc,
    Wavelet,
}

impl FeatureKind {
    pub fn code(self) -> u8 {
        match self {
            FeatureKind::Mfcc => 1,
            FeatureKind::Wavelet => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(FeatureKind::Mfcc),
            2 => Some(FeatureKind::Wavelet),
            _ => None,
        }
    }

    /// Label used in comparison tables.
    pub fn display_name(self) -> &'static str {
        match self {
            FeatureKind::Mfcc => "MFCC",
            FeatureKind::Wavelet => "Wavelet",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Mfcc => "mfcc",
            FeatureKind::Wavelet => "wavelet",
        })
    }
}

impl FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mfcc" => Ok(FeatureKind::Mfcc),
            "wavelet" | "dwt" => Ok(FeatureKind::Wavelet),
            other => Err(format!("unknown feature kind `{other}`")),
        }
    }
}

/// Row-major `feature_dim × n_frames` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub kind: FeatureKind,
    pub clip_id: String,
    pub feature_dim: usize,
    pub n_frames: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(
        kind: FeatureKind,
        clip_id: impl Into<String>,
        feature_dim: usize,
        n_frames: usize,
        data: Vec<f64>,
    ) -> Self {
        assert_eq!(data.len(), feature_dim * n_frames, "feature matrix shape mismatch");
        Self {
            kind,
            clip_id: clip_id.into(),
            feature_dim,
            n_frames,
            data,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.feature_dim, self.n_frames)
    }

    pub fn get(&self, dim: usize, frame: usize) -> f64 {
        self.data[dim * self.n_frames + frame]
    }

    pub fn row(&self, dim: usize) -> &[f64] {
        &self.data[dim * self.n_frames..(dim + 1) * self.n_frames]
    }

    /// Values of every dimension at one frame.
    pub fn column(&self, frame: usize) -> Vec<f64> {
        (0..self.feature_dim).map(|d| self.get(d, frame)).collect()
    }
}
