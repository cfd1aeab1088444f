//! Toolkit for recognising Arabic dialect groups (Egyptian, Levantine, Gulf)
//! from short speech clips.
//!
//! The pipeline runs audio canonicalisation ([`audio`]), optional
//! augmentation ([`augment`]), MFCC or db4-wavelet feature extraction
//! ([`features`]), CNN or RNN classification ([`models`] on top of [`nn`]),
//! training with early stopping ([`trainer`]) and evaluation ([`eval`]).

pub mod audio;
pub mod augment;
mod dsp;
pub mod features;
pub mod nn;
pub mod eval;
pub mod models;
pub mod trainer;
pub mod corpus;
