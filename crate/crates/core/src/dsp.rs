//! Shared signal-processing kernels: band-limited interpolation and a
//! Hann-windowed STFT/ISTFT pair used by the phase vocoder and the
//! spectral-gating denoiser.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Total taps of the windowed-sinc interpolation kernel.
pub const SINC_TAPS: usize = 64;
const KAISER_BETA: f64 = 8.0;

/// Zeroth-order modified Bessel function of the first kind (power series).
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Windowed-sinc interpolation of `input` onto `out_len` points spaced `step`
/// input samples apart, starting at input position 0.
///
/// When `step > 1` the kernel cutoff drops to `1/step` of the input Nyquist
/// so the output is band-limited to its own Nyquist frequency.
pub(crate) fn sinc_resample(input: &[f64], out_len: usize, step: f64) -> Vec<f64> {
    let cutoff = (1.0 / step).min(1.0);
    let half = (SINC_TAPS / 2) as f64;
    let i0_beta = bessel_i0(KAISER_BETA);
    let n = input.len() as isize;

    (0..out_len)
        .map(|i| {
            let t = i as f64 * step;
            let first = (t - half).floor() as isize + 1;
            let last = (t + half).floor() as isize;
            let mut acc = 0.0;
            for k in first.max(0)..=last.min(n - 1) {
                let d = t - k as f64;
                let r = d / half;
                if r.abs() >= 1.0 {
                    continue;
                }
                let window = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta;
                acc += input[k as usize] * cutoff * sinc(cutoff * d) * window;
            }
            acc
        })
        .collect()
}

/// Periodic Hann window.
pub(crate) fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Centered STFT with a periodic Hann window and zero padding of `n_fft/2`
/// on both sides.
pub(crate) struct HannStft {
    n_fft: usize,
    hop: usize,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl HannStft {
    pub(crate) fn new(n_fft: usize, hop: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n_fft,
            hop,
            window: hann(n_fft),
            forward: planner.plan_fft_forward(n_fft),
            inverse: planner.plan_fft_inverse(n_fft),
        }
    }

    pub(crate) fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub(crate) fn hop(&self) -> usize {
        self.hop
    }

    pub(crate) fn n_fft(&self) -> usize {
        self.n_fft
    }

    /// Returns frames of `n_fft/2 + 1` complex bins.
    pub(crate) fn analyze(&self, signal: &[f64]) -> Vec<Vec<Complex<f64>>> {
        let pad = self.n_fft / 2;
        let mut padded = vec![0.0; signal.len() + 2 * pad];
        padded[pad..pad + signal.len()].copy_from_slice(signal);
        let n_frames = if padded.len() >= self.n_fft {
            1 + (padded.len() - self.n_fft) / self.hop
        } else {
            0
        };

        let mut buf = vec![Complex::new(0.0, 0.0); self.n_fft];
        (0..n_frames)
            .map(|f| {
                let start = f * self.hop;
                for (i, b) in buf.iter_mut().enumerate() {
                    *b = Complex::new(padded[start + i] * self.window[i], 0.0);
                }
                self.forward.process(&mut buf);
                buf[..self.bins()].to_vec()
            })
            .collect()
    }

    /// Weighted overlap-add inverse of [`HannStft::analyze`], trimmed to `out_len`.
    pub(crate) fn synthesize(&self, frames: &[Vec<Complex<f64>>], out_len: usize) -> Vec<f64> {
        let pad = self.n_fft / 2;
        let total = (frames.len().saturating_sub(1)) * self.hop + self.n_fft;
        let mut acc = vec![0.0; total.max(out_len + pad)];
        let mut norm = vec![0.0; acc.len()];
        let mut buf = vec![Complex::new(0.0, 0.0); self.n_fft];

        for (f, frame) in frames.iter().enumerate() {
            buf[..self.bins()].copy_from_slice(frame);
            for k in 1..self.n_fft - self.bins() + 1 {
                buf[self.n_fft - k] = frame[k].conj();
            }
            self.inverse.process(&mut buf);
            let start = f * self.hop;
            for i in 0..self.n_fft {
                let w = self.window[i];
                acc[start + i] += buf[i].re / self.n_fft as f64 * w;
                norm[start + i] += w * w;
            }
        }

        (0..out_len)
            .map(|i| {
                let j = i + pad;
                if norm[j] > 1e-10 {
                    acc[j] / norm[j]
                } else {
                    0.0
                }
            })
            .collect()
    }
}
