//! MFCC pipeline against a direct-DFT reference written from the textbook
//! definitions.

use std::f64::consts::PI;

use dialect_lab::audio::AudioClip;
use dialect_lab::features::{mel_filterbank, mfcc, stft, MfccConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SR: u32 = 16_000;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * b.abs() + 1e-9
}

struct Reference {
    win: usize,
    hop: usize,
    n_fft: usize,
    window: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
    filters: Vec<Vec<f64>>,
    n_coeffs: usize,
}

impl Reference {
    fn new(cfg: &MfccConfig) -> Self {
        let win = (cfg.win_ms / 1000.0 * SR as f64).round() as usize;
        let hop = (cfg.hop_ms / 1000.0 * SR as f64).round() as usize;
        let n_fft = cfg.n_fft;
        let bins = n_fft / 2 + 1;
        let window = (0..win)
            .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (win as f64 - 1.0)).cos())
            .collect();
        let mut cos = vec![0.0; bins * win];
        let mut sin = vec![0.0; bins * win];
        for k in 0..bins {
            for n in 0..win {
                // Reduce k·n mod N first so the angle stays small and exact.
                let phase = 2.0 * PI * ((k * n) % n_fft) as f64 / n_fft as f64;
                cos[k * win + n] = phase.cos();
                sin[k * win + n] = phase.sin();
            }
        }

        let mel = |f: f64| 1127.0 * (1.0 + f / 700.0).ln();
        let inv = |m: f64| 700.0 * ((m / 1127.0).exp() - 1.0);
        let (lo, hi) = (mel(cfg.fmin), mel(cfg.fmax));
        let m = cfg.n_mels;
        let pts: Vec<f64> = (0..m + 2)
            .map(|i| inv(lo + i as f64 * (hi - lo) / (m + 1) as f64))
            .collect();
        let filters = (1..=m)
            .map(|j| {
                (0..bins)
                    .map(|k| {
                        let f = k as f64 * SR as f64 / n_fft as f64;
                        if f >= pts[j - 1] && f <= pts[j] {
                            (f - pts[j - 1]) / (pts[j] - pts[j - 1])
                        } else if f > pts[j] && f <= pts[j + 1] {
                            (pts[j + 1] - f) / (pts[j + 1] - pts[j])
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            win,
            hop,
            n_fft,
            window,
            cos,
            sin,
            filters,
            n_coeffs: cfg.n_coeffs,
        }
    }

    fn power(&self, frame: &[f64]) -> Vec<f64> {
        let bins = self.n_fft / 2 + 1;
        (0..bins)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for n in 0..self.win {
                    let x = frame[n] * self.window[n];
                    re += x * self.cos[k * self.win + n];
                    im -= x * self.sin[k * self.win + n];
                }
                re * re + im * im
            })
            .collect()
    }

    /// Coefficients as `[frame][coeff]`.
    fn mfcc(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let frames = 1 + (x.len() - self.win) / self.hop;
        let m = self.filters.len();
        (0..frames)
            .map(|t| {
                let p = self.power(&x[t * self.hop..t * self.hop + self.win]);
                let logs: Vec<f64> = self
                    .filters
                    .iter()
                    .map(|h| h.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>().max(1e-10).ln())
                    .collect();
                (0..self.n_coeffs)
                    .map(|n| {
                        (0..m)
                            .map(|j| logs[j] * (PI * n as f64 * (j as f64 + 0.5) / m as f64).cos())
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }
}

#[test]
fn matches_direct_dft_reference_on_random_clips() {
    let cfg = MfccConfig::default();
    let oracle = Reference::new(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for c in 0..20 {
        let x: Vec<f64> = (0..SR as usize / 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = mfcc(&AudioClip::new(x.clone(), SR, format!("r{c}")), &cfg).unwrap();
        let want = oracle.mfcc(&x);
        assert_eq!(got.shape(), (13, want.len()));
        for (t, row) in want.iter().enumerate() {
            for (n, &w) in row.iter().enumerate() {
                let g = got.get(n, t);
                assert!(close(g, w), "clip {c} frame {t} coeff {n}: {g} vs {w}");
            }
        }
    }
}

#[test]
fn one_second_at_16k_gives_98_frames_of_13() {
    let clip = AudioClip::new(vec![0.1; 16_000], SR, "dc");
    assert_eq!(mfcc(&clip, &MfccConfig::default()).unwrap().shape(), (13, 98));
}

#[test]
fn mel_triangles_sum_to_one_between_outer_centres() {
    let bank = mel_filterbank(&MfccConfig::default(), SR).unwrap();
    let first = bank.edges_hz[0].1;
    let last = bank.edges_hz.last().unwrap().1;
    for k in 0..257 {
        let f = k as f64 * bank.bin_hz;
        if f < first || f > last {
            continue;
        }
        let sum: f64 = bank.weights.iter().map(|row| row[k]).sum();
        assert!((sum - 1.0).abs() < 1e-12, "bin {k}: {sum}");
    }
}

#[test]
fn single_bin_spectrum_picks_out_filter_weights() {
    let bank = mel_filterbank(&MfccConfig::default(), SR).unwrap();
    for k0 in [3, 40, 128, 250] {
        let mut p = vec![0.0; 257];
        p[k0] = 2.5;
        let s = bank.apply(&p);
        for (m, row) in bank.weights.iter().enumerate() {
            assert_eq!(s[m], 2.5 * row[k0]);
        }
    }
}

fn clip_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 400..1600)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn parseval_holds_per_frame(x in clip_strategy()) {
        let cfg = MfccConfig::default();
        let spec = stft(&AudioClip::new(x.clone(), SR, "p"), &cfg).unwrap();
        let oracle = Reference::new(&cfg);
        for (t, frame) in spec.frames.iter().enumerate() {
            let time: f64 = x[t * 160..t * 160 + 400]
                .iter()
                .zip(&oracle.window)
                .map(|(s, w)| (s * w).powi(2))
                .sum();
            let n = cfg.n_fft;
            let mut freq = frame[0].norm_sqr() + frame[n / 2].norm_sqr();
            freq += 2.0 * frame[1..n / 2].iter().map(|c| c.norm_sqr()).sum::<f64>();
            freq /= n as f64;
            prop_assert!((time - freq).abs() <= 1e-9 * time.max(1.0));
        }
    }

    #[test]
    fn stft_is_linear(
        x in prop::collection::vec(-1.0f64..1.0, 800),
        y in prop::collection::vec(-1.0f64..1.0, 800),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let cfg = MfccConfig::default();
        let z: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let sx = stft(&AudioClip::new(x, SR, "x"), &cfg).unwrap();
        let sy = stft(&AudioClip::new(y, SR, "y"), &cfg).unwrap();
        let sz = stft(&AudioClip::new(z, SR, "z"), &cfg).unwrap();
        for ((fx, fy), fz) in sx.frames.iter().zip(&sy.frames).zip(&sz.frames) {
            for ((cx, cy), cz) in fx.iter().zip(fy).zip(fz) {
                let want = cx * a + cy * b;
                prop_assert!((want - cz).norm() <= 1e-9 * (1.0 + want.norm()));
            }
        }
    }

    #[test]
    fn frame_count_follows_window_and_hop(len in 400usize..4000) {
        let clip = AudioClip::new(vec![0.2; len], SR, "n");
        let m = mfcc(&clip, &MfccConfig::default()).unwrap();
        prop_assert_eq!(m.n_frames, 1 + (len - 400) / 160);
    }
}
