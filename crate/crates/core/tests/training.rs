use std::collections::BTreeSet;

use dialect_lab::features::{FeatureKind, FeatureMatrix};
use dialect_lab::models::{Architecture, CheckpointMeta, Model, ModelConfig, Network, Standardizer};
use dialect_lab::nn::{CellKind, Tensor};
use dialect_lab::trainer::{
    run_experiment, run_seed, stratified_split, train, Dataset, Sample, TrainConfig, TrainHistory,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn matrix(id: String, dim: usize, frames: usize, offset: f64, rng: &mut ChaCha8Rng) -> FeatureMatrix {
    let data = (0..dim * frames)
        .map(|i| offset * ((i / frames) as f64 + 1.0) + rng.sample::<f64, _>(StandardNormal))
        .collect();
    FeatureMatrix::new(FeatureKind::Mfcc, id, dim, frames, data)
}

/// `per_class` clips per class whose features are shifted by the label.
fn dataset(per_class: usize, dim: usize, frames: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..3 * per_class)
        .map(|i| {
            let label = i % 3;
            Sample {
                features: matrix(format!("clip{i:04}"), dim, frames, label as f64 * 0.5, &mut rng),
                label,
            }
        })
        .collect();
    Dataset {
        kind: FeatureKind::Mfcc,
        class_names: vec!["a".into(), "b".into(), "c".into()],
        samples,
    }
}

fn small_rnn() -> ModelConfig {
    let mut cfg = ModelConfig::new(FeatureKind::Mfcc, Architecture::Rnn);
    cfg.cell_kind = CellKind::Simple;
    cfg.feature_dim = 4;
    cfg.input_frames = 6;
    cfg.hidden_units = 8;
    cfg
}

fn quick(epochs: usize, patience: usize) -> TrainConfig {
    TrainConfig {
        epochs_max: epochs,
        batch_size: 8,
        patience,
        ..TrainConfig::default()
    }
}

fn check_history(h: &TrainHistory, cfg: &TrainConfig) {
    assert!(h.best_epoch >= 1 && h.best_epoch <= h.stopped_epoch);
    assert_eq!(h.epochs.len(), h.stopped_epoch);
    let min = h.epochs.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
    assert!(h.epochs[h.best_epoch - 1].val_loss - min <= 1e-5);
    assert!(h.stopped_epoch >= (cfg.patience + 1).min(cfg.epochs_max));
    if h.stopped_epoch < cfg.epochs_max {
        assert_eq!(h.stopped_epoch - h.best_epoch, cfg.patience);
    }
    for e in &h.epochs {
        assert!((0.0..=1.0).contains(&e.train_accuracy) && (0.0..=1.0).contains(&e.val_accuracy));
        assert!(e.train_loss.is_finite() && e.val_loss >= 0.0);
    }
}

#[test]
fn cnn_memorizes_one_batch_of_random_labels() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let samples: Vec<Sample> = (0..32)
        .map(|i| Sample {
            features: matrix(format!("m{i}"), 13, 40, 0.0, &mut rng),
            label: rng.gen_range(0..3),
        })
        .collect();
    let mut cfg = ModelConfig::new(FeatureKind::Mfcc, Architecture::Cnn);
    cfg.input_frames = 40;
    let tc = TrainConfig {
        epochs_max: 100,
        patience: 100,
        ..TrainConfig::default()
    };
    let mut model = Model::build(&cfg, 5).unwrap();
    let h = train(&mut model, &samples, &samples, &tc, 5).unwrap();
    assert_eq!(h.stopped_epoch, 100);
    let last = h.epochs.last().unwrap();
    assert!(last.train_loss < 0.01, "final training loss {}", last.train_loss);
    assert!(h.best().unwrap().val_loss < 0.01);
}

#[test]
fn a_seed_fixes_the_whole_run() {
    let data = dataset(10, 4, 8, 1);
    let tc = quick(6, 3);
    let a = run_seed(&small_rnn(), &tc, &data, 9).unwrap();
    let b = run_seed(&small_rnn(), &tc, &data, 9).unwrap();
    let bits = |m: &Model| m.flat_params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.model), bits(&b.model));
    assert_eq!(a.history.to_jsonl(), b.history.to_jsonl());
    assert_eq!(a.report, b.report);
    let c = run_seed(&small_rnn(), &tc, &data, 10).unwrap();
    assert_ne!(bits(&a.model), bits(&c.model));
}

#[test]
fn duplicated_seeds_give_identical_runs() {
    let data = dataset(8, 4, 8, 2);
    let tc = TrainConfig {
        seeds: vec![1, 1],
        ..quick(4, 2)
    };
    let result = run_experiment(&[small_rnn()], &tc, &[data]).unwrap();
    let runs = &result[0].runs;
    assert_eq!(runs[0].model, runs[1].model);
    assert_eq!(runs[0].report.accuracy, runs[1].report.accuracy);
    assert_eq!(result[0].mean.accuracy, runs[0].report.accuracy);
    assert_eq!(result[0].mean.seeds, [1, 1]);
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let data = dataset(8, 4, 8, 3);
    let run = run_seed(&small_rnn(), &quick(3, 2), &data, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    let meta = CheckpointMeta {
        seed: 4,
        best_epoch: run.history.best_epoch,
        ..CheckpointMeta::default()
    };
    run.model.save(&path, &meta).unwrap();
    let (back, meta_back) = Model::load(&path).unwrap();
    assert_eq!(meta_back, meta);
    assert_eq!(back, run.model);
    for s in &data.samples {
        let p = run.model.predict(&run.model.prepare(&s.features).unwrap()).unwrap();
        let q = back.predict(&back.prepare(&s.features).unwrap()).unwrap();
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() <= 1e-7);
        }
    }
}

#[test]
fn standardized_training_features_have_unit_statistics() {
    let data = dataset(6, 5, 30, 4);
    let mut cfg = ModelConfig::new(FeatureKind::Mfcc, Architecture::Rnn);
    cfg.feature_dim = 5;
    cfg.input_frames = 20;
    let std = Standardizer::fit(data.samples.iter().map(|s| &s.features), cfg.input_frames);
    let mut model = Model::build(&cfg, 1).unwrap();
    model.standardizer = Some(std);
    let inputs: Vec<Tensor> = data.samples.iter().map(|s| model.prepare(&s.features).unwrap()).collect();
    for d in 0..5 {
        let vals: Vec<f64> = inputs
            .iter()
            .flat_map(|t| t.values().chunks_exact(5).map(move |row| row[d]))
            .collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-6, "dim {d} mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 1e-6, "dim {d} std {}", var.sqrt());
    }
}

/// Shape arithmetic for a valid 3×3 convolution followed by 2×2 pooling,
/// where a kernel or window never exceeds the remaining height.
fn cnn_param_count(cfg: &ModelConfig) -> usize {
    let (mut h, mut w, mut c) = (cfg.feature_dim, cfg.input_frames, 1);
    let mut total = 0;
    for &out in &cfg.conv_channels {
        let kh = h.min(3);
        total += out * c * kh * 3 + out;
        h = (h - kh + 1) / (h - kh + 1).min(2);
        w = (w - 2) / 2;
        c = out;
    }
    total + (c * h * w) * cfg.dense_units + cfg.dense_units + cfg.dense_units * cfg.n_classes + cfg.n_classes
}

#[test]
fn parameter_counts_follow_layer_shapes() {
    let cnn = ModelConfig::new(FeatureKind::Mfcc, Architecture::Cnn);
    let model = Model::build(&cnn, 1).unwrap();
    assert_eq!(model.param_count(), cnn_param_count(&cnn));
    assert_eq!(model.param_count(), 298_243);
    let wcnn = ModelConfig::new(FeatureKind::Wavelet, Architecture::Cnn);
    assert_eq!(Model::build(&wcnn, 1).unwrap().param_count(), cnn_param_count(&wcnn));

    let rnn = ModelConfig::new(FeatureKind::Mfcc, Architecture::Rnn);
    let (h, d) = (rnn.hidden_units, rnn.feature_dim);
    let lstm = 4 * h * (d + h + 1) + 3 * h + 3;
    assert_eq!(Model::build(&rnn, 1).unwrap().param_count(), lstm);
    let simple = ModelConfig {
        cell_kind: CellKind::Simple,
        ..rnn
    };
    assert_eq!(Model::build(&simple, 1).unwrap().param_count(), h * (d + h + 1) + 3 * h + 3);
}

#[test]
fn build_is_a_function_of_config_and_seed() {
    for cfg in ModelConfig::all_four() {
        assert_eq!(Model::build(&cfg, 7).unwrap(), Model::build(&cfg, 7).unwrap());
        assert_ne!(Model::build(&cfg, 7).unwrap(), Model::build(&cfg, 8).unwrap());
    }
}

#[test]
fn zero_output_layer_gives_uniform_probabilities() {
    let cfg = ModelConfig::new(FeatureKind::Mfcc, Architecture::Cnn);
    let mut model = Model::build(&cfg, 2).unwrap();
    let Network::Cnn(net) = &mut model.network else {
        unreachable!()
    };
    net.output.weight.fill(0.0);
    net.output.bias.fill(0.0);
    let x = Tensor::uniform(&cfg.input_dims(), 3.0, &mut ChaCha8Rng::seed_from_u64(1));
    for p in model.predict(&x).unwrap() {
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn outputs_are_distributions(seed in any::<u64>(), scale in 0.0f64..50.0, lstm in any::<bool>()) {
        let mut cfg = small_rnn();
        if lstm {
            cfg.cell_kind = CellKind::Lstm;
        }
        let model = Model::build(&cfg, seed).unwrap();
        let x = Tensor::uniform(&cfg.input_dims(), scale, &mut ChaCha8Rng::seed_from_u64(seed));
        let p = model.predict(&x).unwrap();
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn split_is_a_stratified_partition(
        labels in prop::collection::vec(0usize..4, 8..120),
        frac in 0.1f64..0.5,
        seed in any::<u64>(),
    ) {
        let mut counts = [0usize; 4];
        for &l in &labels {
            counts[l] += 1;
        }
        prop_assume!(counts.iter().all(|&c| c == 0 || c >= 2));
        let (tr, va) = stratified_split(&labels, frac, seed).unwrap();
        let all: BTreeSet<usize> = tr.iter().chain(&va).copied().collect();
        prop_assert_eq!(all.len(), labels.len());
        prop_assert_eq!(tr.len() + va.len(), labels.len());
        for (class, &n) in counts.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let got = va.iter().filter(|&&i| labels[i] == class).count() as f64;
            prop_assert!((got - n as f64 * frac).abs() <= 1.0);
        }
        prop_assert_eq!(stratified_split(&labels, frac, seed).unwrap(), (tr, va));
    }

    #[test]
    fn histories_respect_early_stopping(seed in 0u64..1000, patience in 1usize..4) {
        let data = dataset(6, 4, 8, seed);
        let tc = quick(8, patience);
        let run = run_seed(&small_rnn(), &tc, &data, seed).unwrap();
        check_history(&run.history, &tc);
    }
}
