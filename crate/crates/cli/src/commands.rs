use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, ensure, Context};
use rayon::prelude::*;

use dialect_lab::audio::{self, AudioClip, CANONICAL_RATE};
use dialect_lab::augment::{augment_clip, AugmentSpec};
use dialect_lab::corpus::{self, DialectDataset, ManifestEntry, MANIFEST_FILE};
use dialect_lab::eval::{self, EvalReport};
use dialect_lab::features::{self, FeatureKind, MfccConfig};
use dialect_lab::models::{CheckpointMeta, Model, ModelConfig};
use dialect_lab::trainer::{self, Dataset, RunOutcome, Sample, TrainConfig};

use crate::args::*;
use crate::run_manifest::{beside, RunManifest, RUN_MANIFEST_FILE};
use crate::{StageContext, StageError};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const HISTORY_FILE: &str = "history.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const FEATURE_EXT: &str = "afea";

/// Paths a command read and wrote, and where its run manifest goes.
struct Outcome {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    manifest_at: Option<PathBuf>,
    seed: Option<u64>,
}

fn stage_name(command: &Command) -> &'static str {
    match command {
        Command::SynthCorpus(_) => "synth-corpus",
        Command::Prepare(_) => "prepare",
        Command::Augment(_) => "augment",
        Command::Extract(_) => "extract",
        Command::Train(_) => "train",
        Command::Evaluate(_) => "evaluate",
        Command::Report(_) => "report",
        Command::Sweep(_) => "sweep",
        Command::Replay(_) => "replay",
    }
}

pub fn run(command: Command, argv: Vec<String>) -> Result<(), StageError> {
    let stage = stage_name(&command);
    let config = serde_json::to_value(&command)
        .ok()
        .and_then(|v| v.as_object().and_then(|o| o.values().next().cloned()))
        .unwrap_or_default();
    let outcome = match &command {
        Command::SynthCorpus(a) => synth(a),
        Command::Prepare(a) => prepare(a),
        Command::Augment(a) => augment(a),
        Command::Extract(a) => extract(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Report(a) => report(a),
        Command::Sweep(a) => sweep(a),
        Command::Replay(a) => return replay(a),
    }
    .stage(stage)?;
    if let Some(path) = outcome.manifest_at {
        RunManifest {
            command: stage.to_string(),
            argv,
            config,
            inputs: outcome.inputs,
            outputs: outcome.outputs,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: outcome.seed,
        }
        .write(&path)
        .stage(stage)?;
    }
    Ok(())
}

fn replay(a: &ReplayArgs) -> Result<(), StageError> {
    let manifest = RunManifest::read(&a.manifest).stage("replay")?;
    let version = env!("CARGO_PKG_VERSION");
    if manifest.version != version {
        return Err(anyhow!(
            "manifest was written by version {}, this is {version}",
            manifest.version
        ))
        .stage("replay");
    }
    let argv = std::iter::once("dialect-lab".to_string()).chain(manifest.argv.iter().cloned());
    let cli = parse_cli(argv)
        .map_err(|e| anyhow!("recorded arguments no longer parse: {e}"))
        .stage("replay")?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(anyhow!("a replay manifest cannot replay another replay")).stage("replay");
    }
    run(cli.command, manifest.argv)
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn pool(jobs: usize) -> anyhow::Result<rayon::ThreadPool> {
    ensure!(jobs >= 1, "--jobs must be at least 1");
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}

fn load_corpus(dir: &Path, manifest: Option<&Path>) -> anyhow::Result<DialectDataset> {
    let path = manifest.map_or_else(|| dir.join(MANIFEST_FILE), Path::to_path_buf);
    let ds = corpus::load_manifest(&path, dir)?;
    let mut seen = BTreeSet::new();
    for e in &ds.entries {
        ensure!(seen.insert(e.clip_id.as_str()), "duplicate clip_id `{}` in {}", e.clip_id, path.display());
    }
    Ok(ds)
}

fn read_clip(ds: &DialectDataset, entry: &ManifestEntry) -> anyhow::Result<AudioClip> {
    let mut clip = audio::read_wav(ds.audio_path(entry))?;
    clip.clip_id = entry.clip_id.clone();
    Ok(clip)
}

fn synth(a: &SynthArgs) -> anyhow::Result<Outcome> {
    let ds = corpus::synth_corpus(a.n, a.seed.seed, &a.out)?;
    println!("wrote {} clips to {}", ds.entries.len(), a.out.display());
    Ok(Outcome {
        inputs: vec![],
        outputs: vec![a.out.join(MANIFEST_FILE)],
        manifest_at: Some(a.out.join(RUN_MANIFEST_FILE)),
        seed: Some(a.seed.seed),
    })
}

fn prepare(a: &PrepareArgs) -> anyhow::Result<Outcome> {
    ensure!(a.sample_rate > 0, "--sample-rate must be positive");
    let ds = load_corpus(&a.input, a.manifest.as_deref())?;
    create_dir(&a.out)?;
    let results: Vec<anyhow::Result<Vec<ManifestEntry>>> = pool(a.jobs)?.install(|| {
        ds.entries
            .par_iter()
            .map(|entry| {
                let clip = read_clip(&ds, entry)?;
                let mut clip = audio::resample(&clip, a.sample_rate)?;
                if a.denoise {
                    clip = audio::reduce_noise(&clip);
                }
                let clip = audio::trim_silence(&clip, a.trim_db)?;
                let clip = audio::normalize_peak(&clip);
                let dir = PathBuf::from(entry.dialect.to_string().to_lowercase());
                create_dir(&a.out.join(&dir))?;
                audio::segment(&clip, a.max_seconds)?
                    .into_iter()
                    .map(|seg| {
                        let rel = dir.join(format!("{}.wav", seg.clip_id));
                        audio::write_wav(&seg, a.out.join(&rel))?;
                        Ok(ManifestEntry {
                            clip_id: seg.clip_id.clone(),
                            path: rel,
                            duration_s: seg.duration_s(),
                            ..entry.clone()
                        })
                    })
                    .collect()
            })
            .collect()
    });
    let mut entries = Vec::new();
    for (r, e) in results.into_iter().zip(&ds.entries) {
        entries.extend(r.with_context(|| format!("clip `{}`", e.clip_id))?);
    }
    corpus::write_manifest(a.out.join(MANIFEST_FILE), &entries)?;
    println!("prepared {} clips into {} segments", ds.entries.len(), entries.len());
    Ok(Outcome {
        inputs: vec![a.input.clone()],
        outputs: vec![a.out.join(MANIFEST_FILE)],
        manifest_at: Some(a.out.join(RUN_MANIFEST_FILE)),
        seed: None,
    })
}

fn augment(a: &AugmentArgs) -> anyhow::Result<Outcome> {
    let spec = AugmentSpec {
        pitch_semitones: a.pitch,
        stretch_rate: a.stretch,
        snr_db: a.snr,
        speed_factor: a.speed,
        copies_per_clip: a.copies,
        seed: a.seed.seed,
    };
    spec.validate()?;
    let ds = load_corpus(&a.input, None)?;
    create_dir(&a.out)?;
    let results: Vec<anyhow::Result<Vec<ManifestEntry>>> = pool(a.jobs)?.install(|| {
        ds.entries
            .par_iter()
            .map(|entry| {
                let clip = read_clip(&ds, entry)?;
                let dir = entry.path.parent().map(Path::to_path_buf).unwrap_or_default();
                create_dir(&a.out.join(&dir))?;
                let src = ds.audio_path(entry);
                fs::copy(&src, a.out.join(&entry.path)).with_context(|| format!("copying {}", src.display()))?;
                let mut rows = vec![entry.clone()];
                for copy in augment_clip(&clip, &spec)? {
                    let rel = dir.join(format!("{}.wav", copy.clip_id));
                    audio::write_wav(&copy, a.out.join(&rel))?;
                    rows.push(ManifestEntry {
                        clip_id: copy.clip_id.clone(),
                        path: rel,
                        duration_s: copy.duration_s(),
                        ..entry.clone()
                    });
                }
                Ok(rows)
            })
            .collect()
    });
    let mut entries = Vec::new();
    for (r, e) in results.into_iter().zip(&ds.entries) {
        entries.extend(r.with_context(|| format!("clip `{}`", e.clip_id))?);
    }
    corpus::write_manifest(a.out.join(MANIFEST_FILE), &entries)?;
    println!("wrote {} clips ({} augmented)", entries.len(), entries.len() - ds.entries.len());
    Ok(Outcome {
        inputs: vec![a.input.clone()],
        outputs: vec![a.out.join(MANIFEST_FILE)],
        manifest_at: Some(a.out.join(RUN_MANIFEST_FILE)),
        seed: Some(a.seed.seed),
    })
}

fn extract(a: &ExtractArgs) -> anyhow::Result<Outcome> {
    let mfcc_cfg = MfccConfig {
        n_coeffs: a.n_mfcc,
        win_ms: a.win_ms,
        hop_ms: a.hop_ms,
        n_fft: a.n_fft,
        n_mels: a.n_mels,
        ..MfccConfig::default()
    };
    if a.features == FeatureKind::Mfcc {
        mfcc_cfg.validate(CANONICAL_RATE)?;
    }
    let ds = load_corpus(&a.input, None)?;
    create_dir(&a.out)?;
    let results: Vec<anyhow::Result<ManifestEntry>> = pool(a.jobs)?.install(|| {
        ds.entries
            .par_iter()
            .map(|entry| {
                let mut clip = read_clip(&ds, entry)?;
                if clip.sample_rate != CANONICAL_RATE {
                    clip = audio::resample(&clip, CANONICAL_RATE)?;
                }
                let fm = match a.features {
                    FeatureKind::Mfcc => features::mfcc(&clip, &mfcc_cfg)?,
                    FeatureKind::Wavelet => features::wavelet_features_with_level(&clip, a.wavelet_level)?,
                };
                let rel = PathBuf::from(format!("{}.{FEATURE_EXT}", entry.clip_id));
                features::write_features(&fm, a.out.join(&rel))?;
                Ok(ManifestEntry {
                    path: rel,
                    ..entry.clone()
                })
            })
            .collect()
    });
    let entries = results
        .into_iter()
        .zip(&ds.entries)
        .map(|(r, e)| r.with_context(|| format!("clip `{}`", e.clip_id)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    corpus::write_manifest(a.out.join(MANIFEST_FILE), &entries)?;
    println!("extracted {} {} feature files", entries.len(), a.features.display_name());
    Ok(Outcome {
        inputs: vec![a.input.clone()],
        outputs: vec![a.out.join(MANIFEST_FILE)],
        manifest_at: Some(a.out.join(RUN_MANIFEST_FILE)),
        seed: None,
    })
}

/// Loads a feature directory written by `extract`.
fn load_features(dir: &Path, kind: FeatureKind) -> anyhow::Result<Dataset> {
    let ds = load_corpus(dir, None)?;
    let samples = ds
        .entries
        .iter()
        .map(|e| {
            let mut fm = features::read_features(ds.audio_path(e))?;
            ensure!(
                fm.kind == kind,
                "{} holds {} features, expected {}",
                ds.audio_path(e).display(),
                fm.kind.display_name(),
                kind.display_name()
            );
            fm.clip_id = e.clip_id.clone();
            Ok(Sample {
                features: fm,
                label: e.dialect.index(),
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(Dataset {
        kind,
        class_names: corpus::class_names(),
        samples,
    })
}

fn train_config(t: &TrainingArgs, seeds: Vec<u64>) -> anyhow::Result<TrainConfig> {
    let cfg = TrainConfig {
        epochs_max: t.epochs,
        batch_size: t.batch,
        lr: t.lr,
        patience: t.patience,
        val_fraction: t.val_fraction,
        seeds,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn model_config(base: ModelConfig, t: &TrainingArgs, dataset: &Dataset) -> anyhow::Result<ModelConfig> {
    let first = dataset.samples.first().context("feature directory is empty")?;
    let mut cfg = base;
    cfg.cell_kind = t.cell;
    cfg.n_classes = dataset.class_names.len();
    cfg.feature_dim = first.features.feature_dim;
    if let Some(frames) = t.frames {
        cfg.input_frames = frames;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes checkpoint, history and report of one run into `dir`.
fn save_run(dir: &Path, run: &RunOutcome, cfg: &TrainConfig) -> anyhow::Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let best = run.history.best().context("training recorded no epochs")?;
    let meta = CheckpointMeta {
        seed: run.seed,
        best_epoch: run.history.best_epoch,
        val_loss: Some(best.val_loss),
        val_accuracy: Some(best.val_accuracy),
        train_config: serde_json::to_value(cfg)?,
    };
    let paths = [CHECKPOINT_FILE, HISTORY_FILE, REPORT_FILE].map(|f| dir.join(f));
    run.model.save(&paths[0], &meta)?;
    fs::write(&paths[1], run.history.to_jsonl()).with_context(|| paths[1].display().to_string())?;
    write_json(&paths[2], &run.report)?;
    Ok(paths.to_vec())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_report(path: &Path) -> anyhow::Result<EvalReport> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn train(a: &TrainArgs) -> anyhow::Result<Outcome> {
    let dataset = load_features(&a.input, a.features)?;
    let cfg = train_config(&a.training, vec![a.seed.seed])?;
    let model_cfg = model_config(ModelConfig::new(a.features, a.model), &a.training, &dataset)?;
    let run = trainer::run_seed(&model_cfg, &cfg, &dataset, a.seed.seed)?;
    let outputs = save_run(&a.out, &run, &cfg)?;
    println!(
        "{} seed {}: best epoch {} of {}, validation accuracy {:.3}",
        model_cfg.id(),
        a.seed.seed,
        run.history.best_epoch,
        run.history.stopped_epoch,
        run.report.accuracy
    );
    Ok(Outcome {
        inputs: vec![a.input.clone()],
        outputs,
        manifest_at: Some(a.out.join(RUN_MANIFEST_FILE)),
        seed: Some(a.seed.seed),
    })
}

fn evaluate(a: &EvaluateArgs) -> anyhow::Result<Outcome> {
    let mut reports = Vec::new();
    let mut dataset: Option<Dataset> = None;
    for path in &a.checkpoint {
        let (model, meta) = Model::load(path).with_context(|| format!("loading {}", path.display()))?;
        let kind = model.config.feature_kind;
        if dataset.as_ref().is_none_or(|d| d.kind != kind) {
            dataset = Some(load_features(&a.input, kind)?);
        }
        let ds = dataset.as_ref().expect("loaded above");
        let samples = match a.split {
            EvalSplit::Val => {
                let cfg: TrainConfig = serde_json::from_value(meta.train_config.clone())
                    .with_context(|| format!("{} has no usable training config", path.display()))?;
                trainer::split_dataset(ds, cfg.val_fraction, meta.seed)?.1
            }
            EvalSplit::All => ds
                .samples
                .iter()
                .filter(|s| dialect_lab::augment::augmented_source(s.clip_id()).is_none())
                .cloned()
                .collect(),
        };
        let preds = trainer::predict_samples(&model, &samples)?;
        let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
        let cm = eval::confusion(&labels, &preds, &ds.class_names)?;
        reports.push(eval::metrics(&cm, model.config.id(), model.config.display_name(), vec![meta.seed])?);
    }
    let report = eval::aggregate(&reports)?;
    write_json(&a.out, &report)?;
    println!(
        "{} over {} checkpoint(s): accuracy {:.3}, macro F1 {:.3}",
        report.config,
        reports.len(),
        report.accuracy,
        report.macro_avg.f1
    );
    let mut inputs = a.checkpoint.clone();
    inputs.push(a.input.clone());
    Ok(Outcome {
        inputs,
        outputs: vec![a.out.clone()],
        manifest_at: Some(beside(&a.out)),
        seed: None,
    })
}

/// Averages reports that share a configuration, keeping first-seen order.
fn merge_reports(reports: Vec<EvalReport>) -> anyhow::Result<Vec<EvalReport>> {
    let mut groups: Vec<Vec<EvalReport>> = Vec::new();
    for r in reports {
        match groups.iter_mut().find(|g| g[0].config == r.config) {
            Some(g) => g.push(r),
            None => groups.push(vec![r]),
        }
    }
    groups.iter().map(|g| Ok(eval::aggregate(g)?)).collect()
}

fn render(reports: &[EvalReport], average: eval::Averaging, format: Format) -> String {
    let (text, json) = eval::render_comparison(reports, average);
    match format {
        Format::Text => text,
        Format::Json => json + "\n",
    }
}

fn report(a: &ReportArgs) -> anyhow::Result<Outcome> {
    let reports = a.inputs.iter().map(|p| read_report(p)).collect::<anyhow::Result<Vec<_>>>()?;
    let merged = merge_reports(reports)?;
    let out = render(&merged, a.average, a.format);
    match &a.out {
        Some(path) => fs::write(path, &out).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{out}"),
    }
    Ok(Outcome {
        inputs: a.inputs.clone(),
        outputs: a.out.iter().cloned().collect(),
        manifest_at: a.out.as_deref().map(beside),
        seed: None,
    })
}

fn sweep(a: &SweepArgs) -> anyhow::Result<Outcome> {
    let cfg = train_config(&a.training, a.seeds.clone())?;
    let datasets = [
        load_features(&a.mfcc, FeatureKind::Mfcc)?,
        load_features(&a.wavelet, FeatureKind::Wavelet)?,
    ];
    create_dir(&a.out)?;
    let mut outputs = Vec::new();
    let mut means = Vec::new();
    for base in ModelConfig::all_four() {
        let dataset = datasets
            .iter()
            .find(|d| d.kind == base.feature_kind)
            .expect("both kinds loaded");
        let model_cfg = model_config(base, &a.training, dataset)?;
        let dir = a.out.join(model_cfg.id().replace('+', "_"));
        let mut reports = Vec::new();
        for &seed in &cfg.seeds {
            let run = trainer::run_seed(&model_cfg, &cfg, dataset, seed)
                .with_context(|| format!("{} seed {seed}", model_cfg.id()))?;
            outputs.extend(save_run(&dir.join(format!("seed{seed}")), &run, &cfg)?);
            log::info!("{} seed {seed}: accuracy {:.3}", model_cfg.id(), run.report.accuracy);
            reports.push(run.report);
        }
        let mean = eval::aggregate(&reports)?;
        let path = dir.join(REPORT_FILE);
        write_json(&path, &mean)?;
        outputs.push(path);
        means.push(mean);
    }
    let text = render(&means, a.average, Format::Text);
    let json = render(&means, a.average, Format::Json);
    for (name, body) in [("table.txt", &text), ("table.json", &json)] {
        let path = a.out.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        outputs.push(path);
    }
    print!("{text}");
    Ok(Outcome {
        inputs: vec![a.mfcc.clone(), a.wavelet.clone()],
        outputs,
        manifest_at: Some(a.out.join(RUN_MANIFEST_FILE)),
        seed: cfg.seeds.first().copied(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merging_groups_by_config() {
        let names = corpus::class_names();
        let cm = eval::confusion(&[0, 1, 2], &[0, 1, 1], &names).unwrap();
        let a = eval::metrics(&cm, "mfcc+cnn", "MFCC + CNN", vec![1]).unwrap();
        let b = eval::metrics(&cm, "mfcc+cnn", "MFCC + CNN", vec![2]).unwrap();
        let c = eval::metrics(&cm, "wavelet+rnn", "Wavelet + RNN", vec![1]).unwrap();
        let merged = merge_reports(vec![a, c, b]).unwrap();
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0].seeds, vec![1, 2]);
        assert_eq!(merged[0].confusion.total(), 6);
    }

    #[test]
    fn replay_stage_name() {
        let cli = parse_cli(["dialect-lab", "replay", "--manifest", "m.json"]).unwrap();
        assert_eq!(stage_name(&cli.command), "replay");
    }

    #[test]
    fn missing_input_fails_in_named_stage() {
        let dir = tempfile::tempdir().unwrap();
        let cli = parse_cli([
            "dialect-lab",
            "extract",
            "--features",
            "mfcc",
            "--in",
            dir.path().join("nope").to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ])
        .unwrap();
        let err = run(cli.command, vec![]).unwrap_err();
        assert_eq!(err.stage, "extract");
    }
}
