//! Dialect labels, manifest loading and a synthetic three-class corpus.
//!
//! Manifests are UTF-8 TSV with a header row and the columns
//! `clip_id path country dialect duration_s split`. `dialect` and `split` may
//! be empty; an empty dialect is derived from the country.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{write_wav, AudioClip, AudioError, CANONICAL_RATE};

pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const MANIFEST_COLUMNS: [&str; 6] = ["clip_id", "path", "country", "dialect", "duration_s", "split"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}, line {line}: {message}")]
    Malformed {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{} audio file(s) missing: {}", .0.len(), .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingAudio(Vec<PathBuf>),
    #[error("no clips for dialect(s): {0}")]
    MissingClass(String),
    #[error("invalid corpus parameter: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Audio(#[from] AudioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dialect {
    Egyptian,
    Levantine,
    Gulf,
}

impl Dialect {
    /// Class order used for labels everywhere.
    pub const ALL: [Dialect; 3] = [Dialect::Egyptian, Dialect::Levantine, Dialect::Gulf];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Dialect::Egyptian => "Egyptian",
            Dialect::Levantine => "Levantine",
            Dialect::Gulf => "Gulf",
        }
    }

    /// Directory name in a generated corpus.
    pub fn dir_name(self) -> &'static str {
        match self {
            Dialect::Egyptian => "egyptian",
            Dialect::Levantine => "levantine",
            Dialect::Gulf => "gulf",
        }
    }

    pub fn countries(self) -> &'static [&'static str] {
        match self {
            Dialect::Egyptian => &["Egypt"],
            Dialect::Levantine => &["Jordan", "Palestine", "Lebanon", "Syria"],
            Dialect::Gulf => &["Saudi Arabia", "UAE", "Qatar", "Kuwait"],
        }
    }
}

pub fn class_names() -> Vec<String> {
    Dialect::ALL.iter().map(|d| d.name().to_string()).collect()
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dialect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        Dialect::ALL
            .into_iter()
            .find(|d| d.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| format!("unknown dialect `{t}`"))
    }
}

/// Case-insensitive lookup; whitespace is collapsed first.
pub fn map_country_to_dialect(country: &str) -> Option<Dialect> {
    let norm = country.split_whitespace().collect::<Vec<_>>().join(" ");
    if norm.eq_ignore_ascii_case("United Arab Emirates") {
        return Some(Dialect::Gulf);
    }
    Dialect::ALL
        .into_iter()
        .find(|d| d.countries().iter().any(|c| c.eq_ignore_ascii_case(&norm)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub clip_id: String,
    /// Relative to the dataset root.
    pub path: PathBuf,
    pub country: String,
    pub dialect: Dialect,
    pub duration_s: f64,
    pub split: Option<Split>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DialectDataset {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
    /// Rows dropped because their country maps to no dialect.
    pub excluded: usize,
}

impl DialectDataset {
    pub fn audio_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    /// Entry count per dialect, in [`Dialect::ALL`] order.
    pub fn class_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for e in &self.entries {
            counts[e.dialect.index()] += 1;
        }
        counts
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    clip_id: String,
    path: String,
    country: String,
    #[serde(default)]
    dialect: String,
    duration_s: f64,
    #[serde(default)]
    split: String,
}

/// Parses a manifest. Audio paths are resolved against `audio_root`, every
/// referenced file must exist, and all three dialects must be present.
pub fn load_manifest(
    path: impl AsRef<Path>,
    audio_root: impl AsRef<Path>,
) -> Result<DialectDataset, CorpusError> {
    let path = path.as_ref();
    let text = fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let malformed = |line: u64, message: String| CorpusError::Malformed {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .from_reader(text.as_slice());
    let headers = reader
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    for col in MANIFEST_COLUMNS.iter().filter(|c| **c != "dialect" && **c != "split") {
        if !headers.iter().any(|h| h == *col) {
            return Err(malformed(1, format!("missing column `{col}`")));
        }
    }

    let mut entries = Vec::new();
    let mut excluded = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: Row = record
            .deserialize(Some(&headers))
            .map_err(|e| malformed(line, e.to_string()))?;
        if row.clip_id.trim().is_empty() || row.path.trim().is_empty() {
            return Err(malformed(line, "empty clip_id or path".into()));
        }
        if !(row.duration_s.is_finite() && row.duration_s > 0.0) {
            return Err(malformed(line, format!("duration_s must be positive, got {}", row.duration_s)));
        }
        let mapped = map_country_to_dialect(&row.country);
        let dialect = if row.dialect.trim().is_empty() {
            match mapped {
                Some(d) => d,
                None => {
                    excluded += 1;
                    continue;
                }
            }
        } else {
            let given: Dialect = row.dialect.parse().map_err(|e| malformed(line, e))?;
            match mapped {
                Some(d) if d != given => {
                    return Err(malformed(
                        line,
                        format!("country `{}` belongs to {d}, row says {given}", row.country),
                    ))
                }
                None => {
                    excluded += 1;
                    continue;
                }
                _ => given,
            }
        };
        let split = match row.split.trim().to_ascii_lowercase().as_str() {
            "" => None,
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            other => return Err(malformed(line, format!("unknown split `{other}`"))),
        };
        entries.push(ManifestEntry {
            clip_id: row.clip_id,
            path: PathBuf::from(row.path),
            country: row.country,
            dialect,
            duration_s: row.duration_s,
            split,
        });
    }
    if excluded > 0 {
        log::info!("{}: excluded {excluded} row(s) with unmapped country", path.display());
    }

    let dataset = DialectDataset {
        root: audio_root.as_ref().to_path_buf(),
        entries,
        excluded,
    };
    let missing: Vec<PathBuf> = dataset
        .entries
        .iter()
        .map(|e| dataset.audio_path(e))
        .filter(|p| !p.is_file())
        .collect();
    if !missing.is_empty() {
        return Err(CorpusError::MissingAudio(missing));
    }
    let absent: Vec<&str> = Dialect::ALL
        .iter()
        .zip(dataset.class_counts())
        .filter(|(_, n)| *n == 0)
        .map(|(d, _)| d.name())
        .collect();
    if !absent.is_empty() {
        return Err(CorpusError::MissingClass(absent.join(", ")));
    }
    Ok(dataset)
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let mut text = MANIFEST_COLUMNS.join("\t");
    text.push('\n');
    for e in entries {
        let split = match e.split {
            Some(Split::Train) => "train",
            Some(Split::Val) => "val",
            None => "",
        };
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            e.clip_id,
            e.path.display(),
            e.country,
            e.dialect,
            e.duration_s,
            split
        ));
    }
    fs::write(path, text).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Formant centre of each synthetic class, Hz.
pub const SYNTH_FORMANTS_HZ: [f64; 3] = [500.0, 1500.0, 2500.0];
const FORMANT_BANDWIDTH_HZ: f64 = 150.0;
const SYNTH_NOISE_RMS: f64 = 0.01;

/// One synthetic utterance: a harmonic source at `f0` shaped by a Gaussian
/// resonance at `formant`, scaled to peak `amplitude`, plus white noise.
fn synth_clip(rng: &mut ChaCha8Rng, formant: f64, clip_id: String) -> AudioClip {
    let sr = CANONICAL_RATE as f64;
    let f0 = rng.gen_range(100.0..200.0);
    let formant = formant * rng.gen_range(0.95..1.05);
    let amplitude = rng.gen_range(0.3..0.9);
    let n = (rng.gen_range(1.0..3.0) * sr).round() as usize;
    let harmonics: Vec<(f64, f64, f64)> = (1..)
        .map(|k| k as f64 * f0)
        .take_while(|f| *f < 0.45 * sr)
        .map(|f| {
            let z = (f - formant) / FORMANT_BANDWIDTH_HZ;
            (f, (-0.5 * z * z).exp() + 0.01, rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    let mut samples = vec![0.0; n];
    for (f, a, phase) in harmonics {
        // Rotate a unit phasor instead of calling sin per sample.
        let (ds, dc) = (2.0 * PI * f / sr).sin_cos();
        let (mut s, mut c) = phase.sin_cos();
        for v in samples.iter_mut() {
            *v += a * s;
            (s, c) = (s * dc + c * ds, c * dc - s * ds);
        }
    }
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for s in &mut samples {
        let noise: f64 = StandardNormal.sample(rng);
        *s = amplitude * *s / peak + SYNTH_NOISE_RMS * noise;
    }
    AudioClip::new(samples, CANONICAL_RATE, clip_id)
}

/// Writes `n_per_class` clips per dialect to `out/{class}/{id}.wav` and a
/// manifest to `out/manifest.tsv`. Output is byte-identical per seed.
pub fn synth_corpus(
    n_per_class: usize,
    seed: u64,
    out: impl AsRef<Path>,
) -> Result<DialectDataset, CorpusError> {
    if n_per_class < 4 {
        return Err(CorpusError::Config(format!(
            "n_per_class must be at least 4, got {n_per_class}"
        )));
    }
    let out = out.as_ref();
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CorpusError::Io { path, source }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(3 * n_per_class);
    for dialect in Dialect::ALL {
        let dir = out.join(dialect.dir_name());
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for i in 0..n_per_class {
            let clip_id = format!("{}_{i:04}", dialect.dir_name());
            let clip = synth_clip(&mut rng, SYNTH_FORMANTS_HZ[dialect.index()], clip_id.clone());
            let countries = dialect.countries();
            let country = countries[rng.gen_range(0..countries.len())];
            let rel = PathBuf::from(dialect.dir_name()).join(format!("{clip_id}.wav"));
            write_wav(&clip, out.join(&rel))?;
            entries.push(ManifestEntry {
                clip_id,
                path: rel,
                country: country.to_string(),
                dialect,
                duration_s: clip.duration_s(),
                split: None,
            });
        }
    }
    write_manifest(out.join(MANIFEST_FILE), &entries)?;
    Ok(DialectDataset {
        root: out.to_path_buf(),
        entries,
        excluded: 0,
    })
}
