//! The four classifier configurations: {MFCC, wavelet} features feeding a
//! {CNN, RNN}.
//!
//! CNN: three stages of (3×3 conv + ReLU, 2×2 max-pool), flatten, dense 128 +
//! ReLU, dense to class logits. A kernel or pooling window never exceeds the
//! axis it slides over, so on the 13-row MFCC map the last stage degenerates
//! to 1×3 convolution and 1×2 pooling.
//!
//! RNN: one recurrent layer (64 units, simple or LSTM) over the frame
//! sequence; the logits are the output projection of the final hidden state.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureKind, FeatureMatrix, WAVELET_FRAME};
use crate::nn::{
    self, softmax, softmax_cross_entropy_grad, Activation, CellKind, Conv2d, Dense, MaxPool2d,
    NnError, RecurrentLayer, Tensor, KERNEL,
};

/// Stages of conv + pool in the CNN.
pub const CNN_STAGES: usize = 3;
const CHECKPOINT_FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("input of {frames} frames is too small for {CNN_STAGES} pooling stages; need at least {min_frames} frames")]
    InputTooSmall { frames: usize, min_frames: usize },
    #[error("feature kind {found} does not match model input {expected}")]
    FeatureKind { expected: FeatureKind, found: FeatureKind },
    #[error("feature matrix `{0}` is empty")]
    EmptyFeatures(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Cnn,
    Rnn,
}

impl Architecture {
    pub fn display_name(self) -> &'static str {
        match self {
            Architecture::Cnn => "CNN",
            Architecture::Rnn => "RNN",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::Cnn => "cnn",
            Architecture::Rnn => "rnn",
        })
    }
}

impl FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cnn" => Ok(Architecture::Cnn),
            "rnn" => Ok(Architecture::Rnn),
            other => Err(format!("unknown architecture `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub feature_kind: FeatureKind,
    pub arch: Architecture,
    /// Only used by the RNN.
    pub cell_kind: CellKind,
    pub n_classes: usize,
    /// Rows of the feature matrix (13 MFCCs or 512 wavelet coefficients).
    pub feature_dim: usize,
    /// Frames after pad/truncate.
    pub input_frames: usize,
    pub conv_channels: Vec<usize>,
    pub dense_units: usize,
    pub hidden_units: usize,
}

impl ModelConfig {
    pub fn new(feature_kind: FeatureKind, arch: Architecture) -> Self {
        let (feature_dim, input_frames) = match feature_kind {
            FeatureKind::Mfcc => (13, 300),
            FeatureKind::Wavelet => (WAVELET_FRAME, 32),
        };
        Self {
            feature_kind,
            arch,
            cell_kind: CellKind::Lstm,
            n_classes: 3,
            feature_dim,
            input_frames,
            conv_channels: vec![16, 32, 64],
            dense_units: 128,
            hidden_units: 64,
        }
    }

    /// The four feature × architecture combinations, in report order.
    pub fn all_four() -> Vec<ModelConfig> {
        [
            (FeatureKind::Mfcc, Architecture::Cnn),
            (FeatureKind::Mfcc, Architecture::Rnn),
            (FeatureKind::Wavelet, Architecture::Cnn),
            (FeatureKind::Wavelet, Architecture::Rnn),
        ]
        .into_iter()
        .map(|(f, a)| ModelConfig::new(f, a))
        .collect()
    }

    /// Short machine identifier, e.g. `mfcc+cnn`.
    pub fn id(&self) -> String {
        format!("{}+{}", self.feature_kind, self.arch)
    }

    /// Table label, e.g. `MFCC + CNN`.
    pub fn display_name(&self) -> String {
        format!("{} + {}", self.feature_kind.display_name(), self.arch.display_name())
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: String| Err(ModelError::Config(m));
        if self.n_classes < 2 {
            return fail(format!("need at least 2 classes, got {}", self.n_classes));
        }
        if self.feature_dim == 0 || self.input_frames == 0 {
            return fail("feature_dim and input_frames must be positive".into());
        }
        match self.arch {
            Architecture::Cnn => {
                if self.conv_channels.len() != CNN_STAGES || self.conv_channels.contains(&0) {
                    return fail(format!(
                        "conv_channels must list {CNN_STAGES} positive counts, got {:?}",
                        self.conv_channels
                    ));
                }
                if self.dense_units == 0 {
                    return fail("dense_units must be positive".into());
                }
                let min_frames = min_cnn_frames();
                if self.input_frames < min_frames {
                    return Err(ModelError::InputTooSmall {
                        frames: self.input_frames,
                        min_frames,
                    });
                }
            }
            Architecture::Rnn => {
                if self.hidden_units == 0 {
                    return fail("hidden_units must be positive".into());
                }
            }
        }
        Ok(())
    }

    /// Shape of the tensor [`prepare_input`] produces.
    pub fn input_dims(&self) -> Vec<usize> {
        match self.arch {
            Architecture::Cnn => vec![1, self.feature_dim, self.input_frames],
            Architecture::Rnn => vec![self.input_frames, self.feature_dim],
        }
    }
}

/// Smallest time axis on which all three stages apply a full 3-wide kernel
/// and 2-wide pooling.
pub fn min_cnn_frames() -> usize {
    let mut w = 1;
    for _ in 0..CNN_STAGES {
        w = 2 * w + KERNEL - 1;
    }
    w
}

/// One (conv, pool) stage and the spatial dims it produces.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnStage {
    pub conv: Conv2d,
    pub pool: MaxPool2d,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnNet {
    pub stages: Vec<CnnStage>,
    pub hidden: Dense,
    pub output: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnNet {
    pub layer: RecurrentLayer,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Cnn(CnnNet),
    Rnn(RnnNet),
}

/// Per-feature-dimension mean and standard deviation estimated on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Statistics over every frame kept after truncation to `frames`.
    pub fn fit<'a>(features: impl IntoIterator<Item = &'a FeatureMatrix>, frames: usize) -> Self {
        let mut count = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        let mut collected: Vec<&FeatureMatrix> = Vec::new();
        for fm in features {
            if sum.is_empty() {
                sum = vec![0.0; fm.feature_dim];
                sq = vec![0.0; fm.feature_dim];
            }
            collected.push(fm);
            let t = fm.n_frames.min(frames);
            count += t;
            for d in 0..fm.feature_dim {
                sum[d] += fm.row(d)[..t].iter().sum::<f64>();
            }
        }
        if count == 0 {
            return Self {
                mean: sum.clone(),
                std: vec![1.0; sum.len()],
            };
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        for fm in &collected {
            let t = fm.n_frames.min(frames);
            for d in 0..fm.feature_dim {
                sq[d] += fm.row(d)[..t].iter().map(|v| (v - mean[d]).powi(2)).sum::<f64>();
            }
        }
        let std = sq
            .iter()
            .map(|s| {
                let sd = (s / count as f64).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }
}

/// Truncates or zero-pads along time to `input_frames`, standardises the kept
/// frames and lays the result out for the configured architecture.
pub fn prepare_input(
    fm: &FeatureMatrix,
    cfg: &ModelConfig,
    standardizer: Option<&Standardizer>,
) -> Result<Tensor, ModelError> {
    if fm.kind != cfg.feature_kind {
        return Err(ModelError::FeatureKind {
            expected: cfg.feature_kind,
            found: fm.kind,
        });
    }
    if fm.n_frames == 0 || fm.feature_dim == 0 {
        return Err(ModelError::EmptyFeatures(fm.clip_id.clone()));
    }
    if fm.feature_dim != cfg.feature_dim {
        return Err(ModelError::Config(format!(
            "features of `{}` have {} dims, model expects {}",
            fm.clip_id, fm.feature_dim, cfg.feature_dim
        )));
    }
    let (dims, t_max) = (cfg.feature_dim, cfg.input_frames);
    let kept = fm.n_frames.min(t_max);
    let value = |d: usize, t: usize| {
        let v = fm.get(d, t);
        match standardizer {
            Some(s) => (v - s.mean[d]) / s.std[d],
            None => v,
        }
    };
    let mut data = vec![0.0; dims * t_max];
    match cfg.arch {
        Architecture::Cnn => {
            for d in 0..dims {
                for t in 0..kept {
                    data[d * t_max + t] = value(d, t);
                }
            }
        }
        Architecture::Rnn => {
            for t in 0..kept {
                for d in 0..dims {
                    data[t * dims + d] = value(d, t);
                }
            }
        }
    }
    Ok(Tensor::new(cfg.input_dims(), data)?)
}

/// Forward activations of the CNN, kept for the backward pass.
struct CnnTrace {
    /// Input to each stage, then the final pooled map.
    maps: Vec<Tensor>,
    conv_out: Vec<Tensor>,
    hidden: Tensor,
    logits: Tensor,
}

impl CnnNet {
    fn build(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<Self, ModelError> {
        let mut dims = [1usize, cfg.feature_dim, cfg.input_frames];
        let mut stages = Vec::with_capacity(CNN_STAGES);
        for &channels in &cfg.conv_channels {
            let kernel = (KERNEL.min(dims[1]), KERNEL.min(dims[2]));
            let conv = Conv2d::init(dims[0], channels, kernel, Activation::Relu, rng);
            let after_conv = conv.output_dims(&dims)?;
            let pool = MaxPool2d::new(2.min(after_conv[1]), 2.min(after_conv[2]));
            dims = pool.output_dims(&after_conv)?;
            stages.push(CnnStage { conv, pool });
        }
        let flat = dims.iter().product();
        let hidden = Dense::init(flat, cfg.dense_units, Activation::Relu, rng);
        let output = Dense::init(cfg.dense_units, cfg.n_classes, Activation::Identity, rng);
        Ok(Self {
            stages,
            hidden,
            output,
        })
    }

    fn forward(&self, input: &Tensor) -> Result<CnnTrace, NnError> {
        let mut maps = vec![input.clone()];
        let mut conv_out = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            let c = stage.conv.forward(maps.last().expect("non-empty"))?;
            maps.push(stage.pool.forward(&c)?);
            conv_out.push(c);
        }
        let hidden = self.hidden.forward(maps.last().expect("non-empty"))?;
        let logits = self.output.forward(&hidden)?;
        Ok(CnnTrace {
            maps,
            conv_out,
            hidden,
            logits,
        })
    }

    fn backward(&self, trace: &CnnTrace, grad_logits: Tensor, grads: &mut [Tensor]) -> Result<(), NnError> {
        let n_conv = 2 * self.stages.len();
        let (conv_grads, dense_grads) = grads.split_at_mut(n_conv);
        let d_hidden = self
            .output
            .backward(&trace.hidden, &trace.logits, &grad_logits, &mut dense_grads[2..4])?;
        let flat = trace.maps.last().expect("non-empty");
        let mut d_map = self
            .hidden
            .backward(flat, &trace.hidden, &d_hidden, &mut dense_grads[0..2])?;
        for (i, stage) in self.stages.iter().enumerate().rev() {
            let d_conv = stage.pool.backward(&trace.conv_out[i], &d_map)?;
            let want_input = i > 0;
            let d_in = stage.conv.backward(
                &trace.maps[i],
                &trace.conv_out[i],
                &d_conv,
                &mut conv_grads[2 * i..2 * i + 2],
                want_input,
            )?;
            if let Some(d) = d_in {
                d_map = d;
            }
        }
        Ok(())
    }

    fn params(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = self.stages.iter().flat_map(|s| s.conv.params()).collect();
        out.extend(self.hidden.params());
        out.extend(self.output.params());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = self
            .stages
            .iter_mut()
            .flat_map(|s| s.conv.params_mut())
            .collect();
        out.extend(self.hidden.params_mut());
        out.extend(self.output.params_mut());
        out
    }

    fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 0..self.stages.len() {
            names.push(format!("conv{}.weight", i + 1));
            names.push(format!("conv{}.bias", i + 1));
        }
        names.extend(["dense.weight", "dense.bias", "output.weight", "output.bias"].map(String::from));
        names
    }
}

fn scaled_logit_grad(probs: &[f64], label: usize, scale: f64) -> Result<Vec<f64>, NnError> {
    let mut g = softmax_cross_entropy_grad(probs, label)?;
    g.iter_mut().for_each(|v| *v *= scale);
    Ok(g)
}

/// Shape of one parameter tensor as recorded in a checkpoint header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamShape {
    pub name: String,
    pub dims: Vec<usize>,
}

/// Training metadata stored alongside the weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub best_epoch: usize,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
    /// Training configuration, free-form.
    #[serde(default)]
    pub train_config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointHeader {
    format: u32,
    architecture: Architecture,
    feature_kind: FeatureKind,
    config: ModelConfig,
    layer_shapes: Vec<ParamShape>,
    standardizer: Option<Standardizer>,
    meta: CheckpointMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub network: Network,
    pub standardizer: Option<Standardizer>,
}

impl Model {
    /// Builds a freshly initialised model; a pure function of `(cfg, seed)`.
    pub fn build(cfg: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let network = match cfg.arch {
            Architecture::Cnn => Network::Cnn(CnnNet::build(cfg, &mut rng)?),
            Architecture::Rnn => Network::Rnn(RnnNet {
                layer: RecurrentLayer::init(
                    cfg.cell_kind,
                    cfg.feature_dim,
                    cfg.hidden_units,
                    cfg.n_classes,
                    &mut rng,
                ),
            }),
        };
        Ok(Self {
            config: cfg.clone(),
            network,
            standardizer: None,
        })
    }

    fn check_input(&self, input: &Tensor) -> Result<(), ModelError> {
        let expected = self.config.input_dims();
        if input.dims() != expected.as_slice() {
            return Err(NnError::Shape(format!(
                "model {} expects input {expected:?}, got {:?}",
                self.config.id(),
                input.dims()
            ))
            .into());
        }
        Ok(())
    }

    pub fn logits(&self, input: &Tensor) -> Result<Vec<f64>, ModelError> {
        self.check_input(input)?;
        Ok(match &self.network {
            Network::Cnn(net) => net.forward(input)?.logits.into_values(),
            Network::Rnn(net) => net.layer.forward(input)?.logits,
        })
    }

    /// Class probabilities.
    pub fn predict(&self, input: &Tensor) -> Result<Vec<f64>, ModelError> {
        Ok(softmax(&self.logits(input)?))
    }

    /// Features → standardised input tensor using this model's statistics.
    pub fn prepare(&self, fm: &FeatureMatrix) -> Result<Tensor, ModelError> {
        prepare_input(fm, &self.config, self.standardizer.as_ref())
    }

    /// Forward + backward for one example. Accumulates `scale · dL/dθ` into
    /// `grads` and returns `(loss, probabilities)`.
    pub fn accumulate_gradients(
        &self,
        input: &Tensor,
        label: usize,
        scale: f64,
        grads: &mut [Tensor],
    ) -> Result<(f64, Vec<f64>), ModelError> {
        self.check_input(input)?;
        let probs = match &self.network {
            Network::Cnn(net) => {
                let trace = net.forward(input)?;
                let probs = softmax(trace.logits.values());
                let g = scaled_logit_grad(&probs, label, scale)?;
                net.backward(&trace, Tensor::from_vec(g), grads)?;
                probs
            }
            Network::Rnn(net) => {
                let trace = net.layer.forward(input)?;
                let probs = softmax(&trace.logits);
                let g = scaled_logit_grad(&probs, label, scale)?;
                net.layer.backward(input, &trace, &g, grads)?;
                probs
            }
        };
        Ok((nn::cross_entropy(&probs, label)?, probs))
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match &self.network {
            Network::Cnn(net) => net.params(),
            Network::Rnn(net) => net.layer.params().to_vec(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match &mut self.network {
            Network::Cnn(net) => net.params_mut(),
            Network::Rnn(net) => net.layer.params_mut().into_iter().collect(),
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        match &self.network {
            Network::Cnn(net) => net.param_names(),
            Network::Rnn(_) => ["rnn.w_xh", "rnn.w_hh", "rnn.b_h", "rnn.w_hy", "rnn.b_y"]
                .map(String::from)
                .to_vec(),
        }
    }

    /// Zeroed gradient buffers matching [`Model::params`].
    pub fn zero_grads(&self) -> Vec<Tensor> {
        self.params().into_iter().map(|p| Tensor::zeros(p.dims())).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn param_shapes(&self) -> Vec<ParamShape> {
        self.param_names()
            .into_iter()
            .zip(self.params())
            .map(|(name, p)| ParamShape {
                name,
                dims: p.dims().to_vec(),
            })
            .collect()
    }

    /// Rounds every parameter through `f32`, the checkpoint precision.
    pub fn quantize_f32(&mut self) {
        for p in self.params_mut() {
            p.quantize_f32();
        }
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.params().iter().flat_map(|p| p.values().iter().copied()).collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<(), ModelError> {
        let total = self.param_count();
        if flat.len() != total {
            return Err(NnError::Checkpoint(format!(
                "weight blob has {} values, model needs {total}",
                flat.len()
            ))
            .into());
        }
        let mut offset = 0;
        for p in self.params_mut() {
            let n = p.len();
            p.values_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn to_checkpoint_bytes(&self, meta: &CheckpointMeta) -> Result<Vec<u8>, ModelError> {
        let header = CheckpointHeader {
            format: CHECKPOINT_FORMAT,
            architecture: self.config.arch,
            feature_kind: self.config.feature_kind,
            config: self.config.clone(),
            layer_shapes: self.param_shapes(),
            standardizer: self.standardizer.clone(),
            meta: meta.clone(),
        };
        Ok(nn::encode_checkpoint(
            &header,
            self.params().into_iter().map(|p| p.values()),
        )?)
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<(Self, CheckpointMeta), ModelError> {
        let (header, weights): (CheckpointHeader, Vec<f64>) = nn::decode_checkpoint(bytes)?;
        if header.format != CHECKPOINT_FORMAT {
            return Err(NnError::Checkpoint(format!("unsupported format {}", header.format)).into());
        }
        let mut model = Model::build(&header.config, 0)?;
        if model.param_shapes() != header.layer_shapes {
            return Err(NnError::Checkpoint(
                "declared layer shapes do not match the configured architecture".into(),
            )
            .into());
        }
        model.set_flat_params(&weights)?;
        model.standardizer = header.standardizer;
        Ok((model, header.meta))
    }

    pub fn save(&self, path: impl AsRef<Path>, meta: &CheckpointMeta) -> Result<(), ModelError> {
        let path = path.as_ref();
        fs::write(path, self.to_checkpoint_bytes(meta)?).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, CheckpointMeta), ModelError> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_checkpoint_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_frames_supports_three_full_stages() {
        let w = min_cnn_frames();
        assert_eq!(w, 22);
        let mut x = w;
        for _ in 0..3 {
            x = (x - 2) / 2;
        }
        assert!(x >= 1);
        let mut x = w - 1;
        let mut ok = true;
        for _ in 0..3 {
            if x < 4 {
                ok = false;
                break;
            }
            x = (x - 2) / 2;
        }
        assert!(!ok);
    }

    #[test]
    fn too_few_frames_is_reported() {
        let mut cfg = ModelConfig::new(FeatureKind::Mfcc, Architecture::Cnn);
        cfg.input_frames = 10;
        match Model::build(&cfg, 1) {
            Err(ModelError::InputTooSmall { frames: 10, min_frames: 22 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mfcc_cnn_shapes() {
        let model = Model::build(&ModelConfig::new(FeatureKind::Mfcc, Architecture::Cnn), 3).unwrap();
        let Network::Cnn(net) = &model.network else { panic!() };
        let kernels: Vec<_> = net.stages.iter().map(|s| s.conv.kernel()).collect();
        assert_eq!(kernels, vec![(3, 3), (3, 3), (1, 3)]);
        assert_eq!(net.hidden.inputs(), 64 * 35);
        let x = Tensor::zeros(&[1, 13, 300]);
        let p = model.predict(&x).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(model.predict(&Tensor::zeros(&[1, 13, 299])).is_err());
    }

    #[test]
    fn rnn_uses_final_state() {
        let model = Model::build(&ModelConfig::new(FeatureKind::Wavelet, Architecture::Rnn), 3).unwrap();
        assert_eq!(model.config.input_dims(), vec![32, 512]);
        assert_eq!(model.param_count(), 4 * 64 * 512 + 4 * 64 * 64 + 4 * 64 + 3 * 64 + 3);
    }

    #[test]
    fn prepare_pads_and_truncates() {
        let mut cfg = ModelConfig::new(FeatureKind::Mfcc, Architecture::Rnn);
        cfg.feature_dim = 2;
        cfg.input_frames = 3;
        let fm = FeatureMatrix::new(FeatureKind::Mfcc, "a", 2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let t = prepare_input(&fm, &cfg, None).unwrap();
        assert_eq!(t.dims(), &[3, 2]);
        assert_eq!(t.values(), &[1.0, 3.0, 2.0, 4.0, 0.0, 0.0]);
        let long = FeatureMatrix::new(FeatureKind::Mfcc, "b", 2, 6, (0..12).map(f64::from).collect());
        let t = prepare_input(&long, &cfg, None).unwrap();
        assert_eq!(t.values(), &[0.0, 6.0, 1.0, 7.0, 2.0, 8.0]);
        let wrong = FeatureMatrix::new(FeatureKind::Wavelet, "c", 2, 1, vec![0.0, 0.0]);
        assert!(matches!(
            prepare_input(&wrong, &cfg, None),
            Err(ModelError::FeatureKind { .. })
        ));
        let empty = FeatureMatrix::new(FeatureKind::Mfcc, "d", 2, 0, vec![]);
        assert!(matches!(
            prepare_input(&empty, &cfg, None),
            Err(ModelError::EmptyFeatures(_))
        ));
    }
}
