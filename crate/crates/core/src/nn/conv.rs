//! Valid (unpadded) stride-1 convolution and max pooling over
//! `channels × height × width` tensors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{glorot_bound, Activation, NnError, Tensor};

/// Kernel size used by every convolution unless an input axis is smaller.
pub const KERNEL: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    /// `out_ch × in_ch × kh × kw`
    pub weight: Tensor,
    /// `out_ch`
    pub bias: Tensor,
    pub activation: Activation,
}

fn chw(t: &Tensor) -> Result<(usize, usize, usize), NnError> {
    match t.dims() {
        &[c, h, w] => Ok((c, h, w)),
        d => Err(NnError::Shape(format!("expected a 3-d tensor, got {d:?}"))),
    }
}

impl Conv2d {
    pub fn new(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self, NnError> {
        let &[out_ch, in_ch, kh, kw] = weight.dims() else {
            return Err(NnError::Shape(format!(
                "conv weight must be 4-d, got {:?}",
                weight.dims()
            )));
        };
        if in_ch * kh * kw == 0 || out_ch == 0 {
            return Err(NnError::Shape("conv layer has zero fan-in or no filters".into()));
        }
        if bias.dims() != [out_ch] {
            return Err(NnError::Shape(format!(
                "conv bias {:?} does not match {out_ch} filters",
                bias.dims()
            )));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init(
        in_ch: usize,
        out_ch: usize,
        kernel: (usize, usize),
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        let (kh, kw) = kernel;
        let bound = glorot_bound(in_ch * kh * kw, out_ch * kh * kw);
        Self {
            weight: Tensor::uniform(&[out_ch, in_ch, kh, kw], bound, rng),
            bias: Tensor::zeros(&[out_ch]),
            activation,
        }
    }

    pub fn kernel(&self) -> (usize, usize) {
        (self.weight.dims()[2], self.weight.dims()[3])
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dims()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn output_dims(&self, input: &[usize]) -> Result<[usize; 3], NnError> {
        let (kh, kw) = self.kernel();
        match *input {
            [c, h, w] if c == self.in_channels() && h >= kh && w >= kw => {
                Ok([self.out_channels(), h - kh + 1, w - kw + 1])
            }
            _ => Err(NnError::Shape(format!(
                "conv with {} input channels and {kh}x{kw} kernel cannot take {input:?}",
                self.in_channels()
            ))),
        }
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor, NnError> {
        let [oc, ho, wo] = self.output_dims(input.dims())?;
        let patches = Patches::new(input, self.kernel(), ho, wo)?;
        let k = patches.rows();
        let np = ho * wo;
        let wt = self.weight.values();
        let mut out = vec![0.0; oc * np];
        for (o, plane) in out.chunks_exact_mut(np).enumerate() {
            plane.fill(self.bias.values()[o]);
        }
        let mut col = Vec::new();
        for p0 in (0..np).step_by(TILE) {
            let len = TILE.min(np - p0);
            patches.gather(p0, len, &mut col);
            for o in 0..oc {
                let dst = &mut out[o * np + p0..][..len];
                for (r, &kv) in wt[o * k..(o + 1) * k].iter().enumerate() {
                    axpy(kv, &col[r * len..(r + 1) * len], dst);
                }
            }
        }
        self.activation.apply(&mut out);
        Tensor::new(vec![oc, ho, wo], out)
    }

    /// Accumulates `dL/dweight` and `dL/dbias` into `grads` (same order as
    /// [`Conv2d::params`]) and returns `dL/dinput` when `want_input_grad`.
    pub fn backward(
        &self,
        input: &Tensor,
        output: &Tensor,
        grad_output: &Tensor,
        grads: &mut [Tensor],
        want_input_grad: bool,
    ) -> Result<Option<Tensor>, NnError> {
        let (oc, ho, wo) = chw(output)?;
        let patches = Patches::new(input, self.kernel(), ho, wo)?;
        let k = patches.rows();
        let np = ho * wo;
        let mut dpre = grad_output.values().to_vec();
        self.activation.backprop(output.values(), &mut dpre);

        let wt = self.weight.values();
        let mut dx = if want_input_grad {
            vec![0.0; input.len()]
        } else {
            Vec::new()
        };
        let (gw, gb) = grads.split_at_mut(1);
        let gw = gw[0].values_mut();
        let gb = gb[0].values_mut();
        for (o, plane) in dpre.chunks_exact(np).enumerate() {
            gb[o] += plane.iter().sum::<f64>();
        }

        let (mut col, mut dcol) = (Vec::new(), Vec::new());
        for p0 in (0..np).step_by(TILE) {
            let len = TILE.min(np - p0);
            patches.gather(p0, len, &mut col);
            if want_input_grad {
                dcol.clear();
                dcol.resize(k * len, 0.0);
            }
            for o in 0..oc {
                let g = &dpre[o * np + p0..][..len];
                for r in 0..k {
                    gw[o * k + r] += dot(g, &col[r * len..(r + 1) * len]);
                    if want_input_grad {
                        axpy(wt[o * k + r], g, &mut dcol[r * len..(r + 1) * len]);
                    }
                }
            }
            if want_input_grad {
                patches.scatter_add(p0, len, &dcol, &mut dx);
            }
        }
        if want_input_grad {
            Ok(Some(Tensor::new(input.dims().to_vec(), dx)?))
        } else {
            Ok(None)
        }
    }

    pub fn params(&self) -> [&Tensor; 2] {
        [&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

/// Output positions processed per im2col tile.
const TILE: usize = 256;

/// Receptive fields of a valid convolution, materialised one tile of output
/// positions at a time as a `(c·kh·kw) × len` matrix.
struct Patches<'a> {
    x: &'a [f64],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    wo: usize,
}

impl<'a> Patches<'a> {
    fn new(input: &'a Tensor, (kh, kw): (usize, usize), ho: usize, wo: usize) -> Result<Self, NnError> {
        let (c, h, w) = chw(input)?;
        if h + 1 != ho + kh || w + 1 != wo + kw {
            return Err(NnError::Shape(format!(
                "input {:?} does not produce a {ho}x{wo} output with a {kh}x{kw} kernel",
                input.dims()
            )));
        }
        Ok(Self { x: input.values(), c, h, w, kh, kw, wo })
    }

    fn rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    /// Input index for patch row `r` at output position `(y, x)`.
    fn offsets(&self, r: usize) -> usize {
        let (c, rest) = (r / (self.kh * self.kw), r % (self.kh * self.kw));
        (c * self.h + rest / self.kw) * self.w + rest % self.kw
    }

    fn for_each(&self, p0: usize, len: usize, mut f: impl FnMut(usize, usize, usize)) {
        for r in 0..self.rows() {
            let base = self.offsets(r);
            let (mut y, mut x) = (p0 / self.wo, p0 % self.wo);
            for i in 0..len {
                f(r * len + i, base + y * self.w + x, i);
                x += 1;
                if x == self.wo {
                    x = 0;
                    y += 1;
                }
            }
        }
    }

    fn gather(&self, p0: usize, len: usize, col: &mut Vec<f64>) {
        col.clear();
        col.resize(self.rows() * len, 0.0);
        self.for_each(p0, len, |dst, src, _| col[dst] = self.x[src]);
    }

    fn scatter_add(&self, p0: usize, len: usize, dcol: &[f64], dx: &mut [f64]) {
        self.for_each(p0, len, |src, dst, _| dx[dst] += dcol[src]);
    }
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (d, s) in y.iter_mut().zip(x) {
        *d += a * s;
    }
}

/// Dot product over four independent lanes so the loop vectorises.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut lanes = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            lanes[l] += x[l] * y[l];
        }
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

/// Non-overlapping max pooling; trailing rows/columns that do not fill a
/// window are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaxPool2d {
    pub height: usize,
    pub width: usize,
}

impl MaxPool2d {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    pub fn output_dims(&self, input: &[usize]) -> Result<[usize; 3], NnError> {
        match *input {
            [c, h, w] if h >= self.height && w >= self.width && self.height > 0 && self.width > 0 => {
                Ok([c, h / self.height, w / self.width])
            }
            _ => Err(NnError::Shape(format!(
                "{}x{} pooling cannot take {input:?}",
                self.height, self.width
            ))),
        }
    }

    fn argmax(&self, input: &Tensor, c: usize, oy: usize, ox: usize) -> usize {
        let (_, h, w) = (input.dims()[0], input.dims()[1], input.dims()[2]);
        let x = input.values();
        let mut best = (c * h + oy * self.height) * w + ox * self.width;
        for dy in 0..self.height {
            for dx in 0..self.width {
                let idx = (c * h + oy * self.height + dy) * w + ox * self.width + dx;
                if x[idx] > x[best] {
                    best = idx;
                }
            }
        }
        best
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor, NnError> {
        let [c, ho, wo] = self.output_dims(input.dims())?;
        let x = input.values();
        let mut out = Vec::with_capacity(c * ho * wo);
        for ch in 0..c {
            for oy in 0..ho {
                for ox in 0..wo {
                    out.push(x[self.argmax(input, ch, oy, ox)]);
                }
            }
        }
        Tensor::new(vec![c, ho, wo], out)
    }

    /// Routes each output gradient to the first maximal input of its window.
    pub fn backward(&self, input: &Tensor, grad_output: &Tensor) -> Result<Tensor, NnError> {
        let [c, ho, wo] = self.output_dims(input.dims())?;
        let mut dx = vec![0.0; input.len()];
        let g = grad_output.values();
        for ch in 0..c {
            for oy in 0..ho {
                for ox in 0..wo {
                    dx[self.argmax(input, ch, oy, ox)] += g[(ch * ho + oy) * wo + ox];
                }
            }
        }
        Tensor::new(input.dims().to_vec(), dx)
    }
}
