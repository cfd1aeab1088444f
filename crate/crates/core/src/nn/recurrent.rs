//! Single-layer recurrent network with an output projection.
//!
//! Simple cell:
//!   h_t = tanh(W_xh x_t + W_hh h_{t-1} + b_h)
//!   y_t = W_hy h_t + b_y
//!
//! LSTM cell (gate blocks stacked as input, forget, candidate, output):
//!   i, f, o = σ(·), g = tanh(·), c_t = f ⊙ c_{t-1} + i ⊙ g, h_t = o ⊙ tanh(c_t)
//!
//! Gradients use full backpropagation through time.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NnError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Simple,
    Lstm,
}

impl CellKind {
    /// Number of stacked gate blocks in the input/recurrent matrices.
    pub fn gates(self) -> usize {
        match self {
            CellKind::Simple => 1,
            CellKind::Lstm => 4,
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellKind::Simple => "simple",
            CellKind::Lstm => "lstm",
        })
    }
}

impl FromStr for CellKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "simple" | "simplernn" | "rnn" => Ok(CellKind::Simple),
            "lstm" => Ok(CellKind::Lstm),
            other => Err(format!("unknown cell kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentLayer {
    pub kind: CellKind,
    /// `gates·hidden × input_dim`
    pub w_xh: Tensor,
    /// `gates·hidden × hidden`
    pub w_hh: Tensor,
    /// `gates·hidden`
    pub b_h: Tensor,
    /// `outputs × hidden`
    pub w_hy: Tensor,
    /// `outputs`
    pub b_y: Tensor,
}

/// Hidden and (for LSTM) cell state after one step.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    pub h: Vec<f64>,
    /// Empty for the simple cell.
    pub c: Vec<f64>,
}

/// Everything the backward pass needs from one time step.
#[derive(Debug, Clone)]
struct StepTrace {
    /// Post-nonlinearity gate activations (`gates·hidden`).
    gates: Vec<f64>,
    state: RecurrentState,
    tanh_c: Vec<f64>,
}

/// Forward record of a whole sequence.
#[derive(Debug, Clone)]
pub struct SequenceTrace {
    steps: Vec<StepTrace>,
    pub logits: Vec<f64>,
}

impl SequenceTrace {
    pub fn final_state(&self) -> &RecurrentState {
        &self.steps.last().expect("sequence is non-empty").state
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn matvec_add(out: &mut [f64], m: &Tensor, v: &[f64]) {
    let cols = v.len();
    for (o, row) in out.iter_mut().zip(m.values().chunks_exact(cols)) {
        *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += mᵀ v`
fn matvec_t_add(out: &mut [f64], m: &Tensor, v: &[f64]) {
    let cols = out.len();
    for (row, &g) in m.values().chunks_exact(cols).zip(v) {
        if g != 0.0 {
            for (o, w) in out.iter_mut().zip(row) {
                *o += g * w;
            }
        }
    }
}

/// `grad += u vᵀ`
fn outer_add(grad: &mut Tensor, u: &[f64], v: &[f64]) {
    let cols = v.len();
    for (row, &a) in grad.values_mut().chunks_exact_mut(cols).zip(u) {
        if a != 0.0 {
            for (g, b) in row.iter_mut().zip(v) {
                *g += a * b;
            }
        }
    }
}

impl RecurrentLayer {
    pub fn new(
        kind: CellKind,
        w_xh: Tensor,
        w_hh: Tensor,
        b_h: Tensor,
        w_hy: Tensor,
        b_y: Tensor,
    ) -> Result<Self, NnError> {
        let layer = Self {
            kind,
            w_xh,
            w_hh,
            b_h,
            w_hy,
            b_y,
        };
        layer.check()?;
        Ok(layer)
    }

    fn check(&self) -> Result<(), NnError> {
        let gh = self.b_h.len();
        let hidden = gh / self.kind.gates();
        let ok = hidden > 0
            && gh == hidden * self.kind.gates()
            && self.w_xh.dims().len() == 2
            && self.w_xh.dims()[0] == gh
            && self.w_hh.dims() == [gh, hidden]
            && self.w_hy.dims().len() == 2
            && self.w_hy.dims()[1] == hidden
            && self.b_y.dims() == [self.w_hy.dims()[0]];
        if ok {
            Ok(())
        } else {
            Err(NnError::Shape(format!(
                "inconsistent {} layer: w_xh {:?}, w_hh {:?}, b_h {:?}, w_hy {:?}, b_y {:?}",
                self.kind,
                self.w_xh.dims(),
                self.w_hh.dims(),
                self.b_h.dims(),
                self.w_hy.dims(),
                self.b_y.dims()
            )))
        }
    }

    /// Uniform `±1/√hidden` weights; LSTM forget-gate bias starts at 1.
    pub fn init(
        kind: CellKind,
        input_dim: usize,
        hidden: usize,
        outputs: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let gh = kind.gates() * hidden;
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut b_h = Tensor::zeros(&[gh]);
        if kind == CellKind::Lstm {
            b_h.values_mut()[hidden..2 * hidden].fill(1.0);
        }
        Self {
            kind,
            w_xh: Tensor::uniform(&[gh, input_dim], bound, rng),
            w_hh: Tensor::uniform(&[gh, hidden], bound, rng),
            b_h,
            w_hy: Tensor::uniform(&[outputs, hidden], super::glorot_bound(hidden, outputs), rng),
            b_y: Tensor::zeros(&[outputs]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.dims()[1]
    }

    pub fn input_dim(&self) -> usize {
        self.w_xh.dims()[1]
    }

    pub fn outputs(&self) -> usize {
        self.w_hy.dims()[0]
    }

    pub fn zero_state(&self) -> RecurrentState {
        let c = match self.kind {
            CellKind::Simple => Vec::new(),
            CellKind::Lstm => vec![0.0; self.hidden()],
        };
        RecurrentState {
            h: vec![0.0; self.hidden()],
            c,
        }
    }

    fn step_trace(&self, x: &[f64], prev: &RecurrentState) -> Result<StepTrace, NnError> {
        if x.len() != self.input_dim() || prev.h.len() != self.hidden() {
            return Err(NnError::Shape(format!(
                "cell expects x[{}], h[{}]; got x[{}], h[{}]",
                self.input_dim(),
                self.hidden(),
                x.len(),
                prev.h.len()
            )));
        }
        let hidden = self.hidden();
        let mut pre = self.b_h.values().to_vec();
        matvec_add(&mut pre, &self.w_xh, x);
        matvec_add(&mut pre, &self.w_hh, &prev.h);

        match self.kind {
            CellKind::Simple => {
                let h: Vec<f64> = pre.iter().map(|v| v.tanh()).collect();
                Ok(StepTrace {
                    gates: h.clone(),
                    state: RecurrentState { h, c: Vec::new() },
                    tanh_c: Vec::new(),
                })
            }
            CellKind::Lstm => {
                if prev.c.len() != hidden {
                    return Err(NnError::Shape(format!(
                        "lstm cell state has {} units, expected {hidden}",
                        prev.c.len()
                    )));
                }
                let mut gates = pre;
                for (k, g) in gates.iter_mut().enumerate() {
                    *g = if (2 * hidden..3 * hidden).contains(&k) {
                        g.tanh()
                    } else {
                        sigmoid(*g)
                    };
                }
                let (i, rest) = gates.split_at(hidden);
                let (f, rest) = rest.split_at(hidden);
                let (g, o) = rest.split_at(hidden);
                let c: Vec<f64> = (0..hidden).map(|u| f[u] * prev.c[u] + i[u] * g[u]).collect();
                let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
                let h = (0..hidden).map(|u| o[u] * tanh_c[u]).collect();
                Ok(StepTrace {
                    gates,
                    state: RecurrentState { h, c },
                    tanh_c,
                })
            }
        }
    }

    fn project(&self, h: &[f64]) -> Vec<f64> {
        let mut y = self.b_y.values().to_vec();
        matvec_add(&mut y, &self.w_hy, h);
        y
    }

    /// One time step: returns the new state and the output `y_t`.
    pub fn step(&self, x: &[f64], prev: &RecurrentState) -> Result<(RecurrentState, Vec<f64>), NnError> {
        let trace = self.step_trace(x, prev)?;
        let y = self.project(&trace.state.h);
        Ok((trace.state, y))
    }

    /// Runs the sequence (`T × input_dim`) from a zero state; logits are the
    /// output at the final step.
    pub fn forward(&self, sequence: &Tensor) -> Result<SequenceTrace, NnError> {
        let d = self.input_dim();
        match sequence.dims() {
            &[t, dim] if t > 0 && dim == d => {}
            dims => {
                return Err(NnError::Shape(format!(
                    "recurrent layer expects T×{d} input, got {dims:?}"
                )))
            }
        }
        let mut state = self.zero_state();
        let mut steps = Vec::with_capacity(sequence.dims()[0]);
        for x in sequence.values().chunks_exact(d) {
            let trace = self.step_trace(x, &state)?;
            state = trace.state.clone();
            steps.push(trace);
        }
        let logits = self.project(&state.h);
        Ok(SequenceTrace { steps, logits })
    }

    /// Backpropagation through time from `dL/dlogits`. Gradients accumulate
    /// into `grads` in [`RecurrentLayer::params`] order; the returned tensor is
    /// `dL/dsequence`.
    pub fn backward(
        &self,
        sequence: &Tensor,
        trace: &SequenceTrace,
        grad_logits: &[f64],
        grads: &mut [Tensor],
    ) -> Result<Tensor, NnError> {
        let hidden = self.hidden();
        let d = self.input_dim();
        let [g_wxh, g_whh, g_bh, g_why, g_by] = grads else {
            return Err(NnError::Shape("recurrent layer needs 5 gradient buffers".into()));
        };
        let last = &trace.final_state().h;
        outer_add(g_why, grad_logits, last);
        for (g, v) in g_by.values_mut().iter_mut().zip(grad_logits) {
            *g += v;
        }
        let mut dh = vec![0.0; hidden];
        matvec_t_add(&mut dh, &self.w_hy, grad_logits);
        let mut dc = vec![0.0; if self.kind == CellKind::Lstm { hidden } else { 0 }];
        let mut dx_all = vec![0.0; sequence.len()];
        let zero = self.zero_state();

        for t in (0..trace.steps.len()).rev() {
            let step = &trace.steps[t];
            let prev = if t == 0 { &zero } else { &trace.steps[t - 1].state };
            let x = &sequence.values()[t * d..(t + 1) * d];

            let dpre: Vec<f64> = match self.kind {
                CellKind::Simple => step
                    .state
                    .h
                    .iter()
                    .zip(&dh)
                    .map(|(h, g)| g * (1.0 - h * h))
                    .collect(),
                CellKind::Lstm => {
                    let (i, rest) = step.gates.split_at(hidden);
                    let (f, rest) = rest.split_at(hidden);
                    let (g, o) = rest.split_at(hidden);
                    let mut dpre = vec![0.0; 4 * hidden];
                    for u in 0..hidden {
                        let tc = step.tanh_c[u];
                        let d_o = dh[u] * tc;
                        let dcu = dc[u] + dh[u] * o[u] * (1.0 - tc * tc);
                        let d_i = dcu * g[u];
                        let d_g = dcu * i[u];
                        let d_f = dcu * prev.c[u];
                        dc[u] = dcu * f[u];
                        dpre[u] = d_i * i[u] * (1.0 - i[u]);
                        dpre[hidden + u] = d_f * f[u] * (1.0 - f[u]);
                        dpre[2 * hidden + u] = d_g * (1.0 - g[u] * g[u]);
                        dpre[3 * hidden + u] = d_o * o[u] * (1.0 - o[u]);
                    }
                    dpre
                }
            };

            outer_add(g_wxh, &dpre, x);
            outer_add(g_whh, &dpre, &prev.h);
            for (g, v) in g_bh.values_mut().iter_mut().zip(&dpre) {
                *g += v;
            }
            matvec_t_add(&mut dx_all[t * d..(t + 1) * d], &self.w_xh, &dpre);
            dh.fill(0.0);
            matvec_t_add(&mut dh, &self.w_hh, &dpre);
        }
        Tensor::new(sequence.dims().to_vec(), dx_all)
    }

    pub fn params(&self) -> [&Tensor; 5] {
        [&self.w_xh, &self.w_hh, &self.b_h, &self.w_hy, &self.b_y]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor; 5] {
        [
            &mut self.w_xh,
            &mut self.w_hh,
            &mut self.b_h,
            &mut self.w_hy,
            &mut self.b_y,
        ]
    }
}
