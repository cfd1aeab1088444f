use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NnError;

/// Dense row-major n-dimensional array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self, NnError> {
        let expected: usize = dims.iter().product();
        if expected != values.len() {
            return Err(NnError::Shape(format!(
                "dims {dims:?} need {expected} values, got {}",
                values.len()
            )));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self {
            dims: dims.to_vec(),
            values: vec![0.0; dims.iter().product()],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self {
            dims: vec![values.len()],
            values,
        }
    }

    /// Uniform in `[-bound, bound]`, rounded to `f32` so checkpoints hold the
    /// exact initial values.
    pub fn uniform(dims: &[usize], bound: f64, rng: &mut impl Rng) -> Self {
        let n = dims.iter().product();
        let values = (0..n)
            .map(|_| rng.gen_range(-bound..=bound) as f32 as f64)
            .collect();
        Self {
            dims: dims.to_vec(),
            values,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn reshape(mut self, dims: &[usize]) -> Result<Self, NnError> {
        if dims.iter().product::<usize>() != self.values.len() {
            return Err(NnError::Shape(format!(
                "cannot reshape {:?} to {dims:?}",
                self.dims
            )));
        }
        self.dims = dims.to_vec();
        Ok(self)
    }

    pub fn fill(&mut self, value: f64) {
        self.values.fill(value);
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Rounds every value through `f32`.
    pub fn quantize_f32(&mut self) {
        for v in &mut self.values {
            *v = *v as f32 as f64;
        }
    }
}
