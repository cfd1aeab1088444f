use serde::{Deserialize, Serialize};

use super::{NnError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for one parameter list, with bias-corrected updates:
///
/// ```text
/// m ← β1 m + (1-β1) g        v ← β2 v + (1-β2) g²
/// p ← p − lr · (m / (1-β1^t)) / (√(v / (1-β2^t)) + ε)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Tensor>) -> Result<Self, NnError> {
        let ok = |b: f64| b > 0.0 && b < 1.0;
        if !ok(config.beta1) || !ok(config.beta2) {
            return Err(NnError::Config(format!(
                "Adam betas must lie in (0, 1): {} {}",
                config.beta1, config.beta2
            )));
        }
        let (m, v) = params
            .into_iter()
            .map(|p| (vec![0.0; p.len()], vec![0.0; p.len()]))
            .unzip();
        Ok(Self { config, t: 0, m, v })
    }

    /// Applies one update to every parameter and increments `t` once.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<(), NnError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NnError::Shape(format!(
                "Adam tracks {} parameters, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(NnError::Shape(format!(
                    "parameter of {} values paired with gradient of {}",
                    p.len(),
                    g.len()
                )));
            }
        }

        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((p, &g), m), v) in p
                .values_mut()
                .iter_mut()
                .zip(g.values())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = Tensor::from_vec(vec![0.3, -1.2]);
        let mut state = AdamState::new(AdamConfig::default(), [&p]).unwrap();
        for _ in 0..5 {
            state.step(&mut [&mut p], &[Tensor::zeros(&[2])]).unwrap();
        }
        assert_eq!(p.values(), &[0.3, -1.2]);
        assert_eq!(state.t, 5);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = Tensor::from_vec(vec![1.0]);
        let mut state = AdamState::new(AdamConfig::default(), [&p]).unwrap();
        state.step(&mut [&mut p], &[Tensor::from_vec(vec![1.0])]).unwrap();
        let moved = 1.0 - p.values()[0];
        assert!((moved - 0.001 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn identical_states_step_identically() {
        let mut a = Tensor::from_vec(vec![0.5, 0.25]);
        let mut b = a.clone();
        let g = [Tensor::from_vec(vec![0.1, -3.0])];
        let mut sa = AdamState::new(AdamConfig::default(), [&a]).unwrap();
        let mut sb = sa.clone();
        sa.step(&mut [&mut a], &g).unwrap();
        sb.step(&mut [&mut b], &g).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
    }

    #[test]
    fn rejects_bad_betas_and_shapes() {
        let p = Tensor::from_vec(vec![1.0]);
        let cfg = AdamConfig {
            beta1: 1.0,
            ..Default::default()
        };
        assert!(AdamState::new(cfg, [&p]).is_err());
        let mut p = p;
        let mut s = AdamState::new(AdamConfig::default(), [&p]).unwrap();
        assert!(s.step(&mut [&mut p], &[Tensor::zeros(&[2])]).is_err());
    }
}
