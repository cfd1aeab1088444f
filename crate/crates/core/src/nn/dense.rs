use rand::Rng;

use super::{glorot_bound, Activation, NnError, Tensor};

/// Fully connected layer `y = f(W x + b)`; the input is read flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `outputs × inputs`
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl Dense {
    pub fn new(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self, NnError> {
        let &[m, _n] = weight.dims() else {
            return Err(NnError::Shape(format!(
                "dense weight must be 2-d, got {:?}",
                weight.dims()
            )));
        };
        if bias.dims() != [m] {
            return Err(NnError::Shape(format!(
                "dense bias {:?} does not match {m} outputs",
                bias.dims()
            )));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn init(inputs: usize, outputs: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        Self {
            weight: Tensor::uniform(&[outputs, inputs], glorot_bound(inputs, outputs), rng),
            bias: Tensor::zeros(&[outputs]),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.dims()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor, NnError> {
        let n = self.inputs();
        if input.len() != n {
            return Err(NnError::Shape(format!(
                "dense layer expects {n} inputs, got {}",
                input.len()
            )));
        }
        let x = input.values();
        let mut out: Vec<f64> = self
            .weight
            .values()
            .chunks_exact(n)
            .zip(self.bias.values())
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect();
        self.activation.apply(&mut out);
        Ok(Tensor::from_vec(out))
    }

    /// Gradients go into `grads[0]` (weight) and `grads[1]` (bias). The
    /// returned input gradient has the input's shape.
    pub fn backward(
        &self,
        input: &Tensor,
        output: &Tensor,
        grad_output: &Tensor,
        grads: &mut [Tensor],
    ) -> Result<Tensor, NnError> {
        let n = self.inputs();
        let mut dpre = grad_output.values().to_vec();
        self.activation.backprop(output.values(), &mut dpre);
        let x = input.values();
        let (gw, gb) = grads.split_at_mut(1);
        for ((grow, d), gbias) in gw[0]
            .values_mut()
            .chunks_exact_mut(n)
            .zip(&dpre)
            .zip(gb[0].values_mut())
        {
            *gbias += d;
            if *d != 0.0 {
                for (g, v) in grow.iter_mut().zip(x) {
                    *g += d * v;
                }
            }
        }
        let mut dx = vec![0.0; n];
        for (row, d) in self.weight.values().chunks_exact(n).zip(&dpre) {
            if *d != 0.0 {
                for (g, w) in dx.iter_mut().zip(row) {
                    *g += d * w;
                }
            }
        }
        Tensor::new(input.dims().to_vec(), dx)
    }

    pub fn params(&self) -> [&Tensor; 2] {
        [&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_layer() {
        let d = Dense::new(
            Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
            Tensor::zeros(&[2]),
            Activation::Identity,
        )
        .unwrap();
        assert_eq!(d.forward(&Tensor::from_vec(vec![-1.0, 2.0])).unwrap().values(), &[-1.0, 2.0]);
        let r = Dense { activation: Activation::Relu, ..d };
        assert_eq!(r.forward(&Tensor::from_vec(vec![-1.0, 2.0])).unwrap().values(), &[0.0, 2.0]);
    }

    #[test]
    fn dot_product_example() {
        let d = Dense::new(
            Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap(),
            Tensor::from_vec(vec![0.5]),
            Activation::Identity,
        )
        .unwrap();
        assert_eq!(d.forward(&Tensor::from_vec(vec![1.0, 2.0])).unwrap().values(), &[3.5]);
        assert!(d.forward(&Tensor::from_vec(vec![1.0])).is_err());
    }
}
