//! Multi-layer perceptron: a stack of dense layers with an identity-output
//! head, trained by plain backpropagation.

use ndarray::Array1;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Activation, DenseLayer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    /// Hidden layers followed by the identity output layer.
    pub layers: Vec<DenseLayer>,
}

impl MlpModel {
    /// Build `input → hidden... → output` with the given hidden activation;
    /// the output layer is always identity.
    pub fn new(
        input: usize,
        hidden: &[usize],
        output: usize,
        activation: Activation,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input;
        for &width in hidden {
            layers.push(DenseLayer::new(prev, width, activation, rng));
            prev = width;
        }
        layers.push(DenseLayer::new(prev, output, Activation::Identity, rng));
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }

    /// Nested `f(Wx + b)` composition.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut current = Array1::from_iter(x.iter().copied());
        for layer in &self.layers {
            let (_, out) = layer.forward(&current);
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: "mlp forward intermediate (exploding weights)".into(),
                });
            }
            current = out;
        }
        Ok(current.to_vec())
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        for layer in &self.layers {
            flat.extend(layer.weights.iter());
            flat.extend(layer.biases.iter());
        }
        flat
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let mut cursor = 0;
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut() {
                *w = flat[cursor];
                cursor += 1;
            }
            for b in layer.biases.iter_mut() {
                *b = flat[cursor];
                cursor += 1;
            }
        }
        debug_assert_eq!(cursor, flat.len());
    }

    pub fn loss_and_grad(&self, rows: &[&[f64]], targets: &[&[f64]]) -> Result<(f64, Vec<f64>)> {
        let mut grads: Vec<DenseLayer> = self.layers.iter().map(DenseLayer::zeros_like).collect();
        let denom = (rows.len() * self.output_dim()) as f64;
        let mut loss = 0.0;
        for (row, target) in rows.iter().zip(targets) {
            if row.len() != self.input_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.input_dim(),
                    got: row.len(),
                });
            }
            // forward with caches
            let mut inputs: Vec<Array1<f64>> = Vec::with_capacity(self.layers.len());
            let mut pres: Vec<Array1<f64>> = Vec::with_capacity(self.layers.len());
            let mut outs: Vec<Array1<f64>> = Vec::with_capacity(self.layers.len());
            let mut current = Array1::from_iter(row.iter().copied());
            for layer in &self.layers {
                let (pre, out) = layer.forward(&current);
                inputs.push(current);
                pres.push(pre);
                outs.push(out.clone());
                current = out;
            }
            let prediction = outs.last().unwrap();
            let mut delta = Array1::zeros(self.output_dim());
            for (k, t) in target.iter().enumerate() {
                let diff = prediction[k] - t;
                loss += diff * diff / denom;
                delta[k] = 2.0 * diff / denom;
            }
            for l in (0..self.layers.len()).rev() {
                delta =
                    self.layers[l].backward(&inputs[l], &pres[l], &outs[l], &delta, &mut grads[l]);
            }
        }
        let mut flat = Vec::new();
        for g in &grads {
            flat.extend(g.weights.iter());
            flat.extend(g.biases.iter());
        }
        Ok((loss, flat))
    }
}

/// Free-function form of the forward pass.
pub fn mlp_forward(model: &MlpModel, x: &[f64]) -> Result<Vec<f64>> {
    model.forward(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2};

    fn layer(w: Vec<Vec<f64>>, b: Vec<f64>, activation: Activation) -> DenseLayer {
        let rows = w.len();
        let cols = w[0].len();
        DenseLayer {
            weights: ndarray::Array2::from_shape_vec((rows, cols), w.concat()).unwrap(),
            biases: arr1(&b),
            activation,
        }
    }

    #[test]
    fn identity_network_passes_input_through() {
        let model = MlpModel {
            layers: vec![
                layer(
                    vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                    vec![0.0, 0.0],
                    Activation::Identity,
                ),
                layer(
                    vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                    vec![0.0, 0.0],
                    Activation::Identity,
                ),
            ],
        };
        assert_eq!(model.forward(&[3.0, -2.0]).unwrap(), vec![3.0, -2.0]);
    }

    #[test]
    fn zero_weights_yield_output_bias() {
        let model = MlpModel {
            layers: vec![
                layer(vec![vec![0.0], vec![0.0]], vec![0.0, 0.0], Activation::Tanh),
                layer(vec![vec![0.0, 0.0]], vec![7.5], Activation::Identity),
            ],
        };
        assert_eq!(model.forward(&[123.0]).unwrap(), vec![7.5]);
    }

    #[test]
    fn hand_computed_relu_network() {
        // One hidden relu neuron: w=[2], b=−1; head w=[3], b=0.
        // x = 1 → 3·relu(2·1 − 1) = 3.
        let model = MlpModel {
            layers: vec![
                layer(vec![vec![2.0]], vec![-1.0], Activation::Relu),
                layer(vec![vec![3.0]], vec![0.0], Activation::Identity),
            ],
        };
        assert_eq!(model.forward(&[1.0]).unwrap(), vec![3.0]);
        // x = 0 → relu(−1) = 0 → head bias 0
        assert_eq!(model.forward(&[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let model = MlpModel {
            layers: vec![layer(vec![vec![1.0, 1.0]], vec![0.0], Activation::Identity)],
        };
        assert!(model.forward(&[1.0]).is_err());
    }

    #[test]
    fn non_finite_intermediate_detected() {
        let model = MlpModel {
            layers: vec![layer(vec![vec![f64::MAX]], vec![0.0], Activation::Identity)],
        };
        assert!(matches!(
            model.forward(&[f64::MAX]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn flat_param_round_trip() {
        let mut model = MlpModel {
            layers: vec![
                layer(
                    vec![vec![1.0, 2.0], vec![3.0, 4.0]],
                    vec![5.0, 6.0],
                    Activation::Tanh,
                ),
                layer(vec![vec![7.0, 8.0]], vec![9.0], Activation::Identity),
            ],
        };
        let flat = model.params_flat();
        assert_eq!(flat, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let doubled: Vec<f64> = flat.iter().map(|v| v * 2.0).collect();
        model.set_params_flat(&doubled);
        assert_eq!(model.layers[0].weights, arr2(&[[2.0, 4.0], [6.0, 8.0]]));
        assert_eq!(model.layers[1].biases, arr1(&[18.0]));
    }
}
