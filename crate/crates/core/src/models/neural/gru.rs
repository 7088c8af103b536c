//! GRU cell and sequence network with backpropagation through time.
//!
//! Over `z_t = [h_{t-1}; x_t]`:
//!
//! ```text
//! r_t = σ(W_r z_t + b_r)                  (reset gate)
//! u_t = σ(W_z z_t + b_z)                  (update gate)
//! h'_t = tanh(W_h [r_t ∘ h_{t-1}; x_t] + b_h)
//! h_t = (1 − u_t) ∘ h_{t-1} + u_t ∘ h'_t
//! ```

use ndarray::{Array1, Array2};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::lstm::split_steps;
use super::{glorot_uniform, sigmoid, Activation, DenseLayer};

/// Gate parameters plus the output head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruParams {
    /// Each matrix is `hidden × (hidden + input)`.
    pub w_r: Array2<f64>,
    pub w_z: Array2<f64>,
    pub w_h: Array2<f64>,
    pub b_r: Array1<f64>,
    pub b_z: Array1<f64>,
    pub b_h: Array1<f64>,
    pub hidden_size: usize,
    pub input_size: usize,
    pub head: DenseLayer,
}

impl GruParams {
    pub fn new(
        input_size: usize,
        hidden_size: usize,
        output_size: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let cat = hidden_size + input_size;
        Self {
            w_r: glorot_uniform(hidden_size, cat, rng),
            w_z: glorot_uniform(hidden_size, cat, rng),
            w_h: glorot_uniform(hidden_size, cat, rng),
            b_r: Array1::zeros(hidden_size),
            b_z: Array1::zeros(hidden_size),
            b_h: Array1::zeros(hidden_size),
            hidden_size,
            input_size,
            head: DenseLayer::new(hidden_size, output_size, Activation::Identity, rng),
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            w_r: Array2::zeros(self.w_r.raw_dim()),
            w_z: Array2::zeros(self.w_z.raw_dim()),
            w_h: Array2::zeros(self.w_h.raw_dim()),
            b_r: Array1::zeros(self.hidden_size),
            b_z: Array1::zeros(self.hidden_size),
            b_h: Array1::zeros(self.hidden_size),
            hidden_size: self.hidden_size,
            input_size: self.input_size,
            head: self.head.zeros_like(),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.head.output_dim()
    }

    pub fn forward_sequence(&self, steps: &[&[f64]]) -> Result<Vec<f64>> {
        if steps.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let mut h = Array1::zeros(self.hidden_size);
        for x in steps {
            h = gru_cell_step(x, &h, self)?;
        }
        let (_, out) = self.head.forward(&h);
        Ok(out.to_vec())
    }

    /// Forward from a flattened windowed row (`window × input_size`).
    pub fn forward_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        let steps = split_steps(row, self.input_size)?;
        self.forward_sequence(&steps)
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        for w in [&self.w_r, &self.w_z, &self.w_h] {
            flat.extend(w.iter());
        }
        for b in [&self.b_r, &self.b_z, &self.b_h] {
            flat.extend(b.iter());
        }
        flat.extend(self.head.weights.iter());
        flat.extend(self.head.biases.iter());
        flat
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let mut cursor = 0;
        for w in [&mut self.w_r, &mut self.w_z, &mut self.w_h] {
            for v in w.iter_mut() {
                *v = flat[cursor];
                cursor += 1;
            }
        }
        for b in [&mut self.b_r, &mut self.b_z, &mut self.b_h] {
            for v in b.iter_mut() {
                *v = flat[cursor];
                cursor += 1;
            }
        }
        for v in self.head.weights.iter_mut() {
            *v = flat[cursor];
            cursor += 1;
        }
        for v in self.head.biases.iter_mut() {
            *v = flat[cursor];
            cursor += 1;
        }
        debug_assert_eq!(cursor, flat.len());
    }

    pub fn loss_and_grad(&self, rows: &[&[f64]], targets: &[&[f64]]) -> Result<(f64, Vec<f64>)> {
        let mut grads = self.zeros_like();
        let denom = (rows.len() * self.output_dim()) as f64;
        let mut loss = 0.0;
        for (row, target) in rows.iter().zip(targets) {
            let steps = split_steps(row, self.input_size)?;
            loss += self.backward_sequence(&steps, target, denom, &mut grads)?;
        }
        Ok((loss, grads.params_flat()))
    }

    fn backward_sequence(
        &self,
        steps: &[&[f64]],
        target: &[f64],
        denom: f64,
        grads: &mut GruParams,
    ) -> Result<f64> {
        let hs = self.hidden_size;
        let mut h = Array1::zeros(hs);
        let mut caches = Vec::with_capacity(steps.len());
        for x in steps {
            let (next, cache) = cell_forward(x, &h, self)?;
            caches.push(cache);
            h = next;
        }
        let (head_pre, head_out) = self.head.forward(&h);

        let mut loss = 0.0;
        let mut delta = Array1::zeros(self.output_dim());
        for (k, t) in target.iter().enumerate() {
            let diff = head_out[k] - t;
            loss += diff * diff / denom;
            delta[k] = 2.0 * diff / denom;
        }
        let mut dh = self
            .head
            .backward(&h, &head_pre, &head_out, &delta, &mut grads.head);

        for cache in caches.iter().rev() {
            let StepCache {
                zcat,
                u_in,
                r,
                z,
                hcand,
                h_prev,
            } = cache;
            let dz_gate = &dh * &(hcand - h_prev);
            let dhcand = &dh * z;
            let dpre_z = &dz_gate * z * &z.mapv(|v| 1.0 - v);
            let dpre_h = &dhcand * &hcand.mapv(|v| 1.0 - v * v);

            let du = self.w_h.t().dot(&dpre_h);
            let du_h = du.slice(ndarray::s![..hs]).to_owned();
            let dr = &du_h * h_prev;
            let dpre_r = &dr * r * &r.mapv(|v| 1.0 - v);

            accumulate_outer(&mut grads.w_z, &dpre_z, zcat);
            accumulate_outer(&mut grads.w_r, &dpre_r, zcat);
            accumulate_outer(&mut grads.w_h, &dpre_h, u_in);
            grads.b_z += &dpre_z;
            grads.b_r += &dpre_r;
            grads.b_h += &dpre_h;

            let via_gates = self.w_z.t().dot(&dpre_z) + self.w_r.t().dot(&dpre_r);
            dh = &dh * &z.mapv(|v| 1.0 - v)
                + &du_h * r
                + via_gates.slice(ndarray::s![..hs]).to_owned();
        }
        Ok(loss)
    }
}

fn accumulate_outer(acc: &mut Array2<f64>, col: &Array1<f64>, row: &Array1<f64>) {
    for (r, cv) in col.iter().enumerate() {
        if *cv == 0.0 {
            continue;
        }
        for (c, rv) in row.iter().enumerate() {
            acc[[r, c]] += cv * rv;
        }
    }
}

struct StepCache {
    /// `[h_{t-1}; x_t]`
    zcat: Array1<f64>,
    /// `[r ∘ h_{t-1}; x_t]`, the candidate's input
    u_in: Array1<f64>,
    r: Array1<f64>,
    /// update gate
    z: Array1<f64>,
    hcand: Array1<f64>,
    h_prev: Array1<f64>,
}

fn cell_forward(
    x: &[f64],
    h_prev: &Array1<f64>,
    params: &GruParams,
) -> Result<(Array1<f64>, StepCache)> {
    if x.len() != params.input_size {
        return Err(Error::DimensionMismatch {
            expected: params.input_size,
            got: x.len(),
        });
    }
    if h_prev.len() != params.hidden_size {
        return Err(Error::DimensionMismatch {
            expected: params.hidden_size,
            got: h_prev.len(),
        });
    }
    let zcat = Array1::from_iter(h_prev.iter().copied().chain(x.iter().copied()));
    let r = (params.w_r.dot(&zcat) + &params.b_r).mapv(sigmoid);
    let z = (params.w_z.dot(&zcat) + &params.b_z).mapv(sigmoid);
    let gated = &r * h_prev;
    let u_in = Array1::from_iter(gated.iter().copied().chain(x.iter().copied()));
    let hcand = (params.w_h.dot(&u_in) + &params.b_h).mapv(f64::tanh);
    let h = &z.mapv(|v| 1.0 - v) * h_prev + &z * &hcand;
    Ok((
        h,
        StepCache {
            zcat,
            u_in,
            r,
            z,
            hcand,
            h_prev: h_prev.clone(),
        },
    ))
}

/// One cell update per the gate equations above.
pub fn gru_cell_step(x: &[f64], h_prev: &Array1<f64>, params: &GruParams) -> Result<Array1<f64>> {
    cell_forward(x, h_prev, params).map(|(h, _)| h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn scalar_params() -> GruParams {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = GruParams::new(1, 1, 1, &mut rng);
        let flat = vec![0.0; p.params_flat().len()];
        p.set_params_flat(&flat);
        p
    }

    #[test]
    fn zero_params_zero_state_stay_zero() {
        let p = scalar_params();
        let h = gru_cell_step(&[0.0], &Array1::zeros(1), &p).unwrap();
        assert_eq!(h[0], 0.0);
    }

    #[test]
    fn scalar_hand_evaluation() {
        // All-zero params with h_prev = 1: update gate z = σ(0) = 0.5 and
        // candidate tanh(0) = 0, so h = (1 − 0.5)·1 + 0.5·0 = 0.5.
        let p = scalar_params();
        let h = gru_cell_step(&[0.0], &ndarray::arr1(&[1.0]), &p).unwrap();
        assert!((h[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn saturated_update_gate_keeps_hidden() {
        let mut p = scalar_params();
        p.b_z = ndarray::arr1(&[-10.0]); // z ≈ 0 keeps h_prev
        let h = gru_cell_step(&[2.0], &ndarray::arr1(&[0.7]), &p).unwrap();
        assert!((h[0] - 0.7).abs() < 1e-4);
    }

    #[test]
    fn hidden_is_convex_combination() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let p = GruParams::new(2, 3, 1, &mut rng);
            let mut h = Array1::zeros(3);
            for _ in 0..30 {
                let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-4.0..4.0)).collect();
                let (next, cache) = cell_forward(&x, &h, &p).unwrap();
                for k in 0..3 {
                    let lo = cache.h_prev[k].min(cache.hcand[k]);
                    let hi = cache.h_prev[k].max(cache.hcand[k]);
                    assert!(next[k] >= lo - 1e-12 && next[k] <= hi + 1e-12);
                }
                h = next;
            }
        }
    }

    #[test]
    fn forward_sequence_matches_chained_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = GruParams::new(2, 3, 2, &mut rng);
        let x1 = [0.2, -0.5];
        let x2 = [1.0, 0.1];
        let h1 = gru_cell_step(&x1, &Array1::zeros(3), &p).unwrap();
        let h2 = gru_cell_step(&x2, &h1, &p).unwrap();
        let (_, head_out) = p.head.forward(&h2);
        let seq = p.forward_sequence(&[&x1, &x2]).unwrap();
        assert_eq!(seq, head_out.to_vec());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = scalar_params();
        assert!(gru_cell_step(&[1.0, 2.0], &Array1::zeros(1), &p).is_err());
    }
}
