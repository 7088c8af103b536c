//! LSTM cell and sequence network with backpropagation through time.
//!
//! Gate layout follows the usual formulation over the concatenated vector
//! `z_t = [h_{t-1}; x_t]`:
//!
//! ```text
//! f_t = σ(W_f z_t + b_f)        (forget gate)
//! i_t = σ(W_i z_t + b_i)        (input gate)
//! o_t = σ(W_o z_t + b_o)        (output gate)
//! g_t = tanh(W_c z_t + b_c)     (candidate cell)
//! c_t = f_t ∘ c_{t-1} + i_t ∘ g_t
//! h_t = o_t ∘ tanh(c_t)
//! ```
//!
//! The output head is a dense identity layer on the final hidden state.

use ndarray::{Array1, Array2};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{glorot_uniform, sigmoid, Activation, DenseLayer, InitScheme};

/// Hidden and cell state of one LSTM layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmState {
    pub h: Array1<f64>,
    pub c: Array1<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: Array1::zeros(hidden),
            c: Array1::zeros(hidden),
        }
    }
}

/// Gate parameters plus the output head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    /// Each gate matrix is `hidden × (hidden + input)`.
    pub w_f: Array2<f64>,
    pub w_i: Array2<f64>,
    pub w_o: Array2<f64>,
    pub w_c: Array2<f64>,
    pub b_f: Array1<f64>,
    pub b_i: Array1<f64>,
    pub b_o: Array1<f64>,
    pub b_c: Array1<f64>,
    pub hidden_size: usize,
    pub input_size: usize,
    pub head: DenseLayer,
}

impl LstmParams {
    pub fn new(
        input_size: usize,
        hidden_size: usize,
        output_size: usize,
        init: InitScheme,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let cat = hidden_size + input_size;
        Self {
            w_f: glorot_uniform(hidden_size, cat, rng),
            w_i: glorot_uniform(hidden_size, cat, rng),
            w_o: glorot_uniform(hidden_size, cat, rng),
            w_c: glorot_uniform(hidden_size, cat, rng),
            b_f: Array1::from_elem(hidden_size, init.forget_bias()),
            b_i: Array1::zeros(hidden_size),
            b_o: Array1::zeros(hidden_size),
            b_c: Array1::zeros(hidden_size),
            hidden_size,
            input_size,
            head: DenseLayer::new(hidden_size, output_size, Activation::Identity, rng),
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            w_f: Array2::zeros(self.w_f.raw_dim()),
            w_i: Array2::zeros(self.w_i.raw_dim()),
            w_o: Array2::zeros(self.w_o.raw_dim()),
            w_c: Array2::zeros(self.w_c.raw_dim()),
            b_f: Array1::zeros(self.hidden_size),
            b_i: Array1::zeros(self.hidden_size),
            b_o: Array1::zeros(self.hidden_size),
            b_c: Array1::zeros(self.hidden_size),
            hidden_size: self.hidden_size,
            input_size: self.input_size,
            head: self.head.zeros_like(),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.head.output_dim()
    }

    /// Run the cell over `steps` in order from a zero state and apply the
    /// head to the final hidden state.
    pub fn forward_sequence(&self, steps: &[&[f64]]) -> Result<Vec<f64>> {
        if steps.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let mut state = LstmState::zeros(self.hidden_size);
        for x in steps {
            state = lstm_cell_step(x, &state, self)?;
        }
        let (_, out) = self.head.forward(&state.h);
        Ok(out.to_vec())
    }

    /// Forward from a flattened windowed row (`window × input_size`,
    /// step-major).
    pub fn forward_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        let steps = split_steps(row, self.input_size)?;
        self.forward_sequence(&steps)
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        for w in [&self.w_f, &self.w_i, &self.w_o, &self.w_c] {
            flat.extend(w.iter());
        }
        for b in [&self.b_f, &self.b_i, &self.b_o, &self.b_c] {
            flat.extend(b.iter());
        }
        flat.extend(self.head.weights.iter());
        flat.extend(self.head.biases.iter());
        flat
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let mut cursor = 0;
        for w in [&mut self.w_f, &mut self.w_i, &mut self.w_o, &mut self.w_c] {
            for v in w.iter_mut() {
                *v = flat[cursor];
                cursor += 1;
            }
        }
        for b in [&mut self.b_f, &mut self.b_i, &mut self.b_o, &mut self.b_c] {
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

    /// BPTT for one sample; returns its loss contribution.
    fn backward_sequence(
        &self,
        steps: &[&[f64]],
        target: &[f64],
        denom: f64,
        grads: &mut LstmParams,
    ) -> Result<f64> {
        let h = self.hidden_size;
        let mut state = LstmState::zeros(h);
        let mut caches = Vec::with_capacity(steps.len());
        for x in steps {
            let (next, cache) = cell_forward(x, &state, self)?;
            caches.push(cache);
            state = next;
        }
        let (head_pre, head_out) = self.head.forward(&state.h);

        let mut loss = 0.0;
        let mut delta = Array1::zeros(self.output_dim());
        for (k, t) in target.iter().enumerate() {
            let diff = head_out[k] - t;
            loss += diff * diff / denom;
            delta[k] = 2.0 * diff / denom;
        }
        let mut dh = self
            .head
            .backward(&state.h, &head_pre, &head_out, &delta, &mut grads.head);
        let mut dc: Array1<f64> = Array1::zeros(h);

        for cache in caches.iter().rev() {
            let StepCache {
                z,
                f,
                i,
                o,
                g,
                c_prev,
                tanh_c,
            } = cache;
            // dh and dc arrive from the future (or the head at the last step)
            let do_gate = &dh * tanh_c;
            let dc_total = &dc + &(&dh * o * &tanh_c.mapv(|v| 1.0 - v * v));
            let df = &dc_total * c_prev;
            let di = &dc_total * g;
            let dg = &dc_total * i;

            let dpre_f = &df * f * &f.mapv(|v| 1.0 - v);
            let dpre_i = &di * i * &i.mapv(|v| 1.0 - v);
            let dpre_o = &do_gate * o * &o.mapv(|v| 1.0 - v);
            let dpre_g = &dg * &g.mapv(|v| 1.0 - v * v);

            accumulate_outer(&mut grads.w_f, &dpre_f, z);
            accumulate_outer(&mut grads.w_i, &dpre_i, z);
            accumulate_outer(&mut grads.w_o, &dpre_o, z);
            accumulate_outer(&mut grads.w_c, &dpre_g, z);
            grads.b_f += &dpre_f;
            grads.b_i += &dpre_i;
            grads.b_o += &dpre_o;
            grads.b_c += &dpre_g;

            let dz = self.w_f.t().dot(&dpre_f)
                + self.w_i.t().dot(&dpre_i)
                + self.w_o.t().dot(&dpre_o)
                + self.w_c.t().dot(&dpre_g);
            dh = dz.slice(ndarray::s![..h]).to_owned();
            dc = &dc_total * f;
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

pub(crate) fn split_steps(row: &[f64], input_size: usize) -> Result<Vec<&[f64]>> {
    if input_size == 0 || !row.len().is_multiple_of(input_size) {
        return Err(Error::DimensionMismatch {
            expected: input_size.max(1),
            got: row.len(),
        });
    }
    Ok(row.chunks(input_size).collect())
}

struct StepCache {
    /// `[h_{t-1}; x_t]`
    z: Array1<f64>,
    f: Array1<f64>,
    i: Array1<f64>,
    o: Array1<f64>,
    g: Array1<f64>,
    c_prev: Array1<f64>,
    tanh_c: Array1<f64>,
}

fn concat(h: &Array1<f64>, x: &[f64]) -> Array1<f64> {
    Array1::from_iter(h.iter().copied().chain(x.iter().copied()))
}

fn cell_forward(
    x: &[f64],
    state: &LstmState,
    params: &LstmParams,
) -> Result<(LstmState, StepCache)> {
    if x.len() != params.input_size {
        return Err(Error::DimensionMismatch {
            expected: params.input_size,
            got: x.len(),
        });
    }
    if state.h.len() != params.hidden_size || state.c.len() != params.hidden_size {
        return Err(Error::DimensionMismatch {
            expected: params.hidden_size,
            got: state.h.len(),
        });
    }
    let z = concat(&state.h, x);
    let f = (params.w_f.dot(&z) + &params.b_f).mapv(sigmoid);
    let i = (params.w_i.dot(&z) + &params.b_i).mapv(sigmoid);
    let o = (params.w_o.dot(&z) + &params.b_o).mapv(sigmoid);
    let g = (params.w_c.dot(&z) + &params.b_c).mapv(f64::tanh);
    let c = &f * &state.c + &i * &g;
    let tanh_c = c.mapv(f64::tanh);
    let h = &o * &tanh_c;
    Ok((
        LstmState { h, c },
        StepCache {
            z,
            f,
            i,
            o,
            g,
            c_prev: state.c.clone(),
            tanh_c,
        },
    ))
}

/// One cell update per the gate equations above.
pub fn lstm_cell_step(x: &[f64], state: &LstmState, params: &LstmParams) -> Result<LstmState> {
    cell_forward(x, state, params).map(|(next, _)| next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn scalar_params() -> LstmParams {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = LstmParams::new(1, 1, 1, InitScheme::GlorotUniformStrict, &mut rng);
        let flat = vec![0.0; p.params_flat().len()];
        p.set_params_flat(&flat);
        p
    }

    #[test]
    fn forget_bias_follows_init_scheme() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let default_init = LstmParams::new(2, 3, 1, InitScheme::GlorotUniform, &mut rng);
        assert!(default_init.b_f.iter().all(|b| *b == 1.0));
        let strict = LstmParams::new(2, 3, 1, InitScheme::GlorotUniformStrict, &mut rng);
        assert!(strict.b_f.iter().all(|b| *b == 0.0));
    }

    #[test]
    fn zero_params_zero_state_stay_zero() {
        let p = scalar_params();
        let next = lstm_cell_step(&[0.0], &LstmState::zeros(1), &p).unwrap();
        assert_eq!(next.h[0], 0.0);
        assert_eq!(next.c[0], 0.0);
    }

    #[test]
    fn scalar_hand_evaluation() {
        // All-zero params with c_prev = 1: every gate is σ(0) = 0.5, the
        // candidate is tanh(0) = 0, so c = 0.5 and h = 0.5·tanh(0.5).
        let p = scalar_params();
        let state = LstmState {
            h: ndarray::arr1(&[0.0]),
            c: ndarray::arr1(&[1.0]),
        };
        let next = lstm_cell_step(&[0.0], &state, &p).unwrap();
        assert!((next.c[0] - 0.5).abs() < 1e-12);
        assert!((next.h[0] - 0.231_058_578_630_004_9).abs() < 1e-9);
    }

    #[test]
    fn saturated_forget_gate_preserves_cell() {
        let mut p = scalar_params();
        p.b_f = ndarray::arr1(&[10.0]);
        let state = LstmState {
            h: ndarray::arr1(&[0.0]),
            c: ndarray::arr1(&[0.8]),
        };
        let next = lstm_cell_step(&[0.0], &state, &p).unwrap();
        assert!((next.c[0] - 0.8).abs() < 1e-4);
    }

    #[test]
    fn forward_sequence_matches_chained_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = LstmParams::new(1, 1, 1, InitScheme::GlorotUniform, &mut rng);
        let x1 = [0.7];
        let x2 = [-0.3];
        // explicit two-step hand chain
        let s1 = lstm_cell_step(&x1, &LstmState::zeros(1), &p).unwrap();
        let s2 = lstm_cell_step(&x2, &s1, &p).unwrap();
        let (_, head_out) = p.head.forward(&s2.h);
        let seq = p.forward_sequence(&[&x1, &x2]).unwrap();
        assert_eq!(seq, head_out.to_vec());
    }

    #[test]
    fn zero_params_output_is_head_bias() {
        let mut p = scalar_params();
        p.head.biases = ndarray::arr1(&[2.5]);
        let out = p.forward_sequence(&[&[5.0], &[1.0], &[-3.0]]).unwrap();
        assert_eq!(out, vec![2.5]);
    }

    #[test]
    fn empty_window_rejected() {
        let p = scalar_params();
        assert!(p.forward_sequence(&[]).is_err());
    }

    #[test]
    fn hidden_state_stays_in_open_unit_interval() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let p = LstmParams::new(3, 4, 1, InitScheme::GlorotUniform, &mut rng);
            let mut state = LstmState::zeros(4);
            for _ in 0..50 {
                let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
                let prev_c = state.c.clone();
                state = lstm_cell_step(&x, &state, &p).unwrap();
                for &h in state.h.iter() {
                    assert!(h > -1.0 && h < 1.0);
                }
                // |c_t| <= |c_{t-1}| + 1 since f, i ∈ (0,1) and |tanh| < 1
                for (c, pc) in state.c.iter().zip(prev_c.iter()) {
                    assert!(c.abs() <= pc.abs() + 1.0);
                }
            }
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = scalar_params();
        assert!(lstm_cell_step(&[1.0, 2.0], &LstmState::zeros(1), &p).is_err());
    }
}
