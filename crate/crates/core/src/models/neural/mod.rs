//! Neural model families trained from scratch: MLP, LSTM and GRU.
//!
//! All parameters are 64-bit floats. Training minimizes mean squared error on
//! scaled targets with plain SGD or Adam, per-epoch shuffling from a seeded
//! ChaCha8 stream, and global-norm gradient clipping. Gradients come from
//! hand-written backpropagation (through time for the recurrent cells) and
//! are validated against central finite differences by [`gradient_check`].

mod gru;
mod lstm;
mod mlp;

pub use gru::{gru_cell_step, GruParams};
pub use lstm::{lstm_cell_step, LstmParams, LstmState};
pub use mlp::{mlp_forward, MlpModel};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{MatrixLayout, SupervisedMatrix};
use crate::models::ModelKind;

/// Pointwise activation functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
            Activation::Sigmoid => sigmoid(v),
            Activation::Identity => v,
        }
    }

    /// Derivative given pre-activation and activation values.
    fn derivative(self, pre: f64, out: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - out * out,
            Activation::Sigmoid => out * (1.0 - out),
            Activation::Identity => 1.0,
        }
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// One fully connected layer, `f(Wx + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `out × in` weight matrix.
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(input: usize, output: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        Self {
            weights: glorot_uniform(output, input, rng),
            biases: Array1::zeros(output),
            activation,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weights: Array2::zeros(self.weights.raw_dim()),
            biases: Array1::zeros(self.biases.raw_dim()),
            activation: self.activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    /// Returns `(pre-activation, activation)`.
    pub fn forward(&self, x: &Array1<f64>) -> (Array1<f64>, Array1<f64>) {
        let pre = self.weights.dot(x) + &self.biases;
        let out = pre.mapv(|v| self.activation.apply(v));
        (pre, out)
    }

    /// Backward pass: given `d(loss)/d(out)`, accumulates parameter grads
    /// into `grads` and returns `d(loss)/d(x)`.
    pub fn backward(
        &self,
        x: &Array1<f64>,
        pre: &Array1<f64>,
        out: &Array1<f64>,
        delta_out: &Array1<f64>,
        grads: &mut DenseLayer,
    ) -> Array1<f64> {
        let dpre = Array1::from_iter(
            delta_out
                .iter()
                .zip(pre.iter().zip(out.iter()))
                .map(|(d, (p, o))| d * self.activation.derivative(*p, *o)),
        );
        for (r, dp) in dpre.iter().enumerate() {
            for (c, xv) in x.iter().enumerate() {
                grads.weights[[r, c]] += dp * xv;
            }
            grads.biases[r] += dp;
        }
        self.weights.t().dot(&dpre)
    }
}

/// Uniform Glorot init in `±sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot_uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..=bound))
}

/// Weight initialization family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Glorot-uniform matrices, zero biases, forget-gate bias 1.
    #[default]
    GlorotUniform,
    /// As above but without the forget-gate bias offset.
    GlorotUniformStrict,
}

impl InitScheme {
    pub(crate) fn forget_bias(self) -> f64 {
        match self {
            InitScheme::GlorotUniform => 1.0,
            InitScheme::GlorotUniformStrict => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

/// Training hyper-parameters shared by the three neural families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Global L2 norm ceiling for each batch gradient.
    pub gradient_clip_norm: f64,
    pub init_scheme: InitScheme,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.005,
            batch_size: 32,
            epochs: 100,
            seed: 0,
            gradient_clip_norm: 5.0,
            init_scheme: InitScheme::GlorotUniform,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig(
                "learning_rate must be finite and >= 0".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.gradient_clip_norm <= 0.0 {
            return Err(Error::InvalidConfig(
                "gradient_clip_norm must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Architecture of one neural model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralSpec {
    pub kind: ModelKind,
    /// MLP hidden layer widths, or the recurrent hidden size (first entry).
    pub hidden: Vec<usize>,
    /// Hidden-layer activation for the MLP; recurrent cells fix their gates.
    pub activation: Activation,
}

impl NeuralSpec {
    pub fn new(kind: ModelKind, hidden: Vec<usize>) -> Result<Self> {
        if !kind.is_neural() {
            return Err(Error::InvalidConfig(format!(
                "'{kind}' is not a neural model kind"
            )));
        }
        if hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::InvalidConfig(
                "hidden sizes must be nonempty and positive".into(),
            ));
        }
        Ok(Self {
            kind,
            hidden,
            activation: Activation::Relu,
        })
    }
}

/// A trained (or freshly initialized) neural model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NeuralModel {
    Mlp(MlpModel),
    Lstm(LstmParams),
    Gru(GruParams),
}

impl NeuralModel {
    /// Initialize parameters for `spec` on data shaped like `data`.
    pub fn init(spec: &NeuralSpec, data: &SupervisedMatrix, config: &TrainConfig) -> Result<Self> {
        let row_len = data
            .x
            .first()
            .map(Vec::len)
            .ok_or(Error::EmptyTrainingSet)?;
        let output_dim = data.horizon();
        let step_width = match data.layout {
            MatrixLayout::Windowed { step_width, .. } => step_width,
            MatrixLayout::Flat => row_len,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(match spec.kind {
            ModelKind::Mlp => NeuralModel::Mlp(MlpModel::new(
                row_len,
                &spec.hidden,
                output_dim,
                spec.activation,
                &mut rng,
            )),
            ModelKind::Lstm => NeuralModel::Lstm(LstmParams::new(
                step_width,
                spec.hidden[0],
                output_dim,
                config.init_scheme,
                &mut rng,
            )),
            ModelKind::Gru => NeuralModel::Gru(GruParams::new(
                step_width,
                spec.hidden[0],
                output_dim,
                &mut rng,
            )),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "'{other}' is not a neural model kind"
                )))
            }
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            NeuralModel::Mlp(_) => ModelKind::Mlp,
            NeuralModel::Lstm(_) => ModelKind::Lstm,
            NeuralModel::Gru(_) => ModelKind::Gru,
        }
    }

    /// Predict from one (flat or windowed) feature row.
    pub fn predict_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        match self {
            NeuralModel::Mlp(m) => m.forward(row),
            NeuralModel::Lstm(m) => m.forward_row(row),
            NeuralModel::Gru(m) => m.forward_row(row),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params_flat().len()
    }

    /// All parameters flattened in a fixed documented order (matrices
    /// row-major, each followed by its bias, head last).
    pub fn params_flat(&self) -> Vec<f64> {
        match self {
            NeuralModel::Mlp(m) => m.params_flat(),
            NeuralModel::Lstm(m) => m.params_flat(),
            NeuralModel::Gru(m) => m.params_flat(),
        }
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        match self {
            NeuralModel::Mlp(m) => m.set_params_flat(flat),
            NeuralModel::Lstm(m) => m.set_params_flat(flat),
            NeuralModel::Gru(m) => m.set_params_flat(flat),
        }
    }

    /// Mean squared error over the batch plus its flat gradient.
    pub fn loss_and_grad(&self, rows: &[&[f64]], targets: &[&[f64]]) -> Result<(f64, Vec<f64>)> {
        match self {
            NeuralModel::Mlp(m) => m.loss_and_grad(rows, targets),
            NeuralModel::Lstm(m) => m.loss_and_grad(rows, targets),
            NeuralModel::Gru(m) => m.loss_and_grad(rows, targets),
        }
    }

    /// Batch loss without gradients.
    pub fn loss(&self, rows: &[&[f64]], targets: &[&[f64]]) -> Result<f64> {
        let mut acc = 0.0;
        let mut count = 0usize;
        for (row, target) in rows.iter().zip(targets) {
            let out = self.predict_row(row)?;
            for (o, t) in out.iter().zip(*target) {
                acc += (o - t) * (o - t);
                count += 1;
            }
        }
        Ok(acc / count as f64)
    }
}

enum Optimizer {
    Sgd,
    Adam { m: Vec<f64>, v: Vec<f64>, t: u64 },
}

impl Optimizer {
    fn new(kind: OptimizerKind, n: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam {
                m: vec![0.0; n],
                v: vec![0.0; n],
                t: 0,
            },
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        match self {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam { m, v, t } => {
                const BETA1: f64 = 0.9;
                const BETA2: f64 = 0.999;
                const EPS: f64 = 1e-8;
                *t += 1;
                let t = *t as i32;
                for i in 0..params.len() {
                    m[i] = BETA1 * m[i] + (1.0 - BETA1) * grad[i];
                    v[i] = BETA2 * v[i] + (1.0 - BETA2) * grad[i] * grad[i];
                    let m_hat = m[i] / (1.0 - BETA1.powi(t));
                    let v_hat = v[i] / (1.0 - BETA2.powi(t));
                    params[i] -= lr * m_hat / (v_hat.sqrt() + EPS);
                }
            }
        }
    }
}

fn clip_gradient(grad: &mut [f64], max_norm: f64) {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= scale;
        }
    }
}

/// Train `spec` on `data`. Returns the model and the per-epoch mean training
/// loss (`loss_history.len() == config.epochs`). Deterministic given
/// `config.seed`; non-finite losses abort with the offending epoch.
pub fn fit(
    spec: &NeuralSpec,
    data: &SupervisedMatrix,
    config: &TrainConfig,
) -> Result<(NeuralModel, Vec<f64>)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut model = NeuralModel::init(spec, data, config)?;
    let history = fit_in_place(&mut model, data, config)?;
    Ok((model, history))
}

/// Training loop on an already-initialized model.
pub fn fit_in_place(
    model: &mut NeuralModel,
    data: &SupervisedMatrix,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    let n = data.len();
    if n == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let mut params = model.params_flat();
    let mut optimizer = Optimizer::new(config.optimizer, params.len());
    // Distinct stream from init so epoch shuffles don't replay init draws.
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut history = Vec::with_capacity(config.epochs);

    let mut indices: Vec<usize> = (0..n).collect();
    for epoch in 0..config.epochs {
        use rand::seq::SliceRandom;
        indices.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut weight = 0usize;
        for batch in indices.chunks(config.batch_size) {
            let rows: Vec<&[f64]> = batch.iter().map(|&i| data.x[i].as_slice()).collect();
            let targets: Vec<&[f64]> = batch.iter().map(|&i| data.y[i].as_slice()).collect();
            let (loss, mut grad) = model.loss_and_grad(&rows, &targets)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            clip_gradient(&mut grad, config.gradient_clip_norm);
            optimizer.step(&mut params, &grad, config.learning_rate);
            model.set_params_flat(&params);
            epoch_loss += loss * batch.len() as f64;
            weight += batch.len();
        }
        history.push(epoch_loss / weight as f64);
    }
    Ok(history)
}

/// Compare analytic gradients against central finite differences
/// (step 1e-5) on the batch loss, returning the maximum over parameters of
/// `|g_a − g_n| / max(1, |g_a|, |g_n|)`.
pub fn gradient_check(model: &NeuralModel, data: &SupervisedMatrix) -> Result<f64> {
    const STEP: f64 = 1e-5;
    let rows: Vec<&[f64]> = data.x.iter().map(Vec::as_slice).collect();
    let targets: Vec<&[f64]> = data.y.iter().map(Vec::as_slice).collect();
    let (_, analytic) = model.loss_and_grad(&rows, &targets)?;
    let base = model.params_flat();
    let mut probe = model.clone();
    let mut worst = 0.0_f64;
    for p in 0..base.len() {
        let mut plus = base.clone();
        plus[p] += STEP;
        probe.set_params_flat(&plus);
        let up = probe.loss(&rows, &targets)?;
        let mut minus = base.clone();
        minus[p] -= STEP;
        probe.set_params_flat(&minus);
        let down = probe.loss(&rows, &targets)?;
        let numeric = (up - down) / (2.0 * STEP);
        let g = analytic[p];
        let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(1.0);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    pub(crate) fn matrix(
        x: Vec<Vec<f64>>,
        y: Vec<Vec<f64>>,
        layout: MatrixLayout,
    ) -> SupervisedMatrix {
        let start = NaiveDate::from_ymd_opt(2005, 1, 1).unwrap();
        let n = x.len();
        SupervisedMatrix {
            feature_names: (0..x[0].len()).map(|i| format!("f{i}")).collect(),
            x,
            y,
            target_dates: (0..n)
                .map(|i| start + chrono::Duration::days(i as i64))
                .collect(),
            layout,
            targets_scaled: true,
        }
    }

    fn sine_data(n: usize) -> SupervisedMatrix {
        let x: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64 * 3.0]).collect();
        let y: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0].sin()]).collect();
        matrix(x, y, MatrixLayout::Flat)
    }

    fn spec(kind: ModelKind) -> NeuralSpec {
        NeuralSpec::new(kind, vec![8]).unwrap()
    }

    #[test]
    fn zero_epochs_leaves_initialization() {
        let data = sine_data(10);
        let config = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let (model, history) = fit(&spec(ModelKind::Mlp), &data, &config).unwrap();
        let fresh = NeuralModel::init(&spec(ModelKind::Mlp), &data, &config).unwrap();
        assert_eq!(model.params_flat(), fresh.params_flat());
        assert!(history.is_empty());
    }

    #[test]
    fn same_seed_bit_identical() {
        let data = sine_data(12);
        let config = TrainConfig {
            epochs: 5,
            seed: 42,
            ..Default::default()
        };
        for kind in [ModelKind::Mlp, ModelKind::Lstm, ModelKind::Gru] {
            let (a, ha) = fit(&spec(kind), &data, &config).unwrap();
            let (b, hb) = fit(&spec(kind), &data, &config).unwrap();
            assert_eq!(a.params_flat(), b.params_flat());
            assert_eq!(ha, hb);
        }
    }

    #[test]
    fn zero_learning_rate_freezes_params() {
        let data = sine_data(10);
        let config = TrainConfig {
            epochs: 3,
            learning_rate: 0.0,
            ..Default::default()
        };
        for kind in [ModelKind::Mlp, ModelKind::Lstm, ModelKind::Gru] {
            let (model, _) = fit(&spec(kind), &data, &config).unwrap();
            let fresh = NeuralModel::init(&spec(kind), &data, &config).unwrap();
            assert_eq!(model.params_flat(), fresh.params_flat());
        }
    }

    #[test]
    fn mlp_interpolates_toy_sine() {
        // Oracle: a 1-8-1 tanh network can interpolate 10 smooth points;
        // failure to reach 1e-3 is an optimizer bug, not a capacity limit.
        let data = sine_data(10);
        let config = TrainConfig {
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.02,
            batch_size: 10,
            epochs: 2000,
            seed: 1,
            ..Default::default()
        };
        let mut smooth = spec(ModelKind::Mlp);
        smooth.activation = Activation::Tanh;
        let (model, history) = fit(&smooth, &data, &config).unwrap();
        assert_eq!(history.len(), 2000);
        let rows: Vec<&[f64]> = data.x.iter().map(Vec::as_slice).collect();
        let targets: Vec<&[f64]> = data.y.iter().map(Vec::as_slice).collect();
        let final_loss = model.loss(&rows, &targets).unwrap();
        assert!(final_loss < 1e-3, "final training MSE {final_loss}");
    }

    #[test]
    fn gradient_check_linear_mlp_is_exact() {
        // Identity activations make the loss quadratic in the parameters, so
        // the analytic gradient and central differences agree to O(step²).
        let data = sine_data(6);
        let mut spec = spec(ModelKind::Mlp);
        spec.activation = Activation::Identity;
        let config = TrainConfig::default();
        let model = NeuralModel::init(&spec, &data, &config).unwrap();
        let err = gradient_check(&model, &data).unwrap();
        assert!(err < 1e-8, "relative error {err}");
    }

    #[test]
    fn gradient_check_recurrent_models() {
        let window = 6;
        let step_width = 2;
        let x: Vec<Vec<f64>> = (0..5)
            .map(|i| {
                (0..window * step_width)
                    .map(|j| ((i * 7 + j) as f64 * 0.37).sin())
                    .collect()
            })
            .collect();
        let y: Vec<Vec<f64>> = (0..5).map(|i| vec![(i as f64 * 0.5).cos()]).collect();
        let data = matrix(x, y, MatrixLayout::Windowed { window, step_width });
        let config = TrainConfig::default();
        for kind in [ModelKind::Lstm, ModelKind::Gru] {
            let model = NeuralModel::init(&NeuralSpec::new(kind, vec![4]).unwrap(), &data, &config)
                .unwrap();
            assert!(model.param_count() <= 500);
            let err = gradient_check(&model, &data).unwrap();
            assert!(err < 1e-4, "{kind} relative error {err}");
        }
    }

    #[test]
    fn gradient_vanishes_at_exact_fit() {
        // Generate targets from the model itself: the loss minimum is 0 and
        // the gradient there is exactly stationary.
        let data = sine_data(8);
        let config = TrainConfig::default();
        let model = NeuralModel::init(&spec(ModelKind::Mlp), &data, &config).unwrap();
        let y: Vec<Vec<f64>> = data
            .x
            .iter()
            .map(|row| model.predict_row(row).unwrap())
            .collect();
        let exact = matrix(data.x.clone(), y, MatrixLayout::Flat);
        let rows: Vec<&[f64]> = exact.x.iter().map(Vec::as_slice).collect();
        let targets: Vec<&[f64]> = exact.y.iter().map(Vec::as_slice).collect();
        let (loss, grad) = model.loss_and_grad(&rows, &targets).unwrap();
        assert!(loss < 1e-20);
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(norm < 1e-6, "gradient norm {norm}");
    }

    #[test]
    fn divergence_reports_epoch() {
        let data = sine_data(10);
        let config = TrainConfig {
            optimizer: OptimizerKind::Sgd,
            learning_rate: 1e160,
            gradient_clip_norm: f64::MAX,
            epochs: 50,
            ..Default::default()
        };
        match fit(&spec(ModelKind::Mlp), &data, &config) {
            Err(Error::Diverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn serialization_round_trip_is_bit_identical() {
        let data = sine_data(10);
        let config = TrainConfig {
            epochs: 3,
            ..Default::default()
        };
        for kind in [ModelKind::Mlp, ModelKind::Lstm, ModelKind::Gru] {
            let (model, _) = fit(&spec(kind), &data, &config).unwrap();
            let json = serde_json::to_string(&model).unwrap();
            let back: NeuralModel = serde_json::from_str(&json).unwrap();
            assert_eq!(model.params_flat(), back.params_flat());
            let row = &data.x[0];
            assert_eq!(
                model.predict_row(row).unwrap(),
                back.predict_row(row).unwrap()
            );
        }
    }
}
