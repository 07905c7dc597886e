//! Fully connected feed-forward network trained by full-batch backpropagation.
//!
//! Hidden layers use a sigmoid or ReLU activation, the two-unit output layer a
//! softmax, and the loss is mean cross-entropy against one-hot targets.
//! Inverted dropout may be applied to hidden activations during training;
//! inference never drops units.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scaling::MinMaxScaler;
use super::{Prediction, TrainingSet};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `z` and activation `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Weights are row-major `inputs x outputs`: `weights[i * outputs + o]`
/// connects input `i` to unit `o`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseLayer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn forward_into(&self, input: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.biases);
        for (i, &x) in input.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.outputs..(i + 1) * self.outputs];
            for (o, w) in out.iter_mut().zip(row) {
                *o += x * w;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralNetConfig {
    /// Widths of the hidden layers; input and output widths come from the data.
    pub hidden_layers: Vec<usize>,
    pub hidden_activation: Activation,
    pub dropout_p: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub seed: u64,
    /// Training stops once an epoch lowers the loss by less than this.
    /// Only consulted when dropout is off, since dropout makes the loss noisy.
    pub convergence_tol: f64,
    /// Continue from the weights of a previous model when retraining.
    #[serde(default)]
    pub warm_start: bool,
}

impl Default for NeuralNetConfig {
    fn default() -> Self {
        NeuralNetConfig {
            hidden_layers: vec![107],
            hidden_activation: Activation::Sigmoid,
            dropout_p: 0.0,
            learning_rate: 0.05,
            max_epochs: 1000,
            seed: 42,
            convergence_tol: 1e-7,
            warm_start: false,
        }
    }
}

impl NeuralNetConfig {
    /// Three ReLU layers of 32 units with dropout 0.5.
    pub fn deep() -> Self {
        NeuralNetConfig {
            hidden_layers: vec![32, 32, 32],
            hidden_activation: Activation::Relu,
            dropout_p: 0.5,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<(), Error> {
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max_epochs must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidConfig("dropout_p must lie in [0, 1)".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.hidden_layers.iter().any(|&k| k == 0) {
            return Err(Error::InvalidConfig("hidden layers must have at least one unit".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralNetModel {
    /// `[inputs, hidden..., 2]`
    pub layer_sizes: Vec<usize>,
    pub layers: Vec<DenseLayer>,
    pub hidden_activation: Activation,
    pub dropout_p: f64,
    pub seed: u64,
    pub epochs_trained: usize,
    pub scaler: MinMaxScaler,
}

impl NeuralNetModel {
    /// A network with every weight and bias zero and an identity-range scaler.
    pub fn zeros(layer_sizes: &[usize], hidden_activation: Activation) -> Self {
        assert!(layer_sizes.len() >= 2, "need at least input and output layers");
        let layers = layer_sizes.windows(2).map(|w| DenseLayer::zeros(w[0], w[1])).collect();
        NeuralNetModel {
            layer_sizes: layer_sizes.to_vec(),
            layers,
            hidden_activation,
            dropout_p: 0.0,
            seed: 0,
            epochs_trained: 0,
            scaler: MinMaxScaler::unit(layer_sizes[0]),
        }
    }

    fn random(layer_sizes: &[usize], cfg: &NeuralNetConfig, scaler: MinMaxScaler, rng: &mut ChaCha8Rng) -> Self {
        let mut model = NeuralNetModel::zeros(layer_sizes, cfg.hidden_activation);
        for layer in &mut model.layers {
            for w in &mut layer.weights {
                *w = rng.gen_range(-0.5..=0.5);
            }
        }
        model.dropout_p = cfg.dropout_p;
        model.seed = cfg.seed;
        model.scaler = scaler;
        model
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn check_invariants(&self) -> Result<(), Error> {
        let bad = |msg: &str| Err(Error::MalformedDocument(msg.to_string()));
        if self.layer_sizes.len() < 2 || *self.layer_sizes.last().unwrap() != 2 {
            return bad("output layer must have two units");
        }
        if self.layers.len() != self.layer_sizes.len() - 1 {
            return bad("layer count does not match layer sizes");
        }
        for (layer, w) in self.layers.iter().zip(self.layer_sizes.windows(2)) {
            if layer.inputs != w[0] || layer.outputs != w[1] || layer.weights.len() != w[0] * w[1] || layer.biases.len() != w[1] {
                return bad("weight matrix shape does not match layer sizes");
            }
        }
        if self.scaler.min.len() != self.layer_sizes[0] || self.scaler.max.len() != self.layer_sizes[0] {
            return bad("scaler width does not match input layer");
        }
        Ok(())
    }

    /// Output logits for an already-scaled input.
    pub fn logits_scaled(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; layer.outputs];
            layer.forward_into(&a, &mut z);
            if l < last {
                for v in &mut z {
                    *v = self.hidden_activation.apply(*v);
                }
            }
            a = z;
        }
        a
    }

    /// Class probabilities for an already-scaled input.
    pub fn forward_scaled(&self, x: &[f64]) -> Prediction {
        let z = self.logits_scaled(x);
        Prediction::from_probs(softmax2(z[0], z[1]))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction, Error> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        Ok(self.forward_scaled(&self.scaler.transform(x)))
    }

    /// All weights and biases, layer by layer (weights first), flattened.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        let mut it = params.iter().copied();
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *w = it.next().expect("parameter vector too short");
            }
        }
        assert!(it.next().is_none(), "parameter vector too long");
    }

    /// Mean cross-entropy and its gradient (flattened like [`parameters`](Self::parameters))
    /// over scaled inputs, without dropout.
    pub fn loss_and_gradient(&self, xs: &[Vec<f64>], ys: &[[f64; 2]]) -> (f64, Vec<f64>) {
        let batch = Batch::new(xs);
        let (loss, grads) = backprop(self, &batch, ys, None);
        let flat = grads
            .into_iter()
            .flat_map(|g| g.weights.into_iter().chain(g.biases))
            .collect();
        (loss, flat)
    }
}

/// Numerically stable two-class softmax.
pub fn softmax2(z0: f64, z1: f64) -> [f64; 2] {
    let m = z0.max(z1);
    let e0 = (z0 - m).exp();
    let e1 = (z1 - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

/// Row-major matrix of scaled inputs.
struct Batch {
    rows: usize,
    data: Vec<f64>,
}

impl Batch {
    fn new(xs: &[Vec<f64>]) -> Self {
        let data = xs.iter().flat_map(|x| x.iter().copied()).collect();
        Batch { rows: xs.len(), data }
    }
}

/// Mask per hidden layer; `true` keeps the unit.
type DropoutMasks = Vec<Vec<bool>>;

fn backprop(model: &NeuralNetModel, batch: &Batch, ys: &[[f64; 2]], masks: Option<(&DropoutMasks, f64)>) -> (f64, Vec<DenseLayer>) {
    let m = batch.rows;
    let last = model.layers.len() - 1;
    let act = model.hidden_activation;

    // forward, keeping pre-activations and activations of every layer
    let mut zs: Vec<Vec<f64>> = Vec::with_capacity(model.layers.len());
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(model.layers.len() + 1);
    acts.push(batch.data.clone());
    for (l, layer) in model.layers.iter().enumerate() {
        let input = &acts[l];
        let mut z = vec![0.0; m * layer.outputs];
        for r in 0..m {
            layer.forward_into(&input[r * layer.inputs..(r + 1) * layer.inputs], &mut z[r * layer.outputs..(r + 1) * layer.outputs]);
        }
        let a = if l < last {
            let mut a: Vec<f64> = z.iter().map(|&v| act.apply(v)).collect();
            if let Some((masks, p)) = masks {
                let scale = 1.0 / (1.0 - p);
                let mask = &masks[l];
                for row in a.chunks_mut(layer.outputs) {
                    for (v, &keep) in row.iter_mut().zip(mask) {
                        *v = if keep { *v * scale } else { 0.0 };
                    }
                }
            }
            a
        } else {
            z.clone()
        };
        zs.push(z);
        acts.push(a);
    }

    // softmax cross-entropy; delta = (p - y) / m
    let logits = &acts[last + 1];
    let mut loss = 0.0;
    let mut delta = vec![0.0; m * 2];
    for r in 0..m {
        let (z0, z1) = (logits[r * 2], logits[r * 2 + 1]);
        let mx = z0.max(z1);
        let lse = mx + ((z0 - mx).exp() + (z1 - mx).exp()).ln();
        let p = softmax2(z0, z1);
        let y = ys[r];
        loss -= y[0] * (z0 - lse) + y[1] * (z1 - lse);
        delta[r * 2] = (p[0] - y[0]) / m as f64;
        delta[r * 2 + 1] = (p[1] - y[1]) / m as f64;
    }
    loss /= m as f64;

    let mut grads: Vec<DenseLayer> = model.layers.iter().map(|l| DenseLayer::zeros(l.inputs, l.outputs)).collect();
    for l in (0..=last).rev() {
        let layer = &model.layers[l];
        let (n_in, n_out) = (layer.inputs, layer.outputs);
        let input = &acts[l];
        let g = &mut grads[l];
        for r in 0..m {
            let d = &delta[r * n_out..(r + 1) * n_out];
            for (gb, dv) in g.biases.iter_mut().zip(d) {
                *gb += dv;
            }
            for i in 0..n_in {
                let x = input[r * n_in + i];
                if x == 0.0 {
                    continue;
                }
                let grow = &mut g.weights[i * n_out..(i + 1) * n_out];
                for (gw, dv) in grow.iter_mut().zip(d) {
                    *gw += x * dv;
                }
            }
        }
        if l == 0 {
            break;
        }
        // propagate into the previous (hidden) layer
        let prev_z = &zs[l - 1];
        let prev_a = &acts[l];
        let mut prev_delta = vec![0.0; m * n_in];
        for r in 0..m {
            let d = &delta[r * n_out..(r + 1) * n_out];
            for i in 0..n_in {
                let wrow = &layer.weights[i * n_out..(i + 1) * n_out];
                let back: f64 = wrow.iter().zip(d).map(|(w, dv)| w * dv).sum();
                let z = prev_z[r * n_in + i];
                let deriv = match masks {
                    Some((masks, p)) => {
                        if masks[l - 1][i] {
                            let scale = 1.0 / (1.0 - p);
                            act.derivative(z, act.apply(z)) * scale
                        } else {
                            0.0
                        }
                    }
                    None => act.derivative(z, prev_a[r * n_in + i]),
                };
                prev_delta[r * n_in + i] = back * deriv;
            }
        }
        delta = prev_delta;
    }
    (loss, grads)
}

/// Trains a network from random (seeded) weights.
pub fn train_neural_net(ts: &TrainingSet, cfg: &NeuralNetConfig) -> Result<NeuralNetModel, Error> {
    train_neural_net_with(ts, cfg, None, |_, _| {})
}

/// Trains a network, optionally continuing from `init`, calling `observer`
/// after every epoch with the epoch number (1-based) and the current model.
pub fn train_neural_net_with(
    ts: &TrainingSet,
    cfg: &NeuralNetConfig,
    init: Option<&NeuralNetModel>,
    mut observer: impl FnMut(usize, &NeuralNetModel),
) -> Result<NeuralNetModel, Error> {
    cfg.validate()?;
    ts.check_trainable()?;
    let dim = ts.dim();
    let mut sizes = vec![dim];
    sizes.extend(&cfg.hidden_layers);
    sizes.push(2);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = match init {
        Some(prev) if prev.layer_sizes == sizes && prev.hidden_activation == cfg.hidden_activation => {
            let mut m = prev.clone();
            m.scaler = MinMaxScaler::fit(ts.rows.iter().map(|r| r.x.as_slice()), dim);
            m.dropout_p = cfg.dropout_p;
            m.seed = cfg.seed;
            m.epochs_trained = 0;
            m
        }
        Some(_) => return Err(Error::InvalidConfig("warm-start model architecture differs from config".into())),
        None => {
            let scaler = MinMaxScaler::fit(ts.rows.iter().map(|r| r.x.as_slice()), dim);
            NeuralNetModel::random(&sizes, cfg, scaler, &mut rng)
        }
    };

    let xs: Vec<Vec<f64>> = ts.rows.iter().map(|r| model.scaler.transform(r.x.as_slice())).collect();
    let ys: Vec<[f64; 2]> = ts.rows.iter().map(|r| r.label.one_hot()).collect();
    let batch = Batch::new(&xs);
    let hidden = &sizes[1..sizes.len() - 1];
    let mut prev_loss = f64::INFINITY;

    for epoch in 1..=cfg.max_epochs {
        let masks: Option<DropoutMasks> = (cfg.dropout_p > 0.0).then(|| {
            hidden
                .iter()
                .map(|&k| (0..k).map(|_| rng.gen::<f64>() >= cfg.dropout_p).collect())
                .collect()
        });
        let (loss, grads) = backprop(&model, &batch, &ys, masks.as_ref().map(|m| (m, cfg.dropout_p)));
        if !loss.is_finite() {
            return Err(Error::DivergedLoss(epoch));
        }
        for (layer, g) in model.layers.iter_mut().zip(&grads) {
            for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                *w -= cfg.learning_rate * gw;
            }
            for (b, gb) in layer.biases.iter_mut().zip(&g.biases) {
                *b -= cfg.learning_rate * gb;
            }
        }
        if model.parameters().iter().any(|p| !p.is_finite()) {
            return Err(Error::DivergedLoss(epoch));
        }
        model.epochs_trained = epoch;
        observer(epoch, &model);
        let improvement = prev_loss - loss;
        if cfg.dropout_p == 0.0 && (0.0..cfg.convergence_tol).contains(&improvement) {
            break;
        }
        prev_loss = loss;
    }
    Ok(model)
}
