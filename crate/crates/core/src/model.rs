//! Multi-label MLP classifier and its training loop.
//!
//! Architecture is `d -> hidden... -> L` with rectifier hidden units and
//! sigmoid outputs trained against summed binary cross-entropy. The schedule
//! is mini-batch Adam with a step-decayed learning rate and dev-set
//! checkpointing: the returned model is the weights at the epoch with the
//! best dev mAP, including an epoch-0 evaluation before any update so a
//! finetuned model can never end up worse than its initialization.
//!
//! Weight init and epoch shuffling draw from separate seeded streams, so
//! training from scratch is exactly `finetune` applied to
//! [`MLPClassifier::init`] with the same seed.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, SplitSelector};
use crate::error::{Error, Result};
use crate::eval;
use crate::labels::TargetProvider;
use crate::numerics::{adam_step, bce_grad, bce_loss, sigmoid, AdamParams, AdamState, Matrix};

const SHUFFLE_STREAM: u64 = 0x7368756666; // "shuff"

/// Hidden-unit nonlinearity. Only the rectifier is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
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

/// Fully connected multi-label classifier. `weights[l]` has shape
/// `(layer_dims[l+1], layer_dims[l])`; the final layer emits raw logits.
#[derive(Debug, Clone, PartialEq)]
pub struct MLPClassifier {
    layer_dims: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
}

/// On-disk JSON shape: nested arrays, value-exact f64 round-trip.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    layer_dims: Vec<usize>,
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
}

impl MLPClassifier {
    /// Random init: uniform weights in +-1/sqrt(fan_in), zero biases, drawn
    /// from a stream derived only from `seed`.
    pub fn init(layer_dims: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::Parameter(
                "layer_dims needs at least input and output sizes".into(),
            ));
        }
        if layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::Parameter("layer_dims entries must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for w in layer_dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut m = Matrix::zeros(fan_out, fan_in);
            for r in 0..fan_out {
                for c in 0..fan_in {
                    m.set(r, c, rng.gen_range(-bound..bound));
                }
            }
            weights.push(m);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(MLPClassifier { layer_dims: layer_dims.to_vec(), weights, biases, activation })
    }

    pub fn from_parts(
        layer_dims: Vec<usize>,
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
        activation: Activation,
    ) -> Result<Self> {
        let model = MLPClassifier { layer_dims, weights, biases, activation };
        model.check_shape()?;
        Ok(model)
    }

    fn check_shape(&self) -> Result<()> {
        if self.layer_dims.len() < 2
            || self.weights.len() != self.layer_dims.len() - 1
            || self.biases.len() != self.weights.len()
        {
            return Err(Error::Dimension("inconsistent layer structure".into()));
        }
        for (l, w) in self.weights.iter().enumerate() {
            if w.rows() != self.layer_dims[l + 1]
                || w.cols() != self.layer_dims[l]
                || self.biases[l].len() != w.rows()
            {
                return Err(Error::Dimension(format!("layer {l} has inconsistent shape")));
            }
            if !w.is_finite() || self.biases[l].iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("layer {l} has non-finite parameters")));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Raw output logits for one sample.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "forward: input has {} entries, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut a = x.to_vec();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w.matvec(&a)?;
            for (zi, bi) in z.iter_mut().zip(b) {
                *zi += bi;
            }
            if l < last {
                for v in z.iter_mut() {
                    *v = self.activation.apply(*v);
                }
            }
            a = z;
        }
        Ok(a)
    }

    /// Temperature-softened probabilities `sigmoid(logits / t)`.
    pub fn soft_predict(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Parameter(format!("temperature {t} must be positive")));
        }
        Ok(self.forward(x)?.into_iter().map(|z| sigmoid(z / t)).collect())
    }

    /// Plain predicted probabilities (temperature 1).
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.soft_predict(x, 1.0)
    }

    /// Forward pass keeping pre-activations and activations for backprop.
    fn forward_cached(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut zs = Vec::with_capacity(self.weights.len());
        let mut acts = Vec::with_capacity(self.weights.len() + 1);
        acts.push(x.to_vec());
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w.matvec(acts.last().unwrap()).expect("shape checked");
            for (zi, bi) in z.iter_mut().zip(b) {
                *zi += bi;
            }
            zs.push(z.clone());
            if l < last {
                for v in z.iter_mut() {
                    *v = self.activation.apply(*v);
                }
            }
            acts.push(z);
        }
        (zs, acts)
    }

    /// Parameters flattened layer by layer (row-major weights, then bias).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut off = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            let (rows, cols) = (w.rows(), w.cols());
            for r in 0..rows {
                w.row_mut(r).copy_from_slice(&params[off..off + cols]);
                off += cols;
            }
            let width = b.len();
            b.copy_from_slice(&params[off..off + width]);
            off += width;
        }
        Ok(())
    }

    /// Summed BCE loss over one batch (mean over samples), with the gradient
    /// accumulated into `grads` (flat layout matching [`Self::flat_params`],
    /// same scaling).
    pub fn batch_loss_and_grad(
        &self,
        xs: &[&[f64]],
        targets: &[&[f64]],
        grads: &mut [f64],
    ) -> Result<f64> {
        grads.fill(0.0);
        let scale = 1.0 / xs.len() as f64;
        let mut loss = 0.0;
        for (x, t) in xs.iter().zip(targets) {
            let (zs, acts) = self.forward_cached(x);
            let logits = zs.last().unwrap();
            loss += bce_loss(t, logits)?;
            let mut delta = bce_grad(t, logits)?;
            for v in delta.iter_mut() {
                *v *= scale;
            }
            // Walk layers backwards accumulating dW = delta * a^T, db = delta.
            let mut off_end = grads.len();
            for l in (0..self.weights.len()).rev() {
                let w = &self.weights[l];
                let (rows, cols) = (w.rows(), w.cols());
                let b_off = off_end - rows;
                let w_off = b_off - rows * cols;
                let a_prev = &acts[l];
                for r in 0..rows {
                    let dr = delta[r];
                    grads[b_off + r] += dr;
                    let g_row = &mut grads[w_off + r * cols..w_off + (r + 1) * cols];
                    for (g, a) in g_row.iter_mut().zip(a_prev) {
                        *g += dr * a;
                    }
                }
                if l > 0 {
                    let mut back = w.matvec_t(&delta)?;
                    for (v, z) in back.iter_mut().zip(&zs[l - 1]) {
                        *v *= self.activation.derivative(*z);
                    }
                    delta = back;
                }
                off_end = w_off;
            }
        }
        Ok(loss * scale)
    }

    /// Mean per-sample loss over a set of records without updating anything.
    fn dataset_loss(
        &self,
        data: &Dataset,
        indices: &[usize],
        provider: &dyn TargetProvider,
    ) -> Result<f64> {
        let mut total = 0.0;
        for &i in indices {
            let logits = self.forward(&data.records[i].x)?;
            total += bce_loss(provider.target(i)?, &logits)?;
        }
        Ok(total / indices.len() as f64)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(&self.to_file())? + "\n")?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(&fs::read_to_string(path)?)?;
        Self::from_file(file)
    }

    fn to_file(&self) -> ModelFile {
        ModelFile {
            layer_dims: self.layer_dims.clone(),
            weights: self
                .weights
                .iter()
                .map(|w| (0..w.rows()).map(|r| w.row(r).to_vec()).collect())
                .collect(),
            biases: self.biases.clone(),
            activation: self.activation,
        }
    }

    fn from_file(file: ModelFile) -> Result<Self> {
        let weights = file
            .weights
            .iter()
            .map(|rows| Matrix::from_rows(rows))
            .collect::<Result<Vec<_>>>()?;
        MLPClassifier::from_parts(file.layer_dims, weights, file.biases, file.activation)
    }
}

impl Serialize for MLPClassifier {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_file().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MLPClassifier {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let file = ModelFile::deserialize(deserializer)?;
        MLPClassifier::from_file(file).map_err(serde::de::Error::custom)
    }
}

/// Optimization schedule. Defaults: 250 epochs of Adam at 1e-3, decayed by
/// 0.9 every 5 epochs, batch 64, dev checkpointing on.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub initial_lr: f64,
    pub lr_decay: f64,
    pub decay_every: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Return the best-dev-mAP checkpoint instead of the final weights.
    pub select_best_dev: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 250,
            initial_lr: 1e-3,
            lr_decay: 0.9,
            decay_every: 5,
            batch_size: 64,
            seed: 0,
            select_best_dev: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_lr > 0.0) || !self.initial_lr.is_finite() {
            return Err(Error::Parameter(format!(
                "initial_lr = {} must be positive",
                self.initial_lr
            )));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Parameter(format!(
                "lr_decay = {} must be in (0, 1]",
                self.lr_decay
            )));
        }
        if self.decay_every == 0 {
            return Err(Error::Parameter("decay_every must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch_size must be >= 1".into()));
        }
        Ok(())
    }

    fn lr_at(&self, epoch: usize) -> f64 {
        debug_assert!(epoch >= 1);
        self.initial_lr * self.lr_decay.powi(((epoch - 1) / self.decay_every) as i32)
    }
}

/// Loss and dev-mAP trajectories, indexed by epoch (index 0 is the state
/// before any update), plus the checkpointed epoch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub dev_map: Vec<f64>,
    pub best_epoch: usize,
}

/// Trains a fresh `d -> hidden... -> L` model on the selected records. The
/// initial weights are [`MLPClassifier::init`] with `cfg.seed`.
pub fn train(
    data: &Dataset,
    sel: SplitSelector,
    hidden: &[usize],
    provider: &mut dyn TargetProvider,
    cfg: &TrainConfig,
) -> Result<(MLPClassifier, TrainHistory)> {
    let mut dims = Vec::with_capacity(hidden.len() + 2);
    dims.push(data.d);
    dims.extend_from_slice(hidden);
    dims.push(data.label_count());
    let init = MLPClassifier::init(&dims, Activation::Relu, cfg.seed)?;
    finetune(init, data, sel, provider, cfg)
}

/// Same schedule as [`train`] but starting from the given weights. With
/// `epochs = 0` the initial model is returned unchanged (after the epoch-0
/// evaluation).
pub fn finetune(
    init: MLPClassifier,
    data: &Dataset,
    sel: SplitSelector,
    provider: &mut dyn TargetProvider,
    cfg: &TrainConfig,
) -> Result<(MLPClassifier, TrainHistory)> {
    cfg.validate()?;
    init.check_shape()?;
    if init.input_dim() != data.d || init.output_dim() != data.label_count() {
        return Err(Error::Dimension(format!(
            "model is {}->{} but dataset is {}->{}",
            init.input_dim(),
            init.output_dim(),
            data.d,
            data.label_count()
        )));
    }
    let train_idx = data.indices(sel);
    if train_idx.is_empty() {
        return Err(Error::Data(format!("selected split {sel} has no records")));
    }
    if data.indices(SplitSelector::Dev).is_empty() {
        return Err(Error::Data("dev split is empty; needed for checkpoint selection".into()));
    }

    let mut model = init;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_STREAM);
    let mut adam = AdamState::new(model.param_count());
    let mut grads = vec![0.0; model.param_count()];
    let mut params = model.flat_params();
    let mut order = train_idx.clone();

    let mut history = TrainHistory {
        train_loss: Vec::with_capacity(cfg.epochs + 1),
        dev_map: Vec::with_capacity(cfg.epochs + 1),
        best_epoch: 0,
    };
    let mut best: Option<(f64, MLPClassifier)> = None;

    for epoch in 0..=cfg.epochs {
        provider.epoch_refresh(&model)?;
        let loss = if epoch == 0 {
            model.dataset_loss(data, &train_idx, provider)?
        } else {
            let hp = AdamParams::with_lr(cfg.lr_at(epoch));
            order.shuffle(&mut shuffle_rng);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(cfg.batch_size) {
                let xs: Vec<&[f64]> = batch.iter().map(|&i| data.records[i].x.as_slice()).collect();
                let targets = batch
                    .iter()
                    .map(|&i| provider.target(i))
                    .collect::<Result<Vec<_>>>()?;
                let batch_loss = model.batch_loss_and_grad(&xs, &targets, &mut grads)?;
                epoch_loss += batch_loss * batch.len() as f64;
                adam_step(&mut params, &grads, &mut adam, &hp)?;
                model.set_flat_params(&params)?;
            }
            epoch_loss / train_idx.len() as f64
        };

        let dev = eval::split_map(&model, data, SplitSelector::Dev)?;
        history.train_loss.push(loss);
        history.dev_map.push(dev);
        let improved = best.as_ref().map_or(true, |(b, _)| dev > *b);
        if improved {
            best = Some((dev, model.clone()));
            history.best_epoch = epoch;
        }
    }

    let final_model = if cfg.select_best_dev {
        best.expect("at least the epoch-0 evaluation ran").1
    } else {
        model
    };
    Ok((final_model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{Record, Split};
    use crate::labels::FixedTargetProvider;
    use crate::numerics::grad_check;

    fn tiny_dataset() -> Dataset {
        // Two separable classes on a line, with dev coverage for both.
        let mut records = Vec::new();
        for i in 0..24 {
            let side = i % 2;
            let base = if side == 0 { -1.0 } else { 1.0 };
            let x = vec![base + 0.05 * (i as f64 / 24.0), -base];
            let y = if side == 0 { vec![1u8, 0] } else { vec![0u8, 1] };
            let split = if i < 16 { Split::NoisyTrain } else { Split::Dev };
            records.push(Record {
                id: format!("r{i:02}"),
                x,
                y_observed: y.clone(),
                y_true: Some(y),
                split,
            });
        }
        Dataset { labels: vec!["a".into(), "b".into()], d: 2, records }
    }

    fn observed_provider(data: &Dataset, sel: SplitSelector) -> FixedTargetProvider {
        FixedTargetProvider::from_observed(data, sel)
    }

    #[test]
    fn forward_single_layer_hand_example() {
        let w = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let model = MLPClassifier::from_parts(
            vec![2, 2],
            vec![w],
            vec![vec![0.5, -0.5]],
            Activation::Relu,
        )
        .unwrap();
        let logits = model.forward(&[1.0, 1.0]).unwrap();
        assert_eq!(logits, vec![3.5, 6.5]);
    }

    #[test]
    fn forward_applies_rectifier_on_hidden_only() {
        let w1 = Matrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        let w2 = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let model = MLPClassifier::from_parts(
            vec![1, 2, 1],
            vec![w1, w2],
            vec![vec![0.0, 0.0], vec![0.0]],
            Activation::Relu,
        )
        .unwrap();
        // x=2: hidden = relu([2, -2]) = [2, 0] -> logit 2 (may be negative on output)
        assert_eq!(model.forward(&[2.0]).unwrap(), vec![2.0]);
        assert_eq!(model.forward(&[-3.0]).unwrap(), vec![3.0]);
    }

    #[test]
    fn soft_predict_divides_logits_by_temperature() {
        let w = Matrix::from_rows(&[vec![2.0], vec![-2.0]]).unwrap();
        let model = MLPClassifier::from_parts(
            vec![1, 2],
            vec![w],
            vec![vec![0.0, 0.0]],
            Activation::Relu,
        )
        .unwrap();
        let p = model.soft_predict(&[1.0], 2.0).unwrap();
        assert!((p[0] - sigmoid(1.0)).abs() < 1e-15);
        assert!((p[1] - sigmoid(-1.0)).abs() < 1e-15);
        // Very high temperature flattens everything toward 0.5.
        let flat = model.soft_predict(&[1.0], 1e6).unwrap();
        assert!((flat[0] - 0.5).abs() < 1e-5);
        assert!((flat[1] - 0.5).abs() < 1e-5);
        assert!(model.soft_predict(&[1.0], 0.0).is_err());
        assert!(model.soft_predict(&[1.0], -1.0).is_err());
    }

    #[test]
    fn init_is_seed_deterministic() {
        let a = MLPClassifier::init(&[4, 8, 3], Activation::Relu, 9).unwrap();
        let b = MLPClassifier::init(&[4, 8, 3], Activation::Relu, 9).unwrap();
        let c = MLPClassifier::init(&[4, 8, 3], Activation::Relu, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn json_roundtrip_is_value_exact() {
        let model = MLPClassifier::init(&[3, 5, 2], Activation::Relu, 123).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save_json(&path).unwrap();
        let back = MLPClassifier::load_json(&path).unwrap();
        let (a, b) = (model.flat_params(), back.flat_params());
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn load_rejects_inconsistent_shapes() {
        let text = r#"{"layer_dims":[2,2],"weights":[[[1.0,2.0]]],"biases":[[0.0,0.0]],"activation":"relu"}"#;
        assert!(serde_json::from_str::<MLPClassifier>(text).is_err());
    }

    #[test]
    fn batch_gradient_matches_finite_differences() {
        let model = MLPClassifier::init(&[3, 4, 2], Activation::Relu, 5).unwrap();
        let xs: Vec<Vec<f64>> = vec![
            vec![0.3, -0.8, 0.5],
            vec![-1.1, 0.2, 0.9],
            vec![0.0, 0.7, -0.4],
        ];
        let ts: Vec<Vec<f64>> = vec![
            vec![1.0, 0.0],
            vec![0.25, 0.75],
            vec![0.0, 1.0],
        ];
        let xr: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let tr: Vec<&[f64]> = ts.iter().map(|v| v.as_slice()).collect();
        let mut grads = vec![0.0; model.param_count()];
        model.batch_loss_and_grad(&xr, &tr, &mut grads).unwrap();

        let params = model.flat_params();
        let loss_at = |p: &[f64]| {
            let mut m = model.clone();
            m.set_flat_params(p).unwrap();
            let mut total = 0.0;
            for (x, t) in xr.iter().zip(&tr) {
                total += bce_loss(t, &m.forward(x).unwrap()).unwrap();
            }
            total / xr.len() as f64
        };
        let err = grad_check(loss_at, &grads, &params, 1e-5).unwrap();
        assert!(err < 1e-7, "gradient error {err}");
    }

    #[test]
    fn training_learns_separable_data() {
        let data = tiny_dataset();
        let mut provider = observed_provider(&data, SplitSelector::NoisyTrain);
        let cfg = TrainConfig {
            epochs: 80,
            initial_lr: 0.02,
            batch_size: 8,
            seed: 1,
            ..Default::default()
        };
        let (model, history) =
            train(&data, SplitSelector::NoisyTrain, &[8], &mut provider, &cfg).unwrap();
        assert_eq!(history.train_loss.len(), 81);
        assert_eq!(history.dev_map.len(), 81);
        assert!(history.train_loss[80] < history.train_loss[0]);
        let dev = eval::split_map(&model, &data, SplitSelector::Dev).unwrap();
        assert!(dev > 0.95, "dev mAP {dev}");
        assert!(history.best_epoch <= 80);
    }

    #[test]
    fn train_equals_finetune_from_same_init() {
        let data = tiny_dataset();
        let cfg = TrainConfig { epochs: 7, batch_size: 8, seed: 3, ..Default::default() };
        let mut p1 = observed_provider(&data, SplitSelector::NoisyTrain);
        let (a, _) = train(&data, SplitSelector::NoisyTrain, &[4], &mut p1, &cfg).unwrap();

        let init = MLPClassifier::init(&[2, 4, 2], Activation::Relu, 3).unwrap();
        let mut p2 = observed_provider(&data, SplitSelector::NoisyTrain);
        let (b, _) = finetune(init, &data, SplitSelector::NoisyTrain, &mut p2, &cfg).unwrap();

        for (x, y) in a.flat_params().iter().zip(b.flat_params()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn finetune_zero_epochs_returns_init() {
        let data = tiny_dataset();
        let init = MLPClassifier::init(&[2, 4, 2], Activation::Relu, 8).unwrap();
        let mut provider = observed_provider(&data, SplitSelector::NoisyTrain);
        let cfg = TrainConfig { epochs: 0, seed: 8, ..Default::default() };
        let (out, history) =
            finetune(init.clone(), &data, SplitSelector::NoisyTrain, &mut provider, &cfg).unwrap();
        assert_eq!(out, init);
        assert_eq!(history.train_loss.len(), 1);
        assert_eq!(history.best_epoch, 0);
    }

    #[test]
    fn checkpoint_never_regresses_below_init_dev_map() {
        // Catastrophic learning rate: updates destroy the model, but the
        // checkpoint must fall back to the epoch-0 weights.
        let data = tiny_dataset();
        let init = MLPClassifier::init(&[2, 4, 2], Activation::Relu, 2).unwrap();
        let init_dev = eval::split_map(&init, &data, SplitSelector::Dev).unwrap();
        let mut provider = observed_provider(&data, SplitSelector::NoisyTrain);
        let cfg = TrainConfig { epochs: 3, initial_lr: 500.0, seed: 2, ..Default::default() };
        let (out, _) =
            finetune(init, &data, SplitSelector::NoisyTrain, &mut provider, &cfg).unwrap();
        let out_dev = eval::split_map(&out, &data, SplitSelector::Dev).unwrap();
        assert!(out_dev >= init_dev);
    }

    #[test]
    fn train_rejects_empty_split_and_mismatched_model() {
        let data = tiny_dataset();
        let mut provider = observed_provider(&data, SplitSelector::NoisyTrain);
        let cfg = TrainConfig::default();
        assert!(train(&data, SplitSelector::CleanTrain, &[4], &mut provider, &cfg).is_err());

        let wrong = MLPClassifier::init(&[3, 4, 2], Activation::Relu, 0).unwrap();
        assert!(finetune(wrong, &data, SplitSelector::NoisyTrain, &mut provider, &cfg).is_err());
    }

    #[test]
    fn lr_schedule_steps_every_decay_interval() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.lr_at(1), 1e-3);
        assert_eq!(cfg.lr_at(5), 1e-3);
        assert!((cfg.lr_at(6) - 0.9e-3).abs() < 1e-18);
        assert!((cfg.lr_at(11) - 0.81e-3).abs() < 1e-18);
    }
}
