//! Fully connected regression networks trained by mini-batch gradient
//! descent on mean squared error, with best-validation checkpointing,
//! bootstrap data augmentation, and a small ensemble mode whose member
//! spread estimates prediction variance.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{fmt_f64, io_err, FeatureMatrix};
use crate::error::{Error, Result};
use crate::forest::bootstrap_sample;

/// Hidden-layer nonlinearity; the output layer is always identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// A fully connected network. Weights are stored per layer in
/// output-major order (`weights[l][o * in + i]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcnModel {
    /// `[input, hidden..., output]` widths.
    pub sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub activation: Activation,
}

impl FcnModel {
    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Total trainable parameters: `sum(in * out + out)` over layers.
    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Forward pass for one input row.
    pub fn forward(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.input_width() {
            return Err(Error::Shape(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.input_width()
            )));
        }
        let mut a = row.to_vec();
        for l in 0..self.n_layers() {
            a = self.layer_forward(l, &a).1;
        }
        Ok(a)
    }

    /// Convenience for single-output models.
    pub fn predict_one(&self, row: &[f64]) -> Result<f64> {
        Ok(self.forward(row)?[0])
    }

    fn layer_forward(&self, l: usize, input: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n_in = self.sizes[l];
        let n_out = self.sizes[l + 1];
        let act = if l + 1 == self.sizes.len() - 1 {
            Activation::Identity
        } else {
            self.activation
        };
        let mut z = vec![0.0; n_out];
        let mut a = vec![0.0; n_out];
        for o in 0..n_out {
            let mut s = self.biases[l][o];
            let w = &self.weights[l][o * n_in..(o + 1) * n_in];
            for (wi, xi) in w.iter().zip(input) {
                s += wi * xi;
            }
            z[o] = s;
            a[o] = act.apply(s);
        }
        (z, a)
    }

    /// Mean over rows of the squared error, summed over outputs.
    pub fn loss(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let p = self.input_width();
        let q = self.output_width();
        let n = y.len() / q;
        if x.len() != n * p || y.len() % q != 0 || n == 0 {
            return Err(Error::Shape("loss input shapes do not match the model".into()));
        }
        let mut total = 0.0;
        for i in 0..n {
            let out = self.forward(&x[i * p..(i + 1) * p])?;
            for (o, &target) in y[i * q..(i + 1) * q].iter().enumerate() {
                let e = out[o] - target;
                total += e * e;
            }
        }
        Ok(total / n as f64)
    }

    /// Loss plus its gradient in flat parameter order (per layer: weights
    /// output-major, then biases).
    pub fn loss_and_gradient(&self, x: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>)> {
        let p = self.input_width();
        let q = self.output_width();
        let n = y.len() / q;
        if x.len() != n * p || y.len() % q != 0 || n == 0 {
            return Err(Error::Shape("gradient input shapes do not match the model".into()));
        }
        let layers = self.n_layers();
        let mut grad_w: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut grad_b: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        let mut total = 0.0;

        for i in 0..n {
            let row = &x[i * p..(i + 1) * p];
            // Forward, keeping pre-activations and activations per layer.
            let mut zs: Vec<Vec<f64>> = Vec::with_capacity(layers);
            let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers + 1);
            acts.push(row.to_vec());
            for l in 0..layers {
                let (z, a) = self.layer_forward(l, acts.last().unwrap());
                zs.push(z);
                acts.push(a);
            }
            let out = acts.last().unwrap();
            let targets = &y[i * q..(i + 1) * q];
            let mut delta: Vec<f64> = out
                .iter()
                .zip(targets)
                .map(|(&o, &t)| {
                    let e = o - t;
                    total += e * e;
                    2.0 * e / n as f64
                })
                .collect();
            // Backward.
            for l in (0..layers).rev() {
                let n_in = self.sizes[l];
                let n_out = self.sizes[l + 1];
                let input = &acts[l];
                for o in 0..n_out {
                    grad_b[l][o] += delta[o];
                    let gw = &mut grad_w[l][o * n_in..(o + 1) * n_in];
                    for (g, xi) in gw.iter_mut().zip(input) {
                        *g += delta[o] * xi;
                    }
                }
                if l > 0 {
                    let act = self.activation;
                    let mut prev = vec![0.0; n_in];
                    for (inp, pd) in prev.iter_mut().enumerate() {
                        let mut s = 0.0;
                        for o in 0..n_out {
                            s += self.weights[l][o * n_in + inp] * delta[o];
                        }
                        *pd = s * act.derivative(zs[l - 1][inp]);
                    }
                    delta = prev;
                }
            }
        }

        let mut flat = Vec::with_capacity(self.param_count());
        for l in 0..layers {
            flat.extend_from_slice(&grad_w[l]);
            flat.extend_from_slice(&grad_b[l]);
        }
        Ok((total / n as f64, flat))
    }

    /// Flat parameter vector (per layer: weights output-major, biases).
    pub fn params(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        for l in 0..self.n_layers() {
            flat.extend_from_slice(&self.weights[l]);
            flat.extend_from_slice(&self.biases[l]);
        }
        flat
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "parameter vector has {} entries, model has {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut at = 0;
        for l in 0..self.sizes.len() - 1 {
            let wl = self.weights[l].len();
            self.weights[l].copy_from_slice(&flat[at..at + wl]);
            at += wl;
            let bl = self.biases[l].len();
            self.biases[l].copy_from_slice(&flat[at..at + bl]);
            at += bl;
        }
        Ok(())
    }

    fn apply_gradient(&mut self, grad: &[f64], lr: f64) {
        let mut at = 0;
        for l in 0..self.sizes.len() - 1 {
            for w in self.weights[l].iter_mut() {
                *w -= lr * grad[at];
                at += 1;
            }
            for b in self.biases[l].iter_mut() {
                *b -= lr * grad[at];
                at += 1;
            }
        }
    }

    /// Writes the flat text format: a `layers` header, the activation tag,
    /// then one `W<l>`/`b<l>` block per layer with row-major weights.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::File {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "fcn v1").map_err(io_err)?;
        writeln!(
            w,
            "layers {}",
            self.sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
        )
        .map_err(io_err)?;
        let act = match self.activation {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        };
        writeln!(w, "activation {act}").map_err(io_err)?;
        for l in 0..self.n_layers() {
            let n_in = self.sizes[l];
            let n_out = self.sizes[l + 1];
            writeln!(w, "W{l} {n_out} {n_in}").map_err(io_err)?;
            for o in 0..n_out {
                let row: Vec<String> = self.weights[l][o * n_in..(o + 1) * n_in]
                    .iter()
                    .map(|&v| fmt_f64(v))
                    .collect();
                writeln!(w, "{}", row.join(" ")).map_err(io_err)?;
            }
            writeln!(w, "b{l} {n_out}").map_err(io_err)?;
            let row: Vec<String> = self.biases[l].iter().map(|&v| fmt_f64(v)).collect();
            writeln!(w, "{}", row.join(" ")).map_err(io_err)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::File {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut lines = std::io::BufReader::new(file).lines();
        let perr = |detail: &str| Error::Parse {
            path: path.to_path_buf(),
            detail: detail.to_string(),
        };
        let mut next_line = || -> Result<String> {
            lines
                .next()
                .transpose()
                .map_err(|e| Error::File { path: path.to_path_buf(), source: e })?
                .ok_or_else(|| perr("unexpected end of file"))
        };
        if next_line()?.trim() != "fcn v1" {
            return Err(perr("expected 'fcn v1' header"));
        }
        let layer_line = next_line()?;
        let sizes: Vec<usize> = layer_line
            .strip_prefix("layers ")
            .ok_or_else(|| perr("expected 'layers' line"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| perr("bad layer width")))
            .collect::<Result<_>>()?;
        if sizes.len() < 2 {
            return Err(perr("need at least input and output widths"));
        }
        let act_line = next_line()?;
        let activation = match act_line.strip_prefix("activation ").map(str::trim) {
            Some("relu") => Activation::Relu,
            Some("identity") => Activation::Identity,
            _ => return Err(perr("expected 'activation relu|identity'")),
        };
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..sizes.len() - 1 {
            let n_in = sizes[l];
            let n_out = sizes[l + 1];
            let header = next_line()?;
            if header.trim() != format!("W{l} {n_out} {n_in}") {
                return Err(perr(&format!("expected 'W{l} {n_out} {n_in}' header")));
            }
            let mut w = Vec::with_capacity(n_in * n_out);
            for _ in 0..n_out {
                let row = next_line()?;
                let vals: Vec<f64> = row
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| perr("bad weight value")))
                    .collect::<Result<_>>()?;
                if vals.len() != n_in {
                    return Err(perr("weight row width mismatch"));
                }
                w.extend(vals);
            }
            weights.push(w);
            let header = next_line()?;
            if header.trim() != format!("b{l} {n_out}") {
                return Err(perr(&format!("expected 'b{l} {n_out}' header")));
            }
            let row = next_line()?;
            let b: Vec<f64> = row
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| perr("bad bias value")))
                .collect::<Result<_>>()?;
            if b.len() != n_out {
                return Err(perr("bias width mismatch"));
            }
            biases.push(b);
        }
        Ok(Self { sizes, weights, biases, activation })
    }
}

/// Initializes a network with at least one hidden layer: weights uniform
/// in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero, seed-deterministic.
pub fn init(sizes: &[usize], seed: u64) -> Result<FcnModel> {
    if sizes.len() < 3 {
        return Err(Error::InvalidConfig(
            "need at least one hidden layer (input, hidden..., output)".into(),
        ));
    }
    if sizes.iter().any(|&s| s == 0) {
        return Err(Error::InvalidConfig("layer widths must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(sizes.len() - 1);
    let mut biases = Vec::with_capacity(sizes.len() - 1);
    for w in sizes.windows(2) {
        let (n_in, n_out) = (w[0], w[1]);
        let scale = 1.0 / (n_in as f64).sqrt();
        let layer: Vec<f64> = (0..n_in * n_out).map(|_| rng.gen_range(-scale..scale)).collect();
        weights.push(layer);
        biases.push(vec![0.0; n_out]);
    }
    Ok(FcnModel { sizes: sizes.to_vec(), weights, biases, activation: Activation::Relu })
}

/// Gradient-descent settings. The stable learning-rate range for
/// standardized inputs is roughly 0.001 to 0.01.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Epochs without validation improvement before stopping early.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { batch_size: 32, epochs: 100, learning_rate: 0.005, seed: 0, patience: 20 }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 || self.patience == 0 {
            return Err(Error::InvalidConfig(
                "batch_size, epochs, and patience must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 0.1) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be in (0, 0.1], got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Per-epoch loss record.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

/// Writes a loss history as `epoch,train_mse,val_mse` CSV.
pub fn history_to_csv_path(history: &[EpochStats], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(b"epoch,train_mse,val_mse\n").map_err(io_err)?;
    for s in history {
        w.write_all(
            format!("{},{},{}\n", s.epoch, fmt_f64(s.train_mse), fmt_f64(s.val_mse)).as_bytes(),
        )
        .map_err(io_err)?;
    }
    Ok(())
}

/// Mini-batch gradient descent on MSE. Returns the checkpoint with the
/// best validation loss plus the full loss history. Inputs are expected
/// standardized; single-output models only.
pub fn train(
    model: &FcnModel,
    train_x: &[f64],
    train_y: &[f64],
    val_x: &[f64],
    val_y: &[f64],
    cfg: &TrainConfig,
) -> Result<(FcnModel, Vec<EpochStats>)> {
    cfg.validate()?;
    if model.output_width() != 1 {
        return Err(Error::Shape("training expects a single-output model".into()));
    }
    let p = model.input_width();
    let n = train_y.len();
    if train_x.len() != n * p || n == 0 {
        return Err(Error::Shape("training data does not match model input width".into()));
    }
    if val_x.len() != val_y.len() * p || val_y.is_empty() {
        return Err(Error::Shape("validation data does not match model input width".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = model.clone();
    let mut best = current.clone();
    let mut best_val = current.loss(val_x, val_y)?;
    let mut since_best = 0usize;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..n).collect();
    let mut batch_x = Vec::with_capacity(cfg.batch_size * p);
    let mut batch_y = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch_x.clear();
            batch_y.clear();
            for &i in chunk {
                batch_x.extend_from_slice(&train_x[i * p..(i + 1) * p]);
                batch_y.push(train_y[i]);
            }
            let (_, grad) = current.loss_and_gradient(&batch_x, &batch_y)?;
            current.apply_gradient(&grad, cfg.learning_rate);
        }
        let train_mse = current.loss(train_x, train_y)?;
        let val_mse = current.loss(val_x, val_y)?;
        if !train_mse.is_finite() || !val_mse.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        history.push(EpochStats { epoch, train_mse, val_mse });
        if val_mse < best_val {
            best_val = val_mse;
            best = current.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    Ok((best, history))
}

/// Draws `b` bootstrap resamples of the dataset; deterministic per seed.
pub fn bootstrap_augment(data: &FeatureMatrix, b: usize, seed: u64) -> Result<Vec<FeatureMatrix>> {
    if b == 0 {
        return Err(Error::InvalidConfig("bootstrap count must be at least 1".into()));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    (0..b).map(|_| bootstrap_sample(data, master.gen())).collect()
}

/// Stacks matrices with identical columns into one (augmentation mode).
pub fn concat(matrices: &[FeatureMatrix]) -> Result<FeatureMatrix> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::EmptyData("nothing to concatenate".into()))?;
    let names = first.column_names().to_vec();
    let mut rows = Vec::new();
    for m in matrices {
        if m.column_names() != names {
            return Err(Error::Shape("matrices have different columns".into()));
        }
        for i in 0..m.n_rows() {
            rows.push(m.row(i).to_vec());
        }
    }
    let mut out = FeatureMatrix::from_rows(names, rows)?;
    if let Some(t) = first.target_name() {
        out.set_target(t)?;
    }
    Ok(out)
}

/// Held-out evaluation: MSE plus the model's parameter count.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvalReport {
    pub mse: f64,
    pub param_count: usize,
}

pub fn evaluate(model: &FcnModel, x: &[f64], y: &[f64]) -> Result<EvalReport> {
    Ok(EvalReport { mse: model.loss(x, y)?, param_count: model.param_count() })
}

/// Mean prediction of an ensemble at one input.
pub fn ensemble_predict(models: &[FcnModel], row: &[f64]) -> Result<f64> {
    if models.is_empty() {
        return Err(Error::EmptyData("ensemble has no members".into()));
    }
    let mut sum = 0.0;
    for m in models {
        sum += m.predict_one(row)?;
    }
    Ok(sum / models.len() as f64)
}

/// Sample variance of ensemble member predictions at one input; the
/// bootstrap estimate of prediction variance.
pub fn ensemble_variance(models: &[FcnModel], row: &[f64]) -> Result<f64> {
    if models.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: models.len() });
    }
    let preds: Vec<f64> = models
        .iter()
        .map(|m| m.predict_one(row))
        .collect::<Result<_>>()?;
    let mean = preds.iter().sum::<f64>() / preds.len() as f64;
    let var = preds.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>()
        / (preds.len() as f64 - 1.0);
    Ok(var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::gauss;

    #[test]
    fn parameter_count_formula() {
        let model = init(&[4, 8, 1], 0).unwrap();
        assert_eq!(model.param_count(), 4 * 8 + 8 + 8 + 1);
        assert_eq!(model.params().len(), model.param_count());
    }

    #[test]
    fn init_is_seed_deterministic_and_validates() {
        let a = init(&[3, 5, 1], 7).unwrap();
        let b = init(&[3, 5, 1], 7).unwrap();
        assert_eq!(a, b);
        assert!(init(&[3, 1], 0).is_err()); // no hidden layer
        assert!(init(&[3, 0, 1], 0).is_err());
        // Biases start at zero, weights within the fan-in scale.
        assert!(a.biases.iter().flatten().all(|&b| b == 0.0));
        let bound = 1.0 / (3.0f64).sqrt();
        assert!(a.weights[0].iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn zeroed_output_layer_predicts_zero() {
        let mut model = init(&[4, 6, 1], 3).unwrap();
        let last = model.weights.len() - 1;
        model.weights[last].iter_mut().for_each(|w| *w = 0.0);
        let x: Vec<f64> = (0..40).map(|i| (i % 7) as f64 * 0.1).collect();
        let y = vec![0.0; 10];
        assert_eq!(model.loss(&x, &y).unwrap(), 0.0);
    }

    /// Smallest |pre-activation| over all hidden units and rows. Central
    /// differences are only valid away from the rectifier's kink, so the
    /// check below resamples until every unit clears a margin.
    fn min_abs_preactivation(model: &FcnModel, x: &[f64]) -> f64 {
        let p = model.input_width();
        let mut min_abs = f64::INFINITY;
        for row in x.chunks(p) {
            let mut a = row.to_vec();
            for l in 0..model.n_layers() {
                let n_in = model.sizes[l];
                let n_out = model.sizes[l + 1];
                let mut z = vec![0.0; n_out];
                for o in 0..n_out {
                    let mut s = model.biases[l][o];
                    for (wi, xi) in model.weights[l][o * n_in..(o + 1) * n_in].iter().zip(&a) {
                        s += wi * xi;
                    }
                    z[o] = s;
                }
                if l < model.n_layers() - 1 {
                    for &zo in &z {
                        min_abs = min_abs.min(zo.abs());
                    }
                    a = z.iter().map(|&zo| zo.max(0.0)).collect();
                } else {
                    a = z;
                }
            }
        }
        min_abs
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        for sizes in [vec![3, 4, 1], vec![2, 3, 2, 1], vec![1, 5, 1]] {
            // First seed whose pre-activations all clear the kink margin.
            let mut picked = None;
            for attempt in 0..100u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + attempt);
                let model = init(&sizes, rng.gen()).unwrap();
                let n = 6;
                let p = sizes[0];
                let x: Vec<f64> = (0..n * p).map(|_| gauss(&mut rng)).collect();
                let y: Vec<f64> = (0..n).map(|_| gauss(&mut rng)).collect();
                if min_abs_preactivation(&model, &x) > 1e-3 {
                    picked = Some((model, x, y));
                    break;
                }
            }
            let (model, x, y) = picked.expect("a kink-safe instance exists");
            let (_, analytic) = model.loss_and_gradient(&x, &y).unwrap();
            let params = model.params();
            let h = 1e-5;
            for k in 0..params.len() {
                let mut plus = model.clone();
                let mut theta = params.clone();
                theta[k] += h;
                plus.set_params(&theta).unwrap();
                let mut minus = model.clone();
                theta[k] -= 2.0 * h;
                minus.set_params(&theta).unwrap();
                let fd = (plus.loss(&x, &y).unwrap() - minus.loss(&x, &y).unwrap()) / (2.0 * h);
                let denom = analytic[k].abs().max(fd.abs()).max(1e-6);
                assert!(
                    (analytic[k] - fd).abs() / denom < 1e-4,
                    "sizes {sizes:?} param {k}: analytic {} vs fd {}",
                    analytic[k],
                    fd
                );
            }
        }
    }

    fn linear_dataset(n: usize, p: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coefs: Vec<f64> = (0..p).map(|j| 1.0 - 0.4 * j as f64).collect();
        let mut x = Vec::with_capacity(n * p);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..p).map(|_| gauss(&mut rng)).collect();
            y.push(row.iter().zip(&coefs).map(|(a, b)| a * b).sum());
            x.extend(row);
        }
        (x, y)
    }

    #[test]
    fn learns_noiseless_linear_target() {
        let (x, y) = linear_dataset(120, 4, 11);
        let (vx, vy) = linear_dataset(40, 4, 12);
        let model = init(&[4, 16, 1], 1).unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            learning_rate: 0.01,
            patience: 200,
            ..Default::default()
        };
        let (trained, history) = train(&model, &x, &y, &vx, &vy, &cfg).unwrap();
        let mean_y = y.iter().sum::<f64>() / y.len() as f64;
        let var_y = y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum::<f64>() / y.len() as f64;
        let final_mse = trained.loss(&x, &y).unwrap();
        assert!(
            final_mse < 0.01 * var_y,
            "mse {final_mse} vs 1% of var {}",
            0.01 * var_y
        );
        assert!(!history.is_empty());
    }

    #[test]
    fn checkpoint_has_the_best_validation_loss() {
        let (x, y) = linear_dataset(80, 3, 21);
        let (vx, vy) = linear_dataset(30, 3, 22);
        let model = init(&[3, 8, 1], 2).unwrap();
        let cfg = TrainConfig { epochs: 60, patience: 60, ..Default::default() };
        let (best, history) = train(&model, &x, &y, &vx, &vy, &cfg).unwrap();
        let best_val = best.loss(&vx, &vy).unwrap();
        for s in &history {
            assert!(best_val <= s.val_mse + 1e-12, "epoch {} beat the checkpoint", s.epoch);
        }
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        // Wildly unstandardized inputs overflow the loss within an epoch
        // or two; training must fail loudly instead of returning garbage.
        let n = 50;
        let x: Vec<f64> = (0..n * 2).map(|i| (i as f64 + 1.0) * 1e80).collect();
        let y: Vec<f64> = (0..n).map(|i| i as f64 * 1e80).collect();
        let model = init(&[2, 8, 1], 0).unwrap();
        let cfg = TrainConfig { learning_rate: 0.1, epochs: 50, ..Default::default() };
        match train(&model, &x, &y, &x, &y, &cfg) {
            Err(Error::Divergence { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let model = init(&[4, 6, 1], 0).unwrap();
        assert!(matches!(model.forward(&[1.0, 2.0]), Err(Error::Shape(_))));
        assert!(model.loss(&[1.0, 2.0, 3.0], &[1.0]).is_err());
    }

    #[test]
    fn constant_predictor_mse_equals_variance() {
        let mut model = init(&[2, 4, 1], 9).unwrap();
        // Zero all weights: output = bias of the last layer = y-bar.
        let y = [1.0, 3.0, 5.0, 7.0];
        let ybar = 4.0;
        let flat = vec![0.0; model.param_count()];
        model.set_params(&flat).unwrap();
        let last = model.biases.len() - 1;
        model.biases[last][0] = ybar;
        let x = [0.5, 1.0, -0.5, 2.0, 1.5, -1.0, 0.0, 0.25];
        let var = y.iter().map(|v| (v - ybar) * (v - ybar)).sum::<f64>() / y.len() as f64;
        let mse = model.loss(&x, &y).unwrap();
        assert!((mse - var).abs() < 1e-9);
    }

    #[test]
    fn param_count_decreases_with_input_width() {
        let mut last = usize::MAX;
        for p in (2..=10).rev() {
            let model = init(&[p, 16, 1], 0).unwrap();
            assert!(model.param_count() < last);
            last = model.param_count();
        }
    }

    #[test]
    fn bootstrap_augment_sizes_and_variance() {
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|i| vec![(i % 17) as f64, (i % 5) as f64, i as f64])
            .collect();
        let m = FeatureMatrix::from_rows(
            vec!["a".into(), "b".into(), "y".into()],
            rows,
        )
        .unwrap()
        .with_target("y")
        .unwrap();
        let one = bootstrap_augment(&m, 1, 3).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].n_rows(), 200);
        let hundred = bootstrap_augment(&m, 100, 3).unwrap();
        let total = concat(&hundred).unwrap();
        assert_eq!(total.n_rows(), 20_000);
        assert_eq!(total.target_name(), Some("y"));

        // Ensemble across a few resample-trained models: variance at a
        // probe point is finite.
        let mut models = Vec::new();
        for (i, sample) in hundred.iter().take(5).enumerate() {
            let (_, x, y) = sample.design_and_target().unwrap();
            let model = init(&[2, 4, 1], i as u64).unwrap();
            let cfg = TrainConfig { epochs: 5, patience: 5, ..Default::default() };
            let (trained, _) = train(&model, &x, &y, &x, &y, &cfg).unwrap();
            models.push(trained);
        }
        let var = ensemble_variance(&models, &[3.0, 2.0]).unwrap();
        assert!(var.is_finite() && var >= 0.0);
        let mean = ensemble_predict(&models, &[3.0, 2.0]).unwrap();
        assert!(mean.is_finite());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        let model = init(&[3, 5, 2, 1], 13).unwrap();
        model.save(&path).unwrap();
        let loaded = FcnModel::load(&path).unwrap();
        assert_eq!(model, loaded);
    }
}
