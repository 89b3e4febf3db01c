use serde::{Deserialize, Serialize};

use super::maf::{MafArch, MafModel, TapedFlow};
use crate::data::Scaler;
use crate::error::{Error, Result};
use crate::numkit::{mean, GradTape, Matrix, Rng};

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Applies one update; `params` and `grads` must keep the same layout between calls.
    pub fn step<'a>(&mut self, params: impl Iterator<Item = &'a mut [f64]>, grads: &[Matrix]) {
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.as_slice().len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for (((p, g), m), v) in params.zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((p, &g), m), v) in p.iter_mut().zip(g.as_slice()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                *p -= self.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + self.epsilon);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Epochs without validation improvement before stopping; the rate halves
    /// after every `patience / 2` of them.
    pub patience: usize,
    pub seed: u64,
    /// Share of rows held out for early stopping; 0 trains on everything and
    /// keeps the last iterate.
    pub validation_fraction: f64,
}

impl Default for FlowTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 16,
            learning_rate: 1e-5,
            patience: 30,
            seed: 0,
            validation_fraction: 0.2,
        }
    }
}

impl FlowTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidConfig("validation_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Trained flow with its per-epoch mean NLL traces.
#[derive(Clone, Debug)]
pub struct FlowFit {
    pub model: MafModel,
    pub train_trace: Vec<f64>,
    pub validation_trace: Vec<f64>,
    /// Epoch (1-based) whose parameters were kept; 0 for the initial model.
    pub best_epoch: usize,
    pub final_learning_rate: f64,
}

/// Mean NLL of standardized rows, in evaluation-sized chunks.
fn mean_nll(model: &MafModel, z: &Matrix) -> f64 {
    let plans = TapedFlow::plans(model);
    let mut values = Vec::with_capacity(z.rows());
    for chunk in (0..z.rows()).collect::<Vec<_>>().chunks(128) {
        let mut tape = GradTape::new();
        let flow = TapedFlow::record(&mut tape, model, &plans, z.select_rows(chunk));
        values.extend(flow.log_densities(&tape).into_iter().map(|v| -v));
    }
    mean(&values)
}

/// Mean NLL of standardized rows `z` and its gradient, one flat vector per
/// parameter slice in [`MadeNetwork::parameters_mut`] order, layer by layer.
///
/// [`MadeNetwork::parameters_mut`]: super::MadeNetwork::parameters_mut
pub fn nll_gradient(model: &MafModel, z: &Matrix) -> Result<(f64, Vec<Vec<f64>>)> {
    if z.cols() != model.d() {
        return Err(Error::DimensionMismatch {
            expected: model.d(),
            found: z.cols(),
        });
    }
    let plans = TapedFlow::plans(model);
    let mut tape = GradTape::new();
    let flow = TapedFlow::record(&mut tape, model, &plans, z.clone());
    let loss = flow.mean_nll(&mut tape);
    let value = tape.scalar(loss);
    let mut grads = tape.backward(loss)?;
    let flat = flow
        .params
        .iter()
        .flatten()
        .map(|&id| {
            let shape = tape.value(id);
            grads.take_or_zeros(id, shape.rows(), shape.cols()).into_vec()
        })
        .collect();
    Ok((value, flat))
}

/// Fits a flow to `data` (raw units) under `scaler` by minibatch Adam on the
/// mean negative log density.
pub fn maf_train(data: &Matrix, scaler: Scaler, arch: &MafArch, cfg: &FlowTrainConfig) -> Result<FlowFit> {
    cfg.validate()?;
    let d = data.cols();
    let z = scaler.transform(data)?;
    let mut model = MafModel::init(d, arch, scaler, &mut Rng::new(Rng::derive_seed(cfg.seed, 0)))?;
    if cfg.epochs == 0 {
        return Ok(FlowFit {
            model,
            train_trace: Vec::new(),
            validation_trace: Vec::new(),
            best_epoch: 0,
            final_learning_rate: cfg.learning_rate,
        });
    }

    let n = z.rows();
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(Rng::derive_seed(cfg.seed, 1)).shuffle(&mut order);
    let n_val = (cfg.validation_fraction * n as f64).round() as usize;
    let (val_idx, train_idx) = order.split_at(n_val);
    if train_idx.is_empty() || (cfg.validation_fraction > 0.0 && val_idx.is_empty()) {
        return Err(Error::InsufficientData(format!(
            "{n} rows cannot be split with validation fraction {}",
            cfg.validation_fraction
        )));
    }
    let train = z.select_rows(train_idx);
    let val = z.select_rows(val_idx);

    let mut rng = Rng::new(Rng::derive_seed(cfg.seed, 2));
    let mut adam = Adam::new(cfg.learning_rate);
    let halve_every = (cfg.patience / 2).max(1);
    let mut best = (f64::INFINITY, model.clone(), 0);
    if val.rows() > 0 {
        best.0 = mean_nll(&model, &val);
    }
    let mut stall = 0;
    let mut train_trace = Vec::new();
    let mut validation_trace = Vec::new();
    let mut rows: Vec<usize> = (0..train.rows()).collect();

    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut rows);
        let plans = TapedFlow::plans(&model);
        let mut weighted = 0.0;
        for batch in rows.chunks(cfg.batch_size) {
            let mut tape = GradTape::new();
            let flow = TapedFlow::record(&mut tape, &model, &plans, train.select_rows(batch));
            let loss = flow.mean_nll(&mut tape);
            let value = tape.scalar(loss);
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            weighted += value * batch.len() as f64;
            let mut grads = tape.backward(loss)?;
            let flat: Vec<Matrix> = flow
                .params
                .iter()
                .flatten()
                .map(|&id| {
                    let shape = tape.value(id);
                    grads.take_or_zeros(id, shape.rows(), shape.cols())
                })
                .collect();
            adam.step(model.layers_mut().iter_mut().flat_map(|l| l.parameters_mut()), &flat);
        }
        train_trace.push(weighted / train.rows() as f64);

        if val.rows() == 0 {
            best = (f64::INFINITY, model.clone(), epoch);
            continue;
        }
        let v = mean_nll(&model, &val);
        if !v.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        validation_trace.push(v);
        if v < best.0 {
            best = (v, model.clone(), epoch);
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.patience {
                break;
            }
            if stall % halve_every == 0 {
                adam.learning_rate *= 0.5;
            }
        }
    }
    Ok(FlowFit {
        model: best.1,
        train_trace,
        validation_trace,
        best_epoch: best.2,
        final_learning_rate: adam.learning_rate,
    })
}
