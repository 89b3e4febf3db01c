use serde::{Deserialize, Serialize};

use super::made::{layer_forward, layer_inverse, record_inverse, register, Activation, InversePlan, MadeNetwork};
use super::mask::{build_masks, identity_ordering, reversed_ordering, validate_ordering};
use crate::data::Scaler;
use crate::error::{Error, Result};
use crate::numkit::{sample_standard_normal, GradTape, Matrix, NodeId, Rng};

const LN_2PI: f64 = 1.837_877_066_409_345_3;
const EVAL_CHUNK: usize = 128;

/// Shape of a flow stack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MafArch {
    pub layers: usize,
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
    pub scale_clamp: f64,
    /// One input ordering per layer; empty means alternate identity and reversed.
    #[serde(default)]
    pub orderings: Vec<Vec<usize>>,
}

impl MafArch {
    pub fn new(layers: usize, hidden_sizes: Vec<usize>) -> Self {
        Self {
            layers,
            hidden_sizes,
            activation: Activation::Tanh,
            scale_clamp: 7.0,
            orderings: Vec::new(),
        }
    }

    /// Ordering used by layer `l` of a `d`-dimensional stack.
    pub fn ordering(&self, l: usize, d: usize) -> Vec<usize> {
        match self.orderings.get(l) {
            Some(o) => o.clone(),
            None if l % 2 == 0 => identity_ordering(d),
            None => reversed_ordering(d),
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::InvalidConfig("a flow needs at least one layer".into()));
        }
        if !self.orderings.is_empty() && self.orderings.len() != self.layers {
            return Err(Error::InvalidConfig(format!(
                "{} orderings given for {} layers",
                self.orderings.len(),
                self.layers
            )));
        }
        for o in &self.orderings {
            validate_ordering(d, o)?;
        }
        Ok(())
    }
}

impl Default for MafArch {
    fn default() -> Self {
        Self::new(5, vec![16, 16])
    }
}

/// Stack of MADE layers over a standard normal base, with the feature
/// standardization fixed at fit time.
///
/// Layer `0` acts first when sampling; densities invert from the last layer down.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MafModel {
    layers: Vec<MadeNetwork>,
    d: usize,
    scaler: Scaler,
}

impl MafModel {
    /// Freshly initialised stack; every layer is the identity map.
    pub fn init(d: usize, arch: &MafArch, scaler: Scaler, rng: &mut Rng) -> Result<Self> {
        arch.validate(d)?;
        let layers = (0..arch.layers)
            .map(|l| {
                let spec = build_masks(d, &arch.hidden_sizes, &arch.ordering(l, d))?;
                MadeNetwork::init(spec, arch.activation, arch.scale_clamp, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers, scaler)
    }

    pub fn new(layers: Vec<MadeNetwork>, scaler: Scaler) -> Result<Self> {
        let d = layers
            .first()
            .map(MadeNetwork::d)
            .ok_or_else(|| Error::InvalidConfig("a flow needs at least one layer".into()))?;
        if let Some(bad) = layers.iter().find(|l| l.d() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.d(),
            });
        }
        if scaler.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: scaler.dim(),
            });
        }
        Ok(Self { layers, d, scaler })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn layers(&self) -> &[MadeNetwork] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [MadeNetwork] {
        &mut self.layers
    }

    pub fn scaler(&self) -> &Scaler {
        &self.scaler
    }

    /// Log density of an already standardized point, by sequential inversion.
    pub fn log_density_standardized(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: z.len(),
            });
        }
        let mut s = z.to_vec();
        let mut logdet = 0.0;
        for layer in self.layers.iter().rev() {
            let (prev, ld) = layer_inverse(layer, &s)?;
            s = prev;
            logdet += ld;
        }
        Ok(standard_normal_logpdf(&s) - logdet)
    }

    /// Log density in data units, including the standardization Jacobian.
    pub fn log_density_data_space(&self, x: &[f64]) -> Result<f64> {
        let log_scale: f64 = self.scaler.stddevs().iter().map(|s| s.ln()).sum();
        Ok(maf_log_density(self, x)? - log_scale)
    }
}

fn standard_normal_logpdf(u: &[f64]) -> f64 {
    -0.5 * u.iter().map(|v| v * v).sum::<f64>() - 0.5 * u.len() as f64 * LN_2PI
}

/// Log density of raw point `x`, measured in the model's standardized space.
pub fn maf_log_density(model: &MafModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.d {
        return Err(Error::DimensionMismatch {
            expected: model.d,
            found: x.len(),
        });
    }
    model.log_density_standardized(&model.scaler.transform_row(x))
}

/// Row-wise [`maf_log_density`], evaluated in chunks on a value-only tape.
pub fn maf_log_density_batch(model: &MafModel, x: &Matrix) -> Result<Vec<f64>> {
    let z = model.scaler.transform(x)?;
    let plans = TapedFlow::plans(model);
    let mut out = Vec::with_capacity(z.rows());
    let mut start = 0;
    while start < z.rows() {
        let end = (start + EVAL_CHUNK).min(z.rows());
        let idx: Vec<usize> = (start..end).collect();
        let mut tape = GradTape::new();
        let flow = TapedFlow::record(&mut tape, model, &plans, z.select_rows(&idx));
        out.extend(flow.log_densities(&tape));
        start = end;
    }
    Ok(out)
}

/// Draws `u ~ N(0, I)`, pushes it through layers `0..ℓ` and undoes the scaling.
pub fn maf_sample(model: &MafModel, rng: &mut Rng, n: usize) -> Result<Matrix> {
    let mut data = Vec::with_capacity(n * model.d);
    for _ in 0..n {
        let mut s = sample_standard_normal(rng, model.d);
        for layer in &model.layers {
            s = layer_forward(layer, &s)?;
        }
        data.extend(model.scaler.inverse_row(&s));
    }
    Matrix::new(n, model.d, data)
}

/// A recorded density evaluation of a standardized batch.
pub(crate) struct TapedFlow {
    pub params: Vec<Vec<NodeId>>,
    pub u: NodeId,
    pub a: Vec<NodeId>,
    pub batch: usize,
    pub d: usize,
}

impl TapedFlow {
    pub(crate) fn plans(model: &MafModel) -> Vec<InversePlan> {
        model.layers.iter().map(InversePlan::new).collect()
    }

    pub(crate) fn record(tape: &mut GradTape, model: &MafModel, plans: &[InversePlan], z: Matrix) -> Self {
        let batch = z.rows();
        let params: Vec<Vec<NodeId>> = model.layers.iter().map(|l| register(tape, l)).collect();
        let mut s = tape.leaf(z);
        let mut a = Vec::new();
        for (layer, plan) in plans.iter().enumerate().rev() {
            let (prev, a_layer) = record_inverse(tape, plan, &params[layer], s, batch);
            s = prev;
            a.extend(a_layer);
        }
        Self {
            params,
            u: s,
            a,
            batch,
            d: model.d,
        }
    }

    pub(crate) fn log_densities(&self, tape: &GradTape) -> Vec<f64> {
        let u = tape.value(self.u);
        (0..self.batch)
            .map(|i| {
                let logdet: f64 = self.a.iter().map(|&n| tape.value(n)[(i, 0)]).sum();
                standard_normal_logpdf(u.row(i)) - logdet
            })
            .collect()
    }

    /// Mean negative log density as a `1 × 1` node.
    pub(crate) fn mean_nll(&self, tape: &mut GradTape) -> NodeId {
        let sq = tape.mul(self.u, self.u);
        let sq = tape.sum(sq);
        let mut total = tape.scale(sq, 0.5);
        for &a in &self.a {
            let s = tape.sum(a);
            total = tape.add(total, s);
        }
        let mean = tape.scale(total, 1.0 / self.batch as f64);
        tape.shift(mean, 0.5 * self.d as f64 * LN_2PI)
    }
}
