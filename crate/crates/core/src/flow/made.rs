use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::mask::MaskSpec;
use crate::error::{Error, Result};
use crate::numkit::{dot, GradTape, Matrix, NodeId, Rng};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    fn record(self, tape: &mut GradTape, x: NodeId) -> NodeId {
        match self {
            Activation::Tanh => tape.tanh(x),
            Activation::Relu => tape.relu(x),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::InvalidConfig(format!("unknown activation '{other}'"))),
        }
    }
}

/// Smooth bound on a log-scale: `c · tanh(raw / c)`.
pub fn soft_clamp(raw: f64, c: f64) -> f64 {
    c * (raw / c).tanh()
}

/// Masked feed-forward conditioner producing `(a, b)` for every dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MadeNetwork {
    spec: MaskSpec,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
    scale_clamp: f64,
}

impl MadeNetwork {
    /// Hidden weights and biases uniform in ±1/√fan_in; the output layer is
    /// zero, so the network starts as the identity transform.
    pub fn init(spec: MaskSpec, activation: Activation, scale_clamp: f64, rng: &mut Rng) -> Result<Self> {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let last = spec.masks().len() - 1;
        for (l, m) in spec.masks().iter().enumerate() {
            let (out, fan_in) = (m.rows(), m.cols());
            if l == last {
                weights.push(Matrix::zeros(out, fan_in));
                biases.push(vec![0.0; out]);
            } else {
                let bound = 1.0 / (fan_in as f64).sqrt();
                let w: Vec<f64> = (0..out * fan_in).map(|_| rng.uniform_range(-bound, bound)).collect();
                weights.push(Matrix::new(out, fan_in, w)?);
                biases.push((0..out).map(|_| rng.uniform_range(-bound, bound)).collect());
            }
        }
        Self::from_parts(spec, weights, biases, activation, scale_clamp)
    }

    pub fn from_parts(
        spec: MaskSpec,
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
        activation: Activation,
        scale_clamp: f64,
    ) -> Result<Self> {
        if !(scale_clamp > 0.0 && scale_clamp.is_finite()) {
            return Err(Error::InvalidConfig(format!("scale clamp must be positive, got {scale_clamp}")));
        }
        let masks = spec.masks();
        if weights.len() != masks.len() || biases.len() != masks.len() {
            return Err(Error::DimensionMismatch {
                expected: masks.len(),
                found: weights.len().min(biases.len()),
            });
        }
        for ((w, b), m) in weights.iter().zip(&biases).zip(masks) {
            if w.rows() != m.rows() || w.cols() != m.cols() {
                return Err(Error::DimensionMismatch {
                    expected: m.rows() * m.cols(),
                    found: w.rows() * w.cols(),
                });
            }
            if b.len() != m.rows() {
                return Err(Error::DimensionMismatch {
                    expected: m.rows(),
                    found: b.len(),
                });
            }
            if !w.is_finite() || b.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("MADE parameters".into()));
            }
        }
        Ok(Self {
            spec,
            weights,
            biases,
            activation,
            scale_clamp,
        })
    }

    pub fn spec(&self) -> &MaskSpec {
        &self.spec
    }

    pub fn d(&self) -> usize {
        self.spec.d()
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn scale_clamp(&self) -> f64 {
        self.scale_clamp
    }

    /// Parameters as `(weight, 1 × out bias)` pairs, one per weight layer.
    pub(crate) fn parameters(&self) -> Vec<Matrix> {
        let mut p = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            p.push(w.clone());
            p.push(Matrix::from_vec(1, b.len(), b.clone()));
        }
        p
    }

    /// Weights and biases of each layer in turn, as flat row-major slices.
    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()])
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                found: v.len(),
            });
        }
        Ok(())
    }
}

/// Conditioner outputs `(a, b)` at `v`, with `a` soft-clamped.
pub fn made_forward(net: &MadeNetwork, v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    net.check_dim(v)?;
    let last = net.weights.len() - 1;
    let mut h = v.to_vec();
    for (l, ((w, b), m)) in net.weights.iter().zip(&net.biases).zip(net.spec.masks()).enumerate() {
        let mut next = Vec::with_capacity(w.rows());
        for r in 0..w.rows() {
            let eff: Vec<f64> = w.row(r).iter().zip(m.row(r)).map(|(x, y)| x * y).collect();
            let z = b[r] + dot(&eff, &h);
            next.push(if l == last { z } else { net.activation.apply(z) });
        }
        h = next;
    }
    let d = net.d();
    let b = h.split_off(d);
    let a = h.into_iter().map(|raw| soft_clamp(raw, net.scale_clamp)).collect();
    Ok((a, b))
}

/// `s_next_j = exp(a_j) · s_prev_j + b_j`, conditioners read from `s_prev`.
pub fn layer_forward(net: &MadeNetwork, s_prev: &[f64]) -> Result<Vec<f64>> {
    let (a, b) = made_forward(net, s_prev)?;
    Ok(s_prev
        .iter()
        .zip(a.iter().zip(&b))
        .map(|(s, (a, b))| a.exp() * s + b)
        .collect())
}

/// Recovers `s_prev` one degree at a time and returns it with `Σ_j a_j`.
pub fn layer_inverse(net: &MadeNetwork, s_next: &[f64]) -> Result<(Vec<f64>, f64)> {
    net.check_dim(s_next)?;
    let d = net.d();
    let mut u = vec![0.0; d];
    for t in 1..=d {
        let (a, b) = made_forward(net, &u)?;
        let j = net.spec.variable_of_degree(t);
        u[j] = (s_next[j] - b[j]) * (-a[j]).exp();
    }
    let (a, _) = made_forward(net, &u)?;
    Ok((u, a.iter().sum()))
}

struct Step {
    var: Arc<[usize]>,
    out_rows: Arc<[usize]>,
    hidden_rows: Vec<Arc<[usize]>>,
}

/// Precomputed index sets for recording the inverse of one MADE layer.
pub(crate) struct InversePlan {
    masks: Vec<Arc<Matrix>>,
    steps: Vec<Step>,
    hidden_sizes: Vec<usize>,
    d: usize,
    activation: Activation,
    scale_clamp: f64,
}

impl InversePlan {
    pub(crate) fn new(net: &MadeNetwork) -> Self {
        let spec = net.spec();
        let d = spec.d();
        let steps = (1..=d)
            .map(|t| {
                let j = spec.variable_of_degree(t);
                let hidden_rows = (0..spec.hidden_sizes().len())
                    .map(|l| spec.hidden_block(l, t).collect::<Vec<_>>().into())
                    .collect();
                Step {
                    var: vec![j].into(),
                    out_rows: vec![j, d + j].into(),
                    hidden_rows,
                }
            })
            .collect();
        Self {
            masks: spec.masks().iter().cloned().map(Arc::new).collect(),
            steps,
            hidden_sizes: spec.hidden_sizes().to_vec(),
            d,
            activation: net.activation(),
            scale_clamp: net.scale_clamp(),
        }
    }
}

/// Leaf ids of one network's parameters on a tape, in [`MadeNetwork::parameters`] order.
pub(crate) fn register(tape: &mut GradTape, net: &MadeNetwork) -> Vec<NodeId> {
    net.parameters().into_iter().map(|p| tape.leaf(p)).collect()
}

/// Records the inverse of one layer for a `batch × d` node `y`.
///
/// Each degree step evaluates only the conditioner outputs for that
/// dimension and the hidden units of the matching degree, so the whole
/// solve costs about one dense pass. Returns the recovered `batch × d` node
/// and the clamped `a_j` columns (`batch × 1` each).
pub(crate) fn record_inverse(
    tape: &mut GradTape,
    plan: &InversePlan,
    params: &[NodeId],
    y: NodeId,
    batch: usize,
) -> (NodeId, Vec<NodeId>) {
    let depth = plan.hidden_sizes.len();
    let c = plan.scale_clamp;
    let (w_out, b_out) = (params[2 * depth], params[2 * depth + 1]);
    let mut u_parts: Vec<(NodeId, Arc<[usize]>)> = Vec::with_capacity(plan.d);
    let mut blocks: Vec<Vec<(NodeId, Arc<[usize]>)>> = vec![Vec::new(); depth];
    let mut a_nodes = Vec::with_capacity(plan.d);
    let first: Arc<[usize]> = vec![0].into();
    let second: Arc<[usize]> = vec![1].into();

    for (t, step) in plan.steps.iter().enumerate() {
        let last_in = match depth {
            0 => tape.scatter(u_parts.clone(), batch, plan.d),
            _ => tape.scatter(blocks[depth - 1].clone(), batch, plan.hidden_sizes[depth - 1]),
        };
        let ab = tape.affine(
            last_in,
            w_out,
            Some(b_out),
            Some(step.out_rows.clone()),
            Some(plan.masks[depth].clone()),
        );
        let raw_a = tape.columns(ab, first.clone());
        let b = tape.columns(ab, second.clone());
        let a = tape.scale(raw_a, 1.0 / c);
        let a = tape.tanh(a);
        let a = tape.scale(a, c);
        let y_j = tape.columns(y, step.var.clone());
        let centred = tape.sub(y_j, b);
        let neg_a = tape.scale(a, -1.0);
        let inv_scale = tape.exp(neg_a);
        let u_j = tape.mul(centred, inv_scale);
        u_parts.push((u_j, step.var.clone()));
        a_nodes.push(a);

        if t + 1 == plan.d {
            break;
        }
        for l in 0..depth {
            let rows = &step.hidden_rows[l];
            if rows.is_empty() {
                continue;
            }
            let input = match l {
                0 => tape.scatter(u_parts.clone(), batch, plan.d),
                _ => tape.scatter(blocks[l - 1].clone(), batch, plan.hidden_sizes[l - 1]),
            };
            let pre = tape.affine(
                input,
                params[2 * l],
                Some(params[2 * l + 1]),
                Some(rows.clone()),
                Some(plan.masks[l].clone()),
            );
            let act = plan.activation.record(tape, pre);
            blocks[l].push((act, rows.clone()));
        }
    }
    let u = tape.scatter(u_parts, batch, plan.d);
    (u, a_nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::mask::{build_masks, identity_ordering, reversed_ordering};

    fn random_net(d: usize, hidden: &[usize], ordering: &[usize], seed: u64) -> MadeNetwork {
        let spec = build_masks(d, hidden, ordering).unwrap();
        let mut rng = Rng::new(seed);
        let mut net = MadeNetwork::init(spec, Activation::Tanh, 7.0, &mut rng).unwrap();
        for p in net.parameters_mut() {
            for v in p.iter_mut() {
                *v = rng.uniform_range(-0.8, 0.8);
            }
        }
        net
    }

    #[test]
    fn zero_network_is_identity() {
        let spec = build_masks(3, &[4], &identity_ordering(3)).unwrap();
        let mut net = MadeNetwork::init(spec, Activation::Tanh, 7.0, &mut Rng::new(0)).unwrap();
        for p in net.parameters_mut() {
            p.fill(0.0);
        }
        let s = [0.3, -1.2, 2.0];
        let (a, b) = made_forward(&net, &s).unwrap();
        assert_eq!((a, b), (vec![0.0; 3], vec![0.0; 3]));
        assert_eq!(layer_forward(&net, &s).unwrap(), s.to_vec());
        let (back, logdet) = layer_inverse(&net, &s).unwrap();
        assert_eq!(back, s.to_vec());
        assert_eq!(logdet, 0.0);
    }

    #[test]
    fn initialised_network_is_identity() {
        let spec = build_masks(4, &[6, 6], &identity_ordering(4)).unwrap();
        let net = MadeNetwork::init(spec, Activation::Tanh, 7.0, &mut Rng::new(3)).unwrap();
        let s = [0.5, -0.25, 1.0, 3.0];
        assert_eq!(layer_forward(&net, &s).unwrap(), s.to_vec());
    }

    #[test]
    fn later_inputs_do_not_move_conditioners() {
        let net = random_net(4, &[7, 7], &reversed_ordering(4), 11);
        let v = [0.1, -0.4, 0.9, 1.3];
        let (a0, b0) = made_forward(&net, &v).unwrap();
        for z in 0..4 {
            let mut w = v;
            w[z] += 0.731;
            let (a1, b1) = made_forward(&net, &w).unwrap();
            let deg_z = net.spec().input_degrees()[z];
            for j in 0..4 {
                if net.spec().input_degrees()[j] <= deg_z {
                    assert_eq!(a0[j].to_bits(), a1[j].to_bits());
                    assert_eq!(b0[j].to_bits(), b1[j].to_bits());
                }
            }
        }
    }

    #[test]
    fn hand_built_affine_layer() {
        // d=2, no hidden units: a = (0, ln 2), b = (1, 0) through output biases.
        let spec = build_masks(2, &[], &identity_ordering(2)).unwrap();
        let weights = vec![Matrix::zeros(4, 2)];
        let clamp = 7.0;
        let raw = clamp * (std::f64::consts::LN_2 / clamp).atanh();
        let biases = vec![vec![0.0, raw, 1.0, 0.0]];
        let net = MadeNetwork::from_parts(spec, weights, biases, Activation::Tanh, clamp).unwrap();
        let out = layer_forward(&net, &[0.5, 1.5]).unwrap();
        assert!((out[0] - 1.5).abs() < 1e-12);
        assert!((out[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_recovers_input() {
        for d in 1..=4 {
            let ordering = if d % 2 == 0 { reversed_ordering(d) } else { identity_ordering(d) };
            let net = random_net(d, &[5, 5], &ordering, d as u64);
            let s: Vec<f64> = (0..d).map(|i| 0.7 * i as f64 - 1.1).collect();
            let y = layer_forward(&net, &s).unwrap();
            let (back, logdet) = layer_inverse(&net, &y).unwrap();
            for (p, q) in back.iter().zip(&s) {
                assert!((p - q).abs() < 1e-12);
            }
            let (a, _) = made_forward(&net, &s).unwrap();
            assert!((logdet - a.iter().sum::<f64>()).abs() < 1e-12);
        }
    }

    #[test]
    fn recorded_inverse_matches_sequential() {
        for (d, hidden) in [(1, vec![3]), (3, vec![4, 6]), (4, vec![]), (5, vec![9, 2, 7])] {
            let net = random_net(d, &hidden, &reversed_ordering(d), 40 + d as u64);
            let plan = InversePlan::new(&net);
            let mut rng = Rng::new(5);
            let rows: Vec<Vec<f64>> = (0..6).map(|_| (0..d).map(|_| rng.normal(0.0, 1.5)).collect()).collect();
            let y = Matrix::from_rows(&rows).unwrap();
            let mut tape = GradTape::new();
            let params = register(&mut tape, &net);
            let yn = tape.leaf(y.clone());
            let (u, a) = record_inverse(&mut tape, &plan, &params, yn, 6);
            for (i, row) in rows.iter().enumerate() {
                let (want, logdet) = layer_inverse(&net, row).unwrap();
                for j in 0..d {
                    assert!((tape.value(u)[(i, j)] - want[j]).abs() < 1e-12);
                }
                let got: f64 = a.iter().map(|&n| tape.value(n)[(i, 0)]).sum();
                assert!((got - logdet).abs() < 1e-12);
            }
        }
    }
}
