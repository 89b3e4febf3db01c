//! Gaussian mixture densities fit by expectation-maximization.
//!
//! All density arithmetic happens in log space; responsibilities are
//! normalized with log-sum-exp before exponentiation so that points far from
//! every component still produce proper probability rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{cholesky, log_det_cholesky, logsumexp, mahalanobis_sq, Matrix, Rng};

const LN_2PI: f64 = 1.837_877_066_409_345_3;
/// Components whose total responsibility falls below this are considered empty.
pub const EMPTY_COMPONENT_MASS: f64 = 1e-12;
/// Largest per-iteration drop in mean log-likelihood tolerated before the
/// loop stops and keeps the previous iterate.
pub const MONOTONE_SLACK: f64 = 1e-8;

/// One Gaussian with its Cholesky factor and log-determinant cached.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ComponentRecord", into = "ComponentRecord")]
pub struct GaussianComponent {
    mean: Vec<f64>,
    covariance: Matrix,
    chol: Matrix,
    log_det: f64,
}

#[derive(Serialize, Deserialize)]
struct ComponentRecord {
    mean: Vec<f64>,
    covariance: Matrix,
}

impl TryFrom<ComponentRecord> for GaussianComponent {
    type Error = Error;

    fn try_from(r: ComponentRecord) -> Result<Self> {
        GaussianComponent::new(r.mean, r.covariance)
    }
}

impl From<GaussianComponent> for ComponentRecord {
    fn from(c: GaussianComponent) -> Self {
        ComponentRecord {
            mean: c.mean,
            covariance: c.covariance,
        }
    }
}

impl GaussianComponent {
    pub fn new(mean: Vec<f64>, covariance: Matrix) -> Result<Self> {
        if covariance.rows() != mean.len() || covariance.cols() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                found: covariance.rows(),
            });
        }
        let chol = cholesky(&covariance)?;
        let log_det = log_det_cholesky(&chol);
        Ok(Self {
            mean,
            covariance,
            chol,
            log_det,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix {
        &self.covariance
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn cholesky_factor(&self) -> &Matrix {
        &self.chol
    }

    /// `log N(x; μ, Σ)` with the quadratic form from a triangular solve.
    pub fn logpdf(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let diff: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let quad = mahalanobis_sq(&self.chol, &diff);
        Ok(-0.5 * (self.dim() as f64 * LN_2PI + self.log_det + quad))
    }
}

pub fn gaussian_logpdf(x: &[f64], comp: &GaussianComponent) -> Result<f64> {
    comp.logpdf(x)
}

/// Weighted sum of Gaussian components.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GmmModel {
    weights: Vec<f64>,
    components: Vec<GaussianComponent>,
}

impl GmmModel {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianComponent>) -> Result<Self> {
        if weights.len() != components.len() || components.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: components.len(),
                found: weights.len(),
            });
        }
        let d = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: c.dim(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidConfig("mixture weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "mixture weights sum to {total}, not 1"
            )));
        }
        Ok(Self {
            weights,
            components,
        })
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    /// Per-component `log w_j + log g_j(x)`.
    pub fn component_log_joint(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| Ok(w.ln() + c.logpdf(x)?))
            .collect()
    }

    pub fn logpdf(&self, x: &[f64]) -> Result<f64> {
        Ok(logsumexp(&self.component_log_joint(x)?))
    }
}

pub fn mixture_logpdf(x: &[f64], model: &GmmModel) -> Result<f64> {
    model.logpdf(x)
}

/// Posterior component memberships, one row per data point.
#[derive(Clone, Debug)]
pub struct Responsibilities {
    values: Matrix,
    point_log_likelihood: Vec<f64>,
}

impl Responsibilities {
    pub fn values(&self) -> &Matrix {
        &self.values
    }

    /// `log f(x_i)` under the model the responsibilities were computed from.
    pub fn point_log_likelihood(&self) -> &[f64] {
        &self.point_log_likelihood
    }

    pub fn mean_log_likelihood(&self) -> f64 {
        crate::numkit::mean(&self.point_log_likelihood)
    }

    /// Builds responsibilities from a given matrix, checking that each row is a distribution.
    pub fn from_matrix(values: Matrix) -> Result<Self> {
        for (i, row) in values.row_iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-10 || row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidConfig(format!(
                    "responsibility row {i} is not a probability vector"
                )));
            }
        }
        let n = values.rows();
        Ok(Self {
            values,
            point_log_likelihood: vec![f64::NAN; n],
        })
    }
}

pub fn e_step(data: &Matrix, model: &GmmModel) -> Result<Responsibilities> {
    if data.cols() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: data.cols(),
        });
    }
    let k = model.k();
    let mut values = Matrix::zeros(data.rows(), k);
    let mut lls = Vec::with_capacity(data.rows());
    for (i, x) in data.row_iter().enumerate() {
        let lj = model.component_log_joint(x)?;
        let ll = logsumexp(&lj);
        if ll == f64::NEG_INFINITY || ll.is_nan() {
            return Err(Error::AllZeroDensity { row: i });
        }
        let row = values.row_mut(i);
        for (r, l) in row.iter_mut().zip(&lj) {
            *r = (l - ll).exp();
        }
        // Exponentiation can leave a rounding residue; renormalize exactly.
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|r| *r /= s);
        lls.push(ll);
    }
    Ok(Responsibilities {
        values,
        point_log_likelihood: lls,
    })
}

/// Sums `f(i)` (a vector of length `width`) over `0..n` with pairwise splitting.
fn pairwise_rows(lo: usize, hi: usize, width: usize, f: &impl Fn(usize, &mut [f64])) -> Vec<f64> {
    let mut acc = vec![0.0; width];
    if hi - lo <= 128 {
        let mut buf = vec![0.0; width];
        for i in lo..hi {
            buf.iter_mut().for_each(|v| *v = 0.0);
            f(i, &mut buf);
            acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += b);
        }
        return acc;
    }
    let mid = lo + (hi - lo) / 2;
    let left = pairwise_rows(lo, mid, width, f);
    let right = pairwise_rows(mid, hi, width, f);
    acc.iter_mut()
        .zip(left.iter().zip(&right))
        .for_each(|(a, (l, r))| *a = l + r);
    acc
}

/// Weighted mean and biased weighted covariance of `data` under `weights`.
fn weighted_moments(data: &Matrix, weights: &[f64], total: f64) -> (Vec<f64>, Matrix) {
    let (n, d) = (data.rows(), data.cols());
    let sums = pairwise_rows(0, n, d, &|i, out: &mut [f64]| {
        let w = weights[i];
        out.iter_mut().zip(data.row(i)).for_each(|(o, x)| *o = w * x);
    });
    let mean: Vec<f64> = sums.iter().map(|s| s / total).collect();
    let scatter = pairwise_rows(0, n, d * d, &|i, out: &mut [f64]| {
        let w = weights[i];
        let x = data.row(i);
        for a in 0..d {
            let da = x[a] - mean[a];
            for b in 0..=a {
                out[a * d + b] = w * da * (x[b] - mean[b]);
            }
        }
    });
    let mut cov = Matrix::zeros(d, d);
    for a in 0..d {
        for b in 0..=a {
            let v = scatter[a * d + b] / total;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    (mean, cov)
}

/// Re-estimates weights, means and covariances from responsibilities,
/// adding `reg_epsilon·I` to every covariance.
pub fn m_step(data: &Matrix, resp: &Responsibilities, reg_epsilon: f64) -> Result<GmmModel> {
    let r = resp.values();
    if r.rows() != data.rows() {
        return Err(Error::DimensionMismatch {
            expected: data.rows(),
            found: r.rows(),
        });
    }
    let (n, k) = (data.rows(), r.cols());
    let masses = pairwise_rows(0, n, k, &|i, out: &mut [f64]| out.copy_from_slice(r.row(i)));
    debug_assert!(
        (masses.iter().sum::<f64>() - n as f64).abs() <= 1e-8 * n as f64,
        "responsibility mass must equal the point count"
    );
    let mut weights = Vec::with_capacity(k);
    let mut components = Vec::with_capacity(k);
    for (j, &mass) in masses.iter().enumerate() {
        if !(mass >= EMPTY_COMPONENT_MASS) {
            return Err(Error::EmptyComponent { component: j });
        }
        let col = r.column(j);
        let (mean, mut cov) = weighted_moments(data, &col, mass);
        cov.add_diagonal(reg_epsilon);
        components.push(GaussianComponent::new(mean, cov)?);
        weights.push(mass / n as f64);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    GmmModel::new(weights, components)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmInit {
    RandomPoints,
    KMeansPlusPlus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub k: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub reg_epsilon: f64,
    pub init: EmInit,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            k: 1,
            max_iters: 500,
            tol: 1e-6,
            reg_epsilon: 1e-6,
            init: EmInit::KMeansPlusPlus,
            seed: 0,
        }
    }
}

impl EmConfig {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("tol must be positive".into()));
        }
        if !(self.reg_epsilon >= 0.0) {
            return Err(Error::InvalidConfig("reg_epsilon must be non-negative".into()));
        }
        Ok(())
    }
}

/// Result of [`em_fit`].
#[derive(Clone, Debug)]
pub struct EmFit {
    pub model: GmmModel,
    /// Mean per-point log-likelihood of every accepted iterate, starting with the initialization.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub reseeded: Vec<usize>,
}

fn initial_means(data: &Matrix, k: usize, init: EmInit, rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = data.rows();
    match init {
        EmInit::RandomPoints => {
            let mut idx: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut idx);
            idx[..k].iter().map(|&i| data.row(i).to_vec()).collect()
        }
        EmInit::KMeansPlusPlus => {
            let mut centers = vec![data.row(rng.below(n)).to_vec()];
            let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
            let mut nearest: Vec<f64> = data.row_iter().map(|x| sq(x, &centers[0])).collect();
            while centers.len() < k {
                let pick = rng.weighted_index(&nearest).unwrap_or_else(|| rng.below(n));
                let c = data.row(pick).to_vec();
                for (d, x) in nearest.iter_mut().zip(data.row_iter()) {
                    *d = d.min(sq(x, &c));
                }
                centers.push(c);
            }
            centers
        }
    }
}

fn data_covariance(data: &Matrix, reg_epsilon: f64) -> Matrix {
    let n = data.rows();
    let (_, mut cov) = weighted_moments(data, &vec![1.0; n], n as f64);
    cov.add_diagonal(reg_epsilon);
    cov
}

/// Expectation-maximization from k-means++ (or random-point) seeding.
///
/// Stops when the mean log-likelihood changes by less than `tol`, after
/// `max_iters` M-steps, or when the regularized M-step stops improving the
/// likelihood (the previous iterate is kept in that case).
pub fn em_fit(data: &Matrix, config: &EmConfig) -> Result<EmFit> {
    config.validate()?;
    let n = data.rows();
    if n < config.k || n == 0 {
        return Err(Error::InsufficientData(format!(
            "{n} points for {} components",
            config.k
        )));
    }
    let k = config.k;
    let mut rng = Rng::new(config.seed);
    let base_cov = data_covariance(data, config.reg_epsilon);
    let components = initial_means(data, k, config.init, &mut rng)
        .into_iter()
        .map(|m| GaussianComponent::new(m, base_cov.clone()))
        .collect::<Result<Vec<_>>>()?;
    let mut model = GmmModel::new(vec![1.0 / k as f64; k], components)?;

    let mut resp = e_step(data, &model)?;
    let mut trace = vec![resp.mean_log_likelihood()];
    let mut reseeded = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iters {
        let next = match m_step(data, &resp, config.reg_epsilon) {
            Ok(m) => m,
            Err(Error::EmptyComponent { component }) => {
                if reseeded.contains(&component) {
                    return Err(Error::EmptyComponent { component });
                }
                reseeded.push(component);
                model = reseed_component(data, &model, &resp, component, &base_cov)?;
                resp = e_step(data, &model)?;
                // The reseeded iterate may sit below the previous likelihood;
                // `reseeded` records that this happened.
                trace.push(resp.mean_log_likelihood());
                iterations += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        iterations += 1;
        let next_resp = e_step(data, &next)?;
        let ll = next_resp.mean_log_likelihood();
        let prev = *trace.last().expect("trace starts non-empty");
        if ll < prev - MONOTONE_SLACK {
            converged = true;
            break;
        }
        model = next;
        resp = next_resp;
        trace.push(ll);
        if (ll - prev).abs() < config.tol {
            converged = true;
            break;
        }
    }

    Ok(EmFit {
        model,
        trace,
        iterations,
        converged,
        reseeded,
    })
}

fn reseed_component(
    data: &Matrix,
    model: &GmmModel,
    resp: &Responsibilities,
    component: usize,
    base_cov: &Matrix,
) -> Result<GmmModel> {
    let worst = resp
        .point_log_likelihood()
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty data");
    let k = model.k();
    let mut components = model.components().to_vec();
    components[component] = GaussianComponent::new(data.row(worst).to_vec(), base_cov.clone())?;
    GmmModel::new(vec![1.0 / k as f64; k], components)
}
