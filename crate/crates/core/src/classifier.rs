//! Bayes-rule classification over per-class density models.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Scaler};
use crate::error::{Error, Result};
use crate::flow::{maf_log_density_batch, maf_train, FlowTrainConfig, MafArch, MafModel};
use crate::gmm::{em_fit, EmConfig, GaussianComponent, GmmModel};
use crate::numkit::{logsumexp, Matrix, Rng};

/// Flows need this many rows per class before training is attempted.
pub const MIN_FLOW_CLASS_SIZE: usize = 20;

/// Log class frequencies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassPrior {
    labels: Vec<String>,
    log_priors: Vec<f64>,
}

impl ClassPrior {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn log_priors(&self) -> &[f64] {
        &self.log_priors
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// `ln(n_j / n)` for every declared class; `labels` index into `classes`.
pub fn estimate_priors(labels: &[usize], classes: &[String]) -> Result<ClassPrior> {
    if labels.is_empty() {
        return Err(Error::InsufficientData("no labels to estimate priors from".into()));
    }
    let mut counts = vec![0usize; classes.len()];
    for &l in labels {
        *counts
            .get_mut(l)
            .ok_or_else(|| Error::UnknownClass(l.to_string()))? += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::EmptyClass(classes[c].clone()));
    }
    let n = labels.len() as f64;
    Ok(ClassPrior {
        labels: classes.to_vec(),
        log_priors: counts.iter().map(|&c| (c as f64 / n).ln()).collect(),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceMode {
    /// One covariance per class and component (quadratic boundaries for k = 1).
    #[default]
    PerClass,
    /// Single-component classes sharing the count-weighted average covariance.
    Pooled,
}

/// Which density family to fit per class, with its settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DensitySpec {
    Gmm {
        em: EmConfig,
        #[serde(default)]
        covariance: CovarianceMode,
    },
    Maf {
        arch: MafArch,
        train: FlowTrainConfig,
    },
}

impl DensitySpec {
    pub fn gmm(k: usize) -> Self {
        DensitySpec::Gmm {
            em: EmConfig::with_k(k),
            covariance: CovarianceMode::PerClass,
        }
    }

    pub fn maf(arch: MafArch, train: FlowTrainConfig) -> Self {
        DensitySpec::Maf { arch, train }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DensitySpec::Gmm { .. } => "gmm",
            DensitySpec::Maf { .. } => "maf",
        }
    }
}

/// Options shared by every density kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Standardize with statistics of the whole training set before fitting.
    pub standardize: bool,
    /// Quantile of each class's training log-likelihoods used as its rejection threshold.
    pub reject_quantile: f64,
    /// Master seed; class `c` uses `Rng::derive_seed(seed, c)`.
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            standardize: true,
            reject_quantile: 0.001,
            seed: 0,
        }
    }
}

/// A fitted per-class likelihood model.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassDensity {
    Gmm(GmmModel),
    Maf(MafModel),
}

impl ClassDensity {
    pub fn dim(&self) -> usize {
        match self {
            ClassDensity::Gmm(m) => m.dim(),
            ClassDensity::Maf(m) => m.d(),
        }
    }

    /// Row-wise log densities; `raw` and its standardized copy `z` are both
    /// passed because flows carry their own scaler.
    fn log_likelihoods(&self, raw: &Matrix, z: &Matrix) -> Result<Vec<f64>> {
        match self {
            ClassDensity::Gmm(m) => z.row_iter().map(|r| m.logpdf(r)).collect(),
            ClassDensity::Maf(m) => maf_log_density_batch(m, raw),
        }
    }
}

/// Per-epoch (flow) or per-iteration (EM) objective values of one class fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassTrace {
    pub label: String,
    pub objective: String,
    pub trace: Vec<f64>,
    pub validation_trace: Vec<f64>,
    pub iterations: usize,
}

/// Outcome of [`GenerativeClassifier::predict`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Class(usize),
    Unclassified,
}

impl Label {
    pub fn class(self) -> Option<usize> {
        match self {
            Label::Class(c) => Some(c),
            Label::Unclassified => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub log_posterior: Vec<f64>,
    pub log_joint: Vec<f64>,
    pub log_likelihood: Vec<f64>,
}

/// Index of the largest entry; ties go to the lowest index.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Linear-interpolation quantile of `values` (which is sorted in place).
pub fn quantile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    values[lo] + (pos - lo as f64) * (values[hi] - values[lo])
}

/// Class priors plus one density model per class.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenerativeClassifier {
    prior: ClassPrior,
    scaler: Scaler,
    densities: Vec<ClassDensity>,
    /// Per-class rejection levels in log-likelihood units.
    reject_log_thresholds: Option<Vec<f64>>,
    d: usize,
}

impl GenerativeClassifier {
    /// Fits one density per class on that class's rows.
    pub fn fit(ds: &Dataset, spec: &DensitySpec, options: &FitOptions) -> Result<Self> {
        Ok(Self::fit_traced(ds, spec, options)?.0)
    }

    /// [`Self::fit`], also returning each class's optimisation trace.
    pub fn fit_traced(ds: &Dataset, spec: &DensitySpec, options: &FitOptions) -> Result<(Self, Vec<ClassTrace>)> {
        let prior = estimate_priors(ds.labels(), ds.classes())?;
        let d = ds.dim();
        let scaler = if options.standardize {
            Scaler::fit(ds.features())?
        } else {
            Scaler::identity(d)
        };
        let annotate = |c: usize, e: Error| Error::ClassFit {
            label: ds.classes()[c].clone(),
            source: Box::new(e),
        };

        let mut densities = Vec::with_capacity(ds.class_count());
        let mut traces = Vec::with_capacity(ds.class_count());
        for c in 0..ds.class_count() {
            let rows = ds.class_rows(c);
            let seed = Rng::derive_seed(options.seed, c as u64);
            let density = match spec {
                DensitySpec::Gmm { em, .. } => {
                    let need = em.k.max(2);
                    if rows.rows() < need {
                        return Err(annotate(
                            c,
                            Error::InsufficientData(format!("{} rows for k = {}", rows.rows(), em.k)),
                        ));
                    }
                    let cfg = EmConfig { seed, ..em.clone() };
                    let z = scaler.transform(&rows)?;
                    let fit = em_fit(&z, &cfg).map_err(|e| annotate(c, e))?;
                    traces.push(ClassTrace {
                        label: ds.classes()[c].clone(),
                        objective: "mean_log_likelihood".into(),
                        trace: fit.trace,
                        validation_trace: Vec::new(),
                        iterations: fit.iterations,
                    });
                    ClassDensity::Gmm(fit.model)
                }
                DensitySpec::Maf { arch, train } => {
                    if rows.rows() < MIN_FLOW_CLASS_SIZE {
                        return Err(annotate(
                            c,
                            Error::InsufficientData(format!(
                                "{} rows, flows need at least {MIN_FLOW_CLASS_SIZE}",
                                rows.rows()
                            )),
                        ));
                    }
                    let cfg = FlowTrainConfig { seed, ..train.clone() };
                    let fit = maf_train(&rows, scaler.clone(), arch, &cfg).map_err(|e| annotate(c, e))?;
                    traces.push(ClassTrace {
                        label: ds.classes()[c].clone(),
                        objective: "mean_nll".into(),
                        iterations: fit.train_trace.len(),
                        trace: fit.train_trace,
                        validation_trace: fit.validation_trace,
                    });
                    ClassDensity::Maf(fit.model)
                }
            };
            densities.push(density);
        }

        if let DensitySpec::Gmm {
            em,
            covariance: CovarianceMode::Pooled,
        } = spec
        {
            if em.k != 1 {
                return Err(Error::InvalidConfig("pooled covariance requires k = 1".into()));
            }
            densities = pool_covariances(densities, &ds.class_counts())?;
        }

        let mut clf = Self {
            prior,
            scaler,
            densities,
            reject_log_thresholds: None,
            d,
        };
        let mut thresholds = Vec::with_capacity(ds.class_count());
        for c in 0..ds.class_count() {
            let rows = ds.class_rows(c);
            let z = clf.scaler.transform(&rows)?;
            let mut ll = clf.densities[c].log_likelihoods(&rows, &z)?;
            thresholds.push(quantile(&mut ll, options.reject_quantile));
        }
        clf.reject_log_thresholds = Some(thresholds);
        Ok((clf, traces))
    }

    pub fn from_parts(prior: ClassPrior, scaler: Scaler, densities: Vec<ClassDensity>) -> Result<Self> {
        if densities.len() != prior.len() {
            return Err(Error::DimensionMismatch {
                expected: prior.len(),
                found: densities.len(),
            });
        }
        let d = scaler.dim();
        if let Some(bad) = densities.iter().find(|m| m.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.dim(),
            });
        }
        Ok(Self {
            prior,
            scaler,
            densities,
            reject_log_thresholds: None,
            d,
        })
    }

    pub fn prior(&self) -> &ClassPrior {
        &self.prior
    }

    pub fn densities(&self) -> &[ClassDensity] {
        &self.densities
    }

    pub fn scaler(&self) -> &Scaler {
        &self.scaler
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn class_count(&self) -> usize {
        self.prior.len()
    }

    pub fn reject_log_thresholds(&self) -> Option<&[f64]> {
        self.reject_log_thresholds.as_deref()
    }

    pub fn set_reject_log_thresholds(&mut self, thresholds: Option<Vec<f64>>) -> Result<()> {
        if let Some(t) = &thresholds {
            if t.len() != self.class_count() {
                return Err(Error::DimensionMismatch {
                    expected: self.class_count(),
                    found: t.len(),
                });
            }
        }
        self.reject_log_thresholds = thresholds;
        Ok(())
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: x.cols(),
            });
        }
        Ok(())
    }

    /// Per-row, per-class log-likelihoods (`rows × classes`).
    pub fn log_likelihoods(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        self.check(x)?;
        let z = self.scaler.transform(x)?;
        let per_class = self
            .densities
            .iter()
            .map(|m| m.log_likelihoods(x, &z))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..x.rows())
            .map(|i| per_class.iter().map(|c| c[i]).collect())
            .collect())
    }

    /// `log P(C_j) + log p(x | C_j)` for each class.
    pub fn class_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = Matrix::new(1, x.len(), x.to_vec())?;
        let ll = self.log_likelihoods(&m)?.remove(0);
        Ok(self.joint(&ll))
    }

    fn joint(&self, ll: &[f64]) -> Vec<f64> {
        ll.iter().zip(&self.prior.log_priors).map(|(l, p)| l + p).collect()
    }

    fn decide(&self, ll: Vec<f64>, use_threshold: bool) -> Prediction {
        let log_joint = self.joint(&ll);
        let norm = logsumexp(&log_joint);
        let log_posterior = log_joint.iter().map(|j| j - norm).collect();
        let rejected = use_threshold
            && self
                .reject_log_thresholds
                .as_ref()
                .is_some_and(|t| ll.iter().zip(t).all(|(l, t)| l < t));
        Prediction {
            label: if rejected {
                Label::Unclassified
            } else {
                Label::Class(argmax(&log_joint))
            },
            log_posterior,
            log_joint,
            log_likelihood: ll,
        }
    }

    /// Maximum-posterior label, or Unclassified when thresholding is on and
    /// every class log-likelihood falls below its class threshold.
    pub fn predict(&self, x: &[f64], use_threshold: bool) -> Result<Prediction> {
        let m = Matrix::new(1, x.len(), x.to_vec())?;
        Ok(self.predict_batch(&m, use_threshold)?.remove(0))
    }

    pub fn predict_batch(&self, x: &Matrix, use_threshold: bool) -> Result<Vec<Prediction>> {
        Ok(self
            .log_likelihoods(x)?
            .into_iter()
            .map(|ll| self.decide(ll, use_threshold))
            .collect())
    }

    /// Log-likelihood of `x` under class `class` alone; lower is more anomalous.
    pub fn outlier_score(&self, x: &[f64], class: usize) -> Result<f64> {
        if class >= self.class_count() {
            return Err(Error::UnknownClass(class.to_string()));
        }
        let m = Matrix::new(1, x.len(), x.to_vec())?;
        self.check(&m)?;
        let z = self.scaler.transform(&m)?;
        Ok(self.densities[class].log_likelihoods(&m, &z)?[0])
    }

    /// [`Self::outlier_score`] addressed by class name.
    pub fn outlier_score_named(&self, x: &[f64], class: &str) -> Result<f64> {
        let c = self
            .prior
            .labels
            .iter()
            .position(|l| l == class)
            .ok_or_else(|| Error::UnknownClass(class.to_string()))?;
        self.outlier_score(x, c)
    }
}

/// Replaces each single-Gaussian class covariance with `Σ n_c Σ_c / Σ n_c`.
fn pool_covariances(densities: Vec<ClassDensity>, counts: &[usize]) -> Result<Vec<ClassDensity>> {
    let comps: Vec<&GaussianComponent> = densities
        .iter()
        .map(|m| match m {
            ClassDensity::Gmm(g) if g.k() == 1 => Ok(&g.components()[0]),
            _ => Err(Error::InvalidConfig("pooled covariance requires single-Gaussian classes".into())),
        })
        .collect::<Result<_>>()?;
    let d = comps[0].dim();
    let total: usize = counts.iter().sum();
    let mut pooled = vec![0.0; d * d];
    for (comp, &n) in comps.iter().zip(counts) {
        let w = n as f64 / total as f64;
        for (p, s) in pooled.iter_mut().zip(comp.covariance().as_slice()) {
            *p += w * s;
        }
    }
    let pooled = Matrix::new(d, d, pooled)?;
    comps
        .iter()
        .map(|comp| {
            let g = GaussianComponent::new(comp.mean().to_vec(), pooled.clone())?;
            Ok(ClassDensity::Gmm(GmmModel::new(vec![1.0], vec![g])?))
        })
        .collect()
}

const MODEL_FORMAT: &str = "densclf-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    format: String,
    version: u32,
    tool_version: String,
    /// Settings the model was trained with, kept for provenance only.
    #[serde(default)]
    run_config: Option<serde_json::Value>,
    classifier: GenerativeClassifier,
}

/// Versioned JSON record of a fitted classifier.
pub fn save_model(path: &Path, model: &GenerativeClassifier, run_config: Option<serde_json::Value>) -> Result<()> {
    let record = ModelRecord {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        run_config,
        classifier: model.clone(),
    };
    let text = serde_json::to_string_pretty(&record)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<GenerativeClassifier> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let format = value.get("format").and_then(|f| f.as_str()).unwrap_or("");
    let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
    if format != MODEL_FORMAT || version != u64::from(MODEL_VERSION) {
        return Err(Error::ModelFormat(format!("format '{format}' version {version}")));
    }
    let record: ModelRecord = serde_json::from_value(value)?;
    let clf = record.classifier;
    GenerativeClassifier::from_parts(clf.prior.clone(), clf.scaler.clone(), clf.densities.clone())?;
    Ok(clf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_circles;

    fn classes(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn priors_by_counting() {
        let p = estimate_priors(&[0, 0, 1, 1], &classes(&["A", "B"])).unwrap();
        assert_eq!(p.log_priors(), &[0.5f64.ln(), 0.5f64.ln()]);
        let p = estimate_priors(&[0, 0, 0, 1], &classes(&["A", "B"])).unwrap();
        assert!((p.log_priors()[0] - 0.75f64.ln()).abs() < 1e-15);
        let total: f64 = p.log_priors().iter().map(|l| l.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(matches!(
            estimate_priors(&[0, 0], &classes(&["A", "B"])),
            Err(Error::EmptyClass(c)) if c == "B"
        ));
    }

    fn gaussian(mean: f64, var: f64) -> ClassDensity {
        let comp = GaussianComponent::new(vec![mean], Matrix::from_rows(&[[var]]).unwrap()).unwrap();
        ClassDensity::Gmm(GmmModel::new(vec![1.0], vec![comp]).unwrap())
    }

    fn two_gaussians(priors: [f64; 2]) -> GenerativeClassifier {
        let prior = ClassPrior {
            labels: classes(&["A", "B"]),
            log_priors: priors.iter().map(|p| p.ln()).collect(),
        };
        GenerativeClassifier::from_parts(prior, Scaler::identity(1), vec![gaussian(-1.0, 1.0), gaussian(2.0, 0.5)])
            .unwrap()
    }

    #[test]
    fn posterior_matches_direct_bayes() {
        let clf = two_gaussians([0.3, 0.7]);
        let pdf = |x: f64, m: f64, v: f64| (-(x - m) * (x - m) / (2.0 * v)).exp() / (std::f64::consts::TAU * v).sqrt();
        for x in [-2.0, 0.0, 0.4, 1.5, 3.0] {
            let pa = 0.3 * pdf(x, -1.0, 1.0);
            let pb = 0.7 * pdf(x, 2.0, 0.5);
            let p = clf.predict(&[x], false).unwrap();
            assert!((p.log_posterior[0].exp() - pa / (pa + pb)).abs() < 1e-12);
            assert!((p.log_posterior[1].exp() - pb / (pa + pb)).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_go_to_first_class() {
        let prior = ClassPrior {
            labels: classes(&["A", "B"]),
            log_priors: vec![0.5f64.ln(); 2],
        };
        let clf = GenerativeClassifier::from_parts(prior, Scaler::identity(1), vec![gaussian(0.0, 1.0), gaussian(0.0, 1.0)])
            .unwrap();
        assert_eq!(clf.predict(&[0.3], false).unwrap().label, Label::Class(0));
    }

    #[test]
    fn identical_densities_leave_prior_gap() {
        let prior = ClassPrior {
            labels: classes(&["A", "B"]),
            log_priors: vec![0.2f64.ln(), 0.8f64.ln()],
        };
        let clf = GenerativeClassifier::from_parts(prior, Scaler::identity(1), vec![gaussian(1.0, 2.0), gaussian(1.0, 2.0)])
            .unwrap();
        let s = clf.class_scores(&[0.7]).unwrap();
        assert!((s[1] - s[0] - (0.8f64.ln() - 0.2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn rejection_needs_every_class_below() {
        let mut clf = two_gaussians([0.5, 0.5]);
        clf.set_reject_log_thresholds(Some(vec![-5.0, -5.0])).unwrap();
        assert_eq!(clf.predict(&[40.0], true).unwrap().label, Label::Unclassified);
        assert_eq!(clf.predict(&[40.0], false).unwrap().label, Label::Class(0));
        assert_eq!(clf.predict(&[-1.0], true).unwrap().label, Label::Class(0));
    }

    #[test]
    fn outlier_score_is_joint_minus_prior() {
        let clf = two_gaussians([0.25, 0.75]);
        let s = clf.class_scores(&[0.5]).unwrap();
        for c in 0..2 {
            let o = clf.outlier_score(&[0.5], c).unwrap();
            assert!((o - (s[c] - clf.prior().log_priors()[c])).abs() < 1e-12);
        }
        assert!(matches!(clf.outlier_score(&[0.5], 2), Err(Error::UnknownClass(_))));
        assert!(clf.outlier_score_named(&[0.5], "C").is_err());
    }

    #[test]
    fn circles_blob_and_thresholds() {
        let mut rng = Rng::new(4);
        let train = make_circles(400, 0.5, 0.08, &mut rng).unwrap();
        let test = make_circles(400, 0.5, 0.08, &mut rng).unwrap();
        let clf = GenerativeClassifier::fit(&train, &DensitySpec::gmm(1), &FitOptions::default()).unwrap();
        let preds = clf.predict_batch(test.features(), false).unwrap();
        let correct = preds
            .iter()
            .zip(test.labels())
            .filter(|(p, &y)| p.label == Label::Class(y))
            .count();
        assert!(correct as f64 / 400.0 > 0.9);
        let far = clf.predict(&[6.0, 6.0], true).unwrap();
        assert_eq!(far.label, Label::Unclassified);
    }

    #[test]
    fn pooled_mode_shares_covariance() {
        let mut rng = Rng::new(2);
        let ds = make_circles(200, 0.5, 0.1, &mut rng).unwrap();
        let spec = DensitySpec::Gmm {
            em: EmConfig::with_k(1),
            covariance: CovarianceMode::Pooled,
        };
        let clf = GenerativeClassifier::fit(&ds, &spec, &FitOptions::default()).unwrap();
        let covs: Vec<&Matrix> = clf
            .densities()
            .iter()
            .map(|m| match m {
                ClassDensity::Gmm(g) => g.components()[0].covariance(),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(covs[0], covs[1]);
        let bad = DensitySpec::Gmm {
            em: EmConfig::with_k(2),
            covariance: CovarianceMode::Pooled,
        };
        assert!(GenerativeClassifier::fit(&ds, &bad, &FitOptions::default()).is_err());
    }

    #[test]
    fn model_record_roundtrip() {
        let mut rng = Rng::new(9);
        let ds = make_circles(100, 0.5, 0.1, &mut rng).unwrap();
        let clf = GenerativeClassifier::fit(&ds, &DensitySpec::gmm(2), &FitOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&path, &clf, Some(serde_json::json!({"k": 1}))).unwrap();
        let back = load_model(&path).unwrap();
        let x = [0.3, -0.2];
        assert_eq!(clf.class_scores(&x).unwrap(), back.class_scores(&x).unwrap());
        std::fs::write(&path, r#"{"format":"other","version":1}"#).unwrap();
        assert!(matches!(load_model(&path), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn quantile_interpolates() {
        let mut v = vec![4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&mut v, 0.0), 1.0);
        assert_eq!(quantile(&mut v, 1.0), 4.0);
        assert!((quantile(&mut v, 0.5) - 2.5).abs() < 1e-15);
    }
}
