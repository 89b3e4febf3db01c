//! Stratified k-fold evaluation with optional inner-split model selection.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifier::{ClassTrace, DensitySpec, FitOptions, GenerativeClassifier, Label};
use crate::data::{compute_metrics, stratified_holdout, stratified_kfold, Dataset, Metrics, MetricsReport};
use crate::error::{Error, Result};
use crate::flow::MafArch;
use crate::gmm::EmConfig;
use crate::numkit::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub seed: u64,
    /// Share of each training portion held out when selecting hyperparameters.
    pub inner_validation_fraction: f64,
    pub tune: bool,
    pub k_grid: Vec<usize>,
    /// Extra flow shapes tried when tuning; the configured shape is always tried first.
    pub arch_grid: Vec<MafArch>,
    pub positive_class: usize,
    pub use_threshold: bool,
    pub standardize: bool,
    pub reject_quantile: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            seed: 0,
            inner_validation_fraction: 0.2,
            tune: false,
            k_grid: (1..=5).collect(),
            arch_grid: Vec::new(),
            positive_class: 1,
            use_threshold: false,
            standardize: true,
            reject_quantile: 0.001,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub description: String,
    pub validation_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub seed: u64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub selected: String,
    pub candidates: Vec<Candidate>,
    pub metrics: Option<Metrics>,
    pub error: Option<String>,
    pub traces: Vec<ClassTrace>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub model: String,
    pub spec: DensitySpec,
    pub fold_seed: u64,
    pub fold_sizes: Vec<usize>,
    pub folds: Vec<FoldResult>,
    /// Present when every fold succeeded.
    pub summary: Option<MetricsReport>,
    /// Wall-clock seconds per fold; kept out of serialized output so reports stay reproducible.
    #[serde(skip)]
    pub fold_seconds: Vec<f64>,
}

impl CvResult {
    pub fn failed_folds(&self) -> usize {
        self.folds.iter().filter(|f| f.error.is_some()).count()
    }
}

/// Short human label for a density spec.
pub fn describe(spec: &DensitySpec) -> String {
    match spec {
        DensitySpec::Gmm { em, covariance } => match covariance {
            crate::classifier::CovarianceMode::PerClass => format!("k={}", em.k),
            crate::classifier::CovarianceMode::Pooled => format!("k={} pooled", em.k),
        },
        DensitySpec::Maf { arch, .. } => {
            let hidden: Vec<String> = arch.hidden_sizes.iter().map(usize::to_string).collect();
            format!("layers={} hidden=[{}]", arch.layers, hidden.join(","))
        }
    }
}

fn candidates(spec: &DensitySpec, cfg: &CvConfig) -> Vec<DensitySpec> {
    let mut out = vec![spec.clone()];
    if !cfg.tune {
        return out;
    }
    match spec {
        DensitySpec::Gmm { em, covariance } => {
            for &k in &cfg.k_grid {
                if k != em.k {
                    out.push(DensitySpec::Gmm {
                        em: EmConfig { k, ..em.clone() },
                        covariance: *covariance,
                    });
                }
            }
        }
        DensitySpec::Maf { arch, train } => {
            for a in &cfg.arch_grid {
                if a != arch {
                    out.push(DensitySpec::Maf {
                        arch: a.clone(),
                        train: train.clone(),
                    });
                }
            }
        }
    }
    out
}

fn accuracy(clf: &GenerativeClassifier, ds: &Dataset, use_threshold: bool) -> Result<Metrics> {
    let preds: Vec<Option<usize>> = clf
        .predict_batch(ds.features(), use_threshold)?
        .into_iter()
        .map(|p| match p.label {
            Label::Class(c) => Some(c),
            Label::Unclassified => None,
        })
        .collect();
    compute_metrics(&preds, ds.labels(), 0)
}

fn run_fold(
    ds: &Dataset,
    spec: &DensitySpec,
    cfg: &CvConfig,
    train_idx: &[usize],
    test_idx: &[usize],
    seed: u64,
    result: &mut FoldResult,
) -> Result<()> {
    let options = FitOptions {
        standardize: cfg.standardize,
        reject_quantile: cfg.reject_quantile,
        seed,
    };
    let pool = candidates(spec, cfg);
    let mut chosen = 0;
    if pool.len() > 1 {
        let mut rng = Rng::new(Rng::derive_seed(seed, 0xA11));
        let (inner_train, inner_val) =
            stratified_holdout(train_idx, ds.labels(), cfg.inner_validation_fraction, &mut rng);
        let inner_train = ds.subset(&inner_train);
        let inner_val = ds.subset(&inner_val);
        let mut best = f64::NEG_INFINITY;
        for (i, cand) in pool.iter().enumerate() {
            let clf = GenerativeClassifier::fit(&inner_train, cand, &options)?;
            let acc = accuracy(&clf, &inner_val, false)?.accuracy;
            result.candidates.push(Candidate {
                description: describe(cand),
                validation_accuracy: acc,
            });
            if acc > best {
                best = acc;
                chosen = i;
            }
        }
    }
    result.selected = describe(&pool[chosen]);

    let train = ds.subset(train_idx);
    let test = ds.subset(test_idx);
    let (clf, traces) = GenerativeClassifier::fit_traced(&train, &pool[chosen], &options)?;
    result.traces = traces;
    let preds: Vec<Option<usize>> = clf
        .predict_batch(test.features(), cfg.use_threshold)?
        .into_iter()
        .map(|p| p.label.class())
        .collect();
    result.metrics = Some(compute_metrics(&preds, test.labels(), cfg.positive_class)?);
    Ok(())
}

/// Runs every fold; a failing fold is recorded with its error and the
/// remaining folds still run.
///
/// Fold `f` derives its seed from `cfg.seed` and `f`, so results do not
/// depend on evaluation order.
pub fn cross_validate(ds: &Dataset, spec: &DensitySpec, cfg: &CvConfig) -> Result<CvResult> {
    if cfg.positive_class >= ds.class_count() {
        return Err(Error::UnknownClass(cfg.positive_class.to_string()));
    }
    let plan = stratified_kfold(ds, cfg.folds, cfg.seed)?;
    let mut folds = Vec::with_capacity(cfg.folds);
    let mut seconds = Vec::with_capacity(cfg.folds);
    for f in 0..cfg.folds {
        let start = Instant::now();
        let seed = Rng::derive_seed(cfg.seed, f as u64 + 1);
        let train_idx = plan.train_indices(f);
        let test_idx = plan.test_indices(f);
        let mut result = FoldResult {
            fold: f,
            seed,
            train_rows: train_idx.len(),
            test_rows: test_idx.len(),
            selected: describe(spec),
            candidates: Vec::new(),
            metrics: None,
            error: None,
            traces: Vec::new(),
        };
        if let Err(e) = run_fold(ds, spec, cfg, &train_idx, &test_idx, seed, &mut result) {
            result.metrics = None;
            result.error = Some(e.to_string());
        }
        folds.push(result);
        seconds.push(start.elapsed().as_secs_f64());
    }
    let summary = folds
        .iter()
        .map(|f| f.metrics.clone())
        .collect::<Option<Vec<_>>>()
        .map(MetricsReport::from_folds);
    Ok(CvResult {
        model: spec.kind().to_uppercase(),
        spec: spec.clone(),
        fold_seed: cfg.seed,
        fold_sizes: plan.fold_sizes(),
        folds,
        summary,
        fold_seconds: seconds,
    })
}
