//! Run settings: defaults, overlaid by a flat TOML file, overlaid by flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use densclf::classifier::{CovarianceMode, DensitySpec};
use densclf::data::CsvSchema;
use densclf::flow::{Activation, FlowTrainConfig, MafArch};
use densclf::gmm::EmConfig;

use crate::failure::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SchemaKind {
    /// Numeric features plus a label column.
    Generic,
    Saheart,
    Haberman,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Gmm,
    Maf,
    /// Both families; cross-validate only.
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceChoice {
    PerClass,
    Pooled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ActivationChoice {
    Tanh,
    Relu,
}

/// Settings accepted both as flags and as keys of the `--config` file.
#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Labelled CSV file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub schema: Option<SchemaKind>,
    /// Label column for the generic schema.
    #[arg(long)]
    pub label_column: Option<String>,
    /// Class counted as positive for F1 (default: last class).
    #[arg(long)]
    pub positive_class: Option<String>,
    #[arg(long, value_enum)]
    pub model: Option<ModelChoice>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub standardize: Option<bool>,
    #[arg(long)]
    pub reject_quantile: Option<f64>,
    /// Mark points below every class threshold as unclassified.
    #[arg(long)]
    pub use_threshold: Option<bool>,

    /// Mixture components per class.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub covariance: Option<CovarianceChoice>,
    #[arg(long)]
    pub reg_epsilon: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,

    /// Flow layers.
    #[arg(long)]
    pub layers: Option<usize>,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub activation: Option<ActivationChoice>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Share of each class held out for early stopping; 0 disables it.
    #[arg(long)]
    pub validation_fraction: Option<f64>,

    #[arg(long)]
    pub folds: Option<usize>,
    /// Select k from `k_grid` on an inner split of each training portion.
    #[arg(long)]
    pub tune: Option<bool>,
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub inner_validation_fraction: Option<f64>,
}

macro_rules! overlay {
    ($low:expr, $high:expr, $($field:ident),+ $(,)?) => {
        Settings { $($field: $high.$field.or($low.$field)),+ }
    };
}

impl Settings {
    /// Fields set in `high` win over those in `self`.
    pub fn overlay(self, high: Settings) -> Settings {
        overlay!(
            self, high, data, schema, label_column, positive_class, model, seed, standardize,
            reject_quantile, use_threshold, k, covariance, reg_epsilon, max_iters, tol, layers,
            hidden, activation, epochs, batch_size, learning_rate, patience, validation_fraction,
            folds, tune, k_grid, inner_validation_fraction,
        )
    }

    pub fn from_file(path: &Path) -> Result<Settings, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut settings: Settings =
            toml::from_str(&text).map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))?;
        // Relative data paths are taken from the config file's directory.
        if let (Some(data), Some(dir)) = (&settings.data, path.parent()) {
            if data.is_relative() {
                settings.data = Some(dir.join(data));
            }
        }
        Ok(settings)
    }
}

/// Fully resolved settings, echoed into every output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub schema: SchemaKind,
    pub label_column: String,
    pub positive_class: Option<String>,
    pub model: ModelChoice,
    pub seed: u64,
    pub standardize: bool,
    pub reject_quantile: f64,
    pub use_threshold: bool,
    pub k: usize,
    pub covariance: CovarianceChoice,
    pub reg_epsilon: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub layers: usize,
    pub hidden: Vec<usize>,
    pub activation: ActivationChoice,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub validation_fraction: f64,
    pub folds: usize,
    pub tune: bool,
    pub k_grid: Vec<usize>,
    pub inner_validation_fraction: f64,
}

impl RunConfig {
    /// Defaults, then `file` (if any), then `flags`.
    pub fn resolve(file: Option<&Path>, flags: Settings) -> Result<RunConfig, Failure> {
        let merged = match file {
            Some(p) => Settings::from_file(p)?.overlay(flags),
            None => flags,
        };
        let em = EmConfig::default();
        let train = FlowTrainConfig::default();
        let schema = merged.schema.unwrap_or(SchemaKind::Generic);
        let label_column = merged.label_column.unwrap_or_else(|| match schema {
            SchemaKind::Generic => "label".into(),
            SchemaKind::Saheart => CsvSchema::saheart().label_column,
            SchemaKind::Haberman => CsvSchema::haberman().label_column,
        });
        Ok(RunConfig {
            data: merged.data,
            schema,
            label_column,
            positive_class: merged.positive_class,
            model: merged.model.unwrap_or(ModelChoice::Gmm),
            seed: merged.seed.unwrap_or(0),
            standardize: merged.standardize.unwrap_or(true),
            reject_quantile: merged.reject_quantile.unwrap_or(0.001),
            use_threshold: merged.use_threshold.unwrap_or(false),
            k: merged.k.unwrap_or(1),
            covariance: merged.covariance.unwrap_or(CovarianceChoice::PerClass),
            reg_epsilon: merged.reg_epsilon.unwrap_or(em.reg_epsilon),
            max_iters: merged.max_iters.unwrap_or(em.max_iters),
            tol: merged.tol.unwrap_or(em.tol),
            layers: merged.layers.unwrap_or(5),
            hidden: merged.hidden.unwrap_or_else(|| vec![30, 30]),
            activation: merged.activation.unwrap_or(ActivationChoice::Tanh),
            epochs: merged.epochs.unwrap_or(train.epochs),
            batch_size: merged.batch_size.unwrap_or(train.batch_size),
            learning_rate: merged.learning_rate.unwrap_or(train.learning_rate),
            patience: merged.patience.unwrap_or(train.patience),
            validation_fraction: merged.validation_fraction.unwrap_or(train.validation_fraction),
            folds: merged.folds.unwrap_or(5),
            tune: merged.tune.unwrap_or(false),
            k_grid: merged.k_grid.unwrap_or_else(|| (1..=5).collect()),
            inner_validation_fraction: merged.inner_validation_fraction.unwrap_or(0.2),
        })
    }

    pub fn csv_schema(&self) -> CsvSchema {
        match self.schema {
            SchemaKind::Generic => CsvSchema::new(self.label_column.clone()),
            SchemaKind::Saheart => CsvSchema::saheart(),
            SchemaKind::Haberman => CsvSchema::haberman(),
        }
    }

    pub fn gmm_spec(&self) -> DensitySpec {
        DensitySpec::Gmm {
            em: EmConfig {
                k: self.k,
                max_iters: self.max_iters,
                tol: self.tol,
                reg_epsilon: self.reg_epsilon,
                ..EmConfig::default()
            },
            covariance: match self.covariance {
                CovarianceChoice::PerClass => CovarianceMode::PerClass,
                CovarianceChoice::Pooled => CovarianceMode::Pooled,
            },
        }
    }

    pub fn maf_spec(&self) -> DensitySpec {
        let mut arch = MafArch::new(self.layers, self.hidden.clone());
        arch.activation = match self.activation {
            ActivationChoice::Tanh => Activation::Tanh,
            ActivationChoice::Relu => Activation::Relu,
        };
        DensitySpec::maf(
            arch,
            FlowTrainConfig {
                epochs: self.epochs,
                batch_size: self.batch_size,
                learning_rate: self.learning_rate,
                patience: self.patience,
                seed: self.seed,
                validation_fraction: self.validation_fraction,
            },
        )
    }

    /// Density specs selected by `model`, in table order.
    pub fn specs(&self) -> Vec<DensitySpec> {
        match self.model {
            ModelChoice::Gmm => vec![self.gmm_spec()],
            ModelChoice::Maf => vec![self.maf_spec()],
            ModelChoice::Both => vec![self.gmm_spec(), self.maf_spec()],
        }
    }
}
