use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;

use densclf::classifier::{load_model, save_model, FitOptions, GenerativeClassifier, Label};
use densclf::data::{
    create_with_comment, load_csv, load_features, make_circles, make_moons, stratified_kfold, CsvSchema, Dataset,
};
use densclf::harness::{cross_validate, CvConfig, CvResult};
use densclf::numkit::Rng;
use densclf::plot::{render_regions_svg, Grid};
use densclf::report::{results_table, DatasetInfo, RunReport, TOOL_NAME, TOOL_VERSION};
use densclf::Error;

use crate::config::{ModelChoice, RunConfig, Settings};
use crate::failure::Failure;

/// Two header lines naming the tool, the command and its resolved settings.
pub fn provenance<C: Serialize>(command: &str, config: &C) -> Result<String, Failure> {
    let json = serde_json::to_string(config).map_err(Failure::runtime)?;
    Ok(format!("{TOOL_NAME} {TOOL_VERSION} {command}\nconfig: {json}"))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::from(Error::io(path, e)))
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ToyKind {
    Moons,
    Circles,
}

#[derive(Debug, Args, Serialize)]
pub struct ToyArgs {
    #[arg(long, value_enum)]
    pub kind: ToyKind,
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    /// Standard deviation of the Gaussian noise added to each coordinate.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Inner to outer radius ratio for circles.
    #[arg(long, default_value_t = 0.5)]
    pub factor: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn generate_toy(args: &ToyArgs) -> Result<(), Failure> {
    let mut rng = Rng::new(args.seed);
    let ds = match args.kind {
        ToyKind::Moons => make_moons(args.n, args.noise, &mut rng)?,
        ToyKind::Circles => make_circles(args.n, args.factor, args.noise, &mut rng)?,
    };
    ds.write_csv(&args.out, "label", Some(&provenance("generate-toy", args)?))?;
    println!("wrote {} rows to {}", ds.len(), args.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Flat TOML file with the same keys as the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
    /// Where to write the model record.
    #[arg(long)]
    pub out: PathBuf,
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset, Failure> {
    let path = cfg.data.as_ref().ok_or_else(|| Failure::usage("no data file given (--data)"))?;
    Ok(load_csv(path, &cfg.csv_schema())?)
}

fn fit_options(cfg: &RunConfig) -> FitOptions {
    FitOptions {
        standardize: cfg.standardize,
        reject_quantile: cfg.reject_quantile,
        seed: cfg.seed,
    }
}

pub fn train(args: TrainArgs) -> Result<(), Failure> {
    let cfg = RunConfig::resolve(args.config.as_deref(), args.settings)?;
    let spec = match cfg.model {
        ModelChoice::Gmm => cfg.gmm_spec(),
        ModelChoice::Maf => cfg.maf_spec(),
        ModelChoice::Both => return Err(Failure::usage("train takes a single model kind")),
    };
    let ds = load_dataset(&cfg)?;
    let (clf, traces) = GenerativeClassifier::fit_traced(&ds, &spec, &fit_options(&cfg))
        .map_err(Failure::runtime)?;
    let echo = serde_json::json!({ "command": "train", "config": &cfg });
    save_model(&args.out, &clf, Some(echo))?;
    for t in &traces {
        let last = t.trace.last().copied().unwrap_or(f64::NAN);
        println!("class {}: {} iterations, final {} {last:.6}", t.label, t.iterations, t.objective);
    }
    println!("wrote model to {}", args.out.display());
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV of feature columns; a label column, if present, is ignored.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    #[arg(long)]
    pub use_threshold: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn predict(args: &PredictArgs) -> Result<(), Failure> {
    let clf = load_model(&args.model)?;
    let (_, x) = load_features(&args.input, Some(&args.label_column))?;
    if x.cols() != clf.dim() {
        return Err(Error::DimensionMismatch {
            expected: clf.dim(),
            found: x.cols(),
        }
        .into());
    }
    let preds = clf.predict_batch(&x, args.use_threshold)?;
    let classes = clf.prior().labels();

    let file = create_with_comment(&args.out, Some(&provenance("predict", args)?))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["row_index".to_string(), "predicted_label".to_string()];
    header.extend(classes.iter().map(|c| format!("log_joint_{c}")));
    header.extend(classes.iter().map(|c| format!("log_likelihood_{c}")));
    header.push("unclassified".into());
    w.write_record(&header).map_err(Error::from)?;
    for (i, p) in preds.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.push(match p.label {
            Label::Class(c) => classes[c].clone(),
            Label::Unclassified => String::new(),
        });
        rec.extend(p.log_joint.iter().map(|v| format!("{v:?}")));
        rec.extend(p.log_likelihood.iter().map(|v| format!("{v:?}")));
        rec.push(u8::from(p.label == Label::Unclassified).to_string());
        w.write_record(&rec).map_err(Error::from)?;
    }
    w.flush().map_err(|e| Failure::from(Error::io(&args.out, e)))?;
    println!("wrote {} predictions to {}", preds.len(), args.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
    /// Directory receiving the table, report, timings and fold plan.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct Timings<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    models: Vec<ModelTimings>,
}

#[derive(Serialize)]
struct ModelTimings {
    model: String,
    fold_seconds: Vec<f64>,
    total_seconds: f64,
}

pub fn cross_validate_cmd(args: CvArgs) -> Result<(), Failure> {
    let cfg = RunConfig::resolve(args.config.as_deref(), args.settings)?;
    let ds = load_dataset(&cfg)?;
    let positive = match &cfg.positive_class {
        Some(name) => ds.class_index(name).ok_or_else(|| Failure::from(Error::UnknownClass(name.clone())))?,
        None => ds.class_count() - 1,
    };
    let cv = CvConfig {
        folds: cfg.folds,
        seed: cfg.seed,
        inner_validation_fraction: cfg.inner_validation_fraction,
        tune: cfg.tune,
        k_grid: cfg.k_grid.clone(),
        arch_grid: Vec::new(),
        positive_class: positive,
        use_threshold: cfg.use_threshold,
        standardize: cfg.standardize,
        reject_quantile: cfg.reject_quantile,
    };
    fs::create_dir_all(&args.out_dir).map_err(|e| Failure::from(Error::io(&args.out_dir, e)))?;
    let header = provenance("cross-validate", &cfg)?;
    let plan = stratified_kfold(&ds, cv.folds, cv.seed)?;
    plan.write_csv(&args.out_dir.join("folds.csv"), Some(&header))?;

    let mut results: Vec<CvResult> = Vec::new();
    for spec in cfg.specs() {
        let r = cross_validate(&ds, &spec, &cv)?;
        for f in &r.folds {
            if let Some(e) = &f.error {
                eprintln!("{} fold {}: {e}", r.model, f.fold);
            }
        }
        results.push(r);
    }

    let table = results_table(&results);
    let commented: String = header.lines().map(|l| format!("# {l}\n")).collect();
    write_file(&args.out_dir.join("results.txt"), &format!("{commented}{table}"))?;
    let report = RunReport {
        tool: TOOL_NAME,
        version: TOOL_VERSION,
        command: "cross-validate",
        config: &cfg,
        dataset: DatasetInfo {
            source: ds.provenance().to_string(),
            rows: ds.len(),
            features: ds.dim(),
            classes: ds.classes().to_vec(),
            class_counts: ds.class_counts(),
            positive_class: ds.classes()[positive].clone(),
        },
        results: &results,
    };
    write_file(&args.out_dir.join("report.json"), &report.to_json()?)?;
    let timings = Timings {
        tool: TOOL_NAME,
        version: TOOL_VERSION,
        config: &cfg,
        models: results
            .iter()
            .map(|r| ModelTimings {
                model: r.model.clone(),
                fold_seconds: r.fold_seconds.clone(),
                total_seconds: r.fold_seconds.iter().sum(),
            })
            .collect(),
    };
    let timings = serde_json::to_string_pretty(&timings).map_err(Error::from)? + "\n";
    write_file(&args.out_dir.join("timings.json"), &timings)?;

    print!("{table}");
    let failed: usize = results.iter().map(CvResult::failed_folds).sum();
    if failed > 0 {
        return Err(Failure::runtime(format!(
            "{failed} fold(s) failed; partial results in {}",
            args.out_dir.display()
        )));
    }
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct PlotArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Labelled CSV whose points are drawn over the regions.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    #[arg(long, default_value_t = -4.0, allow_negative_numbers = true)]
    pub xmin: f64,
    #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
    pub xmax: f64,
    #[arg(long, default_value_t = -4.0, allow_negative_numbers = true)]
    pub ymin: f64,
    #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
    pub ymax: f64,
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    #[arg(long)]
    pub use_threshold: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn plot_regions(args: &PlotArgs) -> Result<(), Failure> {
    let clf = load_model(&args.model)?;
    if clf.dim() != 2 {
        return Err(Failure::from(Error::DimensionMismatch {
            expected: 2,
            found: clf.dim(),
        })
        .context("region plots need a two-feature model"));
    }
    let points = match &args.data {
        Some(path) => {
            let mut schema = CsvSchema::new(args.label_column.clone());
            schema.classes = Some(clf.prior().labels().to_vec());
            Some(load_csv(path, &schema)?)
        }
        None => None,
    };
    let grid = Grid {
        xmin: args.xmin,
        xmax: args.xmax,
        ymin: args.ymin,
        ymax: args.ymax,
        step: args.step,
    };
    let svg = render_regions_svg(&clf, &grid, args.use_threshold, points.as_ref(), &provenance("plot-regions", args)?)?;
    write_file(&args.out, &svg)?;
    println!("wrote {}", args.out.display());
    Ok(())
}
