//! Acceptance suite. Runs every criterion at its pinned tolerance and prints
//! one PASS/FAIL line per criterion; exits non-zero if any fails.
//!
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- 4 5`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use densclf::classifier::{DensitySpec, FitOptions, GenerativeClassifier, Label};
use densclf::data::{make_circles, make_moons, Dataset, Scaler};
use densclf::flow::{
    layer_forward, layer_inverse, maf_log_density_batch, maf_train, nll_gradient, FlowTrainConfig, MafArch,
    MafModel,
};
use densclf::gmm::{em_fit, EmConfig};
use densclf::numkit::{Matrix, Rng};
use densclf::plot::{region_labels, unclassified_fraction, Grid};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_matrix(rng: &mut Rng, n: usize, d: usize, f: impl Fn(&mut Rng, usize) -> f64) -> Matrix {
    let mut v = Vec::with_capacity(n * d);
    for _ in 0..n {
        for j in 0..d {
            v.push(f(rng, j));
        }
    }
    Matrix::new(n, d, v).unwrap()
}

/// Rows drawn around `clusters` random centres with per-axis random spread.
fn clustered(rng: &mut Rng, n: usize, d: usize, clusters: usize) -> Matrix {
    let centres: Vec<Vec<f64>> = (0..clusters).map(|_| (0..d).map(|_| rng.normal(0.0, 3.0)).collect()).collect();
    let spread: Vec<f64> = (0..d).map(|_| rng.uniform_range(0.3, 2.0)).collect();
    let mut v = Vec::with_capacity(n * d);
    for _ in 0..n {
        let c = &centres[rng.below(clusters)];
        for j in 0..d {
            v.push(c[j] + spread[j] * rng.standard_normal());
        }
    }
    Matrix::new(n, d, v).unwrap()
}

fn c1_em_monotone() -> Outcome {
    let mut rng = Rng::new(101);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let n = 50 + rng.below(451);
        let d = 1 + rng.below(5);
        let k = 1 + rng.below(5);
        let clusters = 1 + rng.below(5);
        let x = clustered(&mut rng, n, d, clusters);
        let cfg = EmConfig {
            k,
            seed: i,
            ..EmConfig::default()
        };
        let fit = em_fit(&x, &cfg).map_err(|e| format!("dataset {i}: {e}"))?;
        for w in fit.trace.windows(2) {
            worst = worst.min(w[1] - w[0]);
        }
        ensure(worst >= -1e-8, format!("dataset {i} (n={n}, d={d}, k={k}): drop {worst:e}"))?;
    }
    Ok(format!("50 datasets, largest step decrease {:e}", (-worst).max(0.0)))
}

fn c2_gmm_closed_form() -> Outcome {
    let mut rng = Rng::new(202);
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let n = 20 + rng.below(300);
        let d = 1 + rng.below(5);
        let x = random_matrix(&mut rng, n, d, |r, j| r.normal(j as f64, 1.0 + j as f64));
        let mut mean = vec![0.0; d];
        for row in x.row_iter() {
            for j in 0..d {
                mean[j] += row[j] / n as f64;
            }
        }
        let mut cov = vec![0.0; d * d];
        for row in x.row_iter() {
            for a in 0..d {
                for b in 0..d {
                    cov[a * d + b] += (row[a] - mean[a]) * (row[b] - mean[b]) / n as f64;
                }
            }
        }
        for a in 0..d {
            cov[a * d + a] += eps;
        }
        let cfg = EmConfig {
            k: 1,
            reg_epsilon: eps,
            seed: i,
            ..EmConfig::default()
        };
        let fit = em_fit(&x, &cfg).map_err(|e| format!("dataset {i}: {e}"))?;
        let comp = &fit.model.components()[0];
        for (a, b) in comp.mean().iter().zip(&mean) {
            worst = worst.max((a - b).abs());
        }
        for (a, b) in comp.covariance().as_slice().iter().zip(&cov) {
            worst = worst.max((a - b).abs());
        }
        ensure((fit.model.weights()[0] - 1.0).abs() < 1e-12, format!("dataset {i}: weight"))?;
        ensure(worst <= 1e-8, format!("dataset {i}: max abs deviation {worst:e}"))?;
    }
    Ok(format!("20 datasets, max abs deviation {worst:e}"))
}

fn perturbed(d: usize, layers: usize, rng: &mut Rng) -> MafModel {
    let hidden = vec![3 * d + 2; 1 + rng.below(2)];
    let mut model = MafModel::init(d, &MafArch::new(layers, hidden), Scaler::identity(d), rng).unwrap();
    for layer in model.layers_mut() {
        for p in layer.parameters_mut() {
            for v in p.iter_mut() {
                *v += rng.uniform_range(-0.5, 0.5);
            }
        }
    }
    model
}

fn jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let d = x.len();
    let mut jac = vec![vec![0.0; d]; d];
    for z in 0..d {
        let mut hi = x.to_vec();
        let mut lo = x.to_vec();
        hi[z] += h;
        lo[z] -= h;
        let (fh, fl) = (f(&hi), f(&lo));
        for j in 0..d {
            jac[j][z] = (fh[j] - fl[j]) / (2.0 * h);
        }
    }
    jac
}

fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap();
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    det
}

fn mean_nll(model: &MafModel, z: &Matrix) -> f64 {
    z.row_iter().map(|r| -model.log_density_standardized(r).unwrap()).sum::<f64>() / z.rows() as f64
}

fn c3_flow_structure() -> Outcome {
    let mut rng = Rng::new(303);
    let (mut inv, mut leak, mut det_rel, mut grad_rel): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    let mut models = 0;
    for d in 1..=4 {
        for layers in 1..=3 {
            for _ in 0..2 {
                models += 1;
                let model = perturbed(d, layers, &mut rng);
                let u: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();

                // (a) inverse after forward, through the whole stack.
                let mut s = u.clone();
                for layer in model.layers() {
                    s = layer_forward(layer, &s).unwrap();
                }
                for layer in model.layers().iter().rev() {
                    s = layer_inverse(layer, &s).unwrap().0;
                }
                inv = inv.max(u.iter().zip(&s).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));

                for layer in model.layers() {
                    let f = |v: &[f64]| layer_forward(layer, v).unwrap();
                    let jac = jacobian(f, &u, 1e-5);
                    // (b) outputs ignore inputs of higher autoregressive degree.
                    let deg = layer.spec().input_degrees();
                    for j in 0..d {
                        for z in 0..d {
                            if deg[z] > deg[j] {
                                leak = leak.max(jac[j][z].abs());
                            }
                        }
                    }
                    // (c) layer log-determinant against the numerical Jacobian.
                    let logdet = layer_inverse(layer, &f(&u)).unwrap().1;
                    let fd = determinant(jac);
                    det_rel = det_rel.max((logdet.exp() - fd).abs() / fd.abs());
                }

                // (d) tape gradient of the mean NLL against central differences.
                let z = random_matrix(&mut rng, 5, d, |r, _| r.normal(0.0, 1.5));
                let (value, grads) = nll_gradient(&model, &z).map_err(|e| e.to_string())?;
                ensure((value - mean_nll(&model, &z)).abs() < 1e-10, "taped NLL disagrees with sequential NLL")?;
                let h = 1e-6;
                let mut k = 0;
                for l in 0..layers {
                    let slices = model.layers()[l].clone().parameters_mut().count();
                    for p in 0..slices {
                        for e in 0..grads[k].len() {
                            let shifted = |delta: f64| {
                                let mut m = model.clone();
                                m.layers_mut()[l].parameters_mut().nth(p).unwrap()[e] += delta;
                                mean_nll(&m, &z)
                            };
                            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                            grad_rel = grad_rel.max((grads[k][e] - fd).abs() / fd.abs().max(1e-3));
                        }
                        k += 1;
                    }
                }
            }
        }
    }
    ensure(inv <= 1e-9, format!("(a) inverse error {inv:e}"))?;
    ensure(leak <= 1e-6, format!("(b) autoregressive leak {leak:e}"))?;
    ensure(det_rel <= 1e-4, format!("(c) log-det relative error {det_rel:e}"))?;
    ensure(grad_rel <= 1e-4, format!("(d) gradient relative error {grad_rel:e}"))?;
    Ok(format!(
        "{models} models; inverse {inv:.1e}, leak {leak:.1e}, det {det_rel:.1e}, grad {grad_rel:.1e}"
    ))
}

fn toy_flow(layers: usize, epochs: usize) -> (MafArch, FlowTrainConfig) {
    let arch = MafArch::new(layers, vec![32, 32]);
    let train = FlowTrainConfig {
        epochs,
        batch_size: 32,
        learning_rate: 1e-3,
        patience: 20,
        seed: 0,
        validation_fraction: 0.2,
    };
    (arch, train)
}

fn grid_matrix(grid: &Grid) -> Matrix {
    let mut v = Vec::new();
    for &y in &grid.ys() {
        for &x in &grid.xs() {
            v.push(x);
            v.push(y);
        }
    }
    Matrix::new(v.len() / 2, 2, v).unwrap()
}

fn c4_normalization() -> Outcome {
    let mut rng = Rng::new(404);
    let mut x = Matrix::zeros(1000, 2);
    for r in 0..x.rows() {
        let (cx, cy) = if rng.uniform() < 0.5 { (-1.5, -0.5) } else { (1.5, 0.5) };
        let row = x.row_mut(r);
        row[0] = cx + 0.5 * rng.standard_normal();
        row[1] = cy + 0.6 * rng.standard_normal();
    }
    let (arch, cfg) = toy_flow(5, 200);
    let fit = maf_train(&x, Scaler::fit(&x).unwrap(), &arch, &cfg).map_err(|e| e.to_string())?;
    let grid = Grid::square(6.0, 0.05);
    let log_scale: f64 = fit.model.scaler().stddevs().iter().map(|s| s.ln()).sum();
    let ld = maf_log_density_batch(&fit.model, &grid_matrix(&grid)).map_err(|e| e.to_string())?;
    let mass: f64 = ld.iter().map(|l| (l - log_scale).exp()).sum::<f64>() * grid.step * grid.step;
    ensure((mass - 1.0).abs() <= 0.03, format!("integral {mass:.4}"))?;
    Ok(format!("integral {mass:.4} over [-6,6]^2, best epoch {}", fit.best_epoch))
}

fn c5_nll_floor() -> Outcome {
    let entropy = 1.0 + (2.0 * std::f64::consts::PI).ln();
    let mut rng = Rng::new(505);
    let x = random_matrix(&mut rng, 1000, 2, |r, _| r.standard_normal());
    let (arch, mut cfg) = toy_flow(5, 200);
    cfg.validation_fraction = 0.0;
    cfg.epochs = 100;
    let fit = maf_train(&x, Scaler::identity(2), &arch, &cfg).map_err(|e| e.to_string())?;
    let nll = mean_nll(&fit.model, &x);
    let fresh = random_matrix(&mut rng, 5000, 2, |r, _| r.standard_normal());
    let held_out = mean_nll(&fit.model, &fresh);
    ensure(
        (nll - entropy).abs() <= 0.15,
        format!("mean NLL {nll:.4} vs {entropy:.4}"),
    )?;
    Ok(format!("mean NLL {nll:.4} (held-out {held_out:.4}) vs entropy {entropy:.4}"))
}

fn accuracy(clf: &GenerativeClassifier, test: &Dataset) -> f64 {
    let preds = clf.predict_batch(test.features(), false).unwrap();
    let hits = preds.iter().zip(test.labels()).filter(|(p, &l)| p.label == Label::Class(l)).count();
    hits as f64 / test.len() as f64
}

fn c6_toy() -> Outcome {
    let opts = FitOptions::default();
    let (arch, train) = toy_flow(5, 200);
    let maf = DensitySpec::maf(arch, train);
    let moons = make_moons(400, 0.1, &mut Rng::new(61)).unwrap();
    let moons_test = make_moons(400, 0.1, &mut Rng::new(62)).unwrap();
    let circles = make_circles(400, 0.5, 0.08, &mut Rng::new(63)).unwrap();
    let circles_test = make_circles(400, 0.5, 0.08, &mut Rng::new(64)).unwrap();

    let fit = |ds: &Dataset, spec: &DensitySpec| GenerativeClassifier::fit(ds, spec, &opts).map_err(|e| e.to_string());
    let moons_gmm = accuracy(&fit(&moons, &DensitySpec::gmm(5))?, &moons_test);
    let moons_maf = accuracy(&fit(&moons, &maf)?, &moons_test);
    let circles_gmm = accuracy(&fit(&circles, &DensitySpec::gmm(1))?, &circles_test);
    let circles_flow = fit(&circles, &maf)?;
    let circles_maf = accuracy(&circles_flow, &circles_test);
    let labels = region_labels(&circles_flow, &Grid::square(4.0, 0.05), true).map_err(|e| e.to_string())?;
    let unclassified = unclassified_fraction(&labels);

    let summary = format!(
        "moons GMM {moons_gmm:.3} MAF {moons_maf:.3}; circles GMM {circles_gmm:.3} MAF {circles_maf:.3}; \
         unclassified {:.1}%",
        100.0 * unclassified
    );
    ensure(
        moons_gmm >= 0.95 && moons_maf >= 0.95 && circles_gmm >= 0.95 && circles_maf >= 0.95 && unclassified >= 0.30,
        summary.clone(),
    )?;
    Ok(summary)
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Runs `cross-validate` with a shipped config and returns the report text.
fn run_cv(config: &str, out: &Path) -> Result<String, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_densclf"))
        .args(["cross-validate", "--config"])
        .arg(repo().join("configs").join(config))
        .arg("--out-dir")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!("exit {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr)));
    }
    std::fs::read_to_string(out.join("report.json")).map_err(|e| e.to_string())
}

/// Compares each model row with its published (accuracy %, F1 %) pair.
fn check_table(report: &str, expected: &[(&str, f64, f64)]) -> Outcome {
    let v: serde_json::Value = serde_json::from_str(report).map_err(|e| e.to_string())?;
    let seed = &v["config"]["seed"];
    let mut parts = Vec::new();
    let mut ok = true;
    for (model, acc, f1) in expected {
        let row = v["results"]
            .as_array()
            .and_then(|rs| rs.iter().find(|r| r["model"] == *model))
            .ok_or(format!("no {model} row"))?;
        let summary = &row["summary"];
        let got_acc = 100.0 * summary["mean_accuracy"].as_f64().ok_or(format!("{model} failed"))?;
        let got_f1 = 100.0 * summary["mean_f1"].as_f64().ok_or(format!("{model} failed"))?;
        ok &= (got_acc - acc).abs() <= 5.0 && (got_f1 - f1).abs() <= 8.0;
        parts.push(format!("{model} {got_acc:.2}%/{got_f1:.2}% (ref {acc:.2}/{f1:.2})"));
    }
    let line = format!("{}; seed {seed}", parts.join(", "));
    ensure(ok, line.clone())?;
    Ok(line)
}

fn c7_saheart(scratch: &Path) -> Outcome {
    let report = run_cv("saheart.toml", &scratch.join("saheart_a"))?;
    check_table(&report, &[("GMM", 65.14, 42.74), ("MAF", 71.86, 61.00)])
}

fn c8_haberman(scratch: &Path) -> Outcome {
    let report = run_cv("haberman.toml", &scratch.join("haberman"))?;
    check_table(&report, &[("GMM", 67.98, 26.51), ("MAF", 75.18, 26.44)])
}

fn c9_determinism(scratch: &Path) -> Outcome {
    let first = scratch.join("saheart_a").join("report.json");
    let first = match std::fs::read(&first) {
        Ok(bytes) => bytes,
        Err(_) => run_cv("saheart.toml", &scratch.join("saheart_a"))?.into_bytes(),
    };
    let second = run_cv("saheart.toml", &scratch.join("saheart_b"))?.into_bytes();
    ensure(first == second, "reports differ")?;
    Ok(format!("{} byte report reproduced", first.len()))
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let scratch = tempfile::tempdir().unwrap();
    let dir = scratch.path().to_path_buf();
    let criteria: Vec<(usize, &str, Box<dyn Fn() -> Outcome>)> = vec![
        (1, "EM monotonicity", Box::new(c1_em_monotone)),
        (2, "k=1 closed form", Box::new(c2_gmm_closed_form)),
        (3, "flow structure", Box::new(c3_flow_structure)),
        (4, "density normalization", Box::new(c4_normalization)),
        (5, "NLL floor", Box::new(c5_nll_floor)),
        (6, "toy replication", Box::new(c6_toy)),
        (7, "SAHeart table", Box::new({
            let d = dir.clone();
            move || c7_saheart(&d)
        })),
        (8, "Haberman table", Box::new({
            let d = dir.clone();
            move || c8_haberman(&d)
        })),
        (9, "determinism", Box::new({
            let d = dir.clone();
            move || c9_determinism(&d)
        })),
    ];

    let mut failed = 0;
    for (n, name, run) in &criteria {
        if !wanted.is_empty() && !wanted.contains(n) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n} {name}: PASS  {detail}  [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} {name}: FAIL  {detail}  [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
