use std::path::PathBuf;

use densclf::classifier::{
    estimate_priors, load_model, save_model, CovarianceMode, DensitySpec, FitOptions, GenerativeClassifier, Label,
};
use densclf::data::{compute_metrics, load_csv, make_circles, make_moons, CsvSchema, Dataset};
use densclf::flow::{FlowTrainConfig, MafArch};
use densclf::gmm::EmConfig;
use densclf::numkit::{Matrix, Rng};

fn data_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn bundled_datasets_load_with_expected_shapes() {
    let sa = load_csv(&data_file("saheart.csv"), &CsvSchema::saheart()).unwrap();
    assert_eq!((sa.len(), sa.dim()), (462, 9));
    assert_eq!(sa.class_counts(), [302, 160]);
    let famhist = sa.feature_names().iter().position(|n| n == "famhist").unwrap();
    assert!(sa.features().column(famhist).iter().all(|&v| v == 0.0 || v == 1.0));
    let p = estimate_priors(sa.labels(), sa.classes()).unwrap();
    assert!((p.log_priors()[0] - (302.0f64 / 462.0).ln()).abs() < 1e-15);
    assert!((p.log_priors()[1] - (160.0f64 / 462.0).ln()).abs() < 1e-15);

    let hb = load_csv(&data_file("haberman.csv"), &CsvSchema::haberman()).unwrap();
    assert_eq!((hb.len(), hb.dim()), (306, 3));
    assert_eq!(hb.class_counts(), [225, 81]);
}

#[test]
fn metrics_match_brute_force_counts() {
    let mut rng = Rng::new(9);
    let labels: Vec<usize> = (0..50).map(|_| rng.below(2)).collect();
    let preds: Vec<Option<usize>> = (0..50)
        .map(|_| match rng.below(5) {
            0 => None,
            v => Some(v % 2),
        })
        .collect();
    let m = compute_metrics(&preds, &labels, 1).unwrap();
    let (mut tp, mut fp, mut fneg, mut correct) = (0.0, 0.0, 0.0, 0.0);
    for (p, &l) in preds.iter().zip(&labels) {
        let said_pos = *p == Some(1);
        if *p == Some(l) {
            correct += 1.0;
        }
        if said_pos && l == 1 {
            tp += 1.0;
        } else if said_pos {
            fp += 1.0;
        } else if l == 1 {
            fneg += 1.0;
        }
    }
    assert!((m.accuracy - correct / 50.0).abs() < 1e-15);
    assert!((m.f1 - 2.0 * tp / (2.0 * tp + fp + fneg)).abs() < 1e-15);
}

#[test]
fn far_points_score_below_every_training_percentile() {
    let ds = make_circles(400, 0.5, 0.08, &mut Rng::new(4)).unwrap();
    let clf = GenerativeClassifier::fit(&ds, &DensitySpec::gmm(3), &FitOptions::default()).unwrap();
    let scores = clf.log_likelihoods(ds.features()).unwrap();
    for c in 0..2 {
        let mut own: Vec<f64> = (0..ds.len()).filter(|&i| ds.labels()[i] == c).map(|i| scores[i][c]).collect();
        own.sort_by(f64::total_cmp);
        let p1 = own[own.len() / 100];
        let centre = clf.outlier_score(&[0.0, 0.0], c).unwrap();
        let outside = clf.outlier_score(&[6.0, 0.0], c).unwrap();
        assert!(outside < p1, "class {c}: {outside} vs {p1}");
        if c == 1 {
            assert!(centre > outside);
        }
    }
    assert_eq!(clf.predict(&[6.0, 0.0], true).unwrap().label, Label::Unclassified);
}

fn replicate(ds: &Dataset, times: usize) -> Dataset {
    let idx: Vec<usize> = (0..times).flat_map(|_| 0..ds.len()).collect();
    ds.subset(&idx)
}

#[test]
fn posteriors_normalize_and_ignore_uniform_count_scaling() {
    let ds = make_moons(200, 0.15, &mut Rng::new(8)).unwrap();
    let spec = DensitySpec::Gmm {
        em: EmConfig {
            k: 1,
            ..EmConfig::default()
        },
        covariance: CovarianceMode::PerClass,
    };
    let a = GenerativeClassifier::fit(&ds, &spec, &FitOptions::default()).unwrap();
    let b = GenerativeClassifier::fit(&replicate(&ds, 3), &spec, &FitOptions::default()).unwrap();
    let probe = Matrix::from_rows(&[[0.0, 0.0], [1.0, -0.3], [-2.0, 3.0], [0.5, 0.25], [8.0, -8.0]]).unwrap();
    for (pa, pb) in a.predict_batch(&probe, false).unwrap().iter().zip(b.predict_batch(&probe, false).unwrap()) {
        let total: f64 = pa.log_posterior.iter().map(|l| l.exp()).sum();
        assert!((total - 1.0).abs() < 1e-10);
        assert_eq!(pa.label, pb.label);
        assert_ne!(pa.label, Label::Unclassified);
    }
}

#[test]
fn pooled_covariance_gives_a_linear_score_gap() {
    let ds = make_moons(200, 0.2, &mut Rng::new(3)).unwrap();
    let spec = DensitySpec::Gmm {
        em: EmConfig::with_k(1),
        covariance: CovarianceMode::Pooled,
    };
    let clf = GenerativeClassifier::fit(&ds, &spec, &FitOptions::default()).unwrap();
    let gap = |x: &[f64]| {
        let s = clf.class_scores(x).unwrap();
        s[1] - s[0]
    };
    // An affine function agrees with its chord midpoint.
    let (p, q) = ([-1.3, 2.2], [2.4, -0.7]);
    let mid = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
    assert!((gap(&mid) - (gap(&p) + gap(&q)) / 2.0).abs() < 1e-9);
}

#[test]
fn saved_flow_classifier_predicts_identically() {
    let ds = make_moons(120, 0.1, &mut Rng::new(12)).unwrap();
    let spec = DensitySpec::maf(
        MafArch::new(2, vec![8]),
        FlowTrainConfig {
            epochs: 5,
            learning_rate: 1e-3,
            ..FlowTrainConfig::default()
        },
    );
    let clf = GenerativeClassifier::fit(&ds, &spec, &FitOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("maf.json");
    save_model(&path, &clf, None).unwrap();
    let back = load_model(&path).unwrap();
    let a = clf.predict_batch(ds.features(), true).unwrap();
    let b = back.predict_batch(ds.features(), true).unwrap();
    assert_eq!(a, b);
}
