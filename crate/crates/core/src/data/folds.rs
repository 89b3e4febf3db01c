use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Rng;

use super::Dataset;

/// Row-to-fold assignment for stratified k-fold cross-validation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    fold_count: usize,
    assignments: Vec<usize>,
    seed: u64,
}

impl FoldPlan {
    pub fn fold_count(&self) -> usize {
        self.fold_count
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    /// Every row outside `fold`, in ascending order.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.fold_count];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    /// Writes `row_index,fold` lines under a header.
    pub fn write_csv(&self, path: &Path, comment: Option<&str>) -> Result<()> {
        let mut w = csv::Writer::from_writer(super::create_with_comment(path, comment)?);
        w.write_record(["row_index", "fold"])?;
        for (i, f) in self.assignments.iter().enumerate() {
            w.write_record([i.to_string(), f.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Shuffles each class with `seed`, then deals its rows round-robin across folds.
///
/// The dealing position carries over from one class to the next, so fold
/// sizes differ by at most one overall as well as within each class.
pub fn stratified_kfold(ds: &Dataset, folds: usize, seed: u64) -> Result<FoldPlan> {
    if folds < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {folds}")));
    }
    let counts = ds.class_counts();
    for (c, &count) in counts.iter().enumerate() {
        if count < folds {
            return Err(Error::ClassTooSmall {
                label: ds.classes()[c].clone(),
                count,
                folds,
            });
        }
    }
    let mut rng = Rng::new(seed);
    let mut assignments = vec![0; ds.len()];
    let mut next = 0;
    for c in 0..counts.len() {
        let mut members: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels()[i] == c).collect();
        rng.shuffle(&mut members);
        for i in members {
            assignments[i] = next;
            next = (next + 1) % folds;
        }
    }
    Ok(FoldPlan {
        fold_count: folds,
        assignments,
        seed,
    })
}

/// Splits `indices` into (train, validation) per class, holding out
/// `round(fraction · class size)` rows of each class for validation.
pub fn stratified_holdout(
    indices: &[usize],
    labels: &[usize],
    fraction: f64,
    rng: &mut Rng,
) -> (Vec<usize>, Vec<usize>) {
    let classes = indices.iter().map(|&i| labels[i] + 1).max().unwrap_or(0);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for c in 0..classes {
        let mut members: Vec<usize> = indices.iter().copied().filter(|&i| labels[i] == c).collect();
        rng.shuffle(&mut members);
        let hold = ((members.len() as f64) * fraction).round() as usize;
        let hold = hold.min(members.len().saturating_sub(1));
        val.extend_from_slice(&members[..hold]);
        train.extend_from_slice(&members[hold..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Matrix;

    fn labelled(labels: Vec<usize>) -> Dataset {
        let n = labels.len();
        Dataset::new(
            Matrix::zeros(n, 1),
            labels,
            vec!["A".into(), "B".into()],
            vec!["x".into()],
            "test",
        )
        .unwrap()
    }

    #[test]
    fn exact_stratification() {
        let ds = labelled((0..20).map(|i| i % 2).collect());
        let plan = stratified_kfold(&ds, 5, 3).unwrap();
        for f in 0..5 {
            let test = plan.test_indices(f);
            let a = test.iter().filter(|&&i| ds.labels()[i] == 0).count();
            assert_eq!((a, test.len() - a), (2, 2));
        }
    }

    #[test]
    fn partition_and_sizes() {
        let ds = labelled((0..462).map(|i| usize::from(i < 160)).collect());
        let plan = stratified_kfold(&ds, 5, 11).unwrap();
        let mut sizes = plan.fold_sizes();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, vec![93, 93, 92, 92, 92]);
        let mut seen = vec![0; 462];
        for f in 0..5 {
            for i in plan.test_indices(f) {
                seen[i] += 1;
            }
            assert_eq!(plan.test_indices(f).len() + plan.train_indices(f).len(), 462);
        }
        assert!(seen.iter().all(|&s| s == 1));
    }

    #[test]
    fn small_class_rejected() {
        let ds = labelled(vec![0, 0, 0, 0, 0, 1, 1]);
        assert!(matches!(
            stratified_kfold(&ds, 5, 0),
            Err(Error::ClassTooSmall { count: 2, .. })
        ));
    }

    #[test]
    fn holdout_is_stratified_partition() {
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i % 4 == 0)).collect();
        let idx: Vec<usize> = (0..100).collect();
        let (tr, va) = stratified_holdout(&idx, &labels, 0.2, &mut Rng::new(5));
        assert_eq!(va.len(), 20);
        assert_eq!(va.iter().filter(|&&i| labels[i] == 1).count(), 5);
        let mut all: Vec<usize> = tr.iter().chain(&va).copied().collect();
        all.sort_unstable();
        assert_eq!(all, idx);
    }
}
