use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// Degrees and binary connectivity masks of one MADE network.
///
/// Hidden units are listed grouped by degree (ascending), so the units of a
/// given degree form a contiguous block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    d: usize,
    hidden_sizes: Vec<usize>,
    input_degrees: Vec<usize>,
    hidden_degrees: Vec<Vec<usize>>,
    /// One `out × in` mask per weight layer; the last has `2d` rows, `a` then `b`.
    masks: Vec<Matrix>,
}

/// Checks that `ordering` is a permutation of `1..=d`.
pub fn validate_ordering(d: usize, ordering: &[usize]) -> Result<()> {
    if ordering.len() != d {
        return Err(Error::InvalidOrdering(d));
    }
    let mut seen = vec![false; d];
    for &o in ordering {
        if o == 0 || o > d || seen[o - 1] {
            return Err(Error::InvalidOrdering(d));
        }
        seen[o - 1] = true;
    }
    Ok(())
}

pub fn identity_ordering(d: usize) -> Vec<usize> {
    (1..=d).collect()
}

pub fn reversed_ordering(d: usize) -> Vec<usize> {
    (1..=d).rev().collect()
}

/// `ordering[i]` is the degree of input `i`.
pub fn build_masks(d: usize, hidden_sizes: &[usize], ordering: &[usize]) -> Result<MaskSpec> {
    if d == 0 {
        return Err(Error::InvalidConfig("flow dimension must be at least 1".into()));
    }
    if hidden_sizes.iter().any(|&h| h == 0) {
        return Err(Error::InvalidConfig("hidden layer sizes must be at least 1".into()));
    }
    validate_ordering(d, ordering)?;

    let cycle = (d - 1).max(1);
    let hidden_degrees: Vec<Vec<usize>> = hidden_sizes
        .iter()
        .map(|&h| {
            let mut deg: Vec<usize> = (0..h).map(|i| i % cycle + 1).collect();
            deg.sort_unstable();
            deg
        })
        .collect();

    let connect = |out: &[usize], inp: &[usize], strict: bool| {
        let mut m = Matrix::zeros(out.len(), inp.len());
        for (r, &o) in out.iter().enumerate() {
            for (c, &i) in inp.iter().enumerate() {
                if (strict && o > i) || (!strict && o >= i) {
                    m[(r, c)] = 1.0;
                }
            }
        }
        m
    };

    let mut masks = Vec::with_capacity(hidden_sizes.len() + 1);
    let mut prev: &[usize] = ordering;
    for deg in &hidden_degrees {
        masks.push(connect(deg, prev, false));
        prev = deg;
    }
    let out_degrees: Vec<usize> = ordering.iter().chain(ordering).copied().collect();
    masks.push(connect(&out_degrees, prev, true));

    Ok(MaskSpec {
        d,
        hidden_sizes: hidden_sizes.to_vec(),
        input_degrees: ordering.to_vec(),
        hidden_degrees,
        masks,
    })
}

impl MaskSpec {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn hidden_sizes(&self) -> &[usize] {
        &self.hidden_sizes
    }

    pub fn input_degrees(&self) -> &[usize] {
        &self.input_degrees
    }

    pub fn hidden_degrees(&self) -> &[Vec<usize>] {
        &self.hidden_degrees
    }

    pub fn masks(&self) -> &[Matrix] {
        &self.masks
    }

    /// Input index carrying degree `t` (1-based).
    pub fn variable_of_degree(&self, t: usize) -> usize {
        self.input_degrees
            .iter()
            .position(|&g| g == t)
            .expect("degree within 1..=d")
    }

    /// Unit range of hidden layer `layer` holding degree `t`.
    pub fn hidden_block(&self, layer: usize, t: usize) -> std::ops::Range<usize> {
        let deg = &self.hidden_degrees[layer];
        let start = deg.partition_point(|&g| g < t);
        let end = deg.partition_point(|&g| g <= t);
        start..end
    }

    /// Boolean product of all masks: entry `(j, z)` is true when output `j`
    /// (either `a_j` or `b_j`) has any path from input `z`.
    pub fn connectivity(&self) -> Vec<Vec<bool>> {
        let mut reach: Vec<Vec<bool>> = (0..self.d)
            .map(|z| (0..self.d).map(|c| c == z).collect())
            .collect();
        // reach[z][unit]: input z reaches unit of the current layer.
        for m in &self.masks {
            reach = reach
                .iter()
                .map(|prev| {
                    (0..m.rows())
                        .map(|r| (0..m.cols()).any(|c| prev[c] && m[(r, c)] != 0.0))
                        .collect()
                })
                .collect();
        }
        (0..self.d)
            .map(|j| (0..self.d).map(|z| reach[z][j] || reach[z][j + self.d]).collect())
            .collect()
    }
}
