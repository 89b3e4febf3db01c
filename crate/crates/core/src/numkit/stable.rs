//! Reductions that stay accurate over long inputs and extreme magnitudes.

const PAIRWISE_BLOCK: usize = 128;

/// `log Σ exp(vᵢ)` via the max-shift identity.
///
/// All-`-inf` input (and the empty slice) yields `-inf`.
pub fn logsumexp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if !max.is_finite() {
        return max;
    }
    if v.len() == 1 {
        return v[0];
    }
    let s: f64 = v.iter().map(|x| (x - max).exp()).sum();
    max + s.ln()
}

/// Pairwise summation with a fixed split order, so results are reproducible
/// and the rounding error grows as O(log n).
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= PAIRWISE_BLOCK {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(v) / v.len() as f64
}
