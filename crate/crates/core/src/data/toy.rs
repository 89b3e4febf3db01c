//! Two-class synthetic sets in the plane.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::numkit::{Matrix, Rng};

use super::Dataset;

fn check(n: usize, noise_std: f64) -> Result<()> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::InvalidConfig(format!("toy sample count must be even and positive, got {n}")));
    }
    if !(noise_std >= 0.0) || !noise_std.is_finite() {
        return Err(Error::InvalidConfig(format!("noise_std must be >= 0, got {noise_std}")));
    }
    Ok(())
}

fn build(points: Vec<[f64; 2]>, labels: Vec<usize>, noise_std: f64, rng: &mut Rng, tag: &str) -> Result<Dataset> {
    let n = points.len();
    let mut data = Vec::with_capacity(2 * n);
    for p in points {
        data.push(p[0] + noise_std * rng.standard_normal());
        data.push(p[1] + noise_std * rng.standard_normal());
    }
    Dataset::new(
        Matrix::new(n, 2, data)?,
        labels,
        vec!["0".into(), "1".into()],
        vec!["x1".into(), "x2".into()],
        tag,
    )
}

/// Interleaved half circles: class 0 on the upper arc `(cos t, sin t)`,
/// class 1 on the lower arc `(1 - cos t, 0.5 - sin t)`, `t` evenly spaced over [0, π].
pub fn make_moons(n: usize, noise_std: f64, rng: &mut Rng) -> Result<Dataset> {
    check(n, noise_std)?;
    let half = n / 2;
    let step = if half > 1 { PI / (half - 1) as f64 } else { 0.0 };
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..half {
        let t = i as f64 * step;
        points.push([t.cos(), t.sin()]);
        labels.push(0);
    }
    for i in 0..half {
        let t = i as f64 * step;
        points.push([1.0 - t.cos(), 0.5 - t.sin()]);
        labels.push(1);
    }
    build(points, labels, noise_std, rng, &format!("moons(n={n}, noise={noise_std}, seed={})", rng.seed()))
}

/// Concentric circles: class 0 at radius 1, class 1 at `radius_factor`.
pub fn make_circles(n: usize, radius_factor: f64, noise_std: f64, rng: &mut Rng) -> Result<Dataset> {
    check(n, noise_std)?;
    if !(radius_factor > 0.0 && radius_factor < 1.0) {
        return Err(Error::InvalidConfig(format!("radius_factor must lie in (0, 1), got {radius_factor}")));
    }
    let half = n / 2;
    let step = TAU / half as f64;
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (radius, label) in [(1.0, 0), (radius_factor, 1)] {
        for i in 0..half {
            let t = i as f64 * step;
            points.push([radius * t.cos(), radius * t.sin()]);
            labels.push(label);
        }
    }
    build(
        points,
        labels,
        noise_std,
        rng,
        &format!("circles(n={n}, factor={radius_factor}, noise={noise_std}, seed={})", rng.seed()),
    )
}
