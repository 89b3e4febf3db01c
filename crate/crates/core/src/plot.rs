//! Decision-region rendering for two-dimensional classifiers as standalone SVG.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classifier::{GenerativeClassifier, Label};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numkit::Matrix;

const REGION_COLORS: [&str; 6] = ["#9ecae1", "#fdae6b", "#bcbddc", "#fa9fb5", "#c7e9c0", "#d9d9d9"];
const POINT_COLORS: [&str; 6] = ["#08519c", "#a63603", "#54278f", "#ae017e", "#006d2c", "#252525"];
const UNCLASSIFIED_COLOR: &str = "#31a354";
const CANVAS: f64 = 600.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub step: f64,
}

impl Grid {
    pub fn square(half_width: f64, step: f64) -> Self {
        Self {
            xmin: -half_width,
            xmax: half_width,
            ymin: -half_width,
            ymax: half_width,
            step,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.step > 0.0 && self.xmax > self.xmin && self.ymax > self.ymin;
        if !ok || ![self.xmin, self.xmax, self.ymin, self.ymax, self.step].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig(format!("invalid grid {self:?}")));
        }
        Ok(())
    }

    fn count(lo: f64, hi: f64, step: f64) -> usize {
        ((hi - lo) / step + 1e-9).floor() as usize + 1
    }

    /// Grid coordinates along x, endpoints included when they fall on a step.
    pub fn xs(&self) -> Vec<f64> {
        (0..Self::count(self.xmin, self.xmax, self.step))
            .map(|i| self.xmin + i as f64 * self.step)
            .collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..Self::count(self.ymin, self.ymax, self.step))
            .map(|i| self.ymin + i as f64 * self.step)
            .collect()
    }
}

/// Labels of every grid point, indexed `[row over y][column over x]`.
pub fn region_labels(clf: &GenerativeClassifier, grid: &Grid, use_threshold: bool) -> Result<Vec<Vec<Label>>> {
    if clf.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: clf.dim(),
        });
    }
    grid.validate()?;
    let xs = grid.xs();
    let ys = grid.ys();
    let mut points = Vec::with_capacity(2 * xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            points.push(x);
            points.push(y);
        }
    }
    let m = Matrix::new(xs.len() * ys.len(), 2, points)?;
    let preds = clf.predict_batch(&m, use_threshold)?;
    Ok(preds.chunks(xs.len()).map(|row| row.iter().map(|p| p.label).collect()).collect())
}

/// Share of grid points labelled Unclassified.
pub fn unclassified_fraction(labels: &[Vec<Label>]) -> f64 {
    let total: usize = labels.iter().map(Vec::len).sum();
    let un = labels.iter().flatten().filter(|l| **l == Label::Unclassified).count();
    un as f64 / total.max(1) as f64
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace("--", "- -")
}

/// Region image with optional overlaid points; `metadata` is embedded verbatim as a comment.
pub fn render_regions_svg(
    clf: &GenerativeClassifier,
    grid: &Grid,
    use_threshold: bool,
    points: Option<&Dataset>,
    metadata: &str,
) -> Result<String> {
    let labels = region_labels(clf, grid, use_threshold)?;
    let (nx, ny) = (labels[0].len(), labels.len());
    let width_units = grid.step * nx as f64;
    let height_units = grid.step * ny as f64;
    let scale = CANVAS / width_units.max(height_units);
    let (w, h) = (width_units * scale, height_units * scale);
    let cell = grid.step * scale;
    // Cell i is centred on its grid point.
    let to_px = |x: f64, y: f64| {
        (
            (x - grid.xmin + grid.step / 2.0) * scale,
            h - (y - grid.ymin + grid.step / 2.0) * scale,
        )
    };

    let mut svg = String::new();
    writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.2} {h:.2}">"#
    )
    .unwrap();
    writeln!(svg, "<!-- {} -->", escape(metadata)).unwrap();
    writeln!(svg, r#"<g shape-rendering="crispEdges">"#).unwrap();
    for (r, row) in labels.iter().enumerate() {
        let top = h - (r + 1) as f64 * cell;
        let mut c = 0;
        while c < nx {
            let label = row[c];
            let start = c;
            while c < nx && row[c] == label {
                c += 1;
            }
            let fill = match label {
                Label::Class(k) => REGION_COLORS[k % REGION_COLORS.len()],
                Label::Unclassified => UNCLASSIFIED_COLOR,
            };
            writeln!(
                svg,
                r#"<rect x="{:.2}" y="{top:.2}" width="{:.2}" height="{cell:.2}" fill="{fill}"/>"#,
                start as f64 * cell,
                (c - start) as f64 * cell,
            )
            .unwrap();
        }
    }
    writeln!(svg, "</g>").unwrap();

    if let Some(ds) = points {
        writeln!(svg, r#"<g stroke="white" stroke-width="0.5">"#).unwrap();
        for (row, &l) in ds.features().row_iter().zip(ds.labels()) {
            let (px, py) = to_px(row[0], row[1]);
            if (0.0..=w).contains(&px) && (0.0..=h).contains(&py) {
                writeln!(
                    svg,
                    r#"<circle cx="{px:.2}" cy="{py:.2}" r="2.5" fill="{}"/>"#,
                    POINT_COLORS[l % POINT_COLORS.len()]
                )
                .unwrap();
            }
        }
        writeln!(svg, "</g>").unwrap();
    }

    let mut legend: Vec<(String, &str)> = clf
        .prior()
        .labels()
        .iter()
        .enumerate()
        .map(|(k, name)| (format!("class {name}"), REGION_COLORS[k % REGION_COLORS.len()]))
        .collect();
    if use_threshold {
        legend.push(("unclassified".into(), UNCLASSIFIED_COLOR));
    }
    writeln!(svg, r#"<g font-family="sans-serif" font-size="12">"#).unwrap();
    for (i, (name, color)) in legend.iter().enumerate() {
        let y = 8.0 + 18.0 * i as f64;
        writeln!(
            svg,
            r#"<rect x="8" y="{y:.0}" width="12" height="12" fill="{color}" stroke="black" stroke-width="0.5"/><text x="26" y="{:.0}">{}</text>"#,
            y + 10.0,
            escape(name)
        )
        .unwrap();
    }
    writeln!(svg, "</g>\n</svg>").unwrap();
    Ok(svg)
}
