//! Constant false alarm rate detection on intensity bands.
//!
//! The cell under test is compared against statistics of a square training
//! ring: cells whose Chebyshev distance from it lies in
//! `(guard_radius, train_radius]`. Ring cells outside the image are dropped
//! and the threshold is recomputed for the smaller ring, so border pixels
//! keep the configured false-alarm probability.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::scene_io::BoundingBox;
use crate::{Error, Grid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfarVariant {
    /// Cell averaging under exponential clutter.
    Ca,
    /// `mean + k * stddev` of the ring.
    TwoParam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CfarConfig {
    pub guard_radius: usize,
    pub train_radius: usize,
    pub pfa: f64,
    pub variant: CfarVariant,
    pub two_param_k: f64,
}

impl Default for CfarConfig {
    fn default() -> Self {
        Self {
            guard_radius: 12,
            train_radius: 16,
            pfa: 1e-3,
            variant: CfarVariant::Ca,
            two_param_k: 5.0,
        }
    }
}

impl CfarConfig {
    pub fn ring_cells(&self) -> usize {
        let outer = 2 * self.train_radius + 1;
        let inner = 2 * self.guard_radius + 1;
        (outer * outer).saturating_sub(inner * inner)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_radius <= self.guard_radius {
            return Err(Error::Config(format!(
                "train_radius {} must exceed guard_radius {}",
                self.train_radius, self.guard_radius
            )));
        }
        if self.ring_cells() < 8 {
            return Err(Error::Config("training ring has fewer than 8 cells".into()));
        }
        if !(self.pfa > 0.0 && self.pfa < 1.0) {
            return Err(Error::Config(format!(
                "pfa {} must lie in (0, 1)",
                self.pfa
            )));
        }
        if self.variant == CfarVariant::TwoParam
            && !(self.two_param_k > 0.0 && self.two_param_k.is_finite())
        {
            return Err(Error::Config(format!(
                "two_param_k {} must be positive",
                self.two_param_k
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CfarResult {
    pub mask: Grid<bool>,
    pub n_detections: usize,
    pub boxes: Vec<BoundingBox>,
}

/// CA-CFAR multiplier `α = n (pfa^(-1/n) - 1)`: with `n` i.i.d. exponential
/// ring cells, `value > α · ring_mean` fires with probability `pfa`.
pub fn ca_threshold_factor(n_train: usize, pfa: f64) -> f64 {
    let n = n_train as f64;
    n * (pfa.powf(-1.0 / n) - 1.0)
}

/// Summed-area table with a zero border row and column.
struct Integral {
    cols: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Integral {
    fn new(band: &Grid<f32>, squares: bool) -> Self {
        let (rows, cols) = band.shape();
        let w = cols + 1;
        let mut sum = vec![0.0; (rows + 1) * w];
        let mut sum_sq = if squares {
            vec![0.0; (rows + 1) * w]
        } else {
            Vec::new()
        };
        for r in 0..rows {
            let (mut acc, mut acc_sq) = (0.0, 0.0);
            for (c, &v) in band.row(r).iter().enumerate() {
                let v = f64::from(v);
                acc += v;
                sum[(r + 1) * w + c + 1] = sum[r * w + c + 1] + acc;
                if squares {
                    acc_sq += v * v;
                    sum_sq[(r + 1) * w + c + 1] = sum_sq[r * w + c + 1] + acc_sq;
                }
            }
        }
        Self { cols, sum, sum_sq }
    }

    /// Sum over rows `r0..r1`, cols `c0..c1`.
    fn rect(table: &[f64], w: usize, r0: usize, r1: usize, c0: usize, c1: usize) -> f64 {
        table[r1 * w + c1] - table[r0 * w + c1] - table[r1 * w + c0] + table[r0 * w + c0]
    }
}

/// Square window of `radius` around `(r, c)` clipped to the image, as
/// half-open `(r0, r1, c0, c1)`.
fn clipped(
    r: usize,
    c: usize,
    radius: usize,
    rows: usize,
    cols: usize,
) -> (usize, usize, usize, usize) {
    (
        r.saturating_sub(radius),
        (r + radius + 1).min(rows),
        c.saturating_sub(radius),
        (c + radius + 1).min(cols),
    )
}

pub fn cfar_detect(band: &Grid<f32>, cfg: &CfarConfig) -> Result<CfarResult> {
    cfg.validate()?;
    let (rows, cols) = band.shape();
    let span = 2 * cfg.train_radius + 1;
    if rows < span || cols < span {
        return Err(Error::Config(format!(
            "{rows}x{cols} band is smaller than the {span}x{span} CFAR window"
        )));
    }
    if let Some(i) = band.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Validation(format!(
            "band value at index {i} is negative or non-finite"
        )));
    }

    let two_param = cfg.variant == CfarVariant::TwoParam;
    let table = Integral::new(band, two_param);
    let w = table.cols + 1;
    // Ring sizes only take a handful of values (interior, edges, corners).
    let mut alpha_cache: Vec<Option<f64>> = vec![None; cfg.ring_cells() + 1];

    let mut mask = Grid::filled(rows, cols, false);
    let mut n_detections = 0;
    for r in 0..rows {
        for c in 0..cols {
            let (or0, or1, oc0, oc1) = clipped(r, c, cfg.train_radius, rows, cols);
            let (ir0, ir1, ic0, ic1) = clipped(r, c, cfg.guard_radius, rows, cols);
            let n = (or1 - or0) * (oc1 - oc0) - (ir1 - ir0) * (ic1 - ic0);
            let s = Integral::rect(&table.sum, w, or0, or1, oc0, oc1)
                - Integral::rect(&table.sum, w, ir0, ir1, ic0, ic1);
            let mean = s / n as f64;
            let value = f64::from(band[(r, c)]);
            let hit = if two_param {
                let sq = Integral::rect(&table.sum_sq, w, or0, or1, oc0, oc1)
                    - Integral::rect(&table.sum_sq, w, ir0, ir1, ic0, ic1);
                let var = (sq / n as f64 - mean * mean).max(0.0);
                value > mean + cfg.two_param_k * var.sqrt()
            } else {
                let alpha = *alpha_cache[n].get_or_insert_with(|| ca_threshold_factor(n, cfg.pfa));
                value > alpha * mean
            };
            if hit {
                mask[(r, c)] = true;
                n_detections += 1;
            }
        }
    }
    let boxes = cluster_detections(&mask);
    Ok(CfarResult {
        mask,
        n_detections,
        boxes,
    })
}

/// Tight boxes of the 8-connected components of `mask`, sorted by top-left.
pub fn cluster_detections(mask: &Grid<bool>) -> Vec<BoundingBox> {
    cluster_with_gap(mask, 0)
}

/// A connected group of detected cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    /// Tight bounding box of the cells.
    pub bbox: BoundingBox,
    /// Mean cell position `(row, col)`.
    pub centroid: (f64, f64),
    pub cells: usize,
}

/// Like [`cluster_detections`], but cells up to `gap` empty pixels apart
/// (Chebyshev distance `gap + 1`) join the same component. Boxes still
/// bound only the true cells.
pub fn cluster_with_gap(mask: &Grid<bool>, gap: usize) -> Vec<BoundingBox> {
    components(mask, gap).into_iter().map(|c| c.bbox).collect()
}

/// Connected components of `mask` at the given gap, sorted by the top-left
/// corner of their boxes.
pub fn components(mask: &Grid<bool>, gap: usize) -> Vec<Component> {
    let (rows, cols) = mask.shape();
    let reach = gap + 1;
    let mut seen = Grid::filled(rows, cols, false);
    let mut found = Vec::new();
    let mut queue = VecDeque::new();
    for r in 0..rows {
        for c in 0..cols {
            if !mask[(r, c)] || seen[(r, c)] {
                continue;
            }
            seen[(r, c)] = true;
            queue.push_back((r, c));
            let (mut r0, mut r1, mut c0, mut c1) = (r, r, c, c);
            let (mut sum_r, mut sum_c, mut cells) = (0usize, 0usize, 0usize);
            while let Some((cr, cc)) = queue.pop_front() {
                r0 = r0.min(cr);
                r1 = r1.max(cr);
                c0 = c0.min(cc);
                c1 = c1.max(cc);
                sum_r += cr;
                sum_c += cc;
                cells += 1;
                for nr in cr.saturating_sub(reach)..=(cr + reach).min(rows - 1) {
                    for nc in cc.saturating_sub(reach)..=(cc + reach).min(cols - 1) {
                        if mask[(nr, nc)] && !seen[(nr, nc)] {
                            seen[(nr, nc)] = true;
                            queue.push_back((nr, nc));
                        }
                    }
                }
            }
            found.push(Component {
                bbox: BoundingBox::new(r0, c0, r1 - r0 + 1, c1 - c0 + 1),
                centroid: (sum_r as f64 / cells as f64, sum_c as f64 / cells as f64),
                cells,
            });
        }
    }
    found.sort_by_key(|c| (c.bbox.row, c.bbox.col, c.bbox.height, c.bbox.width));
    found
}
