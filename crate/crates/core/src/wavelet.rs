//! Orthonormal separable 2-D discrete wavelet transform and homomorphic
//! threshold denoising.
//!
//! Each 1-D pass is a periodized orthonormal filter bank on the even-length
//! prefix of the signal. For odd lengths the final sample is carried into the
//! approximation band unchanged and the matching detail slot holds a
//! structural zero, so every subband at level `k` is
//! `ceil(rows / 2^k) × ceil(cols / 2^k)` and the transform stays orthogonal:
//! perfect reconstruction and Parseval hold for every size.
//!
//! Subband naming is horizontal filter first, vertical second: `lh` is
//! lowpass along rows and highpass down columns (horizontal edges), `hl` the
//! opposite, `hh` diagonal. The Haar highpass is `(x[2i] - x[2i+1]) / √2`.

use serde::{Deserialize, Serialize};

use crate::{Error, Grid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveletFamily {
    Haar,
    /// Daubechies with four vanishing moments (8 taps).
    Db4,
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

const HAAR_LO: [f64; 2] = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];

const DB4_LO: [f64; 8] = [
    0.230_377_813_308_896_4,
    0.714_846_570_552_915_4,
    0.630_880_767_929_858_7,
    -0.027_983_769_416_859_9,
    -0.187_034_811_719_093_1,
    0.030_841_381_835_560_7,
    0.032_883_011_666_885_2,
    -0.010_597_401_785_069_0,
];

impl WaveletFamily {
    /// Scaling (lowpass) filter.
    pub fn lowpass(self) -> &'static [f64] {
        match self {
            WaveletFamily::Haar => &HAAR_LO,
            WaveletFamily::Db4 => &DB4_LO,
        }
    }

    /// Quadrature-mirror highpass: `hi[k] = (-1)^k lo[L-1-k]`.
    pub fn highpass(self) -> Vec<f64> {
        let lo = self.lowpass();
        let n = lo.len();
        (0..n)
            .map(|k| {
                if k % 2 == 0 {
                    lo[n - 1 - k]
                } else {
                    -lo[n - 1 - k]
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetailBands {
    pub lh: Grid<f64>,
    pub hl: Grid<f64>,
    pub hh: Grid<f64>,
}

/// Multi-level DWT coefficients. `details[0]` is level 1 (finest).
#[derive(Clone, Debug, PartialEq)]
pub struct WaveletPyramid {
    pub family: WaveletFamily,
    pub original_shape: (usize, usize),
    pub base_ll: Grid<f64>,
    pub details: Vec<DetailBands>,
}

impl WaveletPyramid {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    /// Sum of squares of every coefficient.
    pub fn energy(&self) -> f64 {
        let sq = |g: &Grid<f64>| g.iter().map(|v| v * v).sum::<f64>();
        sq(&self.base_ll)
            + self
                .details
                .iter()
                .map(|d| sq(&d.lh) + sq(&d.hl) + sq(&d.hh))
                .sum::<f64>()
    }

    fn validate(&self) -> Result<()> {
        let (rows, cols) = self.original_shape;
        if self.details.is_empty() {
            return Err(Error::Validation("pyramid has no levels".into()));
        }
        check_levels(rows, cols, self.details.len())?;
        for (k, d) in self.details.iter().enumerate() {
            let want = level_shape(self.original_shape, k + 1);
            for (name, g) in [("lh", &d.lh), ("hl", &d.hl), ("hh", &d.hh)] {
                if g.shape() != want {
                    return Err(Error::Validation(format!(
                        "level {} {name} is {:?}, expected {want:?}",
                        k + 1,
                        g.shape()
                    )));
                }
            }
        }
        let want = level_shape(self.original_shape, self.details.len());
        if self.base_ll.shape() != want {
            return Err(Error::Validation(format!(
                "approximation is {:?}, expected {want:?}",
                self.base_ll.shape()
            )));
        }
        Ok(())
    }
}

/// Subband shape at `level` (0 = the image itself).
pub fn level_shape((rows, cols): (usize, usize), level: usize) -> (usize, usize) {
    let mut shape = (rows, cols);
    for _ in 0..level {
        shape = (shape.0.div_ceil(2), shape.1.div_ceil(2));
    }
    shape
}

/// Largest admissible level count: `floor(log2(min(rows, cols)))`.
pub fn max_levels(rows: usize, cols: usize) -> usize {
    let m = rows.min(cols);
    if m == 0 {
        0
    } else {
        m.ilog2() as usize
    }
}

fn check_levels(rows: usize, cols: usize, levels: usize) -> Result<()> {
    let max = max_levels(rows, cols);
    if levels == 0 || levels > max {
        return Err(Error::Config(format!(
            "{levels} wavelet levels requested for a {rows}x{cols} image (allowed 1..={max})"
        )));
    }
    Ok(())
}

/// One analysis step. `lo`/`hi` receive `ceil(n/2)` coefficients each.
fn analyze(x: &[f64], lo_f: &[f64], hi_f: &[f64], lo: &mut [f64], hi: &mut [f64]) {
    let n = x.len();
    let even = n - n % 2;
    for i in 0..even / 2 {
        let (mut a, mut d) = (0.0, 0.0);
        for (k, (&l, &h)) in lo_f.iter().zip(hi_f).enumerate() {
            let v = x[(2 * i + k) % even];
            a += l * v;
            d += h * v;
        }
        lo[i] = a;
        hi[i] = d;
    }
    if n % 2 == 1 {
        lo[even / 2] = x[n - 1];
        hi[even / 2] = 0.0;
    }
}

/// Inverse of [`analyze`]; `x.len()` is the original length.
fn synthesize(lo: &[f64], hi: &[f64], lo_f: &[f64], hi_f: &[f64], x: &mut [f64]) {
    let n = x.len();
    let even = n - n % 2;
    x.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..even / 2 {
        let (a, d) = (lo[i], hi[i]);
        for (k, (&l, &h)) in lo_f.iter().zip(hi_f).enumerate() {
            x[(2 * i + k) % even] += l * a + h * d;
        }
    }
    if n % 2 == 1 {
        x[n - 1] = lo[even / 2];
    }
}

fn check_finite(image: &Grid<f64>) -> Result<()> {
    if let Some(i) = image.iter().position(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("non-finite value at index {i}")));
    }
    Ok(())
}

fn dwt2_level(img: &Grid<f64>, lo_f: &[f64], hi_f: &[f64]) -> (Grid<f64>, DetailBands) {
    let (rows, cols) = img.shape();
    let (hr, hc) = (rows.div_ceil(2), cols.div_ceil(2));

    // Horizontal pass: each row -> [L | H].
    let mut row_lo = Grid::<f64>::new(rows, hc);
    let mut row_hi = Grid::<f64>::new(rows, hc);
    let mut lo_buf = vec![0.0; hc];
    let mut hi_buf = vec![0.0; hc];
    for r in 0..rows {
        analyze(img.row(r), lo_f, hi_f, &mut lo_buf, &mut hi_buf);
        row_lo.row_mut(r).copy_from_slice(&lo_buf);
        row_hi.row_mut(r).copy_from_slice(&hi_buf);
    }

    // Vertical pass on both halves.
    let vertical = |src: &Grid<f64>| {
        let mut low = Grid::<f64>::new(hr, hc);
        let mut high = Grid::<f64>::new(hr, hc);
        let mut col = vec![0.0; rows];
        let mut lo_c = vec![0.0; hr];
        let mut hi_c = vec![0.0; hr];
        for c in 0..hc {
            for (r, v) in col.iter_mut().enumerate() {
                *v = src[(r, c)];
            }
            analyze(&col, lo_f, hi_f, &mut lo_c, &mut hi_c);
            for r in 0..hr {
                low[(r, c)] = lo_c[r];
                high[(r, c)] = hi_c[r];
            }
        }
        (low, high)
    };
    let (ll, lh) = vertical(&row_lo);
    let (hl, hh) = vertical(&row_hi);
    (ll, DetailBands { lh, hl, hh })
}

fn idwt2_level(
    ll: &Grid<f64>,
    d: &DetailBands,
    (rows, cols): (usize, usize),
    lo_f: &[f64],
    hi_f: &[f64],
) -> Grid<f64> {
    let (hr, hc) = ll.shape();
    let vertical = |low: &Grid<f64>, high: &Grid<f64>| {
        let mut out = Grid::<f64>::new(rows, hc);
        let mut lo_c = vec![0.0; hr];
        let mut hi_c = vec![0.0; hr];
        let mut col = vec![0.0; rows];
        for c in 0..hc {
            for r in 0..hr {
                lo_c[r] = low[(r, c)];
                hi_c[r] = high[(r, c)];
            }
            synthesize(&lo_c, &hi_c, lo_f, hi_f, &mut col);
            for (r, v) in col.iter().enumerate() {
                out[(r, c)] = *v;
            }
        }
        out
    };
    let row_lo = vertical(ll, &d.lh);
    let row_hi = vertical(&d.hl, &d.hh);
    let mut out = Grid::<f64>::new(rows, cols);
    for r in 0..rows {
        synthesize(row_lo.row(r), row_hi.row(r), lo_f, hi_f, out.row_mut(r));
    }
    out
}

/// Forward transform, applied level by level to the previous approximation.
pub fn dwt2(image: &Grid<f64>, family: WaveletFamily, levels: usize) -> Result<WaveletPyramid> {
    let (rows, cols) = image.shape();
    check_levels(rows, cols, levels)?;
    check_finite(image)?;
    let lo_f = family.lowpass();
    let hi_f = family.highpass();
    let mut ll = image.clone();
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (next, d) = dwt2_level(&ll, lo_f, &hi_f);
        details.push(d);
        ll = next;
    }
    Ok(WaveletPyramid {
        family,
        original_shape: (rows, cols),
        base_ll: ll,
        details,
    })
}

pub fn idwt2(pyramid: &WaveletPyramid) -> Result<Grid<f64>> {
    pyramid.validate()?;
    let lo_f = pyramid.family.lowpass();
    let hi_f = pyramid.family.highpass();
    let mut ll = pyramid.base_ll.clone();
    for (k, d) in pyramid.details.iter().enumerate().rev() {
        let shape = level_shape(pyramid.original_shape, k);
        ll = idwt2_level(&ll, d, shape, lo_f, &hi_f);
    }
    Ok(ll)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdRule {
    Soft,
    Hard,
}

impl ThresholdRule {
    pub fn apply(self, c: f64, t: f64) -> f64 {
        match self {
            ThresholdRule::Soft => c.signum() * (c.abs() - t).max(0.0),
            ThresholdRule::Hard => {
                if c.abs() <= t {
                    0.0
                } else {
                    c
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DenoiseConfig {
    pub family: WaveletFamily,
    pub levels: usize,
    pub rule: ThresholdRule,
    /// Denoise `ln(x + ε)` and exponentiate back (multiplicative speckle).
    pub log_domain: bool,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            family: WaveletFamily::Haar,
            levels: 2,
            rule: ThresholdRule::Soft,
            log_domain: true,
        }
    }
}

/// Floor added before taking logs.
pub const LOG_FLOOR: f64 = 1e-10;

/// MAD noise estimate from level-1 `hh`, ignoring structural zeros of
/// odd-length edges.
pub fn estimate_noise_sigma(pyramid: &WaveletPyramid) -> f64 {
    let hh = &pyramid.details[0].hh;
    let (rows, cols) = pyramid.original_shape;
    let (vr, vc) = (rows / 2, cols / 2);
    let mut mags: Vec<f64> = (0..vr)
        .flat_map(|r| hh.row(r)[..vc].iter().map(|v| v.abs()))
        .collect();
    median(&mut mags) / 0.6745
}

fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    values.sort_unstable_by(f64::total_cmp);
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Universal-threshold wavelet shrinkage of one band.
pub fn denoise(image: &Grid<f32>, cfg: &DenoiseConfig) -> Result<Grid<f32>> {
    if let Some(i) = image.iter().position(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("non-finite value at index {i}")));
    }
    if cfg.log_domain {
        if let Some(i) = image.iter().position(|&v| v < 0.0) {
            return Err(Error::Validation(format!(
                "log-domain denoising needs non-negative input (index {i})"
            )));
        }
    }
    let work = image.map(|v| {
        let v = f64::from(v);
        if cfg.log_domain {
            (v + LOG_FLOOR).ln()
        } else {
            v
        }
    });
    let mut pyramid = dwt2(&work, cfg.family, cfg.levels)?;
    let sigma = estimate_noise_sigma(&pyramid);
    let t = sigma * (2.0 * (image.len() as f64).ln()).sqrt();
    for d in &mut pyramid.details {
        for g in [&mut d.lh, &mut d.hl, &mut d.hh] {
            for c in g.as_mut_slice() {
                *c = cfg.rule.apply(*c, t);
            }
        }
    }
    let out = idwt2(&pyramid)?;
    Ok(out.map(|v| {
        let v = if cfg.log_domain {
            v.exp() - LOG_FLOOR
        } else {
            v
        };
        v.max(0.0) as f32
    }))
}
