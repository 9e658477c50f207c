//! Scene data model, on-disk raster format, chips and synthetic scenes.
//!
//! A scene on disk is three files sharing a stem:
//!
//! * `<stem>.json` – header `{scene_id, rows, cols, bands, dtype: "f32le", pixel_spacing_m?}`
//! * `<stem>.f32` – band-sequential, row-major, little-endian `f32` pixels
//! * `<stem>.truth.json` – optional `[{row, col, height, width, class}]`

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::fsio::{read_json, with_suffix, write_atomic, write_json};
use crate::{rng, Error, Grid, Result};

/// Polarization channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Band {
    VV,
    VH,
}

impl Band {
    pub fn as_str(self) -> &'static str {
        match self {
            Band::VV => "VV",
            Band::VH => "VH",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "VV" => Ok(Band::VV),
            "VH" => Ok(Band::VH),
            other => Err(Error::UnknownBand(other.to_string())),
        }
    }
}

/// Dual- or single-polarization linear-power raster.
#[derive(Clone, Debug, PartialEq)]
pub struct SarScene {
    scene_id: String,
    bands: Vec<Band>,
    pixels: Vec<Grid<f32>>,
    pixel_spacing_m: Option<f64>,
}

impl SarScene {
    /// Builds a scene, checking every invariant: at least one band, unique
    /// labels, equal non-empty shapes, finite non-negative pixels.
    pub fn new(
        scene_id: impl Into<String>,
        bands: Vec<Band>,
        pixels: Vec<Grid<f32>>,
        pixel_spacing_m: Option<f64>,
    ) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::Validation("scene needs at least one band".into()));
        }
        if bands.len() != pixels.len() {
            return Err(Error::Validation(format!(
                "{} band labels for {} pixel planes",
                bands.len(),
                pixels.len()
            )));
        }
        for (i, b) in bands.iter().enumerate() {
            if bands[..i].contains(b) {
                return Err(Error::Validation(format!("duplicate band {b}")));
            }
        }
        let shape = pixels[0].shape();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::Validation("scene has zero rows or columns".into()));
        }
        for (band, plane) in pixels.iter().enumerate() {
            if plane.shape() != shape {
                return Err(Error::Validation(format!(
                    "band {} is {:?}, expected {:?}",
                    bands[band],
                    plane.shape(),
                    shape
                )));
            }
            for (index, &v) in plane.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { band, index });
                }
                if v < 0.0 {
                    return Err(Error::Validation(format!(
                        "negative backscatter {v} at band {}, index {index}",
                        bands[band]
                    )));
                }
            }
        }
        if let Some(s) = pixel_spacing_m {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::Validation(format!(
                    "pixel spacing {s} must be positive"
                )));
            }
        }
        Ok(Self {
            scene_id: scene_id.into(),
            bands,
            pixels,
            pixel_spacing_m,
        })
    }

    pub fn scene_id(&self) -> &str {
        &self.scene_id
    }

    pub fn rows(&self) -> usize {
        self.pixels[0].rows()
    }

    pub fn cols(&self) -> usize {
        self.pixels[0].cols()
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn pixel_spacing_m(&self) -> Option<f64> {
        self.pixel_spacing_m
    }

    pub fn band(&self, band: Band) -> Option<&Grid<f32>> {
        self.bands
            .iter()
            .position(|&b| b == band)
            .map(|i| &self.pixels[i])
    }

    pub fn planes(&self) -> &[Grid<f32>] {
        &self.pixels
    }

    /// Applies `f` to every band plane, re-validating the result.
    pub fn map_bands(
        &self,
        mut f: impl FnMut(Band, &Grid<f32>) -> Result<Grid<f32>>,
    ) -> Result<Self> {
        let pixels = self
            .bands
            .iter()
            .zip(&self.pixels)
            .map(|(&b, p)| f(b, p))
            .collect::<Result<Vec<_>>>()?;
        SarScene::new(
            self.scene_id.clone(),
            self.bands.clone(),
            pixels,
            self.pixel_spacing_m,
        )
    }
}

/// Axis-aligned pixel box, top-left anchored, half-open extent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoundingBox {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl BoundingBox {
    pub fn new(row: usize, col: usize, height: usize, width: usize) -> Self {
        Self {
            row,
            col,
            height,
            width,
        }
    }

    pub fn bottom(&self) -> usize {
        self.row + self.height
    }

    pub fn right(&self) -> usize {
        self.col + self.width
    }

    pub fn area(&self) -> usize {
        self.height * self.width
    }

    /// Center pixel, rounding toward the top-left.
    pub fn center(&self) -> (usize, usize) {
        (self.row + self.height / 2, self.col + self.width / 2)
    }

    pub fn is_valid(&self) -> bool {
        self.height >= 1 && self.width >= 1
    }

    pub fn fits(&self, rows: usize, cols: usize) -> bool {
        self.is_valid() && self.bottom() <= rows && self.right() <= cols
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> usize {
        let h = self
            .bottom()
            .min(other.bottom())
            .saturating_sub(self.row.max(other.row));
        let w = self
            .right()
            .min(other.right())
            .saturating_sub(self.col.max(other.col));
        h * w
    }

    pub fn overlaps(&self, other: &BoundingBox) -> bool {
        self.intersection_area(other) > 0
    }

    /// Chebyshev distance from a pixel to the nearest pixel of the box
    /// (0 when inside).
    pub fn chebyshev_distance(&self, row: usize, col: usize) -> usize {
        let dr = if row < self.row {
            self.row - row
        } else if row >= self.bottom() {
            row + 1 - self.bottom()
        } else {
            0
        };
        let dc = if col < self.col {
            self.col - col
        } else if col >= self.right() {
            col + 1 - self.right()
        } else {
            0
        };
        dr.max(dc)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetClass {
    Vessel,
}

/// One annotated target. Serializes flat: `{row, col, height, width, class}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthBox {
    #[serde(flatten)]
    pub bbox: BoundingBox,
    pub class: TargetClass,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroundTruth {
    pub boxes: Vec<TruthBox>,
}

impl GroundTruth {
    pub fn vessels(boxes: impl IntoIterator<Item = BoundingBox>) -> Self {
        Self {
            boxes: boxes
                .into_iter()
                .map(|bbox| TruthBox {
                    bbox,
                    class: TargetClass::Vessel,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn bboxes(&self) -> impl Iterator<Item = &BoundingBox> {
        self.boxes.iter().map(|t| &t.bbox)
    }

    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        for t in &self.boxes {
            if !t.bbox.fits(rows, cols) {
                return Err(Error::Validation(format!(
                    "truth box {:?} does not fit a {rows}x{cols} scene",
                    t.bbox
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChipLabel {
    Sea,
    Vessel,
}

impl ChipLabel {
    /// Class index used by the classifier: sea = 0, vessel = 1.
    pub fn index(self) -> usize {
        match self {
            ChipLabel::Sea => 0,
            ChipLabel::Vessel => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            ChipLabel::Sea
        } else {
            ChipLabel::Vessel
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChipOrigin {
    pub scene_id: String,
    pub row: usize,
    pub col: usize,
}

/// Square window of a scene, interleaved `size × size × n_bands` (HWC).
#[derive(Clone, Debug, PartialEq)]
pub struct Chip {
    pub size: usize,
    pub n_bands: usize,
    pub data: Vec<f32>,
    pub label: Option<ChipLabel>,
    pub origin: ChipOrigin,
}

impl Chip {
    pub fn window(&self) -> BoundingBox {
        BoundingBox::new(self.origin.row, self.origin.col, self.size, self.size)
    }

    pub fn with_label(mut self, label: ChipLabel) -> Self {
        self.label = Some(label);
        self
    }
}

/// Top-left corner of the `size` window centered at `center`, shifted
/// inward so it stays inside a `rows × cols` raster.
pub fn clamped_window(
    rows: usize,
    cols: usize,
    center: (usize, usize),
    size: usize,
) -> Result<BoundingBox> {
    if size == 0 {
        return Err(Error::Config("chip size must be at least 1".into()));
    }
    if size > rows || size > cols {
        return Err(Error::SceneTooSmall { rows, cols, size });
    }
    let row = center.0.saturating_sub(size / 2).min(rows - size);
    let col = center.1.saturating_sub(size / 2).min(cols - size);
    Ok(BoundingBox::new(row, col, size, size))
}

pub fn extract_chip(scene: &SarScene, center: (usize, usize), size: usize) -> Result<Chip> {
    let window = clamped_window(scene.rows(), scene.cols(), center, size)?;
    let n_bands = scene.n_bands();
    let mut data = Vec::with_capacity(size * size * n_bands);
    for r in window.row..window.bottom() {
        for c in window.col..window.right() {
            for plane in scene.planes() {
                data.push(plane[(r, c)]);
            }
        }
    }
    Ok(Chip {
        size,
        n_bands,
        data,
        label: None,
        origin: ChipOrigin {
            scene_id: scene.scene_id().to_string(),
            row: window.row,
            col: window.col,
        },
    })
}

#[derive(Serialize, Deserialize)]
struct Header {
    scene_id: String,
    rows: usize,
    cols: usize,
    bands: Vec<String>,
    dtype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pixel_spacing_m: Option<f64>,
}

const DTYPE: &str = "f32le";

/// Writes `<stem>.json`, `<stem>.f32` and, when given, `<stem>.truth.json`.
pub fn save_scene(
    scene: &SarScene,
    truth: Option<&GroundTruth>,
    path_stem: impl AsRef<Path>,
) -> Result<()> {
    let stem = path_stem.as_ref();
    if let Some(t) = truth {
        t.validate(scene.rows(), scene.cols())?;
    }
    let header = Header {
        scene_id: scene.scene_id.clone(),
        rows: scene.rows(),
        cols: scene.cols(),
        bands: scene.bands.iter().map(|b| b.as_str().to_string()).collect(),
        dtype: DTYPE.to_string(),
        pixel_spacing_m: scene.pixel_spacing_m,
    };
    let mut raw = Vec::with_capacity(scene.n_bands() * scene.rows() * scene.cols() * 4);
    for plane in &scene.pixels {
        for v in plane.iter() {
            raw.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_atomic(&with_suffix(stem, ".f32"), &raw)?;
    write_json(&with_suffix(stem, ".json"), &header)?;
    if let Some(t) = truth {
        write_json(&with_suffix(stem, ".truth.json"), t)?;
    }
    Ok(())
}

/// Reads a scene and, if `<stem>.truth.json` exists, its ground truth.
pub fn load_scene(path_stem: impl AsRef<Path>) -> Result<(SarScene, Option<GroundTruth>)> {
    let stem = path_stem.as_ref();
    let header_path = with_suffix(stem, ".json");
    let header: Header = read_json(&header_path)?;
    if header.dtype != DTYPE {
        return Err(Error::Validation(format!(
            "{}: unsupported dtype {:?}",
            header_path.display(),
            header.dtype
        )));
    }
    let bands = header
        .bands
        .iter()
        .map(|s| s.parse::<Band>())
        .collect::<Result<Vec<_>>>()?;

    let raw_path = with_suffix(stem, ".f32");
    let raw = fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
    let plane_len = header
        .rows
        .checked_mul(header.cols)
        .ok_or_else(|| Error::Validation("rows * cols overflows".into()))?;
    let expected = (plane_len as u64) * (bands.len() as u64) * 4;
    if raw.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path: raw_path,
            expected,
            actual: raw.len() as u64,
        });
    }
    let mut pixels = Vec::with_capacity(bands.len());
    for chunk in raw.chunks_exact((plane_len * 4).max(1)).take(bands.len()) {
        let values: Vec<f32> = chunk
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        pixels
            .push(Grid::from_vec(header.rows, header.cols, values).expect("plane length checked"));
    }
    let scene = SarScene::new(header.scene_id, bands, pixels, header.pixel_spacing_m)?;

    let truth_path = with_suffix(stem, ".truth.json");
    let truth = if truth_path.exists() {
        let t: GroundTruth = read_json(&truth_path)?;
        t.validate(scene.rows(), scene.cols())?;
        Some(t)
    } else {
        None
    };
    Ok((scene, truth))
}

/// Parameters of the synthetic speckle + vessel scene generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthParams {
    pub rows: usize,
    pub cols: usize,
    pub clutter_mean_vv: f64,
    /// Speckle look count; clutter intensity is Gamma(looks, mean / looks).
    pub looks: u32,
    /// VH clutter mean as a fraction of the VV mean.
    pub band_ratio_vh: f64,
    pub n_vessels: usize,
    /// Inclusive side-length range in pixels.
    pub vessel_size_range: (usize, usize),
    /// Target-to-clutter ratio range in dB, sampled uniformly in dB.
    pub tcr_db_range: (f64, f64),
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            rows: 512,
            cols: 512,
            clutter_mean_vv: 1.0,
            looks: 4,
            band_ratio_vh: 0.25,
            n_vessels: 25,
            vessel_size_range: (5, 12),
            tcr_db_range: (10.0, 20.0),
            seed: 0,
        }
    }
}

/// Attempts allowed for placing each vessel before giving up.
pub const PLACEMENT_ATTEMPTS: usize = 1000;

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.rows == 0 || self.cols == 0 {
            return bad("rows and cols must be positive".into());
        }
        if !(self.clutter_mean_vv.is_finite() && self.clutter_mean_vv > 0.0) {
            return bad(format!(
                "clutter_mean_vv {} must be positive",
                self.clutter_mean_vv
            ));
        }
        if self.looks == 0 {
            return bad("looks must be at least 1".into());
        }
        if !(self.band_ratio_vh > 0.0 && self.band_ratio_vh <= 1.0) {
            return bad(format!(
                "band_ratio_vh {} must lie in (0, 1]",
                self.band_ratio_vh
            ));
        }
        let (smin, smax) = self.vessel_size_range;
        if smin == 0 || smin > smax {
            return bad(format!(
                "vessel_size_range ({smin}, {smax}) is empty or starts at 0"
            ));
        }
        let (tmin, tmax) = self.tcr_db_range;
        if !(tmin.is_finite() && tmax.is_finite()) || tmin > tmax {
            return bad(format!("tcr_db_range ({tmin}, {tmax}) is empty"));
        }
        if tmin <= 0.0 {
            return bad(format!("tcr_db_range minimum {tmin} dB must be above 0"));
        }
        Ok(())
    }
}

/// Generates a seeded dual-polarization scene and its vessel truth.
///
/// Draw order: VV clutter, VH clutter, then per vessel its size, position
/// (with rejection) and TCR. The output depends only on `params`.
pub fn synth_scene(params: &SynthParams) -> Result<(SarScene, GroundTruth)> {
    params.validate()?;
    let mut rng = rng::seeded(params.seed);
    let (rows, cols) = (params.rows, params.cols);
    let looks = f64::from(params.looks);

    let means = [
        params.clutter_mean_vv,
        params.clutter_mean_vv * params.band_ratio_vh,
    ];
    let mut planes = Vec::with_capacity(2);
    for mean in means {
        let gamma = Gamma::new(looks, mean / looks).map_err(|e| Error::Config(e.to_string()))?;
        let data = (0..rows * cols)
            .map(|_| (gamma.sample(&mut rng) as f32).max(f32::MIN_POSITIVE))
            .collect();
        planes.push(Grid::from_vec(rows, cols, data).expect("length matches"));
    }

    let (smin, smax) = params.vessel_size_range;
    let (tmin, tmax) = params.tcr_db_range;
    let mut boxes: Vec<BoundingBox> = Vec::with_capacity(params.n_vessels);
    for index in 0..params.n_vessels {
        let mut placed = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let h = rng.random_range(smin..=smax);
            let w = rng.random_range(smin..=smax);
            if h > rows || w > cols {
                continue;
            }
            let candidate = BoundingBox::new(
                rng.random_range(0..=rows - h),
                rng.random_range(0..=cols - w),
                h,
                w,
            );
            if boxes.iter().all(|b| !b.overlaps(&candidate)) {
                placed = Some(candidate);
                break;
            }
        }
        let bbox = placed.ok_or(Error::PlacementFailure {
            index,
            requested: params.n_vessels,
            attempts: PLACEMENT_ATTEMPTS,
        })?;
        let tcr_db = if tmax > tmin {
            rng.random_range(tmin..=tmax)
        } else {
            tmin
        };
        let gain = 10f64.powf(tcr_db / 10.0) as f32;
        for plane in &mut planes {
            for r in bbox.row..bbox.bottom() {
                for v in &mut plane.row_mut(r)[bbox.col..bbox.right()] {
                    *v *= gain;
                }
            }
        }
        boxes.push(bbox);
    }

    let scene = SarScene::new(
        format!("synth-{:016x}", params.seed),
        vec![Band::VV, Band::VH],
        planes,
        None,
    )?;
    Ok((scene, GroundTruth::vessels(boxes)))
}
