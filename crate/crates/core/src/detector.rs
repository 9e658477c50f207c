//! Scene-level detection: candidate proposal, CNN scoring and greedy
//! non-maximum suppression at a single chip scale.
//!
//! In CFAR mode each detected cluster yields a chip window centered on its
//! centroid; the CNN judges that window and the reported detection box is the
//! cluster's tight extent. In dense mode the windows tile the scene and the
//! window itself is reported.

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cfar::{self, CfarConfig};
use crate::cnn::{Network, Tensor};
use crate::dataset::denoise_scene;
use crate::scene_io::{clamped_window, extract_chip, Band, BoundingBox, SarScene};
use crate::wavelet::{DenoiseConfig, ThresholdRule, WaveletFamily};
use crate::{Error, Grid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalMode {
    Cfar,
    Dense,
}

/// Scored, localized detection. Serializes flat as
/// `{row, col, height, width, score, source}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(flatten)]
    pub bbox: BoundingBox,
    /// Vessel-class probability.
    pub score: f64,
    pub source: ProposalMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectConfig {
    pub proposal_mode: ProposalMode,
    pub cfar: CfarConfig,
    pub window_stride: usize,
    pub chip_size: usize,
    pub score_threshold: f64,
    pub nms_iou: f64,
    /// Applied to every band before proposal and scoring; `None` skips it.
    pub denoise: Option<DenoiseConfig>,
    /// CFAR hits up to this many empty pixels apart form one candidate.
    pub cluster_gap: usize,
    /// Clusters with fewer hits are not proposed.
    pub min_cluster_cells: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            proposal_mode: ProposalMode::Cfar,
            cfar: CfarConfig::default(),
            window_stride: 16,
            chip_size: 32,
            score_threshold: 0.5,
            nms_iou: 0.3,
            denoise: Some(DenoiseConfig {
                family: WaveletFamily::Db4,
                levels: 1,
                rule: ThresholdRule::Hard,
                log_domain: true,
            }),
            cluster_gap: 1,
            min_cluster_cells: 4,
        }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chip_size == 0 {
            return Err(Error::Config("chip_size must be positive".into()));
        }
        if self.window_stride == 0 || self.window_stride > self.chip_size {
            return Err(Error::Config(format!(
                "window_stride {} must lie in 1..={}",
                self.window_stride, self.chip_size
            )));
        }
        if !self.score_threshold.is_finite() {
            return Err(Error::Config("score_threshold must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.nms_iou) {
            return Err(Error::Config(format!(
                "nms_iou {} must lie in [0, 1]",
                self.nms_iou
            )));
        }
        if self.proposal_mode == ProposalMode::Cfar {
            self.cfar.validate()?;
        }
        Ok(())
    }
}

/// Intersection over union under half-open extents.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// A candidate: the chip window the classifier sees and the extent that is
/// reported if it is accepted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Proposal {
    pub window: BoundingBox,
    pub extent: BoundingBox,
}

/// Candidates for `scene` (denoise it first if desired).
///
/// Windows are unique; when several CFAR clusters map onto the same window
/// their extents are merged.
pub fn propose_regions(scene: &SarScene, cfg: &DetectConfig) -> Result<Vec<Proposal>> {
    cfg.validate()?;
    let (rows, cols) = (scene.rows(), scene.cols());
    let size = cfg.chip_size;
    if size > rows || size > cols {
        return Err(Error::SceneTooSmall { rows, cols, size });
    }
    let mut out: Vec<Proposal> = Vec::new();
    match cfg.proposal_mode {
        ProposalMode::Dense => {
            let starts = |len: usize| {
                let mut v: Vec<usize> = (0..=len - size).step_by(cfg.window_stride).collect();
                if *v.last().expect("len >= size") != len - size {
                    v.push(len - size);
                }
                v
            };
            for r in starts(rows) {
                for c in starts(cols) {
                    let w = BoundingBox::new(r, c, size, size);
                    out.push(Proposal {
                        window: w,
                        extent: w,
                    });
                }
            }
        }
        ProposalMode::Cfar => {
            let band = scene.band(Band::VV).unwrap_or(&scene.planes()[0]);
            let result = cfar::cfar_detect(band, &cfg.cfar)?;
            let mut index: HashMap<BoundingBox, usize> = HashMap::new();
            for comp in cfar::components(&result.mask, cfg.cluster_gap) {
                if comp.cells < cfg.min_cluster_cells {
                    continue;
                }
                let center = (
                    comp.centroid.0.round() as usize,
                    comp.centroid.1.round() as usize,
                );
                let window = clamped_window(rows, cols, center, size)?;
                match index.get(&window) {
                    Some(&i) => out[i].extent = union(&out[i].extent, &comp.bbox),
                    None => {
                        index.insert(window, out.len());
                        out.push(Proposal {
                            window,
                            extent: comp.bbox,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

fn union(a: &BoundingBox, b: &BoundingBox) -> BoundingBox {
    let row = a.row.min(b.row);
    let col = a.col.min(b.col);
    BoundingBox::new(
        row,
        col,
        a.bottom().max(b.bottom()) - row,
        a.right().max(b.right()) - col,
    )
}

/// The threshold-only baseline: CFAR hits on `band` clustered with `gap`,
/// each cluster of at least `min_cells` hits reported as a detection with
/// score 1.
pub fn cfar_detections(
    band: &Grid<f32>,
    cfar: &CfarConfig,
    gap: usize,
    min_cells: usize,
) -> Result<Vec<Detection>> {
    let result = cfar::cfar_detect(band, cfar)?;
    Ok(cfar::components(&result.mask, gap)
        .into_iter()
        .filter(|c| c.cells >= min_cells)
        .map(|c| Detection {
            bbox: c.bbox,
            score: 1.0,
            source: ProposalMode::Cfar,
        })
        .collect())
}

/// Chip windows to be scored, one per candidate.
pub fn propose(scene: &SarScene, cfg: &DetectConfig) -> Result<Vec<BoundingBox>> {
    Ok(propose_regions(scene, cfg)?
        .into_iter()
        .map(|p| p.window)
        .collect())
}

/// Vessel probability of the chip centered on each box, in input order.
pub fn score(
    net: &Network,
    scene: &SarScene,
    boxes: &[BoundingBox],
    source: ProposalMode,
) -> Result<Vec<Detection>> {
    if boxes.is_empty() {
        return Ok(Vec::new());
    }
    let (h, w, c) = net.architecture().input_shape;
    if h != w || c != scene.n_bands() {
        return Err(Error::Validation(format!(
            "network input {h}x{w}x{c} does not fit {}-band square chips",
            scene.n_bands()
        )));
    }
    let chips = boxes
        .iter()
        .map(|b| extract_chip(scene, b.center(), h))
        .collect::<Result<Vec<_>>>()?;
    let probs = net.forward(&Tensor::from_chips(&chips)?)?;
    let vessel = crate::scene_io::ChipLabel::Vessel.index();
    Ok(boxes
        .iter()
        .enumerate()
        .map(|(i, &bbox)| Detection {
            bbox,
            score: f64::from(probs.item(i)[vessel]),
            source,
        })
        .collect())
}

fn by_score_then_position(a: &Detection, b: &Detection) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| (a.bbox.row, a.bbox.col).cmp(&(b.bbox.row, b.bbox.col)))
}

/// Greedy suppression: keep the best remaining detection, drop every other
/// with IoU above `iou_threshold` against it, repeat. Ties in score go to
/// the smaller `(row, col)`.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut sorted = dets.to_vec();
    sorted.sort_by(by_score_then_position);
    let mut kept: Vec<Detection> = Vec::with_capacity(sorted.len());
    for d in sorted {
        if kept.iter().all(|k| iou(&k.bbox, &d.bbox) <= iou_threshold) {
            kept.push(d);
        }
    }
    kept
}

/// Denoise, propose, score, threshold and suppress. Returns the detections
/// and the wall time of that chain in milliseconds.
pub fn detect(
    scene: &SarScene,
    net: &Network,
    cfg: &DetectConfig,
) -> Result<(Vec<Detection>, f64)> {
    detect_counted(scene, net, cfg).map(|(dets, _, ms)| (dets, ms))
}

/// [`detect`] that also reports how many proposals were scored.
pub fn detect_counted(
    scene: &SarScene,
    net: &Network,
    cfg: &DetectConfig,
) -> Result<(Vec<Detection>, usize, f64)> {
    cfg.validate()?;
    if net.architecture().input_shape.0 != cfg.chip_size {
        return Err(Error::Validation(format!(
            "network chips are {} px, detector configured for {}",
            net.architecture().input_shape.0,
            cfg.chip_size
        )));
    }
    let start = Instant::now();
    let denoised;
    let working = match &cfg.denoise {
        Some(d) => {
            denoised = denoise_scene(scene, d)?;
            &denoised
        }
        None => scene,
    };
    let proposals = propose_regions(working, cfg)?;
    let windows: Vec<BoundingBox> = proposals.iter().map(|p| p.window).collect();
    let scored = score(net, working, &windows, cfg.proposal_mode)?;
    let accepted: Vec<Detection> = scored
        .into_iter()
        .zip(&proposals)
        .filter(|(d, _)| d.score >= cfg.score_threshold)
        .map(|(d, p)| Detection {
            bbox: p.extent,
            ..d
        })
        .collect();
    let kept = nms(&accepted, cfg.nms_iou);
    Ok((kept, proposals.len(), start.elapsed().as_secs_f64() * 1e3))
}
