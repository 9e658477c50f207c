//! Dataset splitting, detection matching and the confusion-matrix metric
//! suite.
//!
//! Zero-denominator conventions: precision and recall are 0 when undefined,
//! F1 is 0 when both are 0, Jaccard is 1 when `tp + fp + fn = 0`, and kappa
//! is 1 when chance agreement is 1.

use std::ops::{Add, AddAssign};
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::detector::{iou, Detection};
use crate::scene_io::{ChipLabel, GroundTruth};
use crate::{rng, Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn scaled(&self, k: u64) -> Self {
        Self {
            tp: self.tp * k,
            fp: self.fp * k,
            fn_: self.fn_ * k,
            tn: self.tn * k,
        }
    }
}

impl Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy_pct: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub cohen_kappa: f64,
    pub jaccard: f64,
}

pub fn metrics(c: &ConfusionCounts) -> Result<Metrics> {
    let total = c.total();
    if total == 0 {
        return Err(Error::Validation("confusion counts are all zero".into()));
    }
    let (tp, fp, fn_, tn) = (c.tp as f64, c.fp as f64, c.fn_ as f64, c.tn as f64);
    let n = total as f64;
    let ratio = |num: f64, den: f64, empty: f64| if den > 0.0 { num / den } else { empty };
    let precision = ratio(tp, tp + fp, 0.0);
    let recall = ratio(tp, tp + fn_, 0.0);
    let f1 = ratio(2.0 * precision * recall, precision + recall, 0.0);
    let jaccard = ratio(tp, tp + fp + fn_, 1.0);
    let p_o = (tp + tn) / n;
    let p_e = ((tp + fp) * (tp + fn_) + (fn_ + tn) * (fp + tn)) / (n * n);
    let cohen_kappa = if p_e == 1.0 {
        1.0
    } else {
        (p_o - p_e) / (1.0 - p_e)
    };
    Ok(Metrics {
        accuracy_pct: 100.0 * p_o,
        precision,
        recall,
        f1,
        cohen_kappa,
        jaccard,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Classification of held-out chips.
    Chip,
    /// Detections matched against truth boxes.
    Box,
}

/// The detection performance summary.
///
/// In chip mode `detection_time_ms` is the mean classification time per
/// chip; in box mode it is the mean full-scene detect time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy_pct: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub cohen_kappa: f64,
    pub jaccard: f64,
    pub training_time_ms: f64,
    pub detection_time_ms: f64,
    pub counts: ConfusionCounts,
    pub mode: EvalMode,
}

impl EvalReport {
    pub fn new(
        counts: ConfusionCounts,
        mode: EvalMode,
        training_time_ms: f64,
        detection_time_ms: f64,
    ) -> Result<Self> {
        let m = metrics(&counts)?;
        Ok(Self {
            accuracy_pct: m.accuracy_pct,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            cohen_kappa: m.cohen_kappa,
            jaccard: m.jaccard,
            training_time_ms,
            detection_time_ms,
            counts,
            mode,
        })
    }

    /// JSON value with the timing fields removed, for reproducibility checks.
    pub fn without_timings(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("training_time_ms");
            obj.remove("detection_time_ms");
        }
        v
    }
}

/// Seeded shuffle, then the first `round(n · train_fraction)` items train.
pub fn split_dataset<T: Clone>(
    items: &[T],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    if items.len() < 2 {
        return Err(Error::Validation(format!(
            "cannot split {} items",
            items.len()
        )));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction {train_fraction} must lie in (0, 1)"
        )));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut rng::seeded(seed));
    let n_train = (items.len() as f64 * train_fraction).round() as usize;
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

/// Greedy one-to-one matching in descending score order. Each detection
/// claims the unmatched truth box of highest IoU if that IoU reaches
/// `iou_min`; otherwise it is a false positive. With `n_proposals`, true
/// negatives are the proposals that produced no detection.
pub fn match_box_detections(
    dets: &[Detection],
    truth: &GroundTruth,
    iou_min: f64,
    n_proposals: Option<usize>,
) -> ConfusionCounts {
    let mut order: Vec<&Detection> = dets.iter().collect();
    order.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| (a.bbox.row, a.bbox.col).cmp(&(b.bbox.row, b.bbox.col)))
    });
    let truths: Vec<_> = truth.bboxes().copied().collect();
    let mut claimed = vec![false; truths.len()];
    let (mut tp, mut fp) = (0u64, 0u64);
    for d in order {
        let best = truths
            .iter()
            .enumerate()
            .filter(|(i, _)| !claimed[*i])
            .map(|(i, t)| (i, iou(&d.bbox, t)))
            .fold(None, |acc: Option<(usize, f64)>, (i, v)| match acc {
                Some((_, bv)) if bv >= v => acc,
                _ => Some((i, v)),
            });
        match best {
            Some((i, v)) if v >= iou_min && v > 0.0 => {
                claimed[i] = true;
                tp += 1;
            }
            _ => fp += 1,
        }
    }
    let fn_ = claimed.iter().filter(|c| !**c).count() as u64;
    let tn = n_proposals.map_or(0, |n| (n as u64).saturating_sub(tp + fp));
    ConfusionCounts { tp, fp, fn_, tn }
}

/// Chip-level tally with vessel as the positive class.
pub fn chip_confusion(predictions: &[ChipLabel], labels: &[ChipLabel]) -> Result<ConfusionCounts> {
    if predictions.len() != labels.len() {
        return Err(Error::Validation(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (p, l) in predictions.iter().zip(labels) {
        match (p, l) {
            (ChipLabel::Vessel, ChipLabel::Vessel) => c.tp += 1,
            (ChipLabel::Vessel, ChipLabel::Sea) => c.fp += 1,
            (ChipLabel::Sea, ChipLabel::Vessel) => c.fn_ += 1,
            (ChipLabel::Sea, ChipLabel::Sea) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Runs `action` and returns its result with the elapsed wall time in
/// milliseconds (monotonic clock).
pub fn time_ms<R>(action: impl FnOnce() -> R) -> (R, f64) {
    let start = Instant::now();
    let out = action();
    (out, start.elapsed().as_secs_f64() * 1e3)
}
