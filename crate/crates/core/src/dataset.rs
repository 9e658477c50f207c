//! Labeled chip datasets cut from annotated scenes.
//!
//! Vessel chips are centered on truth boxes. Sea chips are centered on
//! uniformly drawn pixels whose Chebyshev distance to every truth box is at
//! least the chip size; each scene contributes as many sea chips as vessel
//! chips.

use rand::Rng as _;

use crate::scene_io::{extract_chip, Chip, ChipLabel, GroundTruth, SarScene};
use crate::wavelet::{self, DenoiseConfig};
use crate::{rng, Error, Result};

/// Draws allowed per sea chip before the scene is declared too crowded.
pub const SEA_ATTEMPTS: usize = 10_000;

/// Balanced vessel/sea chips from every scene, scene by scene in order.
///
/// `max_chips` caps the total (rounded down to an even count, half per
/// class); vessels are taken in scene and truth order until the cap.
pub fn build_chips(
    scenes: &[(SarScene, GroundTruth)],
    chip_size: usize,
    max_chips: Option<usize>,
    seed: u64,
) -> Result<Vec<Chip>> {
    if scenes.is_empty() {
        return Err(Error::Validation("no scenes to cut chips from".into()));
    }
    let total_vessels: usize = scenes.iter().map(|(_, t)| t.len()).sum();
    if total_vessels == 0 {
        return Err(Error::Validation("scenes contain no vessels".into()));
    }
    let mut per_class = max_chips
        .map_or(total_vessels, |m| m / 2)
        .min(total_vessels);
    let mut chips = Vec::with_capacity(2 * per_class);
    for (index, (scene, truth)) in scenes.iter().enumerate() {
        if per_class == 0 {
            break;
        }
        let take = truth.len().min(per_class);
        per_class -= take;
        let mut rng = rng::seeded(rng::derive_seed(seed, index as u64));
        for bbox in truth.bboxes().take(take) {
            chips
                .push(extract_chip(scene, bbox.center(), chip_size)?.with_label(ChipLabel::Vessel));
        }
        for _ in 0..take {
            let center = sample_sea_center(scene, truth, chip_size, &mut rng)?;
            chips.push(extract_chip(scene, center, chip_size)?.with_label(ChipLabel::Sea));
        }
    }
    Ok(chips)
}

fn sample_sea_center(
    scene: &SarScene,
    truth: &GroundTruth,
    chip_size: usize,
    rng: &mut rng::Rng,
) -> Result<(usize, usize)> {
    for _ in 0..SEA_ATTEMPTS {
        let r = rng.random_range(0..scene.rows());
        let c = rng.random_range(0..scene.cols());
        if truth
            .bboxes()
            .all(|b| b.chebyshev_distance(r, c) >= chip_size)
        {
            return Ok((r, c));
        }
    }
    Err(Error::Validation(format!(
        "scene {} has no room for sea chips {chip_size} px away from its vessels",
        scene.scene_id()
    )))
}

/// Denoises every band of a scene.
pub fn denoise_scene(scene: &SarScene, cfg: &DenoiseConfig) -> Result<SarScene> {
    scene.map_bands(|_, plane| wavelet::denoise(plane, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_io::{synth_scene, SynthParams};

    #[test]
    fn balanced_and_far_from_vessels() {
        let p = SynthParams {
            rows: 128,
            cols: 128,
            n_vessels: 4,
            seed: 5,
            ..SynthParams::default()
        };
        let scenes = vec![synth_scene(&p).unwrap()];
        let chips = build_chips(&scenes, 16, None, 1).unwrap();
        assert_eq!(chips.len(), 8);
        let vessels = chips
            .iter()
            .filter(|c| c.label == Some(ChipLabel::Vessel))
            .count();
        assert_eq!(vessels, 4);
        let truth = &scenes[0].1;
        for chip in chips.iter().filter(|c| c.label == Some(ChipLabel::Sea)) {
            // Every window pixel is within size - 1 of the sampled center.
            let w = chip.window();
            assert!(truth.bboxes().all(|b| !b.overlaps(&w)));
        }
    }

    #[test]
    fn cap_and_empty_errors() {
        let p = SynthParams {
            rows: 128,
            cols: 128,
            n_vessels: 6,
            ..SynthParams::default()
        };
        let scenes = vec![synth_scene(&p).unwrap()];
        assert_eq!(build_chips(&scenes, 16, Some(5), 0).unwrap().len(), 4);
        assert!(build_chips(&[], 16, None, 0).is_err());
        let empty = SynthParams { n_vessels: 0, ..p };
        assert!(build_chips(&[synth_scene(&empty).unwrap()], 16, None, 0).is_err());
    }
}
