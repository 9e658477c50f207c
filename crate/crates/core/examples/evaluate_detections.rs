//! The metric suite on two toy detectors: CFAR clusters matched to truth
//! boxes at several IoU cut-offs (box mode), and a brightest-pixel rule on
//! labeled chips (chip mode).
//!
//! ```text
//! cargo run --example evaluate_detections
//! ```

use sarvessel::cfar::CfarConfig;
use sarvessel::dataset::build_chips;
use sarvessel::detector::cfar_detections;
use sarvessel::eval::{
    chip_confusion, match_box_detections, split_dataset, time_ms, ConfusionCounts, EvalMode,
    EvalReport,
};
use sarvessel::scene_io::{synth_scene, Band, ChipLabel, SynthParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenes = (0..5)
        .map(|i| {
            synth_scene(&SynthParams {
                looks: 2,
                seed: 40 + i,
                ..SynthParams::default()
            })
        })
        .collect::<sarvessel::Result<Vec<_>>>()?;

    let cfar = CfarConfig {
        pfa: 1e-3,
        ..CfarConfig::default()
    };
    let (per_scene, ms) = time_ms(|| {
        scenes
            .iter()
            .map(|(s, _)| cfar_detections(s.band(Band::VV).expect("VV"), &cfar, 1, 1))
            .collect::<sarvessel::Result<Vec<_>>>()
    });
    let per_scene = per_scene?;
    for iou_min in [0.3, 0.5, 0.7] {
        let counts: ConfusionCounts = per_scene
            .iter()
            .zip(&scenes)
            .map(|(d, (_, t))| match_box_detections(d, t, iou_min, None))
            .sum();
        let r = EvalReport::new(counts, EvalMode::Box, 0.0, ms / scenes.len() as f64)?;
        println!(
            "box mode, IoU >= {iou_min}: tp {} fp {} fn {}  precision {:.3} recall {:.3} F1 {:.3} Jaccard {:.3}",
            counts.tp, counts.fp, counts.fn_, r.precision, r.recall, r.f1, r.jaccard
        );
    }

    // A chip is called a vessel when its brightest VV pixel exceeds a fixed level.
    let chips = build_chips(&scenes, 32, None, 7)?;
    let (_, held_out) = split_dataset(&chips, 0.75, 8)?;
    let brightest = |data: &[f32]| data.iter().step_by(2).fold(0.0f32, |m, &v| m.max(v));
    for level in [4.0, 8.0, 16.0] {
        let preds: Vec<ChipLabel> = held_out
            .iter()
            .map(|c| {
                if brightest(&c.data) > level {
                    ChipLabel::Vessel
                } else {
                    ChipLabel::Sea
                }
            })
            .collect();
        let labels: Vec<ChipLabel> = held_out.iter().map(|c| c.label.expect("labeled")).collect();
        let r = EvalReport::new(chip_confusion(&preds, &labels)?, EvalMode::Chip, 0.0, 0.0)?;
        println!(
            "chip mode, level {level:>4}: accuracy {:.2}%  kappa {:.3}  F1 {:.3}",
            r.accuracy_pct, r.cohen_kappa, r.f1
        );
        if level == 8.0 {
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
    }
    Ok(())
}
