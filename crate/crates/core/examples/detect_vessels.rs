//! Full-scene detection: denoise, CFAR proposals, CNN scoring and NMS on a
//! 512x512 scene, with the detections written as JSON and burned into a PGM.
//!
//! Uses the weights saved by `train_classifier` when present and otherwise
//! trains a small network first.
//!
//! ```text
//! cargo run --release --example detect_vessels -- [out_dir]
//! ```

use std::path::PathBuf;

use sarvessel::cli::{overlay, DetectionsFile};
use sarvessel::cnn::{load_weights, train, Architecture, Network, TrainConfig};
use sarvessel::dataset::{build_chips, denoise_scene};
use sarvessel::detector::{detect_counted, iou, DetectConfig};
use sarvessel::eval::split_dataset;
use sarvessel::pgm::write_pgm;
use sarvessel::scene_io::{synth_scene, SynthParams};

fn quick_network(cfg: &DetectConfig) -> sarvessel::Result<Network> {
    let denoise = cfg.denoise.as_ref().expect("denoising is on by default");
    let scenes = (0..8)
        .map(|i| {
            let (s, t) = synth_scene(&SynthParams {
                rows: 256,
                cols: 256,
                n_vessels: 15,
                seed: 500 + i,
                ..SynthParams::default()
            })?;
            Ok((denoise_scene(&s, denoise)?, t))
        })
        .collect::<sarvessel::Result<Vec<_>>>()?;
    let chips = build_chips(&scenes, cfg.chip_size, None, 1)?;
    let (tr, va) = split_dataset(&chips, 0.8, 2)?;
    let net = Network::new(Architecture::default_for(cfg.chip_size, 2), 3)?;
    let t = TrainConfig {
        epochs: 20,
        ..TrainConfig::default()
    };
    Ok(train(net, &tr, &va, &t)?.0)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("sarvessel-examples"));
    std::fs::create_dir_all(&dir)?;
    let cfg = DetectConfig::default();
    let saved = dir.join("classifier.sdw");
    let net = if saved.exists() {
        println!("using {}", saved.display());
        load_weights(&saved)?
    } else {
        println!("no saved classifier, training one");
        quick_network(&cfg)?
    };

    let (scene, truth) = synth_scene(&SynthParams {
        seed: 2024,
        ..SynthParams::default()
    })?;
    let (detections, n_proposals, ms) = detect_counted(&scene, &net, &cfg)?;
    println!(
        "{} proposals, {} detections, {} vessels in truth, {ms:.1} ms",
        n_proposals,
        detections.len(),
        truth.len()
    );
    for d in detections.iter().take(10) {
        let best = truth.bboxes().map(|t| iou(&d.bbox, t)).fold(0.0, f64::max);
        println!(
            "  ({:>3}, {:>3}) {:>2}x{:<2} score {:.3}  best IoU {best:.2}",
            d.bbox.row, d.bbox.col, d.bbox.height, d.bbox.width, d.score
        );
    }

    let file = DetectionsFile {
        scene_id: scene.scene_id().to_owned(),
        detection_time_ms: ms,
        n_proposals,
        detections,
    };
    std::fs::write(
        dir.join("detections.json"),
        serde_json::to_string_pretty(&file)? + "\n",
    )?;
    write_pgm(
        dir.join("detections.pgm"),
        &overlay(&scene, &file.detections),
    )?;
    println!(
        "wrote detections.json and detections.pgm to {}",
        dir.display()
    );
    Ok(())
}
