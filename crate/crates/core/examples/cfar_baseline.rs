//! Threshold-only detection: cell-averaging and two-parameter CFAR swept over
//! the false-alarm rate, clusters scored against the truth boxes.
//!
//! ```text
//! cargo run --example cfar_baseline -- [out_dir]
//! ```

use std::path::PathBuf;

use sarvessel::cfar::{ca_threshold_factor, cfar_detect, CfarConfig, CfarVariant};
use sarvessel::detector::cfar_detections;
use sarvessel::eval::{match_box_detections, metrics};
use sarvessel::pgm::{mask_to_gray, write_pgm};
use sarvessel::scene_io::{synth_scene, Band, SynthParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("sarvessel-examples"));
    std::fs::create_dir_all(&dir)?;

    let (scene, truth) = synth_scene(&SynthParams {
        seed: 21,
        ..SynthParams::default()
    })?;
    let vv = scene.band(Band::VV).expect("synthetic scenes carry VV");
    println!(
        "{} vessels in a {}x{} scene",
        truth.len(),
        scene.rows(),
        scene.cols()
    );

    let base = CfarConfig::default();
    println!(
        "guard {}, train {}: {} ring cells, alpha at pfa 1e-3 = {:.3}",
        base.guard_radius,
        base.train_radius,
        base.ring_cells(),
        ca_threshold_factor(base.ring_cells(), 1e-3)
    );
    let mut runs: Vec<(String, CfarConfig)> = [1e-2, 1e-3, 1e-4, 1e-5]
        .into_iter()
        .map(|pfa| {
            (
                format!("CA pfa {pfa:.0e}"),
                CfarConfig {
                    pfa,
                    ..base.clone()
                },
            )
        })
        .collect();
    for k in [3.0, 5.0, 7.0] {
        let cfg = CfarConfig {
            variant: CfarVariant::TwoParam,
            two_param_k: k,
            ..base.clone()
        };
        runs.push((format!("two-parameter k {k}"), cfg));
    }
    for (name, cfg) in &runs {
        let hits = cfar_detect(vv, cfg)?.n_detections;
        let dets = cfar_detections(vv, cfg, 1, 1)?;
        let c = match_box_detections(&dets, &truth, 0.5, None);
        println!(
            "{name:<20} {hits:>6} hits, {:>5} clusters, tp {:>2} fp {:>5} fn {:>2}, F1 {:.3}",
            dets.len(),
            c.tp,
            c.fp,
            c.fn_,
            metrics(&c)?.f1
        );
    }

    let mask = cfar_detect(vv, &base)?.mask;
    write_pgm(dir.join("cfar_mask.pgm"), &mask_to_gray(&mask))?;
    println!("wrote {}", dir.join("cfar_mask.pgm").display());
    Ok(())
}
