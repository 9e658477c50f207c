//! CFAR proposals judged by the CNN versus plain CFAR clustering, on
//! single-look speckle where a threshold alone drowns in false alarms.
//!
//! ```text
//! cargo run --release --example hybrid_vs_cfar -- [epochs]
//! ```

use sarvessel::cfar::CfarConfig;
use sarvessel::cli::{run_bench, BenchConfig, RunConfig};
use sarvessel::cnn::TrainConfig;
use sarvessel::dataset::denoise_scene;
use sarvessel::detector::{cfar_detections, detect_counted, DetectConfig};
use sarvessel::eval::{match_box_detections, metrics, ConfusionCounts};
use sarvessel::scene_io::{synth_scene, Band, SynthParams};

fn main() -> sarvessel::Result<()> {
    let epochs = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(40);
    let scene = SynthParams {
        looks: 1,
        tcr_db_range: (8.0, 14.0),
        ..SynthParams::default()
    };
    let detect = DetectConfig {
        cfar: CfarConfig {
            pfa: 1e-2,
            ..CfarConfig::default()
        },
        ..DetectConfig::default()
    };
    let cfg = RunConfig {
        bench: Some(BenchConfig {
            scene: scene.clone(),
            n_test_scenes: 1,
            ..BenchConfig::default()
        }),
        train: Some(TrainConfig {
            epochs,
            ..TrainConfig::default()
        }),
        detect: Some(detect.clone()),
        ..RunConfig::default()
    };
    let trained = run_bench(&cfg, 11)?;
    println!(
        "validation chip accuracy {:.2}%",
        trained.report.chip.accuracy_pct
    );

    let mut hybrid = ConfusionCounts::default();
    let mut raw = ConfusionCounts::default();
    let mut filtered = ConfusionCounts::default();
    for i in 0..10 {
        let (s, truth) = synth_scene(&SynthParams {
            seed: 9000 + i,
            ..scene.clone()
        })?;
        let (dets, n, _) = detect_counted(&s, &trained.network, &detect)?;
        hybrid += match_box_detections(&dets, &truth, 0.5, Some(n));

        let vv = s.band(Band::VV).expect("synthetic scenes carry VV");
        raw += match_box_detections(
            &cfar_detections(vv, &detect.cfar, detect.cluster_gap, 1)?,
            &truth,
            0.5,
            None,
        );

        let clean = denoise_scene(
            &s,
            detect.denoise.as_ref().expect("denoising is on by default"),
        )?;
        let vv = clean.band(Band::VV).expect("synthetic scenes carry VV");
        let dets = cfar_detections(
            vv,
            &detect.cfar,
            detect.cluster_gap,
            detect.min_cluster_cells,
        )?;
        filtered += match_box_detections(&dets, &truth, 0.5, None);
    }
    for (name, c) in [
        ("CFAR + CNN", hybrid),
        ("raw CFAR", raw),
        ("denoised, size-filtered CFAR", filtered),
    ] {
        let m = metrics(&c)?;
        println!(
            "{name:>28}: tp {:>4} fp {:>6} fn {:>3}  precision {:.3} recall {:.3} F1 {:.3}",
            c.tp, c.fp, c.fn_, m.precision, m.recall, m.f1
        );
    }
    Ok(())
}
