//! Cut balanced vessel/sea chips from synthetic scenes, train the default
//! CNN, save it, then warm-start a short second run from the saved file.
//!
//! ```text
//! cargo run --release --example train_classifier -- [epochs] [out_dir]
//! ```

use std::path::PathBuf;

use sarvessel::cnn::{
    accuracy, load_weights, save_weights, train, Architecture, Network, TrainConfig,
};
use sarvessel::dataset::{build_chips, denoise_scene};
use sarvessel::detector::DetectConfig;
use sarvessel::eval::split_dataset;
use sarvessel::scene_io::{synth_scene, SynthParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().and_then(|s| s.parse().ok()).unwrap_or(30);
    let dir = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("sarvessel-examples"));
    std::fs::create_dir_all(&dir)?;

    // Chips go through the same denoising the detector applies.
    let denoise = DetectConfig::default()
        .denoise
        .expect("denoising is on by default");
    let scenes = (0..12)
        .map(|i| {
            let (s, t) = synth_scene(&SynthParams {
                rows: 256,
                cols: 256,
                n_vessels: 15,
                seed: 500 + i,
                ..SynthParams::default()
            })?;
            Ok((denoise_scene(&s, &denoise)?, t))
        })
        .collect::<sarvessel::Result<Vec<_>>>()?;
    let chips = build_chips(&scenes, 32, None, 1)?;
    let (train_set, val_set) = split_dataset(&chips, 0.75, 2)?;
    println!(
        "{} chips: {} train, {} validation",
        chips.len(),
        train_set.len(),
        val_set.len()
    );

    let arch = Architecture::default_chip();
    println!("{} parameters", arch.param_count());
    let cfg = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let (net, history) = train(Network::new(arch, 3)?, &train_set, &val_set, &cfg)?;
    for (i, (loss, acc)) in history
        .train_loss
        .iter()
        .zip(&history.val_accuracy)
        .enumerate()
    {
        if i % 5 == 4 || i + 1 == epochs {
            println!(
                "epoch {:>3}: loss {loss:.4}, validation accuracy {:.1}%",
                i + 1,
                100.0 * acc
            );
        }
    }
    println!("trained in {:.0} ms", history.wall_time_ms);

    let path = dir.join("classifier.sdw");
    save_weights(&net, &path)?;
    let loaded = load_weights(&path)?;
    println!(
        "reloaded {}: accuracy {:.1}%",
        path.display(),
        100.0 * accuracy(&loaded, &val_set)?
    );

    let warm = TrainConfig {
        epochs: 5,
        init_weights_path: Some(path),
        ..TrainConfig::default()
    };
    let fresh = Network::new(Architecture::default_chip(), 4)?;
    let (_, resumed) = train(fresh, &train_set, &val_set, &warm)?;
    println!(
        "warm start: first-epoch loss {:.4} (cold start began at {:.4})",
        resumed.train_loss[0], history.train_loss[0]
    );
    Ok(())
}
