//! The one-shot benchmark: synthesize, train, evaluate chips and full
//! scenes, and print the JSON report. Defaults reproduce `sarvessel bench`.
//!
//! ```text
//! cargo run --release --example benchmark -- [epochs] [train_scenes] [seed]
//! ```

use sarvessel::cli::{run_bench, BenchConfig, RunConfig};
use sarvessel::cnn::TrainConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let arg = |i: usize| std::env::args().nth(i).and_then(|s| s.parse::<u64>().ok());
    let train = TrainConfig::default();
    let bench = BenchConfig::default();
    let cfg = RunConfig {
        train: Some(TrainConfig {
            epochs: arg(1).map_or(train.epochs, |e| e as usize),
            ..train
        }),
        bench: Some(BenchConfig {
            n_train_scenes: arg(2).map_or(bench.n_train_scenes, |n| n as usize),
            ..bench
        }),
        ..RunConfig::default()
    };
    let out = run_bench(&cfg, arg(3).unwrap_or(0))?;
    println!("{}", serde_json::to_string_pretty(&out.report)?);

    let r = &out.report;
    let first = r.train_loss.first().copied().unwrap_or(f64::NAN);
    let last = r.train_loss.last().copied().unwrap_or(f64::NAN);
    println!(
        "loss {first:.4} -> {last:.4}; chip accuracy {:.2}%; box F1 {:.3}; {:.3} ms per chip, {:.1} ms per scene",
        r.chip.accuracy_pct, r.box_.f1, r.timings.chip_inference_ms, r.timings.scene_detect_ms
    );
    Ok(())
}
