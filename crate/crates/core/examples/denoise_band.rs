//! Wavelet denoising of single-look speckle: equivalent number of looks on
//! open sea and vessel-to-sea contrast before and after, per wavelet and
//! threshold rule.
//!
//! ```text
//! cargo run --example denoise_band
//! ```

use sarvessel::scene_io::{synth_scene, Band, GroundTruth, SynthParams};
use sarvessel::wavelet::{
    denoise, dwt2, estimate_noise_sigma, DenoiseConfig, ThresholdRule, WaveletFamily,
};
use sarvessel::Grid;

/// (ENL of sea pixels, vessel mean / sea mean).
fn quality(band: &Grid<f32>, truth: &GroundTruth) -> (f64, f64) {
    let (mut sea, mut ship) = (Vec::new(), Vec::new());
    for r in 0..band.rows() {
        for c in 0..band.cols() {
            let v = f64::from(band[(r, c)]);
            let d = truth
                .bboxes()
                .map(|b| b.chebyshev_distance(r, c))
                .min()
                .unwrap_or(usize::MAX);
            if d == 0 {
                ship.push(v);
            } else if d > 8 {
                sea.push(v);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let m = mean(&sea);
    let var = sea.iter().map(|v| (v - m).powi(2)).sum::<f64>() / sea.len() as f64;
    (m * m / var, mean(&ship) / m)
}

fn main() -> sarvessel::Result<()> {
    let (scene, truth) = synth_scene(&SynthParams {
        rows: 256,
        cols: 256,
        looks: 1,
        n_vessels: 10,
        seed: 3,
        ..SynthParams::default()
    })?;
    let vv = scene.band(Band::VV).expect("synthetic scenes carry VV");

    let log = vv.map(|v| f64::from(v.max(f32::MIN_POSITIVE)).ln());
    let sigma = estimate_noise_sigma(&dwt2(&log, WaveletFamily::Haar, 1)?);
    println!("log-domain noise estimate (MAD of finest HH): {sigma:.3}");

    let (enl, contrast) = quality(vv, &truth);
    println!("{:<24} ENL {enl:>6.2}  contrast {contrast:>6.2}", "raw");
    for family in [WaveletFamily::Haar, WaveletFamily::Db4] {
        for rule in [ThresholdRule::Soft, ThresholdRule::Hard] {
            for levels in [1, 2, 3] {
                let cfg = DenoiseConfig {
                    family,
                    levels,
                    rule,
                    log_domain: true,
                };
                let (enl, contrast) = quality(&denoise(vv, &cfg)?, &truth);
                let name = format!("{family:?} {rule:?} L{levels}");
                println!("{name:<24} ENL {enl:>6.2}  contrast {contrast:>6.2}");
            }
        }
    }
    Ok(())
}
