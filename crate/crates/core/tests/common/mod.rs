#![allow(dead_code)]

use proptest::test_runner::{Config, RngSeed};

/// Fixed-seed proptest settings so every run explores the same cases.
pub fn seeded(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..Config::default()
    }
}

use sarvessel::dataset::build_chips;
use sarvessel::scene_io::{synth_scene, Chip, SynthParams};

/// Balanced 32 px chips from `n_scenes` synthetic 256x256 scenes with
/// `vessels` targets each (TCR 10-20 dB).
pub fn synthetic_chips(n_scenes: u64, vessels: usize, seed: u64) -> Vec<Chip> {
    let scenes: Vec<_> = (0..n_scenes)
        .map(|i| {
            synth_scene(&SynthParams {
                rows: 256,
                cols: 256,
                n_vessels: vessels,
                seed: seed * 1000 + i,
                ..SynthParams::default()
            })
            .unwrap()
        })
        .collect();
    build_chips(&scenes, 32, None, seed).unwrap()
}
