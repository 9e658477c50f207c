mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_distr::{Distribution, Exp1};
use sarvessel::wavelet::{
    denoise, dwt2, idwt2, level_shape, DenoiseConfig, ThresholdRule, WaveletFamily, WaveletPyramid,
};
use sarvessel::{Error, Grid};

const FAMILIES: [WaveletFamily; 2] = [WaveletFamily::Haar, WaveletFamily::Db4];

fn coefficients(p: &WaveletPyramid) -> Vec<f64> {
    let mut v: Vec<f64> = p.base_ll.as_slice().to_vec();
    for d in &p.details {
        for g in [&d.lh, &d.hl, &d.hh] {
            v.extend_from_slice(g.as_slice());
        }
    }
    v
}

fn max_rel_err(a: &Grid<f64>, b: &Grid<f64>) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

fn random_grid(rows: usize, cols: usize, seed: u64) -> Grid<f64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let exp: Vec<f64> = (0..rows * cols).map(|_| Exp1.sample(&mut rng)).collect();
    Grid::from_vec(rows, cols, exp).unwrap()
}

#[test]
fn haar_two_by_two_magnitudes() {
    let x = Grid::from_vec(2, 2, vec![4.0, 6.0, 10.0, 12.0]).unwrap();
    let p = dwt2(&x, WaveletFamily::Haar, 1).unwrap();
    let mut mags: Vec<f64> = coefficients(&p).iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);
    for (m, want) in mags.iter().zip([0.0, 2.0, 6.0, 16.0]) {
        assert!((m - want).abs() < 1e-12);
    }
    assert!((p.base_ll[(0, 0)].abs() - 16.0).abs() < 1e-12);
    assert!(p.details[0].hh[(0, 0)].abs() < 1e-12);
}

#[test]
fn transform_is_orthogonal_on_odd_shapes() {
    // Images of the standard basis must map to an orthonormal set.
    for fam in FAMILIES {
        let (rows, cols) = (7, 6);
        let n = rows * cols;
        let images: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let g = Grid::from_fn(rows, cols, |r, c| if r * cols + c == i { 1.0 } else { 0.0 });
                coefficients(&dwt2(&g, fam, 2).unwrap())
            })
            .collect();
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = images[i].iter().zip(&images[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12, "{fam:?} <{i},{j}> = {dot}");
            }
        }
    }
}

#[test]
fn reconstruction_and_energy_on_reference_sizes() {
    for fam in FAMILIES {
        for (rows, cols) in [(16, 16), (15, 17), (64, 64), (8, 8)] {
            for levels in 1..=3 {
                let x = random_grid(rows, cols, (rows * 100 + cols + levels) as u64);
                let p = dwt2(&x, fam, levels).unwrap();
                for (k, d) in p.details.iter().enumerate() {
                    assert_eq!(d.hh.shape(), level_shape((rows, cols), k + 1));
                    assert_eq!(
                        d.hh.shape(),
                        ((rows).div_ceil(1 << (k + 1)), cols.div_ceil(1 << (k + 1)))
                    );
                }
                let back = idwt2(&p).unwrap();
                assert!(max_rel_err(&back, &x) <= 1e-6);
                let e: f64 = x.iter().map(|v| v * v).sum();
                assert!((p.energy() - e).abs() / e <= 1e-5);
            }
        }
    }
}

#[test]
fn level_bound() {
    let x = random_grid(15, 17, 0);
    assert!(dwt2(&x, WaveletFamily::Haar, 3).is_ok());
    assert!(matches!(
        dwt2(&x, WaveletFamily::Haar, 4),
        Err(Error::Config(_))
    ));
}

#[test]
fn inconsistent_pyramid_is_rejected() {
    let mut p = dwt2(&random_grid(16, 16, 1), WaveletFamily::Haar, 2).unwrap();
    p.details[1].lh = Grid::filled(3, 4, 0.0);
    assert!(matches!(idwt2(&p), Err(Error::Validation(_))));
}

#[test]
fn denoise_keeps_constant_images() {
    for fam in FAMILIES {
        let img = Grid::filled(32, 24, 3.5f32);
        let out = denoise(
            &img,
            &DenoiseConfig {
                family: fam,
                ..DenoiseConfig::default()
            },
        )
        .unwrap();
        assert!(out.iter().all(|&v| (v / 3.5 - 1.0).abs() < 1e-5));
    }
}

#[test]
fn hard_rule_keeps_noiseless_ramps() {
    let linear = Grid::from_fn(32, 32, |r, c| 1.0 + 0.5 * r as f32 + 0.25 * c as f32);
    let cfg = DenoiseConfig {
        rule: ThresholdRule::Hard,
        log_domain: false,
        ..DenoiseConfig::default()
    };
    let out = denoise(&linear, &cfg).unwrap();
    assert!(out
        .iter()
        .zip(linear.iter())
        .all(|(a, b)| (a - b).abs() / b < 1e-5));

    // ln of an exponential ramp is linear, so the log-domain HH median is 0 too.
    let expo = Grid::from_fn(32, 32, |r, c| (0.05 * r as f32 + 0.02 * c as f32).exp());
    let cfg = DenoiseConfig {
        rule: ThresholdRule::Hard,
        ..DenoiseConfig::default()
    };
    let out = denoise(&expo, &cfg).unwrap();
    assert!(out
        .iter()
        .zip(expo.iter())
        .all(|(a, b)| (a - b).abs() / b < 1e-5));
}

#[test]
fn denoise_reduces_speckle_variance() {
    let speckle = random_grid(256, 256, 42).map(|v| v as f32);
    let var = |g: &Grid<f32>| {
        let n = g.len() as f64;
        let m = g.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
        g.iter().map(|&v| (f64::from(v) - m).powi(2)).sum::<f64>() / n
    };
    for fam in FAMILIES {
        for rule in [ThresholdRule::Soft, ThresholdRule::Hard] {
            let out = denoise(
                &speckle,
                &DenoiseConfig {
                    family: fam,
                    rule,
                    ..DenoiseConfig::default()
                },
            )
            .unwrap();
            assert!(out.iter().all(|v| v.is_finite() && *v >= 0.0));
            assert!(var(&out) <= 0.8 * var(&speckle), "{fam:?} {rule:?}");
        }
    }
}

#[test]
fn denoise_rejects_bad_input() {
    let mut img = Grid::filled(8, 8, 1.0f32);
    img[(2, 2)] = f32::INFINITY;
    assert!(matches!(
        denoise(&img, &DenoiseConfig::default()),
        Err(Error::Validation(_))
    ));
}

proptest! {
    #![proptest_config(common::seeded(64))]

    #[test]
    fn perfect_reconstruction(rows in 2usize..24, cols in 2usize..24, seed in 0u64..1000, db4 in prop::bool::ANY, lv in 1usize..4) {
        let fam = if db4 { WaveletFamily::Db4 } else { WaveletFamily::Haar };
        let levels = lv.min(sarvessel::wavelet::max_levels(rows, cols));
        let x = random_grid(rows, cols, seed);
        let p = dwt2(&x, fam, levels).unwrap();
        prop_assert!(max_rel_err(&idwt2(&p).unwrap(), &x) <= 1e-6);
        let e: f64 = x.iter().map(|v| v * v).sum();
        prop_assert!((p.energy() - e).abs() / e <= 1e-5);
    }

    #[test]
    fn linearity(rows in 2usize..16, cols in 2usize..16, a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
        let x = random_grid(rows, cols, seed);
        let y = random_grid(rows, cols, seed + 1);
        let mix = Grid::from_fn(rows, cols, |r, c| a * x[(r, c)] + b * y[(r, c)]);
        for fam in FAMILIES {
            let (cx, cy, cm) = (
                coefficients(&dwt2(&x, fam, 1).unwrap()),
                coefficients(&dwt2(&y, fam, 1).unwrap()),
                coefficients(&dwt2(&mix, fam, 1).unwrap()),
            );
            for i in 0..cm.len() {
                prop_assert!((cm[i] - (a * cx[i] + b * cy[i])).abs() <= 1e-5);
            }
        }
    }

    #[test]
    fn soft_threshold_contracts(c in -100.0f64..100.0, t in 0.0f64..50.0) {
        let s = ThresholdRule::Soft.apply(c, t);
        prop_assert!(s.abs() <= c.abs());
        prop_assert!(s == 0.0 || s.signum() == c.signum());
        let h = ThresholdRule::Hard.apply(c, t);
        prop_assert!(h == 0.0 || h == c);
    }
}
