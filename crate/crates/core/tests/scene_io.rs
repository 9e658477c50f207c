mod common;

use std::fs;

use proptest::prelude::*;
use sarvessel::scene_io::{
    extract_chip, load_scene, save_scene, synth_scene, Band, BoundingBox, GroundTruth, SarScene,
    SynthParams,
};
use sarvessel::{Error, Grid};
use tempfile::tempdir;

fn scene(
    bands: Vec<Band>,
    rows: usize,
    cols: usize,
    f: impl Fn(usize, usize, usize) -> f32,
) -> SarScene {
    let planes = (0..bands.len())
        .map(|b| Grid::from_fn(rows, cols, |r, c| f(b, r, c)))
        .collect();
    SarScene::new("test", bands, planes, None).unwrap()
}

#[test]
fn raw_file_layout() {
    let dir = tempdir().unwrap();
    let stem = dir.path().join("s");
    let s = scene(vec![Band::VV], 2, 2, |_, r, c| (r * 2 + c + 1) as f32);
    save_scene(&s, None, &stem).unwrap();
    let raw = fs::read(dir.path().join("s.f32")).unwrap();
    let expected: Vec<u8> = [1.0f32, 2.0, 3.0, 4.0]
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    assert_eq!(raw, expected);
    assert!(!dir.path().join("s.truth.json").exists());

    let s = scene(vec![Band::VV, Band::VH], 3, 5, |b, r, c| {
        (b * 100 + r * 5 + c) as f32
    });
    save_scene(&s, None, &stem).unwrap();
    assert_eq!(
        fs::read(dir.path().join("s.f32")).unwrap().len(),
        2 * 3 * 5 * 4
    );
    let header: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(header["bands"], serde_json::json!(["VV", "VH"]));
    assert_eq!(header["dtype"], "f32le");
    assert_eq!(
        (header["rows"].as_u64(), header["cols"].as_u64()),
        (Some(3), Some(5))
    );
}

#[test]
fn truth_file_schema() {
    let dir = tempdir().unwrap();
    let stem = dir.path().join("t");
    let s = scene(vec![Band::VV], 8, 8, |_, _, _| 1.0);
    let truth = GroundTruth::vessels([BoundingBox::new(1, 2, 3, 4)]);
    save_scene(&s, Some(&truth), &stem).unwrap();
    let text = fs::read_to_string(dir.path().join("t.truth.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(
        v,
        serde_json::json!([{"row": 1, "col": 2, "height": 3, "width": 4, "class": "vessel"}])
    );
    let (_, back) = load_scene(&stem).unwrap();
    assert_eq!(back, Some(truth));
}

#[test]
fn load_errors_are_distinct() {
    let dir = tempdir().unwrap();
    let stem = dir.path().join("e");
    assert!(matches!(load_scene(&stem), Err(Error::Io { .. })));

    let s = scene(vec![Band::VV], 4, 4, |_, r, c| (r + c) as f32);
    save_scene(&s, None, &stem).unwrap();
    let raw_path = dir.path().join("e.f32");
    let raw = fs::read(&raw_path).unwrap();
    fs::write(&raw_path, &raw[..15 * 4]).unwrap();
    assert!(matches!(load_scene(&stem), Err(Error::SizeMismatch { .. })));

    let mut bad = raw.clone();
    bad[8..12].copy_from_slice(&f32::NAN.to_le_bytes());
    fs::write(&raw_path, &bad).unwrap();
    assert!(matches!(load_scene(&stem), Err(Error::NonFinite { .. })));

    fs::write(&raw_path, &raw).unwrap();
    let header_path = dir.path().join("e.json");
    let header = fs::read_to_string(&header_path)
        .unwrap()
        .replace("\"VV\"", "\"HH\"");
    fs::write(&header_path, header).unwrap();
    assert!(matches!(load_scene(&stem), Err(Error::UnknownBand(_))));
}

#[test]
fn chip_brute_force_window() {
    let s = scene(vec![Band::VV, Band::VH], 8, 8, |b, r, c| {
        (b * 64 + r * 8 + c) as f32
    });
    let chip = extract_chip(&s, (4, 4), 2).unwrap();
    assert_eq!((chip.origin.row, chip.origin.col), (3, 3));
    for r in 0..2 {
        for c in 0..2 {
            for b in 0..2 {
                let expected = (b * 64 + (r + 3) * 8 + (c + 3)) as f32;
                assert_eq!(chip.data[(r * 2 + c) * 2 + b], expected);
            }
        }
    }
    let clamped = extract_chip(&s, (0, 0), 4).unwrap();
    assert_eq!((clamped.origin.row, clamped.origin.col), (0, 0));
    let whole = extract_chip(&scene(vec![Band::VV], 4, 4, |_, _, _| 1.0), (2, 2), 4).unwrap();
    assert_eq!((whole.origin.row, whole.origin.col), (0, 0));
    assert!(matches!(
        extract_chip(&s, (4, 4), 9),
        Err(Error::SceneTooSmall { .. })
    ));
}

fn params(seed: u64) -> SynthParams {
    SynthParams {
        rows: 128,
        cols: 128,
        n_vessels: 6,
        seed,
        ..SynthParams::default()
    }
}

#[test]
fn synth_is_deterministic_and_valid() {
    let (a, ta) = synth_scene(&params(3)).unwrap();
    let (b, tb) = synth_scene(&params(3)).unwrap();
    assert_eq!(a, b);
    assert_eq!(ta, tb);
    assert_ne!(a, synth_scene(&params(4)).unwrap().0);
    assert_eq!(ta.len(), 6);
    let boxes: Vec<_> = ta.bboxes().copied().collect();
    for (i, x) in boxes.iter().enumerate() {
        assert!(x.fits(128, 128));
        let (h, w) = (x.height, x.width);
        assert!((5..=12).contains(&h) && (5..=12).contains(&w));
        for y in &boxes[i + 1..] {
            assert!(!x.overlaps(y));
        }
    }
    assert!(a
        .planes()
        .iter()
        .all(|p| p.iter().all(|&v| v.is_finite() && v > 0.0)));
}

#[test]
fn vessel_free_scene() {
    let (s, t) = synth_scene(&SynthParams {
        n_vessels: 0,
        ..params(1)
    })
    .unwrap();
    assert!(t.is_empty());
    assert!(s.planes().iter().all(|p| p.iter().all(|&v| v > 0.0)));
}

#[test]
fn bright_vessel_holds_the_maximum() {
    let mut failures = 0;
    for seed in 0..20 {
        let (s, t) = synth_scene(&SynthParams {
            n_vessels: 1,
            tcr_db_range: (20.0, 20.0),
            ..params(seed)
        })
        .unwrap();
        let vv = s.band(Band::VV).unwrap();
        let (mut best, mut at) = (f32::MIN, (0, 0));
        for r in 0..vv.rows() {
            for c in 0..vv.cols() {
                if vv[(r, c)] > best {
                    best = vv[(r, c)];
                    at = (r, c);
                }
            }
        }
        let b = t.boxes[0].bbox;
        let inside = (b.row..b.bottom()).contains(&at.0) && (b.col..b.right()).contains(&at.1);
        failures += usize::from(!inside);
    }
    assert!(
        failures <= 1,
        "{failures} of 20 seeds put the maximum outside the vessel"
    );
}

#[test]
fn clutter_statistics() {
    for looks in [1, 4] {
        let (s, _) = synth_scene(&SynthParams {
            rows: 512,
            cols: 512,
            looks,
            n_vessels: 0,
            clutter_mean_vv: 2.0,
            band_ratio_vh: 0.25,
            seed: 17,
            ..SynthParams::default()
        })
        .unwrap();
        for (band, target) in [(Band::VV, 2.0), (Band::VH, 0.5)] {
            let p = s.band(band).unwrap();
            let n = p.len() as f64;
            let mean = p.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
            let var = p
                .iter()
                .map(|&v| (f64::from(v) - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0);
            assert!(
                (mean / target - 1.0).abs() < 0.03,
                "looks {looks} {band}: mean {mean}"
            );
            // Gamma(L, m/L) has coefficient of variation 1/sqrt(L).
            let cv = var.sqrt() / mean;
            let expected = 1.0 / f64::from(looks).sqrt();
            assert!(
                (cv / expected - 1.0).abs() < 0.05,
                "looks {looks} {band}: cv {cv}"
            );
        }
    }
}

#[test]
fn placement_failure() {
    let p = SynthParams {
        rows: 64,
        cols: 64,
        n_vessels: 100_000,
        ..SynthParams::default()
    };
    assert!(matches!(
        synth_scene(&p),
        Err(Error::PlacementFailure { .. })
    ));
}

fn arb_scene() -> impl Strategy<Value = SarScene> {
    (
        1usize..12,
        1usize..12,
        prop::bool::ANY,
        prop::option::of(0.1f64..100.0),
    )
        .prop_flat_map(|(rows, cols, two, spacing)| {
            let bands = if two {
                vec![Band::VV, Band::VH]
            } else {
                vec![Band::VH]
            };
            let n = bands.len() * rows * cols;
            prop::collection::vec(0.0f32..1e6, n).prop_map(move |data| {
                let planes = data
                    .chunks(rows * cols)
                    .map(|c| Grid::from_vec(rows, cols, c.to_vec()).unwrap())
                    .collect();
                SarScene::new("prop", bands.clone(), planes, spacing).unwrap()
            })
        })
}

proptest! {
    #![proptest_config(common::seeded(48))]

    #[test]
    fn save_load_round_trip(s in arb_scene()) {
        let dir = tempdir().unwrap();
        let stem = dir.path().join("p");
        save_scene(&s, None, &stem).unwrap();
        let (back, truth) = load_scene(&stem).unwrap();
        prop_assert!(truth.is_none());
        prop_assert_eq!(back.pixel_spacing_m(), s.pixel_spacing_m());
        for (a, b) in back.planes().iter().zip(s.planes()) {
            prop_assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        prop_assert_eq!(back, s);
    }

    #[test]
    fn chips_stay_inside(rows in 4usize..40, cols in 4usize..40, r in 0usize..60, c in 0usize..60, size in 1usize..5) {
        let s = scene(vec![Band::VV], rows, cols, |_, r, c| (r * cols + c) as f32);
        let chip = extract_chip(&s, (r, c), size).unwrap();
        let w = chip.window();
        prop_assert!(w.fits(rows, cols));
        prop_assert_eq!(chip.data[0], (w.row * cols + w.col) as f32);
    }
}
