//! Generate a seeded speckle scene with vessels, write it in the raster
//! format, read it back and render the VV band as a PGM.
//!
//! ```text
//! cargo run --example synth_scene -- [out_dir]
//! ```

use std::path::PathBuf;

use sarvessel::pgm::{burn_boxes, to_gray, write_pgm};
use sarvessel::scene_io::{load_scene, save_scene, synth_scene, Band, SynthParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("sarvessel-examples"));
    std::fs::create_dir_all(&dir)?;

    let params = SynthParams {
        rows: 256,
        cols: 256,
        n_vessels: 8,
        seed: 7,
        ..SynthParams::default()
    };
    let (scene, truth) = synth_scene(&params)?;
    let stem = dir.join("scene");
    save_scene(&scene, Some(&truth), &stem)?;

    let (back, back_truth) = load_scene(&stem)?;
    assert_eq!(back, scene);
    assert_eq!(back_truth.as_ref(), Some(&truth));

    for (band, plane) in back.bands().iter().zip(back.planes()) {
        let n = plane.len() as f64;
        let mean = plane.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
        let var = plane
            .iter()
            .map(|&v| (f64::from(v) - mean).powi(2))
            .sum::<f64>()
            / n;
        println!("{band}: mean {mean:.3}, std {:.3}", var.sqrt());
    }
    for t in &truth.boxes {
        let b = t.bbox;
        println!(
            "vessel at ({:>3}, {:>3}) size {:>2}x{:<2}",
            b.row, b.col, b.height, b.width
        );
    }

    let mut img = to_gray(back.band(Band::VV).expect("synthetic scenes carry VV"));
    burn_boxes(&mut img, truth.bboxes());
    write_pgm(dir.join("scene_truth.pgm"), &img)?;
    println!(
        "wrote {}.{{json,f32,truth.json}} and scene_truth.pgm",
        stem.display()
    );
    Ok(())
}
