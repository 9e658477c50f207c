use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use sarvessel::pgm::{read_pgm, to_gray};
use sarvessel::scene_io::{load_scene, save_scene, Band, BoundingBox, GroundTruth, SarScene};
use serde_json::Value;
use tempfile::tempdir;

fn sarvessel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sarvessel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Value {
    let out = sarvessel(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn code(args: &[&str]) -> (i32, String) {
    let out = sarvessel(args);
    (
        out.status.code().expect("exit code"),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> Value {
    let text = fs::read_to_string(p).unwrap();
    assert!(text.ends_with('\n'));
    serde_json::from_str(&text).unwrap()
}

struct Fixture {
    dir: PathBuf,
    scenes: Vec<PathBuf>,
    weights: PathBuf,
}

/// Six annotated 256x256 scenes and a network trained on them, built once
/// through the binary itself.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli-fixture");
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        let scenes: Vec<PathBuf> = (0..6).map(|i| dir.join(format!("train{i}"))).collect();
        for (i, stem) in scenes.iter().enumerate() {
            let seed = (100 + i).to_string();
            ok(&[
                "synth",
                "--rows",
                "256",
                "--cols",
                "256",
                "--vessels",
                "12",
                "--seed",
                &seed,
                "--out",
                s(stem),
            ]);
        }
        let weights = dir.join("net.sdw");
        let mut args = vec![
            "train",
            "--epochs",
            "25",
            "--seed",
            "3",
            "--out",
            s(&weights),
        ];
        for stem in &scenes {
            args.extend(["--scene", s(stem)]);
        }
        ok(&args);
        Fixture {
            dir,
            scenes,
            weights,
        }
    })
}

#[test]
fn synth_writes_scene_files() {
    let dir = tempdir().unwrap();
    let stem = dir.path().join("s1");
    let stats = ok(&[
        "synth",
        "--rows",
        "256",
        "--cols",
        "256",
        "--vessels",
        "5",
        "--seed",
        "7",
        "--out",
        s(&stem),
    ]);
    for ext in ["json", "f32", "truth.json"] {
        assert!(dir.path().join(format!("s1.{ext}")).exists());
    }
    let truth = read(&dir.path().join("s1.truth.json"));
    assert_eq!(truth.as_array().unwrap().len(), 5);
    assert_eq!(stats["n_vessels"], 5);
    assert_eq!(stats["rows"], 256);
    assert_eq!(stats["bands"].as_array().unwrap().len(), 2);

    let again = dir.path().join("s2");
    ok(&[
        "synth",
        "--rows",
        "256",
        "--cols",
        "256",
        "--vessels",
        "5",
        "--seed",
        "7",
        "--out",
        s(&again),
    ]);
    assert_eq!(
        fs::read(dir.path().join("s1.f32")).unwrap(),
        fs::read(dir.path().join("s2.f32")).unwrap()
    );
}

#[test]
fn exit_codes() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("x");
    assert_eq!(
        code(&[
            "synth",
            "--rows",
            "64",
            "--cols",
            "64",
            "--vessels",
            "100000",
            "--out",
            s(&out)
        ])
        .0,
        2
    );
    assert_eq!(
        code(&[
            "denoise",
            "--scene",
            s(&dir.path().join("missing")),
            "--out",
            s(&out)
        ])
        .0,
        3
    );
    assert_eq!(code(&["synth", "--rows", "64", "--cols", "64"]).0, 2);

    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"synth": {"rows": 64}, "detcet": {}}"#).unwrap();
    let (c, msg) = code(&["synth", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(c, 2);
    assert!(msg.contains("detcet"), "{msg}");
    fs::write(&cfg, r#"{"synth": {"rows": 64, "colls": 3}}"#).unwrap();
    assert_eq!(code(&["synth", "--config", s(&cfg), "--out", s(&out)]).0, 2);
    fs::write(&cfg, "{not json").unwrap();
    assert_eq!(code(&["synth", "--config", s(&cfg), "--out", s(&out)]).0, 2);
    assert_eq!(
        code(&[
            "synth",
            "--config",
            s(&dir.path().join("nope.json")),
            "--out",
            s(&out)
        ])
        .0,
        3
    );

    // Malformed inputs are reported, never a crash.
    let stem = dir.path().join("m");
    ok(&[
        "synth",
        "--rows",
        "64",
        "--cols",
        "64",
        "--vessels",
        "1",
        "--out",
        s(&stem),
    ]);
    fs::write(dir.path().join("m.f32"), [0u8; 10]).unwrap();
    assert_eq!(code(&["cfar", "--scene", s(&stem)]).0, 2);
    fs::write(dir.path().join("m.json"), "[]").unwrap();
    assert_eq!(code(&["cfar", "--scene", s(&stem)]).0, 2);
    let bogus = dir.path().join("bogus.sdw");
    fs::write(&bogus, b"SDW1garbage").unwrap();
    assert_eq!(
        code(&["detect", "--scene", s(&stem), "--weights", s(&bogus)]).0,
        2
    );
}

#[test]
fn config_file_drives_synth() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let stem = dir.path().join("c");
    fs::write(
        &cfg,
        format!(
            r#"{{"seed": 5, "synth": {{"rows": 96, "cols": 80, "n_vessels": 3}}, "paths": {{"out": "{}"}}}}"#,
            s(&stem)
        ),
    )
    .unwrap();
    let stats = ok(&["synth", "--config", s(&cfg)]);
    assert_eq!(
        (stats["rows"].as_u64(), stats["cols"].as_u64()),
        (Some(96), Some(80))
    );
    let (scene, truth) = load_scene(&stem).unwrap();
    assert_eq!((scene.rows(), scene.cols()), (96, 80));
    assert_eq!(truth.unwrap().len(), 3);
    let first = fs::read(dir.path().join("c.f32")).unwrap();
    ok(&["synth", "--config", s(&cfg), "--seed", "6"]);
    assert_ne!(fs::read(dir.path().join("c.f32")).unwrap(), first);
}

#[test]
fn denoise_and_cfar() {
    let dir = tempdir().unwrap();
    let stem = dir.path().join("n");
    ok(&[
        "synth",
        "--rows",
        "128",
        "--cols",
        "128",
        "--vessels",
        "4",
        "--looks",
        "1",
        "--out",
        s(&stem),
    ]);
    let clean = dir.path().join("n_clean");
    ok(&[
        "denoise",
        "--scene",
        s(&stem),
        "--family",
        "db4",
        "--levels",
        "2",
        "--rule",
        "hard",
        "--out",
        s(&clean),
    ]);
    let (a, ta) = load_scene(&stem).unwrap();
    let (b, tb) = load_scene(&clean).unwrap();
    assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
    assert_eq!(ta, tb);
    assert_ne!(a, b);

    let report = dir.path().join("cfar.json");
    let mask = dir.path().join("mask.pgm");
    let summary = ok(&[
        "cfar",
        "--scene",
        s(&clean),
        "--pfa",
        "1e-3",
        "--guard",
        "12",
        "--train",
        "16",
        "--out",
        s(&report),
        "--mask",
        s(&mask),
    ]);
    assert_eq!(read(&report), summary);
    let img = read_pgm(&mask).unwrap();
    assert_eq!(img.shape(), (128, 128));
    let hits = img.iter().filter(|&&v| v == 255).count();
    assert_eq!(hits as u64, summary["n_detections"].as_u64().unwrap());
    assert!(img.iter().all(|&v| v == 0 || v == 255));
    assert_eq!(code(&["cfar", "--scene", s(&stem), "--band", "HH"]).0, 2);
}

#[test]
fn train_writes_weights_and_history() {
    let f = fixture();
    let history = read(&f.dir.join("net.sdw.history.json"));
    assert_eq!(history["train_loss"].as_array().unwrap().len(), 25);
    assert_eq!(history["val_accuracy"].as_array().unwrap().len(), 25);
    assert!(history["training_time_ms"].as_f64().unwrap() > 0.0);
    assert_eq!(&fs::read(&f.weights).unwrap()[..4], b"SDW1");
}

#[test]
fn train_is_byte_reproducible() {
    let f = fixture();
    let dir = tempdir().unwrap();
    let run = |name: &str| {
        let w = dir.path().join(name);
        let mut args = vec![
            "train",
            "--epochs",
            "2",
            "--seed",
            "9",
            "--max-chips",
            "64",
            "--out",
            s(&w),
        ];
        for stem in &f.scenes[..2] {
            args.extend(["--scene", s(stem)]);
        }
        ok(&args);
        fs::read(&w).unwrap()
    };
    assert_eq!(run("a.sdw"), run("b.sdw"));
}

#[test]
fn warm_start_architecture_mismatch() {
    let f = fixture();
    let dir = tempdir().unwrap();
    let out = dir.path().join("w.sdw");
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"detect": {"chip_size": 24}}"#).unwrap();
    let (c, msg) = code(&[
        "train",
        "--config",
        s(&cfg),
        "--scene",
        s(&f.scenes[0]),
        "--epochs",
        "1",
        "--init-weights",
        s(&f.weights),
        "--out",
        s(&out),
    ]);
    assert_eq!(c, 2);
    assert!(msg.contains("layer 7"), "{msg}");

    // A single-band scene changes the first convolution.
    let stem = dir.path().join("vv");
    let (scene, truth) = load_scene(&f.scenes[0]).unwrap();
    let vv = SarScene::new(
        "vv",
        vec![Band::VV],
        vec![scene.band(Band::VV).unwrap().clone()],
        None,
    )
    .unwrap();
    save_scene(&vv, truth.as_ref(), &stem).unwrap();
    let (c, msg) = code(&[
        "train",
        "--scene",
        s(&stem),
        "--epochs",
        "1",
        "--init-weights",
        s(&f.weights),
        "--out",
        s(&out),
    ]);
    assert_eq!(c, 2);
    assert!(msg.contains("layer 0"), "{msg}");
    assert!(!out.exists());
    assert_eq!(code(&["train", "--out", s(&out)]).0, 2);
}

#[test]
fn detect_writes_detections_and_overlay() {
    let f = fixture();
    let dir = tempdir().unwrap();
    let stem = dir.path().join("scene");
    ok(&[
        "synth",
        "--vessels",
        "10",
        "--seed",
        "77",
        "--out",
        s(&stem),
    ]);
    let dets = dir.path().join("dets.json");
    let overlay = dir.path().join("overlay.pgm");
    ok(&[
        "detect",
        "--scene",
        s(&stem),
        "--weights",
        s(&f.weights),
        "--out",
        s(&dets),
        "--overlay",
        s(&overlay),
    ]);
    let file = read(&dets);
    assert!(file["detection_time_ms"].as_f64().unwrap() > 0.0);
    for d in file["detections"].as_array().unwrap() {
        let mut keys: Vec<_> = d.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["col", "height", "row", "score", "source", "width"]);
    }

    let bytes = fs::read(&overlay).unwrap();
    assert_eq!(&bytes[..2], b"P5");
    let img = read_pgm(&overlay).unwrap();
    assert_eq!(img.shape(), (512, 512));
    let (scene, truth) = load_scene(&stem).unwrap();
    let plain = to_gray(scene.band(Band::VV).unwrap());
    for t in truth.unwrap().bboxes() {
        // Pixels burned by an outline within 2 px of the truth box.
        let (r0, c0) = (t.row.saturating_sub(2), t.col.saturating_sub(2));
        let (r1, c1) = ((t.bottom() + 2).min(512), (t.right() + 2).min(512));
        let burned = (r0..r1)
            .flat_map(|r| (c0..c1).map(move |c| (r, c)))
            .filter(|&p| img[p] == 255 && plain[p] != 255)
            .count();
        assert!(burned > 0, "no outline near {t:?}");
    }

    let empty = dir.path().join("flat");
    ok(&[
        "synth",
        "--vessels",
        "0",
        "--rows",
        "128",
        "--cols",
        "128",
        "--out",
        s(&empty),
    ]);
    let out = ok(&["detect", "--scene", s(&empty), "--weights", s(&f.weights)]);
    assert!(out["detections"].as_array().unwrap().is_empty());
    assert_eq!(code(&["detect", "--scene", s(&empty)]).0, 2);
    assert_eq!(
        code(&[
            "detect",
            "--scene",
            s(&empty),
            "--weights",
            s(&f.dir.join("none.sdw"))
        ])
        .0,
        3
    );
}

fn write_truth(path: &Path, boxes: &[BoundingBox]) {
    let truth = GroundTruth::vessels(boxes.iter().copied());
    fs::write(path, serde_json::to_string(&truth).unwrap()).unwrap();
}

#[test]
fn eval_box_mode() {
    let dir = tempdir().unwrap();
    let boxes = [
        BoundingBox::new(10, 10, 10, 10),
        BoundingBox::new(40, 60, 8, 6),
    ];
    let truth = dir.path().join("t.json");
    write_truth(&truth, &boxes);
    let dets = dir.path().join("d.json");
    let exact: Vec<Value> = boxes
        .iter()
        .map(|b| serde_json::json!({"row": b.row, "col": b.col, "height": b.height, "width": b.width, "score": 0.9, "source": "cfar"}))
        .collect();
    fs::write(&dets, serde_json::to_string(&exact).unwrap()).unwrap();
    let out = dir.path().join("r.json");
    let r = ok(&[
        "eval",
        "--detections",
        s(&dets),
        "--truth",
        s(&truth),
        "--out",
        s(&out),
    ]);
    assert_eq!(
        (r["precision"].as_f64(), r["recall"].as_f64()),
        (Some(1.0), Some(1.0))
    );
    assert_eq!(read(&out), r);

    let shifted: Vec<Value> = boxes
        .iter()
        .map(|b| serde_json::json!({"row": b.row + 1, "col": b.col, "height": b.height, "width": b.width, "score": 0.9, "source": "cfar"}))
        .collect();
    fs::write(&dets, serde_json::to_string(&shifted).unwrap()).unwrap();
    let loose = ok(&[
        "eval",
        "--detections",
        s(&dets),
        "--truth",
        s(&truth),
        "--iou-min",
        "0.5",
    ]);
    let strict = ok(&[
        "eval",
        "--detections",
        s(&dets),
        "--truth",
        s(&truth),
        "--iou-min",
        "0.99",
    ]);
    assert!(strict["recall"].as_f64().unwrap() < loose["recall"].as_f64().unwrap());

    assert_eq!(
        code(&[
            "eval",
            "--mode",
            "chip",
            "--detections",
            s(&dets),
            "--truth",
            s(&truth)
        ])
        .0,
        2
    );
    assert_eq!(
        code(&[
            "eval",
            "--detections",
            s(&dets),
            "--weights",
            s(&dets),
            "--truth",
            s(&truth)
        ])
        .0,
        2
    );
    assert_eq!(code(&["eval", "--detections", s(&dets)]).0, 2);
}

#[test]
fn eval_chip_mode_and_detect_round_trip() {
    let f = fixture();
    let dir = tempdir().unwrap();
    let held = dir.path().join("held");
    ok(&[
        "synth",
        "--rows",
        "256",
        "--cols",
        "256",
        "--vessels",
        "12",
        "--seed",
        "999",
        "--out",
        s(&held),
    ]);
    let history = f.dir.join("net.sdw.history.json");
    let r = ok(&[
        "eval",
        "--mode",
        "chip",
        "--weights",
        s(&f.weights),
        "--scene",
        s(&held),
        "--history",
        s(&history),
    ]);
    let mut keys: Vec<_> = r.as_object().unwrap().keys().cloned().collect();
    keys.sort();
    assert_eq!(
        keys,
        [
            "accuracy_pct",
            "cohen_kappa",
            "counts",
            "detection_time_ms",
            "f1",
            "jaccard",
            "mode",
            "precision",
            "recall",
            "training_time_ms"
        ]
    );
    assert_eq!(r["mode"], "chip");
    assert!(r["training_time_ms"].as_f64().unwrap() > r["detection_time_ms"].as_f64().unwrap());

    let dets = dir.path().join("dets.json");
    ok(&[
        "detect",
        "--scene",
        s(&held),
        "--weights",
        s(&f.weights),
        "--out",
        s(&dets),
    ]);
    let r = ok(&[
        "eval",
        "--detections",
        s(&dets),
        "--truth",
        s(&dir.path().join("held.truth.json")),
    ]);
    assert_eq!(r["mode"], "box");
    let c = &r["counts"];
    assert_eq!(c["tp"].as_u64().unwrap() + c["fn"].as_u64().unwrap(), 12);
}
