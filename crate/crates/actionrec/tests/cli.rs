//! End-to-end runs of the command-line binary over temporary fixtures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use actionrec::descriptors::{read_features_csv, write_features_csv};
use actionrec::detector::read_scores_csv;
use actionrec::imaging::{save_ppm, ImageBuffer};
use actionrec::segmentation::read_label_pgm;
use actionrec::structmodel::{infer_exact, infer_greedy, ActionModel, ExampleMeasurements};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_actionrec"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("binary spawns");
    assert!(
        out.status.success(),
        "command failed\nstdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn run_err(cmd: &mut Command) -> String {
    let out = cmd.output().expect("binary spawns");
    assert!(!out.status.success(), "command unexpectedly succeeded");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn noise_ppm(path: &Path, seed: u64, base: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..48 * 48 * 3).map(|_| base + rng.random::<f64>() * 0.3).collect();
    let img = ImageBuffer::new(48, 48, 3, data).unwrap();
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    save_ppm(&img, path).unwrap();
}

#[test]
fn image_pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let images: Vec<PathBuf> = (0..3).map(|i| root.join("imgs").join(format!("img_{i}.ppm"))).collect();
    noise_ppm(&images[0], 10, 0.05);
    noise_ppm(&images[1], 11, 0.1);
    noise_ppm(&images[2], 12, 0.6);

    // segment each image
    let segs: Vec<PathBuf> = (0..3).map(|i| root.join(format!("seg_{i}.pgm"))).collect();
    for (img, seg) in images.iter().zip(&segs) {
        let stdout = run_ok(bin().args([
            "segment",
            "--input",
            img.to_str().unwrap(),
            "--out",
            seg.to_str().unwrap(),
        ]));
        assert!(stdout.contains("superpixels"));
        assert!(read_label_pgm(seg).unwrap().num_segments() >= 1);
    }

    // flag-driven and config-driven runs must agree byte for byte
    let cfg_path = root.join("seg.toml");
    fs::write(&cfg_path, "schema_version = 1\n[segmentation]\nsigma = 0.4\nk = 40.0\nmin_size = 20\n")
        .unwrap();
    let by_flags = root.join("by_flags.pgm");
    let by_config = root.join("by_config.pgm");
    run_ok(bin().args([
        "segment", "--input", images[0].to_str().unwrap(),
        "--sigma", "0.4", "--k", "40", "--min-size", "20",
        "--out", by_flags.to_str().unwrap(),
    ]));
    run_ok(bin().args([
        "segment", "--input", images[0].to_str().unwrap(),
        "--config", cfg_path.to_str().unwrap(),
        "--out", by_config.to_str().unwrap(),
    ]));
    assert_eq!(fs::read(&by_flags).unwrap(), fs::read(&by_config).unwrap());

    // codebook over the image directory
    let book_path = root.join("cb.json");
    let stdout = run_ok(bin().args([
        "codebook", "train",
        "--images", root.join("imgs").to_str().unwrap(),
        "--words", "8", "--seed", "1",
        "--out", book_path.to_str().unwrap(),
    ]));
    assert!(stdout.contains("8 words"));

    // features for a dark and a bright image
    let feats: Vec<PathBuf> = (0..3).map(|i| root.join(format!("feat_{i}.csv"))).collect();
    for i in [0usize, 2] {
        run_ok(bin().args([
            "features", "extract",
            "--image", images[i].to_str().unwrap(),
            "--seg", segs[i].to_str().unwrap(),
            "--codebook", book_path.to_str().unwrap(),
            "--out", feats[i].to_str().unwrap(),
        ]));
        let rows = read_features_csv(&feats[i]).unwrap();
        assert!(!rows.is_empty());
        assert!(rows.iter().all(|r| r.values.len() == 51 + 8));
    }

    // detector: train on brightness labels, then score the held-out image
    let dark = read_features_csv(&feats[0]).unwrap();
    let bright = read_features_csv(&feats[2]).unwrap();
    let labels: String = std::iter::repeat_n("dark\n", dark.len())
        .chain(std::iter::repeat_n("bright\n", bright.len()))
        .collect();
    let all: Vec<_> = dark.into_iter().chain(bright).collect();
    let all_path = root.join("all_features.csv");
    write_features_csv(&all, &all_path).unwrap();
    let labels_path = root.join("labels.csv");
    fs::write(&labels_path, labels).unwrap();
    let det_path = root.join("det.json");
    let stdout = run_ok(bin().args([
        "detector", "train",
        "--features", all_path.to_str().unwrap(),
        "--labels", labels_path.to_str().unwrap(),
        "--C", "1", "--seed", "2",
        "--out", det_path.to_str().unwrap(),
    ]));
    assert!(stdout.contains("2 classes"));

    run_ok(bin().args([
        "features", "extract",
        "--image", images[1].to_str().unwrap(),
        "--seg", segs[1].to_str().unwrap(),
        "--codebook", book_path.to_str().unwrap(),
        "--out", feats[1].to_str().unwrap(),
    ]));
    let scores_path = root.join("scores.csv");
    run_ok(bin().args([
        "detector", "score",
        "--features", feats[1].to_str().unwrap(),
        "--model", det_path.to_str().unwrap(),
        "--out", scores_path.to_str().unwrap(),
    ]));
    let scores = read_scores_csv(&scores_path).unwrap();
    assert_eq!(scores.len(), read_features_csv(&feats[1]).unwrap().len());
    assert!(scores.iter().all(|s| s.len() == 2));
}

#[test]
fn synthetic_corpus_to_inference_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let corpus = root.join("corpus");
    let stdout = run_ok(bin().args([
        "synth",
        "--k", "3", "--t-min", "2", "--t-max", "5", "--n", "24",
        "--noise", "0.1", "--seed", "3",
        "--out", corpus.to_str().unwrap(),
    ]));
    assert!(stdout.contains("24 examples"));
    let labels = fs::read_to_string(corpus.join("labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 24);
    assert_eq!(fs::read_to_string(corpus.join("latents.csv")).unwrap().lines().count(), 24);
    assert_eq!(read_scores_csv(corpus.join("scores/ex_00.csv")).unwrap()[0].len(), 3);

    // training twice with one seed writes identical model files
    let model_a = root.join("am_a.json");
    let model_b = root.join("am_b.json");
    for model in [&model_a, &model_b] {
        let stdout = run_ok(bin().args([
            "action", "train",
            "--scores", corpus.join("scores").to_str().unwrap(),
            "--labels", corpus.join("labels.csv").to_str().unwrap(),
            "--C", "1", "--seed", "4", "--epochs", "30", "--max-rounds", "3",
            "--out", model.to_str().unwrap(),
        ]));
        assert!(stdout.contains("rounds:"));
    }
    assert_eq!(fs::read(&model_a).unwrap(), fs::read(&model_b).unwrap());

    // printed inference must agree with the library on the same inputs
    let example = corpus.join("scores/ex_05.csv");
    let stdout = run_ok(bin().args([
        "action", "infer",
        "--scores", example.to_str().unwrap(),
        "--model", model_a.to_str().unwrap(),
    ]));
    let model = ActionModel::load(&model_a).unwrap();
    let x = ExampleMeasurements::new(read_scores_csv(&example).unwrap()).unwrap();
    let (y, h, score) = infer_greedy(&model, &x).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], format!("y\t{y}"));
    let states: Vec<String> = h.states().iter().map(usize::to_string).collect();
    assert_eq!(lines[1], format!("h\t{}", states.join(" ")));
    assert_eq!(lines[2], format!("score\t{score:.6}"));

    let stdout = run_ok(bin().args([
        "action", "infer",
        "--scores", example.to_str().unwrap(),
        "--model", model_a.to_str().unwrap(),
        "--exact",
    ]));
    let (ey, _, escore) = infer_exact(&model, &x).unwrap();
    assert!(stdout.starts_with(&format!("y\t{ey}")));
    assert!(stdout.trim_end().ends_with(&format!("score\t{escore:.6}")));
}

#[test]
fn protocol_run_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    // two brightness classes, three train + one test image each
    let data = root.join("data");
    for (class, base) in [("dark", 0.05), ("light", 0.6)] {
        for i in 0..4 {
            noise_ppm(&data.join(class).join(format!("img_{i}.ppm")), 600 + i, base);
        }
    }
    fs::write(data.join("test.txt"), "dark/img_3.ppm\nlight/img_3.ppm\n").unwrap();

    // shared codebook from a flat copy of two training images
    let flat = root.join("flat");
    fs::create_dir_all(&flat).unwrap();
    fs::copy(data.join("dark/img_0.ppm"), flat.join("a.ppm")).unwrap();
    fs::copy(data.join("light/img_0.ppm"), flat.join("b.ppm")).unwrap();
    let book_path = root.join("cb.json");
    run_ok(bin().args([
        "codebook", "train",
        "--images", flat.to_str().unwrap(),
        "--words", "8", "--seed", "1",
        "--out", book_path.to_str().unwrap(),
    ]));

    // detector from per-class features of one image each
    let mut all = Vec::new();
    let mut labels = String::new();
    for (class, img) in [("dark", "dark/img_0.ppm"), ("light", "light/img_0.ppm")] {
        let image = data.join(img);
        let seg_path = root.join(format!("{class}.pgm"));
        run_ok(bin().args([
            "segment",
            "--input", image.to_str().unwrap(),
            "--out", seg_path.to_str().unwrap(),
        ]));
        let feat_path = root.join(format!("{class}.csv"));
        run_ok(bin().args([
            "features", "extract",
            "--image", image.to_str().unwrap(),
            "--seg", seg_path.to_str().unwrap(),
            "--codebook", book_path.to_str().unwrap(),
            "--out", feat_path.to_str().unwrap(),
        ]));
        let rows = read_features_csv(&feat_path).unwrap();
        for _ in 0..rows.len() {
            labels.push_str(class);
            labels.push('\n');
        }
        all.extend(rows);
    }
    let all_path = root.join("all.csv");
    write_features_csv(&all, &all_path).unwrap();
    let labels_path = root.join("sp_labels.csv");
    fs::write(&labels_path, labels).unwrap();
    let det_path = root.join("det.json");
    run_ok(bin().args([
        "detector", "train",
        "--features", all_path.to_str().unwrap(),
        "--labels", labels_path.to_str().unwrap(),
        "--C", "1", "--seed", "2",
        "--out", det_path.to_str().unwrap(),
    ]));

    // full protocol, twice: byte-identical reports through the cache
    let report_path = root.join("report.tsv");
    let protocol = |out: &Path| {
        run_ok(bin().args([
            "protocol", "run",
            "--data", data.to_str().unwrap(),
            "--detector", det_path.to_str().unwrap(),
            "--codebook", book_path.to_str().unwrap(),
            "--workdir", root.join("cache").to_str().unwrap(),
            "--per-class-negatives", "2",
            "--seed", "9",
            "--out", out.to_str().unwrap(),
        ]))
    };
    let stdout = protocol(&report_path);
    assert!(stdout.contains("2 classes"));
    let text = fs::read_to_string(&report_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4, "header, two classes, means:\n{text}");
    assert!(lines[0].starts_with("class\t"));
    assert!(lines[1].starts_with("dark\t") && lines[1].ends_with("\t1\t1"));
    assert!(lines[2].starts_with("light\t") && lines[2].ends_with("\t1\t1"));
    assert!(lines[3].starts_with("MEAN\t"));

    let report_again = root.join("report2.tsv");
    protocol(&report_again);
    assert_eq!(fs::read(&report_path).unwrap(), fs::read(&report_again).unwrap());
}

#[test]
fn failure_modes_surface_as_errors() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    let bad_cfg = root.join("bad.toml");
    fs::write(&bad_cfg, "schema_version = 9\n").unwrap();
    let img = root.join("img.ppm");
    noise_ppm(&img, 1, 0.3);
    let stderr = run_err(bin().args([
        "segment",
        "--input", img.to_str().unwrap(),
        "--config", bad_cfg.to_str().unwrap(),
        "--out", root.join("seg.pgm").to_str().unwrap(),
    ]));
    assert!(stderr.contains("schema"), "stderr: {stderr}");

    let stderr = run_err(bin().args([
        "detector", "score",
        "--features", root.join("nope.csv").to_str().unwrap(),
        "--model", root.join("missing.json").to_str().unwrap(),
        "--out", root.join("s.csv").to_str().unwrap(),
    ]));
    assert!(stderr.contains("error"), "stderr: {stderr}");

    let stderr = run_err(bin().args([
        "synth",
        "--k", "3", "--t-min", "2", "--t-max", "4", "--n", "10",
        "--rule", "sometimes:1",
        "--out", root.join("c").to_str().unwrap(),
    ]));
    assert!(stderr.contains("rule"), "stderr: {stderr}");
}
