use std::path::Path;
use std::process::{Command, Output};

use mlcraist::cli::RunManifest;
use mlcraist::image_io::{load_rgb, save_rgb};
use mlcraist::ops::bicubic_resize;
use mlcraist::{checkpoint, synth};

fn mlcraist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlcraist"))
        .args(args)
        .env("MLCRAIST_DETERMINISTIC", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_toys(dir: &Path, count: usize, size: usize, seed: u64) {
    std::fs::create_dir_all(dir).unwrap();
    for (name, img) in synth::toy_set(count, size, seed) {
        save_rgb(&dir.join(format!("{name}.png")), &img).unwrap();
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_infer_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, run, sr, gt) = (tmp.path().join("data"), tmp.path().join("run"), tmp.path().join("sr"), tmp.path().join("gt"));
    write_toys(&data, 2, 32, 1);
    let train_args = [
        "train", "--scale", "2", "--width", "8", "--n-scatb", "1", "--heads", "2", "--window", "4", "--iters", "3",
        "--batch-size", "2", "--patch-size", "16", "--log-every", "1", "--data", s(&data), "--out", s(&run),
        "--val", s(&data),
    ];
    let o = mlcraist(&train_args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("(bicubic)"));

    let log = std::fs::read_to_string(run.join("loss.log")).unwrap();
    assert_eq!(log.lines().count(), 3);
    assert!(log.lines().all(|l| l.starts_with("iter ")));
    let manifest = RunManifest::read(&run.join("manifest.json")).unwrap();
    assert_eq!(manifest.model.width, 8);
    assert_eq!(manifest.train.total_iters, 3);
    assert_eq!(manifest.metrics.len(), 4);
    assert!(manifest.finished_at >= manifest.started_at);
    let model = checkpoint::load(&run.join("model.ckpt")).unwrap();
    assert_eq!(model.config, manifest.model);

    // Infer on downscaled copies, then score against the originals.
    let lr_dir = tmp.path().join("lr");
    std::fs::create_dir_all(&lr_dir).unwrap();
    write_toys(&gt, 2, 32, 5);
    for (name, img) in synth::toy_set(2, 32, 5) {
        save_rgb(&lr_dir.join(format!("{name}.png")), &mlcraist::train::degrade(&img, 2).unwrap()).unwrap();
    }
    let o = mlcraist(&["infer", "--checkpoint", s(&run.join("model.ckpt")), "--input", s(&lr_dir), "--out", s(&sr)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(load_rgb(&sr.join("toy_000.png")).unwrap().dims(), [1, 3, 32, 32]);

    let csv = tmp.path().join("results.csv");
    let o = mlcraist(&["eval", "--sr", s(&sr), "--gt", s(&gt), "--border", "2", "--results", s(&csv)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "name,psnr_y,ssim_y,epi");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("mean,"));

    // Same seed, same configuration: identical outputs.
    let run2 = tmp.path().join("run2");
    let mut again = train_args.to_vec();
    let at = again.iter().position(|a| *a == s(&run)).unwrap();
    again[at] = s(&run2);
    assert!(mlcraist(&again).status.success());
    assert_eq!(std::fs::read(run.join("loss.log")).unwrap(), std::fs::read(run2.join("loss.log")).unwrap());
    assert_eq!(std::fs::read(run.join("model.ckpt")).unwrap(), std::fs::read(run2.join("model.ckpt")).unwrap());

    // A manifest reproduces the run.
    let run3 = tmp.path().join("run3");
    let o = mlcraist(&["train", "--manifest", s(&run.join("manifest.json")), "--data", s(&data), "--out", s(&run3)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(run.join("model.ckpt")).unwrap(), std::fs::read(run3.join("model.ckpt")).unwrap());
}

#[test]
fn bicubic_baseline_matches_library() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    write_toys(&input, 1, 20, 2);
    let out = tmp.path().join("out");
    let o = mlcraist(&["infer", "--baseline", "bicubic", "--scale", "3", "--input", s(&input), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lr = load_rgb(&input.join("toy_000.png")).unwrap();
    let expected = mlcraist::image_io::quantize_tensor(&bicubic_resize(&lr, 60, 60).unwrap());
    assert_eq!(load_rgb(&out.join("toy_000.png")).unwrap(), expected);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |n: &str| tmp.path().join(n);

    // Unknown ablation and invalid shape are configuration errors.
    assert_eq!(mlcraist(&["inspect", "--ablation", "no-such"]).status.code(), Some(2));
    assert_eq!(mlcraist(&["inspect", "--width", "10", "--heads", "4"]).status.code(), Some(2));
    assert_eq!(mlcraist(&["inspect", "--scale", "5"]).status.code(), Some(2));

    // Missing files.
    let missing = p("nope.ckpt");
    assert_eq!(mlcraist(&["inspect", "--checkpoint", s(&missing)]).status.code(), Some(4));

    // Scale mismatch with a checkpoint.
    let model = mlcraist::MlCraist::new(
        mlcraist::ModelConfig { width: 8, n_scatb: 1, heads: 2, window: 4, ..mlcraist::ModelConfig::full(2) },
        0,
    )
    .unwrap();
    let ckpt = p("m.ckpt");
    checkpoint::save(&model, &ckpt).unwrap();
    write_toys(&p("in"), 1, 16, 0);
    let o = mlcraist(&["infer", "--checkpoint", s(&ckpt), "--scale", "3", "--input", s(&p("in")), "--out", s(&p("o"))]);
    assert_eq!(o.status.code(), Some(2));

    // Corrupt checkpoint.
    std::fs::write(p("bad.ckpt"), b"MLCRjunk").unwrap();
    assert_eq!(mlcraist(&["inspect", "--checkpoint", s(&p("bad.ckpt"))]).status.code(), Some(2));

    // Eval with no ground-truth counterpart.
    std::fs::create_dir_all(p("gt")).unwrap();
    let o = mlcraist(&["eval", "--sr", s(&p("in")), "--gt", s(&p("gt")), "--results", s(&p("r.csv"))]);
    assert_eq!(o.status.code(), Some(4));

    // Patch larger than the low-resolution images.
    let o = mlcraist(&[
        "train", "--scale", "2", "--width", "8", "--n-scatb", "1", "--heads", "2", "--window", "4", "--iters", "1",
        "--patch-size", "64", "--data", s(&p("in")), "--out", s(&p("run")),
    ]);
    assert_eq!(o.status.code(), Some(2));

    // Learning rate that overflows immediately.
    let o = mlcraist(&[
        "train", "--scale", "2", "--width", "8", "--n-scatb", "1", "--heads", "2", "--window", "4", "--iters", "3",
        "--batch-size", "1", "--patch-size", "8", "--lr", "1e38", "--data", s(&p("in")), "--out", s(&p("run")),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn inspect_reports_counts_and_deltas() {
    let o = mlcraist(&["inspect", "--scale", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("delta x2->x3 8655"), "{text}");
    assert!(text.contains("delta x3->x4 12117"), "{text}");
    let total = mlcraist::MlCraist::new(mlcraist::ModelConfig::full(2), 0).unwrap().param_count();
    assert!(text.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["total", &total.to_string()]));

    let lite = stdout(&mlcraist(&["inspect", "--lite", "--scale", "3"]));
    assert!(lite.contains("delta x3->x4 9093"), "{lite}");

    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("toy.cfg");
    std::fs::write(&cfg, "width = 16\nn_scatb = 2\nablation = no-cab\n").unwrap();
    let text = stdout(&mlcraist(&["inspect", "--config", s(&cfg), "--scale", "2"]));
    assert!(text.contains("width 16 blocks 2") && text.contains("cross-attention false"), "{text}");
}

#[test]
fn dwt_writes_bands_and_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let img = synth::toy_image(33, 4);
    let input = tmp.path().join("odd.png");
    save_rgb(&input, &img).unwrap();
    let out = tmp.path().join("bands");
    let o = mlcraist(&["dwt", "--input", s(&input), "--levels", "2", "--out", s(&out), "--verify"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("max reconstruction error"));
    assert_eq!(load_rgb(&out.join("level1_LL.png")).unwrap().dims(), [1, 3, 17, 17]);
    assert_eq!(load_rgb(&out.join("level2_HH.png")).unwrap().dims(), [1, 3, 9, 9]);

    // A flat image has empty detail bands, shown as mid-grey.
    let flat = tmp.path().join("flat.png");
    save_rgb(&flat, &mlcraist::Tensor::full([1, 3, 8, 8], 0.6)).unwrap();
    let out = tmp.path().join("flat_bands");
    assert!(mlcraist(&["dwt", "--input", s(&flat), "--levels", "1", "--out", s(&out)]).status.success());
    let hh = load_rgb(&out.join("level1_HH.png")).unwrap();
    assert!(hh.data().iter().all(|&v| v == 128.0 / 255.0));
}
