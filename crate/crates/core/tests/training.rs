use mlcraist::train::{train, Dataset, TrainConfig};
use mlcraist::{checkpoint, synth, Error, MlCraist, ModelConfig};

fn small() -> ModelConfig {
    ModelConfig {
        width: 8,
        n_scatb: 1,
        heads: 2,
        window: 4,
        ..ModelConfig::full(2)
    }
}

fn config(iters: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 2,
        total_iters: iters,
        patch_size: 16,
        base_lr: 1e-3,
        log_every: 1,
        seed: 11,
        ..TrainConfig::default()
    }
}

fn run(iters: u64) -> (MlCraist, Vec<String>, Vec<f64>) {
    let data = Dataset::from_images(synth::toy_set(3, 48, 2), 2).unwrap();
    let mut model = MlCraist::new(small(), 11).unwrap();
    let mut log = Vec::new();
    let report = train(&mut model, &data, &config(iters), |l| {
        log.push(l.to_string());
        Ok(())
    })
    .unwrap();
    (model, log, report.losses)
}

#[test]
fn short_runs_are_reproducible_and_learn() {
    let (a, log_a, losses) = run(60);
    let (b, log_b, _) = run(60);
    assert_eq!(log_a, log_b);
    assert_eq!(checkpoint::to_bytes(&a).unwrap(), checkpoint::to_bytes(&b).unwrap());
    assert_eq!(log_a.len(), 60);
    let head: f64 = losses[..15].iter().sum::<f64>() / 15.0;
    let tail: f64 = losses[45..].iter().sum::<f64>() / 15.0;
    assert!(tail < head, "{head} -> {tail}");
    assert!(losses.iter().all(|l| l.is_finite()));
}

#[test]
fn divergence_is_reported() {
    let data = Dataset::from_images(synth::toy_set(2, 32, 3), 2).unwrap();
    let mut model = MlCraist::new(small(), 1).unwrap();
    let cfg = TrainConfig {
        base_lr: 1e38,
        ..config(5)
    };
    let err = train(&mut model, &data, &cfg, |_| Ok(())).unwrap_err();
    assert!(matches!(err, Error::NonFinite(_)), "{err}");
}

#[test]
fn rejects_mismatched_data() {
    let data = Dataset::from_images(synth::toy_set(2, 32, 3), 3).unwrap();
    let mut model = MlCraist::new(small(), 1).unwrap();
    assert!(matches!(train(&mut model, &data, &config(1), |_| Ok(())), Err(Error::Config(_))));
    let data = Dataset::from_images(synth::toy_set(2, 32, 3), 2).unwrap();
    let cfg = TrainConfig { patch_size: 64, ..config(1) };
    assert!(matches!(train(&mut model, &data, &cfg, |_| Ok(())), Err(Error::Config(_))));
}
