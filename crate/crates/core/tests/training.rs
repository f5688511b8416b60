use fgsan_core::graphdata::DynamicBrainGraph;
use fgsan_core::model::{ModelConfig, PreparedGraph, Variant};
use fgsan_core::synth::{generate, SynthConfig};
use fgsan_core::train::{cross_validate, holdout, stratified_folds, train_one, ExperimentConfig};
use fgsan_core::Error;

fn small_data(per_class: usize, seed: u64) -> Vec<DynamicBrainGraph> {
    generate(&SynthConfig {
        n_regions: 8,
        feature_dim: 4,
        timesteps: 2,
        samples_per_class: per_class,
        informative_regions: vec![1, 5],
        community_count: 2,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn quick(variant: Variant) -> ExperimentConfig {
    ExperimentConfig {
        epochs: 6,
        learning_rate: 0.01,
        folds: 2,
        repeats: 2,
        variant,
        model: ModelConfig {
            hidden_dims: vec![4, 4],
            ..ModelConfig::default()
        },
        ..ExperimentConfig::default()
    }
}

fn split(
    data: &[DynamicBrainGraph],
    config: &ExperimentConfig,
) -> (Vec<PreparedGraph<f64>>, Vec<PreparedGraph<f64>>) {
    let prepared = PreparedGraph::prepare_all(data, &config.model).unwrap();
    let (val, train): (Vec<_>, Vec<_>) = prepared
        .into_iter()
        .enumerate()
        .partition(|(i, _)| i % 4 < 2);
    (
        train.into_iter().map(|p| p.1).collect(),
        val.into_iter().map(|p| p.1).collect(),
    )
}

#[test]
fn identical_seed_gives_identical_history() {
    let data = small_data(6, 0);
    let config = quick(Variant::Full);
    let (train, val) = split(&data, &config);
    let (m1, h1) = train_one(&config, &train, &val, 17).unwrap();
    let (m2, h2) = train_one(&config, &train, &val, 17).unwrap();
    assert_eq!(h1, h2);
    assert_eq!(m1.selector.gate_logits, m2.selector.gate_logits);
    let (_, h3) = train_one(&config, &train, &val, 18).unwrap();
    assert_ne!(h1, h3);
}

#[test]
fn history_is_numbered_finite_and_kl_is_non_negative() {
    let data = small_data(6, 1);
    let config = quick(Variant::Full);
    let (train, val) = split(&data, &config);
    let (_, history) = train_one(&config, &train, &val, 3).unwrap();
    assert_eq!(history.records.len(), 6);
    for (i, r) in history.records.iter().enumerate() {
        assert_eq!(r.epoch, i);
        assert!(r.train_kl >= 0.0);
        assert!(r.train_loss.is_finite() && r.train_bce.is_finite() && r.val_acc.is_finite());
        assert!((r.train_loss - (r.train_bce + r.train_kl)).abs() < 1e-9);
    }
}

#[test]
fn no_selector_loss_is_pure_bce() {
    let data = small_data(6, 2);
    let config = quick(Variant::NoSelector);
    let (train, val) = split(&data, &config);
    let (model, history) = train_one(&config, &train, &val, 5).unwrap();
    for r in &history.records {
        assert_eq!(r.train_kl, 0.0);
        assert_eq!(r.train_loss, r.train_bce);
    }
    assert!(model.selector.gate_logits.data().iter().all(|&g| g == 0.0));
}

#[test]
fn no_spatial_keeps_the_table_at_zero() {
    let data = small_data(6, 2);
    let config = quick(Variant::NoSpatial);
    let (train, val) = split(&data, &config);
    let (model, _) = train_one(&config, &train, &val, 5).unwrap();
    assert!(model.encoder.spatial.bias.data().iter().all(|&b| b == 0.0));
    let (full, _) = train_one(&quick(Variant::Full), &train, &val, 5).unwrap();
    assert!(full.encoder.spatial.bias.data().iter().any(|&b| b != 0.0));
}

#[test]
fn divergence_reports_the_epoch() {
    let data = small_data(4, 0);
    let mut config = quick(Variant::Full);
    config.learning_rate = 1e300;
    config.weight_decay = 0.0;
    let (train, val) = split(&data, &config);
    match train_one(&config, &train, &val, 0) {
        Err(Error::Diverged { epoch }) => assert!(epoch >= 1 && epoch < 6, "epoch {epoch}"),
        other => panic!("expected divergence, got {:?}", other.map(|(_, h)| h)),
    }
}

#[test]
fn empty_splits_are_rejected() {
    let data = small_data(4, 0);
    let config = quick(Variant::Full);
    let (train, val) = split(&data, &config);
    assert!(train_one(&config, &[], &val, 0).is_err());
    assert!(train_one(&config, &train, &[], 0).is_err());
}

#[test]
fn sixteen_samples_in_eight_folds_give_one_per_class() {
    let labels: Vec<u8> = (0..16).map(|i| (i % 2) as u8).collect();
    let folds = stratified_folds(&labels, 8, 4).unwrap();
    for f in 0..8 {
        for class in [0u8, 1] {
            let count = (0..16)
                .filter(|&i| folds[i] == f && labels[i] == class)
                .count();
            assert_eq!(count, 1, "fold {f} class {class}");
        }
    }
}

#[test]
fn two_folds_of_four_samples_hold_two_each() {
    let folds = stratified_folds(&[0, 1, 1, 0], 2, 9).unwrap();
    for f in 0..2 {
        assert_eq!(folds.iter().filter(|&&x| x == f).count(), 2);
    }
}

#[test]
fn folds_partition_imbalanced_data_or_fail_cleanly() {
    let labels: Vec<u8> = (0..37).map(|i| u8::from(i % 3 == 0)).collect();
    for seed in 0..5 {
        let folds = stratified_folds(&labels, 4, seed).unwrap();
        assert_eq!(folds.len(), 37);
        assert!(folds.iter().all(|&f| f < 4));
        let sizes: Vec<usize> = (0..4)
            .map(|f| folds.iter().filter(|&&x| x == f).count())
            .collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
    assert!(matches!(
        stratified_folds(&[0, 0, 0, 1], 2, 0),
        Err(Error::MissingClass { class: 1, .. })
    ));
    assert!(stratified_folds(&[0, 1], 3, 0).is_err());
}

#[test]
fn cross_validation_aggregates_ordered_runs() {
    let data = small_data(8, 3);
    let config = quick(Variant::Full);
    let report = cross_validate::<f64>(&config, &data).unwrap();
    let order: Vec<(usize, usize)> = report.runs.iter().map(|r| (r.repeat, r.fold)).collect();
    assert_eq!(order, [(0, 0), (0, 1), (1, 0), (1, 1)]);
    let mean_acc = report.runs.iter().map(|r| r.metrics.acc).sum::<f64>() / 4.0;
    assert!((report.mean.acc - mean_acc).abs() < 1e-12);
    let seeds: std::collections::BTreeSet<u64> = report.runs.iter().map(|r| r.seed).collect();
    assert_eq!(seeds.len(), 4);
}

#[test]
fn cross_validation_does_not_depend_on_thread_count() {
    let data = small_data(8, 4);
    let config = quick(Variant::Full);
    let run_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| cross_validate::<f64>(&config, &data).unwrap())
    };
    let (a, b) = (run_with(1), run_with(3));
    assert_eq!(a.mean, b.mean);
    assert_eq!(a.std, b.std);
    for (x, y) in a.runs.iter().zip(&b.runs) {
        assert_eq!(x.history, y.history);
    }
}

#[test]
fn holdout_matches_the_corresponding_cross_validation_run() {
    let data = small_data(8, 5);
    let mut config = quick(Variant::Full);
    config.repeats = 1;
    let cv = cross_validate::<f64>(&config, &data).unwrap();
    let single = holdout::<f64>(&config, &data, 1).unwrap();
    assert_eq!(single.runs.len(), 1);
    assert_eq!(single.runs[0].history, cv.runs[1].history);
    assert!(holdout::<f64>(&config, &data, 2).is_err());
}

#[test]
fn f32_training_runs_end_to_end() {
    let data = small_data(6, 6);
    let config = quick(Variant::Full);
    let report = cross_validate::<f32>(&config, &data).unwrap();
    assert!(report
        .runs
        .iter()
        .all(|r| r.history.records.iter().all(|e| e.train_loss.is_finite())));
}
