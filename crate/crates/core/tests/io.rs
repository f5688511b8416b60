use fgsan_core::checkpoint::{
    load_checkpoint, save_checkpoint, CheckpointManifest, CHECKPOINT_VERSION,
};
use fgsan_core::graphdata::{export_features_csv, load_dataset, save_dataset, DatasetHeader};
use fgsan_core::model::{FgsanModel, ModelConfig, PreparedGraph, Variant};
use fgsan_core::numcore::Parameterized;
use fgsan_core::synth::{generate, SynthConfig};
use fgsan_core::Error;

fn small_config() -> SynthConfig {
    SynthConfig {
        n_regions: 6,
        feature_dim: 3,
        timesteps: 2,
        samples_per_class: 3,
        informative_regions: vec![1, 4],
        ..SynthConfig::default()
    }
}

const PREAMBLE: usize = 28;

fn record_len(c: &SynthConfig) -> usize {
    1 + 8 * (c.n_regions * c.feature_dim + c.timesteps * c.n_regions * c.n_regions)
}

#[test]
fn dataset_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.bin");
    let cfg = small_config();
    let graphs = generate(&cfg).unwrap();
    save_dataset(&path, &graphs, &cfg.header(&graphs)).unwrap();
    let loaded = load_dataset(&path).unwrap();
    assert_eq!(loaded.graphs, graphs);
    assert_eq!(loaded.header.planted_regions, Some(vec![1, 4]));
    assert_eq!(loaded.header.sample_count, 6);
}

#[test]
fn asymmetric_matrix_is_reported_with_its_sample_index() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.bin");
    let cfg = small_config();
    let graphs = generate(&cfg).unwrap();
    save_dataset(&path, &graphs, &cfg.header(&graphs)).unwrap();

    let mut bytes = std::fs::read(&path).unwrap();
    let n = cfg.n_regions;
    let target = PREAMBLE + 4 * record_len(&cfg) + 1 + 8 * (n * cfg.feature_dim + 1);
    bytes[target..target + 8].copy_from_slice(&0.123456f64.to_le_bytes());
    std::fs::write(&path, bytes).unwrap();

    match load_dataset(&path) {
        Err(Error::AsymmetricConnectivity {
            index, timestep, ..
        }) => {
            assert_eq!(index, 4);
            assert_eq!(timestep, 0);
        }
        other => panic!("expected an asymmetry error, got {other:?}"),
    }
}

#[test]
fn out_of_range_label_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.bin");
    let cfg = small_config();
    let graphs = generate(&cfg).unwrap();
    save_dataset(&path, &graphs, &cfg.header(&graphs)).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[PREAMBLE + 2 * record_len(&cfg)] = 3;
    std::fs::write(&path, bytes).unwrap();
    assert!(matches!(
        load_dataset(&path),
        Err(Error::InvalidLabel { index: 2, label: 3 })
    ));
}

#[test]
fn truncated_or_foreign_files_are_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.bin");
    let cfg = small_config();
    let graphs = generate(&cfg).unwrap();
    save_dataset(&path, &graphs, &cfg.header(&graphs)).unwrap();
    let bytes = std::fs::read(&path).unwrap();

    std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
    assert!(matches!(load_dataset(&path), Err(Error::Corrupt { .. })));

    let mut foreign = bytes.clone();
    foreign[..4].copy_from_slice(b"JUNK");
    std::fs::write(&path, foreign).unwrap();
    assert!(matches!(load_dataset(&path), Err(Error::Corrupt { .. })));
}

#[test]
fn sidecar_disagreement_is_a_shape_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.bin");
    let cfg = small_config();
    let graphs = generate(&cfg).unwrap();
    let mut header = DatasetHeader::describe(&graphs);
    save_dataset(&path, &graphs, &header).unwrap();
    header.n_regions = 7;
    std::fs::write(
        path.with_extension("json"),
        serde_json::to_string(&header).unwrap(),
    )
    .unwrap();
    assert!(matches!(load_dataset(&path), Err(Error::Shape(_))));
}

#[test]
fn invalid_graphs_are_refused_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.bin");
    let cfg = small_config();
    let mut graphs = generate(&cfg).unwrap();
    graphs[1].connectivity[1].set(0, 0, 0.5);
    let header = DatasetHeader::describe(&graphs);
    assert!(matches!(
        save_dataset(&path, &graphs, &header),
        Err(Error::InvalidConnectivity { index: 1, .. })
    ));
    assert!(!path.exists());
}

#[test]
fn feature_csv_has_one_row_per_region() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("features.csv");
    let graphs = generate(&small_config()).unwrap();
    export_features_csv(&path, &graphs).unwrap();
    let mut reader = csv::Reader::from_path(&path).unwrap();
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["sample", "label", "region", "f0", "f1", "f2"]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 36);
    assert_eq!(rows[7][2].parse::<usize>().unwrap(), 1);
    assert_eq!(
        rows[7][5].parse::<f64>().unwrap(),
        graphs[1].node_features.get(1, 2)
    );
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("checkpoint.bin");
    let cfg = small_config();
    let graphs = generate(&cfg).unwrap();
    let model_cfg = ModelConfig {
        hidden_dims: vec![4, 4],
        ..ModelConfig::default()
    };
    let mut model = FgsanModel::<f64>::init(&model_cfg, Variant::Full, 3, 6, 9).unwrap();
    model.selector.gate_logits.data_mut()[2] = 1.7;
    let manifest = CheckpointManifest {
        format_version: CHECKPOINT_VERSION,
        variant: Variant::Full,
        input_dim: 3,
        n_regions: 6,
        model: model_cfg.clone(),
        training: Some(serde_json::json!({"epochs": 3})),
    };
    save_checkpoint(&path, &model, &manifest).unwrap();
    let (loaded, loaded_manifest) = load_checkpoint::<f64>(&path).unwrap();
    assert_eq!(loaded_manifest, manifest);
    for ((a, x), (b, y)) in model.params().into_iter().zip(loaded.params()) {
        assert_eq!(a.name, b.name);
        assert_eq!(x, y);
    }
    let prepared = PreparedGraph::<f64>::prepare_all(&graphs, &model_cfg).unwrap();
    for g in &prepared {
        assert_eq!(
            model.predict_proba(g).unwrap(),
            loaded.predict_proba(g).unwrap()
        );
    }

    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
    assert!(matches!(
        load_checkpoint::<f64>(&path),
        Err(Error::Corrupt { .. })
    ));
}
