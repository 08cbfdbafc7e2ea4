use std::fs;
use std::path::Path;

use prune_lab::data::{load_csv_dataset, load_idx};
use prune_lab::harness::{
    aggregate_json, bench_matrix, save_metrics_csv, train_on, AggregateJson, METRICS_COLUMNS,
};
use prune_lab::{DatasetSpec, Error, LrSchedule, Network, RunConfig, ScheduleSpec, SyntheticKind};

fn idx_images(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
    let mut bytes = vec![0, 0, 8, 3];
    for v in [count, rows, cols] {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    bytes.extend_from_slice(pixels);
    bytes
}

fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut bytes = vec![0, 0, 8, 1];
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend_from_slice(labels);
    bytes
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, bytes).unwrap();
    p
}

#[test]
fn idx_fixture_loads_hand_computed_pixels() {
    let dir = tempfile::tempdir().unwrap();
    // Four 2x3 images.
    let pixels: Vec<u8> = vec![
        0, 255, 51, 102, 153, 204, //
        1, 2, 3, 4, 5, 6, //
        255, 255, 255, 0, 0, 0, //
        17, 34, 68, 136, 85, 170,
    ];
    let images = write(dir.path(), "img.idx", &idx_images(4, 2, 3, &pixels));
    let labels = write(dir.path(), "lbl.idx", &idx_labels(&[3, 0, 1, 3]));
    let ds = load_idx(&images, &labels).unwrap();

    assert_eq!(ds.features.shape(), (4, 6));
    assert_eq!(ds.labels, vec![3, 0, 1, 3]);
    assert_eq!(ds.class_count, 4);
    assert_eq!(ds.features.row(0), &[0.0, 1.0, 0.2, 0.4, 0.6, 0.8]);
    assert_eq!(ds.features.get(1, 0), 1.0 / 255.0);
    assert_eq!(ds.features.get(1, 5), 6.0 / 255.0);
    assert_eq!(ds.features.row(2), &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    assert_eq!(ds.features.get(3, 3), 136.0 / 255.0);

    let mut all: Vec<usize> = ds.train.iter().chain(&ds.eval).copied().collect();
    all.sort_unstable();
    assert_eq!(all, vec![0, 1, 2, 3]);
    assert_eq!(ds.eval.len(), 1);
}

#[test]
fn idx_errors_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let good_images = idx_images(2, 1, 2, &[1, 2, 3, 4]);
    let good_labels = idx_labels(&[0, 1]);

    let mut bad_magic = good_images.clone();
    bad_magic[3] = 9;
    let images = write(dir.path(), "a", &bad_magic);
    let labels = write(dir.path(), "b", &good_labels);
    let err = load_idx(&images, &labels).unwrap_err();
    assert!(matches!(err, Error::Format { .. }), "{err}");
    assert!(err.to_string().contains("magic"));

    let images = write(dir.path(), "c", &good_images[..18]);
    let err = load_idx(&images, &labels).unwrap_err();
    assert!(err.to_string().contains("truncated"), "{err}");

    let images = write(dir.path(), "d", &good_images);
    let labels = write(dir.path(), "e", &idx_labels(&[0, 1, 1]));
    let err = load_idx(&images, &labels).unwrap_err();
    assert!(err.to_string().contains("3 labels for 2 images"), "{err}");

    let err = load_idx(&dir.path().join("missing"), &labels).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}

#[test]
fn idx_dataset_trains_from_a_run_config() {
    let dir = tempfile::tempdir().unwrap();
    let n = 40u32;
    let pixels: Vec<u8> = (0..n * 4).map(|i| ((i * 37) % 256) as u8).collect();
    let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let images = write(dir.path(), "img", &idx_images(n, 2, 2, &pixels));
    let label_path = write(dir.path(), "lbl", &idx_labels(&labels));
    let cfg = RunConfig {
        dataset: DatasetSpec::Idx {
            images,
            labels: label_path,
            split_seed: 0,
        },
        layer_dims: vec![4, 8, 2],
        epochs: 2,
        batch_size: 8,
        ..RunConfig::spirals_default()
    };
    let ds = cfg.dataset.load().unwrap();
    let r = train_on(&cfg, &ds).unwrap();
    assert_eq!(r.records.len(), 2);
}

#[test]
fn csv_loader_maps_labels_in_order_of_appearance() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "pts.csv",
        b"x,kind,y\n0.5,cat,-1\n1.5, dog ,2e-3\n-2,cat,0\n3,bird,4\n",
    );
    let ds = load_csv_dataset(&path, "kind").unwrap();
    assert_eq!(ds.name, "pts");
    assert_eq!(ds.features.shape(), (4, 2));
    assert_eq!(ds.features.row(1), &[1.5, 0.002]);
    assert_eq!(ds.labels, vec![0, 1, 0, 2]);
    assert_eq!(ds.class_count, 3);

    let err = load_csv_dataset(&path, "label").unwrap_err();
    assert!(err.to_string().contains("no column named `label`"), "{err}");

    let bad = write(dir.path(), "bad.csv", b"x,label\n1,a\noops,b\n");
    let err = load_csv_dataset(&bad, "label").unwrap_err();
    let text = err.to_string();
    assert!(text.contains("row 3") && text.contains("oops"), "{text}");
}

fn tiny() -> RunConfig {
    RunConfig {
        dataset: DatasetSpec::Synthetic {
            kind: SyntheticKind::Gaussians { classes: 3 },
            n: 150,
            noise: 0.3,
            seed: 2,
        },
        layer_dims: vec![2, 8, 3],
        schedule: ScheduleSpec::one_cycle(0.0, 0.7),
        epochs: 3,
        batch_size: 16,
        lr: LrSchedule {
            lr_max: 0.05,
            ..LrSchedule::default()
        },
        ..RunConfig::spirals_default()
    }
}

#[test]
fn metrics_csv_parses_back_to_the_recorded_values() {
    let cfg = tiny();
    let ds = cfg.dataset.load().unwrap();
    let schedules = [ScheduleSpec::one_cycle(0.0, 0.7), ScheduleSpec::agp(0.0, 0.7)];
    let report = bench_matrix(&cfg, &ds, &schedules, &[0.7], &[0, 1]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("metrics.csv");
    save_metrics_csv(&path, &report.runs).unwrap();

    let mut rdr = csv::Reader::from_path(&path).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), METRICS_COLUMNS.to_vec());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4 * 3);
    let mut i = 0;
    for run in &report.runs {
        let result = run.result.as_ref().unwrap();
        for rec in &result.records {
            let row = &rows[i];
            assert_eq!(row.len(), 13);
            assert_eq!(&row[0], run.run_id);
            assert_eq!(&row[1], run.schedule.kind.to_string());
            assert_eq!(row[2].parse::<f64>().unwrap(), 0.7);
            if run.schedule.kind == prune_lab::ScheduleKind::OneCycle {
                assert_eq!(row[3].parse::<f64>().unwrap(), 14.0);
                assert_eq!(row[4].parse::<f64>().unwrap(), 5.0);
            } else {
                assert!(row[3].is_empty() && row[4].is_empty());
            }
            assert_eq!(row[5].parse::<u64>().unwrap(), run.seed);
            assert_eq!(row[6].parse::<usize>().unwrap(), rec.epoch);
            assert_eq!(row[7].parse::<usize>().unwrap(), rec.step);
            let floats: Vec<f64> = (8..13).map(|c| row[c].parse().unwrap()).collect();
            assert_eq!(
                floats,
                vec![rec.lr, rec.target_sparsity, rec.actual_sparsity, rec.train_loss, rec.eval_accuracy]
            );
            i += 1;
        }
    }

    let cells: Vec<AggregateJson> = report.cells.iter().map(AggregateJson::from).collect();
    let parsed: Vec<AggregateJson> = serde_json::from_str(&aggregate_json(&cells)).unwrap();
    assert_eq!(parsed, cells);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let cfg = tiny();
    let r = train_on(&cfg, &cfg.dataset.load().unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    r.network.save_json(&path).unwrap();
    let back = Network::load_json(&path).unwrap();
    assert_eq!(back, r.network);
    for (a, b) in back.layers.iter().zip(&r.network.layers) {
        for (x, y) in a.weight.as_slice().iter().zip(b.weight.as_slice()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    let text = fs::read_to_string(&path).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["dims"], serde_json::json!([2, 8, 3]));
    value["layers"][0]["bias"] = serde_json::json!([0.0]);
    fs::write(&path, value.to_string()).unwrap();
    assert!(matches!(Network::load_json(&path).unwrap_err(), Error::Shape(_)));

    fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert!(matches!(Network::load_json(&path).unwrap_err(), Error::Format { .. }));
}
