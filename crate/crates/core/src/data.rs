//! Datasets: seeded synthetic 2-D tasks, IDX (MNIST-style) files and
//! headered numeric CSV. Every dataset carries an 80/20 train/eval split
//! drawn from a seeded shuffle.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor2D;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Number of full turns each spiral arm makes.
pub const SPIRAL_TURNS: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// Two interleaved spiral arms.
    Spirals,
    /// Isotropic blobs centred on a circle of radius 2.
    Gaussians { classes: usize },
    /// Two interleaving half circles.
    Moons,
}

impl SyntheticKind {
    pub fn name(&self) -> &'static str {
        match self {
            SyntheticKind::Spirals => "spirals",
            SyntheticKind::Gaussians { .. } => "gaussians",
            SyntheticKind::Moons => "moons",
        }
    }

    pub fn class_count(&self) -> usize {
        match *self {
            SyntheticKind::Gaussians { classes } => classes,
            _ => 2,
        }
    }

    /// Centroid of class `c` for [`SyntheticKind::Gaussians`].
    pub fn centroid(classes: usize, c: usize) -> [f64; 2] {
        let angle = 2.0 * PI * c as f64 / classes as f64;
        [2.0 * angle.cos(), 2.0 * angle.sin()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum Provenance {
    Synthetic {
        #[serde(flatten)]
        kind: SyntheticKind,
        n: usize,
        noise: f64,
        seed: u64,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
    Csv {
        path: PathBuf,
        label_column: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// `n x d`.
    pub features: Tensor2D,
    pub labels: Vec<usize>,
    pub class_count: usize,
    /// Row indices of the training split.
    pub train: Vec<usize>,
    /// Row indices of the held-out split.
    pub eval: Vec<usize>,
    pub provenance: Provenance,
}

fn split_indices(n: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let eval = order.split_off(n * 4 / 5);
    (order, eval)
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Replaces the train/eval partition with a fresh 80/20 split.
    pub fn resplit(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (self.train, self.eval) = split_indices(self.len(), &mut rng);
    }

    pub fn train_features(&self) -> Tensor2D {
        self.features.gather_rows(&self.train)
    }

    pub fn train_labels(&self) -> Vec<usize> {
        self.train.iter().map(|&i| self.labels[i]).collect()
    }

    pub fn eval_features(&self) -> Tensor2D {
        self.features.gather_rows(&self.eval)
    }

    pub fn eval_labels(&self) -> Vec<usize> {
        self.eval.iter().map(|&i| self.labels[i]).collect()
    }
}

pub fn gen_synthetic(kind: SyntheticKind, n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 10 {
        return Err(Error::domain("n", format!("{n} samples is below the minimum of 10")));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::domain("noise", format!("{noise} must be non-negative")));
    }
    let classes = kind.class_count();
    if classes < 2 {
        return Err(Error::domain("classes", "need at least two classes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_class = n.div_ceil(classes);
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        let u = ((i / classes) as f64 + 0.5) / per_class as f64;
        let [x, y] = match kind {
            SyntheticKind::Spirals => {
                let angle = 2.0 * PI * SPIRAL_TURNS * u + PI * c as f64;
                [u * angle.cos(), u * angle.sin()]
            }
            SyntheticKind::Gaussians { classes } => SyntheticKind::centroid(classes, c),
            SyntheticKind::Moons => {
                let angle = PI * u;
                if c == 0 {
                    [angle.cos(), angle.sin()]
                } else {
                    [1.0 - angle.cos(), 0.5 - angle.sin()]
                }
            }
        };
        let dx: f64 = StandardNormal.sample(&mut rng);
        let dy: f64 = StandardNormal.sample(&mut rng);
        data.push(x + noise * dx);
        data.push(y + noise * dy);
        labels.push(c);
    }
    let (train, eval) = split_indices(n, &mut rng);
    Ok(Dataset {
        name: kind.name().to_string(),
        features: Tensor2D::new(n, 2, data)?,
        labels,
        class_count: classes,
        train,
        eval,
        provenance: Provenance::Synthetic { kind, n, noise, seed },
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn format_error(path: &Path, offset: usize, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        location: format!("byte offset {offset}"),
        reason: reason.into(),
    }
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_error(path, bytes.len(), "file truncated inside the header"))
}

/// Loads an IDX image/label pair. Pixels are scaled to `[0, 1]`; the split
/// uses seed 0 (see [`Dataset::resplit`]).
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images = read_file(images_path)?;
    let labels = read_file(labels_path)?;

    let magic = be_u32(&images, 0, images_path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(format_error(images_path, 0, format!("bad magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")));
    }
    let count = be_u32(&images, 4, images_path)? as usize;
    let rows = be_u32(&images, 8, images_path)? as usize;
    let cols = be_u32(&images, 12, images_path)? as usize;
    let pixels = count * rows * cols;
    if images.len() < 16 + pixels {
        return Err(format_error(
            images_path,
            images.len(),
            format!("truncated: header promises {pixels} pixel bytes after offset 16"),
        ));
    }

    let magic = be_u32(&labels, 0, labels_path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(format_error(labels_path, 0, format!("bad magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}")));
    }
    let label_count = be_u32(&labels, 4, labels_path)? as usize;
    if label_count != count {
        return Err(format_error(
            labels_path,
            4,
            format!("{label_count} labels for {count} images"),
        ));
    }
    if labels.len() < 8 + count {
        return Err(format_error(
            labels_path,
            labels.len(),
            format!("truncated: header promises {count} label bytes after offset 8"),
        ));
    }

    let data = images[16..16 + pixels].iter().map(|&p| p as f64 / 255.0).collect();
    let labels: Vec<usize> = labels[8..8 + count].iter().map(|&l| l as usize).collect();
    let class_count = labels.iter().max().map_or(0, |m| m + 1);
    let mut ds = Dataset {
        name: "idx".to_string(),
        features: Tensor2D::new(count, rows * cols, data)?,
        labels,
        class_count,
        train: Vec::new(),
        eval: Vec::new(),
        provenance: Provenance::Idx {
            images: images_path.to_path_buf(),
            labels: labels_path.to_path_buf(),
        },
    };
    ds.resplit(0);
    Ok(ds)
}

/// Loads a headered numeric CSV. Every column except `label_column` is a
/// feature; labels are mapped to `0..C` in order of first appearance.
pub fn load_csv_dataset(path: &Path, label_column: &str) -> Result<Dataset> {
    let csv_error = |location: String, reason: String| Error::Format {
        path: path.to_path_buf(),
        location,
        reason,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => csv_error("header".into(), format!("{other:?}")),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| csv_error("header".into(), e.to_string()))?
        .clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| csv_error("header".into(), format!("no column named `{label_column}`")))?;

    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut classes: HashMap<String, usize> = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        // Row numbers count the header as row 1.
        let row = i + 2;
        let record = record.map_err(|e| csv_error(format!("row {row}"), e.to_string()))?;
        for (j, cell) in record.iter().enumerate() {
            if j == label_idx {
                let next = classes.len();
                labels.push(*classes.entry(cell.trim().to_string()).or_insert(next));
            } else {
                let v: f64 = cell.trim().parse().map_err(|_| {
                    csv_error(format!("row {row}"), format!("column `{}`: `{cell}` is not numeric", &headers[j]))
                })?;
                if !v.is_finite() {
                    return Err(csv_error(format!("row {row}"), format!("column `{}` is not finite", &headers[j])));
                }
                data.push(v);
            }
        }
    }
    let n = labels.len();
    let d = headers.len() - 1;
    let mut ds = Dataset {
        name: path
            .file_stem()
            .map_or_else(|| "csv".to_string(), |s| s.to_string_lossy().into_owned()),
        features: Tensor2D::new(n, d, data)?,
        labels,
        class_count: classes.len(),
        train: Vec::new(),
        eval: Vec::new(),
        provenance: Provenance::Csv {
            path: path.to_path_buf(),
            label_column: label_column.to_string(),
        },
    };
    ds.resplit(0);
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn gaussians_without_noise_sit_on_centroids() {
        let kind = SyntheticKind::Gaussians { classes: 3 };
        let ds = gen_synthetic(kind, 100, 0.0, 3).unwrap();
        let centroids: Vec<[f64; 2]> = (0..3).map(|c| SyntheticKind::centroid(3, c)).collect();
        let mut correct = 0;
        for &i in &ds.eval {
            let p = ds.features.row(i);
            let nearest = (0..3)
                .min_by(|&a, &b| {
                    let da = (p[0] - centroids[a][0]).powi(2) + (p[1] - centroids[a][1]).powi(2);
                    let db = (p[0] - centroids[b][0]).powi(2) + (p[1] - centroids[b][1]).powi(2);
                    da.total_cmp(&db)
                })
                .unwrap();
            assert_eq!(p, &centroids[ds.labels[i]]);
            correct += usize::from(nearest == ds.labels[i]);
        }
        assert_eq!(correct, ds.eval.len());
    }

    #[test]
    fn synthetic_is_deterministic() {
        for kind in [SyntheticKind::Spirals, SyntheticKind::Moons, SyntheticKind::Gaussians { classes: 4 }] {
            let a = gen_synthetic(kind, 200, 0.1, 9).unwrap();
            assert_eq!(a, gen_synthetic(kind, 200, 0.1, 9).unwrap());
            assert_ne!(a.features, gen_synthetic(kind, 200, 0.1, 10).unwrap().features);
        }
    }

    #[test]
    fn spirals_are_balanced_and_split() {
        let ds = gen_synthetic(SyntheticKind::Spirals, 2000, 0.05, 1).unwrap();
        let ones = ds.labels.iter().filter(|&&l| l == 1).count();
        assert!((ones as i64 - 1000).abs() <= 1);
        assert_eq!(ds.train.len(), 1600);
        assert_eq!(ds.eval.len(), 400);
        let mut all: Vec<usize> = ds.train.iter().chain(&ds.eval).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..2000).collect::<Vec<_>>());

        let odd = gen_synthetic(SyntheticKind::Spirals, 2001, 0.05, 1).unwrap();
        let ones = odd.labels.iter().filter(|&&l| l == 1).count();
        assert_eq!(ones, 1000);
    }

    #[test]
    fn synthetic_rejects_bad_args() {
        assert!(gen_synthetic(SyntheticKind::Moons, 9, 0.0, 0).is_err());
        assert!(gen_synthetic(SyntheticKind::Moons, 10, -1.0, 0).is_err());
        assert!(gen_synthetic(SyntheticKind::Gaussians { classes: 1 }, 10, 0.0, 0).is_err());
    }

    fn write(dir: &Path, name: &str, bytes: &[u8]) -> PathBuf {
        let p = dir.join(name);
        fs::File::create(&p).unwrap().write_all(bytes).unwrap();
        p
    }

    fn idx_images(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut b = IDX_IMAGES_MAGIC.to_be_bytes().to_vec();
        for v in [count, rows, cols] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend_from_slice(pixels);
        b
    }

    fn idx_labels(labels: &[u8]) -> Vec<u8> {
        let mut b = IDX_LABELS_MAGIC.to_be_bytes().to_vec();
        b.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        b.extend_from_slice(labels);
        b
    }

    #[test]
    fn idx_errors() {
        let dir = tempfile::tempdir().unwrap();
        let pixels: Vec<u8> = (0..16).collect();
        let good_images = write(dir.path(), "img", &idx_images(4, 2, 2, &pixels));
        let good_labels = write(dir.path(), "lbl", &idx_labels(&[0, 1, 2, 1]));

        let mut bad = idx_images(4, 2, 2, &pixels);
        bad[3] = 0x04;
        let bad_magic = write(dir.path(), "bad_magic", &bad);
        let err = load_idx(&bad_magic, &good_labels).unwrap_err();
        assert!(matches!(&err, Error::Format { location, .. } if location == "byte offset 0"), "{err}");

        let short = write(dir.path(), "short", &idx_images(4, 2, 2, &pixels[..10]));
        assert!(matches!(load_idx(&short, &good_labels), Err(Error::Format { .. })));

        let three = write(dir.path(), "three", &idx_labels(&[0, 1, 2]));
        let err = load_idx(&good_images, &three).unwrap_err();
        assert!(matches!(&err, Error::Format { location, .. } if location == "byte offset 4"), "{err}");

        let stub = write(dir.path(), "stub", &[0, 0]);
        assert!(matches!(load_idx(&stub, &good_labels), Err(Error::Format { .. })));
        assert!(matches!(load_idx(&dir.path().join("missing"), &good_labels), Err(Error::Io { .. })));
    }

    #[test]
    fn csv_loading() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "tiny.csv", b"x,label,y\n1.5,7,2\n-1,2,0.25\n3,7,4\n");
        let ds = load_csv_dataset(&p, "label").unwrap();
        assert_eq!(ds.features.shape(), (3, 2));
        assert_eq!(ds.features.row(1), &[-1.0, 0.25]);
        assert_eq!(ds.labels, vec![0, 1, 0]);
        assert_eq!(ds.class_count, 2);

        assert!(matches!(load_csv_dataset(&p, "class"), Err(Error::Format { .. })));

        let ragged = write(dir.path(), "ragged.csv", b"a,b,label\n1,2,0\n1,0\n");
        let err = load_csv_dataset(&ragged, "label").unwrap_err();
        assert!(matches!(err, Error::Format { .. }));

        let text = write(dir.path(), "text.csv", b"a,label\n1,0\nabc,1\n");
        let err = load_csv_dataset(&text, "label").unwrap_err();
        assert!(matches!(&err, Error::Format { location, .. } if location == "row 3"), "{err}");
    }
}
