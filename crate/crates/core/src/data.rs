//! Datasets, loaders and fidelity sampling.

use std::f64::consts::PI;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::field::FidelitySet;
use crate::graph::FeatureMatrix;

/// Features with ground-truth classes in `[0, n_classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl LabeledDataset {
    pub fn new(features: FeatureMatrix, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if labels.len() != features.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.nrows()
            )));
        }
        let counts = class_counts(&labels, n_classes)?;
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::invalid(format!("class {c} has no samples")));
        }
        Ok(LabeledDataset {
            features,
            labels,
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        class_counts(&self.labels, self.n_classes).expect("labels validated at construction")
    }

    /// Sub-dataset made of the given rows, in order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        LabeledDataset::new(self.features.select_rows(idx)?, labels, self.n_classes)
    }
}

fn class_counts(labels: &[usize], n_classes: usize) -> Result<Vec<usize>> {
    let mut counts = vec![0usize; n_classes];
    for (i, &c) in labels.iter().enumerate() {
        if c >= n_classes {
            return Err(Error::invalid(format!("label {c} at row {i} out of range for {n_classes} classes")));
        }
        counts[c] += 1;
    }
    Ok(counts)
}

/// Three half circles embedded in a high-dimensional space with isotropic
/// Gaussian noise on every coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct MoonsSpec {
    pub points_per_class: usize,
    /// Centers of the two upper unit half circles.
    pub top_centers: [(f64, f64); 2],
    pub top_radius: f64,
    pub bottom_center: (f64, f64),
    pub bottom_radius: f64,
    pub dimension: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for MoonsSpec {
    fn default() -> Self {
        MoonsSpec {
            points_per_class: 500,
            top_centers: [(0.0, 0.0), (3.0, 0.0)],
            top_radius: 1.0,
            bottom_center: (1.5, 0.4),
            bottom_radius: 1.5,
            dimension: 100,
            noise: 0.14,
            seed: 0,
        }
    }
}

/// Classes are contiguous blocks: upper-left, upper-right, lower circle.
pub fn generate_three_moons(spec: &MoonsSpec) -> Result<LabeledDataset> {
    if spec.points_per_class == 0 || spec.dimension < 2 {
        return Err(Error::invalid("three moons needs >= 1 point per class and dimension >= 2"));
    }
    if !(spec.noise >= 0.0) || !(spec.top_radius > 0.0) || !(spec.bottom_radius > 0.0) {
        return Err(Error::invalid("noise must be >= 0 and radii > 0"));
    }
    let normal = Normal::new(0.0, spec.noise).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let arcs = [
        (spec.top_centers[0], spec.top_radius, 0.0),
        (spec.top_centers[1], spec.top_radius, 0.0),
        (spec.bottom_center, spec.bottom_radius, PI),
    ];
    let n = 3 * spec.points_per_class;
    let mut data = Vec::with_capacity(n * spec.dimension);
    let mut labels = Vec::with_capacity(n);
    for (class, &((cx, cy), r, start)) in arcs.iter().enumerate() {
        for _ in 0..spec.points_per_class {
            let theta = start + PI * rng.random::<f64>();
            let mut p = vec![0.0; spec.dimension];
            p[0] = cx + r * theta.cos();
            p[1] = cy + r * theta.sin();
            for x in p.iter_mut() {
                *x += normal.sample(&mut rng);
            }
            data.extend(p);
            labels.push(class);
        }
    }
    LabeledDataset::new(FeatureMatrix::new(n, spec.dimension, data)?, labels, 3)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: e.to_string(),
    }
}

/// Headerless CSV of decimal floats, one sample per row.
pub fn load_features_csv(path: &Path) -> Result<FeatureMatrix> {
    let mut rdr = csv_reader(path)?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(rows + 1, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(rec.len()),
            Some(c) if c != rec.len() => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("expected {c} columns, found {}", rec.len()),
                })
            }
            _ => {}
        }
        for cell in rec.iter() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("not a number: {cell:?}"),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        msg: "no data rows".into(),
    })?;
    FeatureMatrix::new(rows, cols, data).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// One nonnegative class index per line. With `n_classes`, labels at or
/// above it are rejected.
pub fn load_labels_csv(path: &Path, n_classes: Option<usize>) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let cell = line.trim();
        if cell.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: k + 1,
            msg,
        };
        let c: usize = cell.parse().map_err(|_| err(format!("not a class index: {cell:?}")))?;
        if let Some(nc) = n_classes {
            if c >= nc {
                return Err(err(format!("label {c} out of range for {nc} classes")));
            }
        }
        labels.push(c);
    }
    if labels.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: "no labels".into(),
        });
    }
    Ok(labels)
}

/// Features and labels from paired CSV files. The class count is
/// `max(label) + 1`.
pub fn load_labeled_csv(features: &Path, labels: &Path) -> Result<LabeledDataset> {
    let f = load_features_csv(features)?;
    let l = load_labels_csv(labels, None)?;
    if f.nrows() != l.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} has {} rows but {} has {} labels",
            features.display(),
            f.nrows(),
            labels.display(),
            l.len()
        )));
    }
    let k = l.iter().max().map_or(0, |m| m + 1);
    LabeledDataset::new(f, l, k)
}

pub fn write_features_csv(features: &FeatureMatrix, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        for i in 0..features.nrows() {
            let row: Vec<String> = features.row(i).iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// One 0-based class index per line.
pub fn write_labels(labels: &[usize], path: &Path) -> Result<()> {
    let mut s = String::with_capacity(labels.len() * 3);
    for l in labels {
        s.push_str(&l.to_string());
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            msg: "truncated IDX header".into(),
        })
}

/// IDX3 image file: `(count, rows, cols, pixels)`.
pub fn read_idx_images(path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let bytes = read_all(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: format!("bad image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"),
        });
    }
    let count = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)? as usize;
    let cols = be_u32(&bytes, 12, path)? as usize;
    let need = 16 + count * rows * cols;
    if bytes.len() < need {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: format!("truncated payload: {} bytes, need {need}", bytes.len()),
        });
    }
    Ok((count, rows, cols, bytes[16..need].to_vec()))
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_all(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: format!("bad label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"),
        });
    }
    let count = be_u32(&bytes, 4, path)? as usize;
    if bytes.len() < 8 + count {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: format!("truncated payload: {} bytes, need {}", bytes.len(), 8 + count),
        });
    }
    Ok(bytes[8..8 + count].to_vec())
}

pub fn write_idx_images(path: &Path, rows: usize, cols: usize, pixels: &[u8]) -> Result<()> {
    let count = pixels.len() / (rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Flattened images scaled to `[0, 1]` and digit labels.
pub fn load_mnist_idx(images: &Path, labels: &Path) -> Result<LabeledDataset> {
    let (count, rows, cols, pixels) = read_idx_images(images)?;
    let lab = read_idx_labels(labels)?;
    if lab.len() != count {
        return Err(Error::DimensionMismatch(format!(
            "{count} images but {} labels",
            lab.len()
        )));
    }
    let data = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let features = FeatureMatrix::new(count, rows * cols, data)?;
    let labels: Vec<usize> = lab.iter().map(|&l| l as usize).collect();
    let k = labels.iter().max().map_or(0, |m| m + 1);
    LabeledDataset::new(features, labels, k)
}

/// Training and test sets of a directory holding the standard MNIST IDX
/// files, concatenated (training first). A directory with only one of the
/// two splits is accepted.
pub fn load_mnist_dir(dir: &Path) -> Result<LabeledDataset> {
    let parts = [
        ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
        ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
    ];
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut dim = 0;
    for (img, lab) in parts {
        let find = |name: &str| -> Option<std::path::PathBuf> {
            // the official archives are sometimes unpacked with '.' in place of '-'
            [name.to_string(), name.replace("-idx", ".idx")]
                .into_iter()
                .map(|n| dir.join(n))
                .find(|p| p.exists())
        };
        let (img_path, lab_path) = match (find(img), find(lab)) {
            (Some(i), Some(l)) => (i, l),
            (None, None) => continue,
            (Some(_), None) => return Err(Error::io(dir.join(lab), std::io::ErrorKind::NotFound.into())),
            (None, Some(_)) => return Err(Error::io(dir.join(img), std::io::ErrorKind::NotFound.into())),
        };
        let d = load_mnist_idx(&img_path, &lab_path)?;
        dim = d.features.ncols();
        data.extend_from_slice(d.features.as_slice());
        labels.extend(d.labels);
    }
    if labels.is_empty() {
        return Err(Error::io(dir.join(parts[0].0), std::io::ErrorKind::NotFound.into()));
    }
    let n = labels.len();
    let k = labels.iter().max().map_or(0, |m| m + 1);
    LabeledDataset::new(FeatureMatrix::new(n, dim, data)?, labels, k)
}

/// Splits `total` over `weights` proportionally with largest-remainder
/// rounding; ties go to the lower index.
fn largest_remainder(total: usize, weights: &[usize]) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|&w| total as f64 * w as f64 / sum as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut left = total - quota.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &c in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if quota[c] < weights[c] {
            quota[c] += 1;
            left -= 1;
        }
    }
    quota
}

/// Class-stratified random subset of `size` samples, kept in original order.
pub fn stratified_subset(data: &LabeledDataset, size: usize, seed: u64) -> Result<LabeledDataset> {
    if size == 0 || size > data.len() {
        return Err(Error::invalid(format!("subset size {size} not in [1, {}]", data.len())));
    }
    let quota = largest_remainder(size, &data.class_counts());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = Vec::with_capacity(size);
    for (c, &q) in quota.iter().enumerate() {
        let members: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == c).collect();
        idx.extend(sample(&mut rng, members.len(), q).into_iter().map(|p| members[p]));
    }
    idx.sort_unstable();
    data.select(&idx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FidelityCount {
    PerClass(usize),
    /// Fraction of the whole dataset, split across classes proportionally.
    Fraction(f64),
}

/// Uniformly samples labeled nodes without replacement within each class.
pub fn sample_fidelity(data: &LabeledDataset, count: FidelityCount, mu: f64, seed: u64) -> Result<FidelitySet> {
    sample_fidelity_from_labels(&data.labels, data.n_classes, count, mu, seed)
}

/// As [`sample_fidelity`] when only the ground-truth labels are at hand.
pub fn sample_fidelity_from_labels(labels: &[usize], n_classes: usize, count: FidelityCount, mu: f64, seed: u64) -> Result<FidelitySet> {
    if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::invalid(format!("label {l} out of range for {n_classes} classes")));
    }
    let mut sizes = vec![0usize; n_classes];
    for &l in labels {
        sizes[l] += 1;
    }
    let quota = match count {
        FidelityCount::PerClass(m) => {
            if let Some(c) = sizes.iter().position(|&s| s < m) {
                return Err(Error::invalid(format!(
                    "class {c} has {} samples, fewer than {m} requested",
                    sizes[c]
                )));
            }
            vec![m; n_classes]
        }
        FidelityCount::Fraction(f) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::invalid(format!("fidelity fraction must be in (0, 1], got {f}")));
            }
            let total = (f * labels.len() as f64).round() as usize;
            largest_remainder(total, &sizes)
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<(usize, usize)> = Vec::new();
    for (c, &q) in quota.iter().enumerate() {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        picked.extend(sample(&mut rng, members.len(), q).into_iter().map(|p| (members[p], c)));
    }
    picked.sort_unstable();
    let (indices, classes) = picked.into_iter().unzip();
    FidelitySet::new(labels.len(), n_classes, indices, classes, mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> LabeledDataset {
        let f = FeatureMatrix::new(6, 1, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        LabeledDataset::new(f, vec![0, 0, 0, 1, 1, 2], 3).unwrap()
    }

    #[test]
    fn default_moons_shape() {
        let d = generate_three_moons(&MoonsSpec::default()).unwrap();
        assert_eq!((d.features.nrows(), d.features.ncols()), (1500, 100));
        assert_eq!(d.class_counts(), vec![500, 500, 500]);
        for (i, &l) in d.labels.iter().enumerate() {
            assert_eq!(l, i / 500);
        }
    }

    #[test]
    fn noiseless_moons_lie_on_circles() {
        let spec = MoonsSpec {
            noise: 0.0,
            points_per_class: 50,
            ..Default::default()
        };
        let d = generate_three_moons(&spec).unwrap();
        for i in 0..d.len() {
            let row = d.features.row(i);
            let ((cx, cy), r) = match d.labels[i] {
                0 => (spec.top_centers[0], spec.top_radius),
                1 => (spec.top_centers[1], spec.top_radius),
                _ => (spec.bottom_center, spec.bottom_radius),
            };
            let dist = ((row[0] - cx).powi(2) + (row[1] - cy).powi(2)).sqrt();
            assert!((dist - r).abs() <= 1e-12);
            if d.labels[i] == 2 {
                assert!(row[1] <= cy + 1e-12);
            } else {
                assert!(row[1] >= cy - 1e-12);
            }
            assert!(row[2..].iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn largest_remainder_rounding() {
        assert_eq!(largest_remainder(10, &[5, 3, 2]), vec![5, 3, 2]);
        assert_eq!(largest_remainder(4, &[5, 3, 2]), vec![2, 1, 1]);
        assert_eq!(largest_remainder(3, &[1, 1, 1, 1]), vec![1, 1, 1, 0]);
    }

    #[test]
    fn fidelity_per_class() {
        let f = sample_fidelity(&tiny(), FidelityCount::PerClass(1), 5.0, 1).unwrap();
        assert_eq!(f.len(), 3);
        let mut cls = f.classes().to_vec();
        cls.sort();
        assert_eq!(cls, vec![0, 1, 2]);
        assert!(sample_fidelity(&tiny(), FidelityCount::PerClass(2), 5.0, 1).is_err());
    }

    #[test]
    fn fidelity_fraction() {
        let f = sample_fidelity(&tiny(), FidelityCount::Fraction(0.5), 5.0, 1).unwrap();
        let mut per = [0; 3];
        for &c in f.classes() {
            per[c] += 1;
        }
        assert_eq!(per, [2, 1, 0]);
        assert!(sample_fidelity(&tiny(), FidelityCount::Fraction(0.0), 5.0, 1).is_err());
    }

    #[test]
    fn stratified_subset_keeps_proportions() {
        let s = stratified_subset(&tiny(), 4, 3).unwrap();
        assert_eq!(s.class_counts(), vec![2, 1, 1]);
    }

    #[test]
    fn dataset_rejects_empty_class() {
        let f = FeatureMatrix::new(2, 1, vec![0.0, 1.0]).unwrap();
        assert!(LabeledDataset::new(f, vec![0, 2], 3).is_err());
    }
}
