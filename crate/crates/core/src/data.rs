//! Labeled datasets: synthetic generators, CSV I/O and stratified sampling.
//!
//! Random streams derived from one seed (ChaCha8, `set_stream`):
//! 0 generation, 1 ambient embedding, 2 train/test split, 3 subsampling.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::qf;
use crate::manifold::{ManifoldSpec, Point};

pub const STREAM_GENERATE: u64 = 0;
pub const STREAM_EMBED: u64 = 1;
pub const STREAM_SPLIT: u64 = 2;
pub const STREAM_SUBSAMPLE: u64 = 3;

/// Ambient dimension the 3D and spherical sets are embedded into.
pub const AMBIENT_DIM: usize = 100;

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    pub spec: ManifoldSpec,
    pub points: Vec<Point>,
    pub labels: Vec<usize>,
}

impl LabeledDataset {
    /// Checks lengths, point specs and that every class `0..C` is populated.
    pub fn new(name: impl Into<String>, spec: ManifoldSpec, points: Vec<Point>, labels: Vec<usize>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::LengthMismatch(points.len(), labels.len()));
        }
        if let Some(i) = points.iter().position(|p| p.spec() != spec) {
            return Err(Error::ShapeMismatch(format!(
                "point {i} lives on {}, dataset on {spec}",
                points[i].spec()
            )));
        }
        let ds = LabeledDataset { name: name.into(), spec, points, labels };
        let counts = ds.class_counts();
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::InvalidArgument(format!("class {c} has no samples")));
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Ambient (vectorized) dimension.
    pub fn dim(&self) -> usize {
        self.spec.vec_dim()
    }

    /// Rows selected by `indices`, in that order. Labels are kept as-is.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            name: self.name.clone(),
            spec: self.spec,
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Same values viewed as flat Euclidean vectors.
    pub fn as_euclidean(&self) -> LabeledDataset {
        LabeledDataset {
            name: self.name.clone(),
            spec: ManifoldSpec::Euclidean { dim: self.dim() },
            points: self.points.iter().map(Point::as_euclidean).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Per-feature z-scores of the flattened points, as a Euclidean dataset.
    pub fn standardized(&self) -> Result<LabeledDataset> {
        let mut x = self.feature_matrix();
        standardize_columns(&mut x);
        let spec = ManifoldSpec::Euclidean { dim: self.dim() };
        let points = x
            .row_iter()
            .map(|r| Point::from_slice(spec, r.transpose().as_slice()))
            .collect::<Result<Vec<_>>>()?;
        LabeledDataset::new(self.name.clone(), spec, points, self.labels.clone())
    }

    /// `N × dim` matrix of vectorized points.
    pub fn feature_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.len(), self.dim());
        for (i, p) in self.points.iter().enumerate() {
            m.set_row(i, &self.spec.vectorize(p.data()).transpose());
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    SyntheticHd,
    SwissRoll,
    SCurve,
    Moons,
    Circles,
    SphereHard,
    GreatCircle,
    SphereBands,
    Rings,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 9] = [
        DatasetKind::SyntheticHd,
        DatasetKind::SwissRoll,
        DatasetKind::SCurve,
        DatasetKind::Moons,
        DatasetKind::Circles,
        DatasetKind::SphereHard,
        DatasetKind::GreatCircle,
        DatasetKind::SphereBands,
        DatasetKind::Rings,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::SyntheticHd => "synthetic_hd",
            DatasetKind::SwissRoll => "swiss_roll",
            DatasetKind::SCurve => "s_curve",
            DatasetKind::Moons => "moons",
            DatasetKind::Circles => "circles",
            DatasetKind::SphereHard => "sphere_hard",
            DatasetKind::GreatCircle => "great_circle",
            DatasetKind::SphereBands => "sphere_bands",
            DatasetKind::Rings => "rings",
        }
    }

    /// `(n, d, C)`.
    pub fn shape(self) -> (usize, usize, usize) {
        match self {
            DatasetKind::SyntheticHd => (600, 50, 4),
            DatasetKind::SwissRoll => (1000, AMBIENT_DIM, 4),
            DatasetKind::SCurve => (1000, AMBIENT_DIM, 2),
            DatasetKind::Moons | DatasetKind::Circles => (600, AMBIENT_DIM, 2),
            DatasetKind::SphereHard | DatasetKind::GreatCircle => (600, AMBIENT_DIM, 4),
            DatasetKind::SphereBands => (600, AMBIENT_DIM, 3),
            DatasetKind::Rings => (400, AMBIENT_DIM, 2),
        }
    }

    pub fn is_spherical(self) -> bool {
        matches!(
            self,
            DatasetKind::SphereHard | DatasetKind::GreatCircle | DatasetKind::SphereBands | DatasetKind::Rings
        )
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        DatasetKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

/// Deterministic synthetic dataset for `kind`.
pub fn generate(kind: DatasetKind, seed: u64) -> Result<LabeledDataset> {
    let mut rng = rng_for(seed, STREAM_GENERATE);
    let (n, d, c) = kind.shape();
    let per_class = balanced_counts(n, c);
    let (raw, labels): (Vec<DVector<f64>>, Vec<usize>) = match kind {
        DatasetKind::SyntheticHd => return synthetic_hd(&per_class, &mut rng),
        DatasetKind::SwissRoll => binned(swiss_roll(n, &mut rng), c),
        DatasetKind::SCurve => binned(s_curve(n, &mut rng), c),
        DatasetKind::Moons => moons(&per_class, &mut rng),
        DatasetKind::Circles => circles(&per_class, &mut rng),
        DatasetKind::SphereHard => sphere_hard(&per_class, &mut rng),
        DatasetKind::GreatCircle => great_circle(&per_class, &mut rng),
        DatasetKind::SphereBands => sphere_bands(&per_class, &mut rng),
        DatasetKind::Rings => rings(&per_class, &mut rng),
    };

    let q = embedding_matrix(d, 3, seed)?;
    let spec = if kind.is_spherical() {
        ManifoldSpec::Sphere { dim: d }
    } else {
        ManifoldSpec::Euclidean { dim: d }
    };
    let points = raw
        .iter()
        .map(|v| {
            let mut y = &q * v;
            if kind.is_spherical() {
                y /= y.norm();
            }
            Point::new(spec, DMatrix::from_column_slice(d, 1, y.as_slice()))
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(kind.name(), spec, points, labels)
}

/// Seeded `d × k` matrix with orthonormal columns.
pub fn embedding_matrix(d: usize, k: usize, seed: u64) -> Result<DMatrix<f64>> {
    let mut rng = rng_for(seed, STREAM_EMBED);
    let g = DMatrix::from_fn(d, k, |_, _| normal(&mut rng));
    qf(&g)
}

fn balanced_counts(n: usize, c: usize) -> Vec<usize> {
    (0..c).map(|i| n / c + usize::from(i < n % c)).collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn vec3(x: f64, y: f64, z: f64) -> DVector<f64> {
    DVector::from_vec(vec![x, y, z])
}

/// Exp of an isotropic Gaussian tangent perturbation at unit vector `c`.
fn tangent_noise(c: &DVector<f64>, sigma: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let g = vec3(normal(rng), normal(rng), normal(rng)) * sigma;
    let v = &g - c * c.dot(&g);
    let t = v.norm();
    if t == 0.0 {
        return c.clone();
    }
    let y = c * t.cos() + v * (t.sin() / t);
    &y / y.norm()
}

fn fibonacci_sphere(n: usize) -> Vec<DVector<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - y * y).sqrt();
            let phi = golden * i as f64;
            vec3(r * phi.cos(), y, r * phi.sin())
        })
        .collect()
}

fn sphere_hard(per_class: &[usize], rng: &mut ChaCha8Rng) -> (Vec<DVector<f64>>, Vec<usize>) {
    let centers = fibonacci_sphere(per_class.len());
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for (c, (&m, center)) in per_class.iter().zip(&centers).enumerate() {
        for _ in 0..m {
            pts.push(tangent_noise(center, 0.25, rng));
            labels.push(c);
        }
    }
    (pts, labels)
}

/// Four 60° arcs on the equator centred at 0°, 90°, 180° and 270°.
fn great_circle(per_class: &[usize], rng: &mut ChaCha8Rng) -> (Vec<DVector<f64>>, Vec<usize>) {
    let half_width = PI / 6.0;
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for (c, &m) in per_class.iter().enumerate() {
        let centre = c as f64 * PI / 2.0;
        for _ in 0..m {
            let phi = centre + rng.random_range(-half_width..half_width);
            pts.push(tangent_noise(&vec3(phi.cos(), phi.sin(), 0.0), 0.08, rng));
            labels.push(c);
        }
    }
    (pts, labels)
}

fn sphere_bands(per_class: &[usize], rng: &mut ChaCha8Rng) -> (Vec<DVector<f64>>, Vec<usize>) {
    let heights = [-0.7, 0.0, 0.7];
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for (c, &m) in per_class.iter().enumerate() {
        for _ in 0..m {
            let z: f64 = (heights[c] + 0.1 * normal(rng)).clamp(-1.0, 1.0);
            let phi = rng.random_range(0.0..2.0 * PI);
            let r = (1.0 - z * z).sqrt();
            pts.push(vec3(r * phi.cos(), r * phi.sin(), z));
            labels.push(c);
        }
    }
    (pts, labels)
}

/// Great circles in the xy and xz planes.
fn rings(per_class: &[usize], rng: &mut ChaCha8Rng) -> (Vec<DVector<f64>>, Vec<usize>) {
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for (c, &m) in per_class.iter().enumerate() {
        for _ in 0..m {
            let t = rng.random_range(0.0..2.0 * PI);
            let on_ring = if c == 0 {
                vec3(t.cos(), t.sin(), 0.0)
            } else {
                vec3(t.cos(), 0.0, t.sin())
            };
            pts.push(tangent_noise(&on_ring, 0.1, rng));
            labels.push(c);
        }
    }
    (pts, labels)
}

fn jitter(v: DVector<f64>, sigma: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    v.map(|x| x + sigma * normal(rng))
}

/// Points tagged with their generative parameter.
fn swiss_roll(n: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, DVector<f64>)> {
    (0..n)
        .map(|_| {
            let t = 1.5 * PI * (1.0 + 2.0 * rng.random::<f64>());
            let h = 21.0 * rng.random::<f64>();
            (t, jitter(vec3(t * t.cos(), h, t * t.sin()), 0.5, rng))
        })
        .collect()
}

fn s_curve(n: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, DVector<f64>)> {
    (0..n)
        .map(|_| {
            let t = 3.0 * PI * (rng.random::<f64>() - 0.5);
            let h = 2.0 * rng.random::<f64>();
            (t, jitter(vec3(t.sin(), h, t.signum() * (t.cos() - 1.0)), 0.1, rng))
        })
        .collect()
}

/// Labels from `bins` equal-mass quantile bins of the generative parameter.
fn binned(tagged: Vec<(f64, DVector<f64>)>, bins: usize) -> (Vec<DVector<f64>>, Vec<usize>) {
    let n = tagged.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| tagged[a].0.total_cmp(&tagged[b].0).then(a.cmp(&b)));
    let mut labels = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = rank * bins / n;
    }
    // Emit grouped by class so first appearance matches label order.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by_key(|&i| labels[i]);
    let pts = idx.iter().map(|&i| tagged[i].1.clone()).collect();
    let labels = idx.iter().map(|&i| labels[i]).collect();
    (pts, labels)
}

fn moons(per_class: &[usize], rng: &mut ChaCha8Rng) -> (Vec<DVector<f64>>, Vec<usize>) {
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for (c, &m) in per_class.iter().enumerate() {
        for _ in 0..m {
            let t = rng.random_range(0.0..PI);
            let base = if c == 0 {
                vec3(t.cos(), t.sin(), 0.0)
            } else {
                vec3(1.0 - t.cos(), 0.5 - t.sin(), 0.0)
            };
            pts.push(jitter(base, 0.2, rng));
            labels.push(c);
        }
    }
    (pts, labels)
}

/// Concentric circles, inner radius scaled by 0.5.
fn circles(per_class: &[usize], rng: &mut ChaCha8Rng) -> (Vec<DVector<f64>>, Vec<usize>) {
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for (c, &m) in per_class.iter().enumerate() {
        let r = if c == 0 { 1.0 } else { 0.5 };
        for _ in 0..m {
            let t = rng.random_range(0.0..2.0 * PI);
            pts.push(jitter(vec3(r * t.cos(), r * t.sin(), 0.0), 0.1, rng));
            labels.push(c);
        }
    }
    (pts, labels)
}

/// 10 informative, 10 redundant and 30 noise features, standardized per column.
fn synthetic_hd(per_class: &[usize], rng: &mut ChaCha8Rng) -> Result<LabeledDataset> {
    const INFORMATIVE: usize = 10;
    const REDUNDANT: usize = 10;
    const NOISE: usize = 30;
    let d = INFORMATIVE + REDUNDANT + NOISE;
    let centers: Vec<DVector<f64>> = per_class
        .iter()
        .map(|_| DVector::from_fn(INFORMATIVE, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 }))
        .collect();
    let mix = DMatrix::from_fn(REDUNDANT, INFORMATIVE, |_, _| normal(rng));
    let n: usize = per_class.iter().sum();
    let mut x = DMatrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for (c, &m) in per_class.iter().enumerate() {
        for _ in 0..m {
            let inf = &centers[c] + DVector::from_fn(INFORMATIVE, |_, _| normal(rng));
            let red = &mix * &inf;
            for j in 0..INFORMATIVE {
                x[(row, j)] = inf[j];
            }
            for j in 0..REDUNDANT {
                x[(row, INFORMATIVE + j)] = red[j];
            }
            for j in 0..NOISE {
                x[(row, INFORMATIVE + REDUNDANT + j)] = normal(rng);
            }
            labels.push(c);
            row += 1;
        }
    }
    standardize_columns(&mut x);
    let spec = ManifoldSpec::Euclidean { dim: d };
    let points = (0..n)
        .map(|i| Point::from_slice(spec, x.row(i).transpose().as_slice()))
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(DatasetKind::SyntheticHd.name(), spec, points, labels)
}

/// Zero mean and unit population variance per column; constant columns are only centered.
fn standardize_columns(x: &mut DMatrix<f64>) {
    for j in 0..x.ncols() {
        let col = x.column(j);
        let mean = col.mean();
        let sd = col.variance().sqrt();
        let scale = if sd > 0.0 { 1.0 / sd } else { 1.0 };
        x.column_mut(j).apply(|v| *v = (*v - mean) * scale);
    }
}

/// `data.csv` → `data.spec.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("spec.json")
}

pub const LABEL_COLUMN: &str = "label";

/// Writes `x0..x{D-1},label` rows (row-major vectorization) plus the spec sidecar.
pub fn save_csv(data: &LabeledDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("x{j}")).collect();
    header.push(LABEL_COLUMN.to_string());
    w.write_record(&header)?;
    for (p, &l) in data.points.iter().zip(&data.labels) {
        let mut rec: Vec<String> = p.to_vec().iter().map(|v| format!("{v:?}")).collect();
        rec.push(l.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&data.spec)?)?;
    Ok(())
}

/// Numeric CSV with a header and one label column, as Euclidean points.
///
/// Labels are factorized to `0..C` in order of first appearance. Parse errors
/// report the 1-based file line and 0-based column.
pub fn load_csv(path: &Path, label_column: &str) -> Result<LabeledDataset> {
    let (features, labels, _) = read_table(path, label_column)?;
    let dim = features.first().map_or(0, Vec::len);
    let spec = ManifoldSpec::Euclidean { dim };
    let points = features
        .iter()
        .map(|f| Point::from_slice(spec, f))
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(dataset_name(path), spec, points, labels)
}

/// Like [`load_csv`] but uses the `.spec.json` sidecar when present, validating
/// every row as a point of that manifold.
pub fn load_dataset(path: &Path, label_column: &str) -> Result<LabeledDataset> {
    let sidecar = sidecar_path(path);
    if !sidecar.exists() {
        return load_csv(path, label_column);
    }
    let spec: ManifoldSpec = serde_json::from_str(&std::fs::read_to_string(&sidecar)?)?;
    load_with_spec(path, label_column, spec)
}

/// Reads rows as points of `spec`; each row must hold `spec.vec_dim()` features.
pub fn load_with_spec(path: &Path, label_column: &str, spec: ManifoldSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let (features, labels, _) = read_table(path, label_column)?;
    let points = features
        .iter()
        .enumerate()
        .map(|(i, f)| Point::from_slice(spec, f).map_err(|e| e.at(i)))
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(dataset_name(path), spec, points, labels)
}

/// Real benchmark datasets: canonical name and accepted file names.
pub const REAL_DATASETS: [(&str, &[&str]); 3] = [
    ("mnist", &["mnist.csv", "mnist_8x8.csv", "digits.csv"]),
    ("wine", &["wine.csv"]),
    ("cancer", &["cancer.csv", "breast_cancer.csv"]),
];

/// Loads whichever of [`REAL_DATASETS`] exist in `dir`, renamed to their
/// canonical names. Each file needs a [`LABEL_COLUMN`] column.
pub fn load_real_datasets(dir: &Path) -> Result<Vec<LabeledDataset>> {
    let mut out = Vec::new();
    for (name, files) in REAL_DATASETS {
        if let Some(path) = files.iter().map(|f| dir.join(f)).find(|p| p.is_file()) {
            let mut ds = load_csv(&path, LABEL_COLUMN)?;
            ds.name = name.to_string();
            out.push(ds);
        }
    }
    Ok(out)
}

fn dataset_name(path: &Path) -> String {
    path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}

type Table = (Vec<Vec<f64>>, Vec<usize>, Vec<String>);

fn read_table(path: &Path, label_column: &str) -> Result<Table> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| Error::MissingLabelColumn(label_column.to_string()))?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut names: Vec<String> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let mut row = Vec::with_capacity(rec.len().saturating_sub(1));
        for (col, cell) in rec.iter().enumerate() {
            if col == label_idx {
                continue;
            }
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row: line,
                col,
                msg: format!("not a number: {cell:?}"),
            })?;
            row.push(v);
        }
        let name = rec[label_idx].trim().to_string();
        let label = match names.iter().position(|n| *n == name) {
            Some(l) => l,
            None => {
                names.push(name);
                names.len() - 1
            }
        };
        features.push(row);
        labels.push(label);
    }
    if features.is_empty() {
        return Err(Error::InvalidArgument(format!("{} has no data rows", path.display())));
    }
    Ok((features, labels, names))
}

/// Per-class shuffle, then the first `round(train_frac · n_c)` of each class go
/// to train (at least one sample on each side). Index lists come back sorted.
pub fn stratified_split_indices(labels: &[usize], train_frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_frac}"
        )));
    }
    let mut rng = rng_for(seed, STREAM_SPLIT);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, mut members) in class_members(labels).into_iter().enumerate() {
        if members.len() < 2 {
            return Err(Error::ClassTooSmall { class: c, count: members.len() });
        }
        members.shuffle(&mut rng);
        let n_train = ((train_frac * members.len() as f64).round() as usize).clamp(1, members.len() - 1);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn stratified_split(data: &LabeledDataset, train_frac: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = stratified_split_indices(&data.labels, train_frac, seed)?;
    Ok((data.subset(&train), data.subset(&test)))
}

/// Stratified subsample down to at most `max` points; identity when already small enough.
pub fn stratified_subsample(data: &LabeledDataset, max: usize, seed: u64) -> LabeledDataset {
    if data.len() <= max {
        return data.clone();
    }
    let mut rng = rng_for(seed, STREAM_SUBSAMPLE);
    let frac = max as f64 / data.len() as f64;
    let mut keep = Vec::new();
    for mut members in class_members(&data.labels) {
        members.shuffle(&mut rng);
        let m = ((frac * members.len() as f64).floor() as usize).max(1);
        keep.extend_from_slice(&members[..m.min(members.len())]);
    }
    keep.sort_unstable();
    data.subset(&keep)
}

fn class_members(labels: &[usize]) -> Vec<Vec<usize>> {
    let c = labels.iter().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); c];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    members
}
