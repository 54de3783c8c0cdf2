//! Benchmark protocol: stratified 70/30 split, fit on train, embed both sides,
//! kNN accuracy on the test side. Graph methods embed train and test jointly.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    generate, load_real_datasets, stratified_split_indices, stratified_subsample, DatasetKind, LabeledDataset,
};
use crate::error::{Error, Result};
use crate::eval::{accuracy, knn_classify};
use crate::graph::{
    heat_weights, isomap_from_graph, knn_graph_connected, knn_graph_from_distances, laplacian_embed,
    nystrom_extend, pairwise_distances, GraphKind, NeighborGraph,
};
use crate::manifold::Point;
use crate::onpp::{default_rgd, onpp_fit};
use crate::pga::pga_fit;
use crate::rlda::rlda_fit;
use crate::rrpca::{rrpca_fit, RrpcaConfig};
use crate::rsvm::{rsvm_fit, RsvmConfig, SvmMode};
use crate::stats::MeanConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Pca,
    Lda,
    Isomap,
    RPga,
    RRpca,
    ROnpp,
    RLe,
    RLda,
    RIsomap,
    /// R-LE applied inductively: embed train only, extend test via Nyström.
    RLeNystrom,
    Rsvm,
}

impl Method {
    /// The nine methods of the standard grid.
    pub const GRID: [Method; 9] = [
        Method::Pca,
        Method::Lda,
        Method::Isomap,
        Method::RPga,
        Method::RRpca,
        Method::ROnpp,
        Method::RLe,
        Method::RLda,
        Method::RIsomap,
    ];

    pub const ALL: [Method; 11] = [
        Method::Pca,
        Method::Lda,
        Method::Isomap,
        Method::RPga,
        Method::RRpca,
        Method::ROnpp,
        Method::RLe,
        Method::RLda,
        Method::RIsomap,
        Method::RLeNystrom,
        Method::Rsvm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pca => "PCA",
            Method::Lda => "LDA",
            Method::Isomap => "Isomap",
            Method::RPga => "R-PGA",
            Method::RRpca => "R-RPCA",
            Method::ROnpp => "R-ONPP",
            Method::RLe => "R-LE",
            Method::RLda => "R-LDA",
            Method::RIsomap => "R-Isomap",
            Method::RLeNystrom => "R-LE-Nystrom",
            Method::Rsvm => "RSVM",
        }
    }

    /// Embeds train and test together rather than fitting on train alone.
    pub fn is_transductive(self) -> bool {
        matches!(self, Method::Isomap | Method::RLe | Method::RIsomap)
    }

    /// Euclidean baselines run the Riemannian code path on flattened data.
    pub fn riemannian_counterpart(self) -> Option<Method> {
        match self {
            Method::Pca => Some(Method::RPga),
            Method::Lda => Some(Method::RLda),
            Method::Isomap => Some(Method::RIsomap),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = |v: &str| v.to_ascii_lowercase().replace(['-', '_', ' '], "");
        Method::ALL
            .into_iter()
            .find(|m| key(m.name()) == key(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{s}'")))
    }
}

/// Benchmark hyperparameters; JSON keys match the field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// `n_c = min(target_dimension, d − 1)`; LDA uses `min(n_c, C − 1)`.
    pub target_dimension: usize,
    pub knn_classifier: usize,
    /// Graph neighbors `k = min(neighbors_max, max(neighbors_min, ⌊n/10⌋))`.
    pub neighbors_max: usize,
    pub neighbors_min: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub frechet_tol: f64,
    pub frechet_max_iter: usize,
    pub admm_iters: usize,
    pub max_samples: usize,
    /// Grow k until the neighbor graph is connected instead of failing the cell.
    pub grow_k: bool,
    pub svm_c: f64,
    /// Z-score the features of real (CSV) datasets before benchmarking.
    pub standardize_real: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            target_dimension: 3,
            knn_classifier: 5,
            neighbors_max: 10,
            neighbors_min: 3,
            train_fraction: 0.7,
            seed: 42,
            frechet_tol: 1e-6,
            frechet_max_iter: 100,
            admm_iters: 50,
            max_samples: 2000,
            grow_k: true,
            svm_c: 1.0,
            standardize_real: true,
        }
    }
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn mean(&self) -> MeanConfig {
        MeanConfig { tol: self.frechet_tol, max_iter: self.frechet_max_iter }
    }

    pub fn n_components(&self, d: usize) -> usize {
        self.target_dimension.min(d.saturating_sub(1)).max(1)
    }

    pub fn lda_components(&self, d: usize, classes: usize) -> usize {
        self.n_components(d).min(classes.saturating_sub(1)).max(1)
    }

    pub fn neighbors(&self, n: usize) -> usize {
        self.neighbors_max.min(self.neighbors_min.max(n / 10))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub dataset: String,
    pub method: Method,
    /// Percent; NaN when the cell failed.
    pub accuracy: f64,
    pub wall_ms: f64,
    pub n: usize,
    pub d: usize,
    #[serde(rename = "C")]
    pub classes: usize,
    /// Embedding dimension used.
    pub k: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchRow>,
}

impl BenchmarkReport {
    pub fn get(&self, dataset: &str, method: Method) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.dataset == dataset && r.method == method)
    }

    pub fn accuracy(&self, dataset: &str, method: Method) -> Option<f64> {
        self.get(dataset, method).map(|r| r.accuracy)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset,method,accuracy,wall_ms,n,d,C,k\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.1},{},{},{},{}",
                r.dataset,
                r.method,
                if r.accuracy.is_nan() { "NaN".to_string() } else { format!("{:.4}", r.accuracy) },
                r.wall_ms,
                r.n,
                r.d,
                r.classes,
                r.k
            );
        }
        out
    }

    /// `{dataset: {method: {accuracy, wall_ms, n, d, C, k, error}}}`; failed cells have `accuracy: null`.
    pub fn to_json(&self) -> Result<String> {
        let mut nested: BTreeMap<&str, BTreeMap<&str, serde_json::Value>> = BTreeMap::new();
        for r in &self.rows {
            let acc = if r.accuracy.is_nan() { serde_json::Value::Null } else { serde_json::json!(r.accuracy) };
            nested.entry(&r.dataset).or_default().insert(
                r.method.name(),
                serde_json::json!({
                    "accuracy": acc,
                    "wall_ms": r.wall_ms,
                    "n": r.n,
                    "d": r.d,
                    "C": r.classes,
                    "k": r.k,
                    "error": r.error,
                }),
            );
        }
        Ok(serde_json::to_string_pretty(&nested)?)
    }

    /// Methods as rows, datasets as columns; failed cells print `fail`.
    pub fn grid(&self) -> String {
        let mut datasets: Vec<&str> = Vec::new();
        let mut methods: Vec<Method> = Vec::new();
        for r in &self.rows {
            if !datasets.contains(&r.dataset.as_str()) {
                datasets.push(&r.dataset);
            }
            if !methods.contains(&r.method) {
                methods.push(r.method);
            }
        }
        let width = datasets.iter().map(|d| d.len()).max().unwrap_or(0).max(6);
        let mut out = format!("{:<14}", "method");
        for d in &datasets {
            let _ = write!(out, " {d:>width$}");
        }
        out.push('\n');
        for m in methods {
            let _ = write!(out, "{:<14}", m.name());
            for d in &datasets {
                let cell = match self.accuracy(d, m) {
                    Some(a) if a.is_nan() => "fail".to_string(),
                    Some(a) => format!("{a:.1}"),
                    None => String::new(),
                };
                let _ = write!(out, " {cell:>width$}");
            }
            out.push('\n');
        }
        out
    }

    /// True when at least one cell produced an accuracy.
    pub fn any_success(&self) -> bool {
        self.rows.iter().any(|r| !r.accuracy.is_nan())
    }
}

/// Every generated dataset kind, in grid order.
pub fn synthetic_datasets(seed: u64) -> Result<Vec<LabeledDataset>> {
    DatasetKind::ALL.iter().map(|&k| generate(k, seed)).collect()
}

/// Real datasets found in `dir`, standardized when the config asks for it.
pub fn real_datasets(dir: &Path, cfg: &BenchConfig) -> Result<Vec<LabeledDataset>> {
    let found = load_real_datasets(dir)?;
    if cfg.standardize_real {
        found.iter().map(LabeledDataset::standardized).collect()
    } else {
        Ok(found)
    }
}

/// Runs every (dataset, method) cell. Failures become NaN rows carrying the
/// error message; rows come back in dataset-major, method-minor order.
pub fn run_benchmark(datasets: &[LabeledDataset], methods: &[Method], cfg: &BenchConfig) -> BenchmarkReport {
    let prepared: Vec<Result<Prepared>> = datasets.par_iter().map(|ds| Prepared::new(ds, cfg)).collect();
    let cells: Vec<(usize, Method)> = (0..datasets.len())
        .flat_map(|i| methods.iter().map(move |&m| (i, m)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(i, method)| {
            let ds = &datasets[i];
            let start = Instant::now();
            let outcome = match &prepared[i] {
                Ok(p) => run_cell(p, method, cfg),
                Err(e) => Err(Error::InvalidArgument(format!("dataset preparation failed: {e}"))),
            };
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            let n = prepared[i].as_ref().map_or(ds.len(), |p| p.data.len());
            let (accuracy, k, error) = match outcome {
                Ok((acc, k)) => (acc, k, None),
                Err(e) => {
                    log::warn!("{} / {method}: {e}", ds.name);
                    (f64::NAN, component_count(method, ds, cfg), Some(e.to_string()))
                }
            };
            BenchRow {
                dataset: ds.name.clone(),
                method,
                accuracy,
                wall_ms,
                n,
                d: ds.dim(),
                classes: ds.n_classes(),
                k,
                error,
            }
        })
        .collect();
    BenchmarkReport { rows }
}

fn component_count(method: Method, ds: &LabeledDataset, cfg: &BenchConfig) -> usize {
    match method {
        Method::Lda | Method::RLda => cfg.lda_components(ds.dim(), ds.n_classes()),
        Method::Rsvm => 1,
        _ => cfg.n_components(ds.dim()),
    }
}

struct Prepared {
    data: LabeledDataset,
    euclidean: LabeledDataset,
    train: Vec<usize>,
    test: Vec<usize>,
}

impl Prepared {
    fn new(ds: &LabeledDataset, cfg: &BenchConfig) -> Result<Self> {
        let data = stratified_subsample(ds, cfg.max_samples, cfg.seed);
        let (train, test) = stratified_split_indices(&data.labels, cfg.train_fraction, cfg.seed)?;
        let euclidean = data.as_euclidean();
        Ok(Prepared { data, euclidean, train, test })
    }

    fn labels(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter().map(|&i| self.data.labels[i]).collect()
    }

    fn points(ds: &LabeledDataset, idx: &[usize]) -> Vec<Point> {
        idx.iter().map(|&i| ds.points[i].clone()).collect()
    }
}

fn run_cell(p: &Prepared, method: Method, cfg: &BenchConfig) -> Result<(f64, usize)> {
    let (ds, method) = match method.riemannian_counterpart() {
        Some(r) => (&p.euclidean, r),
        None => (&p.data, method),
    };
    let train_pts = Prepared::points(ds, &p.train);
    let test_pts = Prepared::points(ds, &p.test);
    let train_y = p.labels(&p.train);
    let test_y = p.labels(&p.test);
    let n_c = cfg.n_components(ds.dim());
    let mean = cfg.mean();

    if method == Method::Rsvm {
        if ds.n_classes() != 2 {
            return Err(Error::InvalidArgument("RSVM needs a binary dataset".into()));
        }
        let to_pm = |y: &[usize]| y.iter().map(|&l| if l == 1 { 1 } else { -1 }).collect::<Vec<i32>>();
        let svm_cfg = RsvmConfig {
            mode: SvmMode::GeodesicKernel { sigma: None },
            c_reg: cfg.svm_c,
            mean,
            ..RsvmConfig::default()
        };
        let model = rsvm_fit(&train_pts, &to_pm(&train_y), &svm_cfg)?;
        let pred: Vec<usize> = model
            .predict_all(&test_pts)?
            .into_iter()
            .map(|s| usize::from(s > 0))
            .collect();
        return Ok((accuracy(&pred, &test_y)?, 1));
    }

    let (train_x, test_x, used) = match method {
        Method::RPga => {
            let m = pga_fit(&train_pts, n_c, &mean)?;
            (m.transform(&train_pts)?, m.transform(&test_pts)?, n_c)
        }
        Method::RRpca => {
            let r = rrpca_fit(&train_pts, &RrpcaConfig { lambda: None, iters: cfg.admm_iters, mean })?;
            (r.transform(&train_pts, n_c)?, r.transform(&test_pts, n_c)?, n_c)
        }
        Method::ROnpp => {
            let k = cfg.neighbors(train_pts.len());
            let m = onpp_fit(&train_pts, n_c, k, &default_rgd(), &mean)?;
            (m.transform(&train_pts)?, m.transform(&test_pts)?, n_c)
        }
        Method::RLda => {
            let c = cfg.lda_components(ds.dim(), ds.n_classes());
            let m = rlda_fit(&train_pts, &train_y, c, &mean)?;
            (m.transform(&train_pts)?, m.transform(&test_pts)?, c)
        }
        Method::RLe | Method::RIsomap => {
            let all: Vec<Point> = train_pts.iter().chain(&test_pts).cloned().collect();
            let g = neighbor_graph(&all, cfg)?;
            let emb = if method == Method::RLe {
                laplacian_embed(&heat_weights(&g, None)?, n_c, false)?
            } else {
                isomap_from_graph(&g, n_c)?
            };
            let n_train = train_pts.len();
            let train_x = emb.coords.rows(0, n_train).into_owned();
            let test_x = emb.coords.rows(n_train, test_pts.len()).into_owned();
            (train_x, test_x, n_c)
        }
        Method::RLeNystrom => {
            let g = neighbor_graph(&train_pts, cfg)?;
            let heat = heat_weights(&g, None)?;
            let t = match heat.kind {
                GraphKind::Heat { t } => t,
                GraphKind::Distance => unreachable!("heat_weights returns a heat graph"),
            };
            let emb = laplacian_embed(&heat, n_c, false)?;
            let k = cfg.neighbors(train_pts.len());
            let mut test_x = DMatrix::zeros(test_pts.len(), n_c);
            for (i, x) in test_pts.iter().enumerate() {
                test_x.set_row(i, &nystrom_extend(&train_pts, &emb, x, k, t)?.transpose());
            }
            (emb.coords, test_x, n_c)
        }
        Method::Pca | Method::Lda | Method::Isomap | Method::Rsvm => unreachable!("mapped above"),
    };
    let pred = knn_classify(&train_x, &train_y, &test_x, cfg.knn_classifier)?;
    Ok((accuracy(&pred, &test_y)?, used))
}

fn neighbor_graph(points: &[Point], cfg: &BenchConfig) -> Result<NeighborGraph> {
    let dist = pairwise_distances(points)?;
    let k = cfg.neighbors(points.len());
    if cfg.grow_k {
        knn_graph_connected(&dist, k).map(|(g, _)| g)
    } else {
        let g = knn_graph_from_distances(&dist, k)?;
        g.ensure_connected()?;
        Ok(g)
    }
}
