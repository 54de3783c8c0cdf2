use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use log::{info, warn};
use manred::data::{load_dataset, load_with_spec, save_csv};
use manred::graph::{
    heat_weights, isomap_from_graph, knn_graph_connected, knn_graph_from_distances, laplacian_embed,
    pairwise_distances, NeighborGraph,
};
use manred::linalg::singular_values;
use manred::onpp::{default_rgd, onpp_fit};
use manred::pga::pga_fit;
use manred::rlda::rlda_fit;
use manred::rrpca::{rrpca_fit, RrpcaConfig};
use manred::rsvm::{rsvm_fit, RsvmConfig, SvmDecision, SvmMode};
use manred::{
    frechet_mean, generate as generate_dataset, geodesic_dist, real_datasets, run_benchmark, synthetic_datasets,
    BenchConfig, DatasetKind, Error, LabeledDataset, MeanConfig, Method, Point,
};
use nalgebra::DMatrix;

use crate::spec_arg::parse_spec;
use crate::{BenchmarkArgs, GenerateArgs, GeodesicArgs, MeanArgs, ReduceArgs, ReduceMethod};

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    /// A core error tied to a file; keeps the inner exit code.
    File(PathBuf, Error),
    Usage(String),
    NoSuccessfulCell,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::File(path, e) => write!(f, "{}: {e}", path.display()),
            CliError::Usage(msg) => f.write_str(msg),
            CliError::NoSuccessfulCell => f.write_str("every benchmark cell failed"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) | CliError::File(_, e) => core_exit_code(e),
            CliError::Usage(_) => 2,
            CliError::NoSuccessfulCell => 1,
        }
    }
}

fn core_exit_code(e: &Error) -> u8 {
    match e {
        Error::UnknownKind(_) => 2,
        Error::Io(_) => 3,
        Error::Csv(c) if c.is_io_error() => 3,
        Error::DisconnectedGraph(_) => 4,
        Error::RgdNoConvergence { .. } | Error::MeanNoConvergence { .. } | Error::SvmNoConvergence { .. } => 5,
        Error::DomainAt { source, .. } => core_exit_code(source),
        _ => 1,
    }
}

type CliResult = Result<(), CliError>;

fn at(path: &Path) -> impl FnOnce(Error) -> CliError + '_ {
    move |e| CliError::File(path.to_path_buf(), e)
}

fn write_file(path: &Path, contents: &str) -> CliResult {
    fs::write(path, contents).map_err(|e| CliError::File(path.to_path_buf(), e.into()))
}

pub fn generate(a: &GenerateArgs) -> CliResult {
    let kind: DatasetKind = a.kind.parse().map_err(|e: Error| {
        let known: Vec<&str> = DatasetKind::ALL.iter().map(|k| k.name()).collect();
        CliError::Usage(format!("{e}; expected one of {}", known.join(", ")))
    })?;
    let data = generate_dataset(kind, a.seed)?;
    save_csv(&data, &a.out).map_err(at(&a.out))?;
    info!("wrote {} points of {} to {}", data.len(), kind, a.out.display());
    Ok(())
}

fn load(input: &Path, spec: Option<&str>, label_column: &str) -> Result<LabeledDataset, CliError> {
    Ok(match spec {
        Some(s) => load_with_spec(input, label_column, parse_spec(s)?).map_err(at(input))?,
        None => load_dataset(input, label_column).map_err(at(input))?,
    })
}

fn neighbor_graph(points: &[Point], k: usize, grow_k: bool) -> Result<NeighborGraph, Error> {
    let dist = pairwise_distances(points)?;
    if grow_k {
        let (g, used) = knn_graph_connected(&dist, k)?;
        if used != k {
            warn!("grew k from {k} to {used} to connect the neighbor graph");
        }
        Ok(g)
    } else {
        let g = knn_graph_from_distances(&dist, k)?;
        g.ensure_connected()?;
        Ok(g)
    }
}

struct Reduced {
    coords: DMatrix<f64>,
    model_json: String,
    spectrum: Vec<f64>,
    notes: Vec<(String, String)>,
}

pub fn reduce(a: &ReduceArgs) -> CliResult {
    let data = load(&a.input, a.spec.as_deref(), &a.label_column)?;
    let defaults = BenchConfig::default();
    let n = data.len();
    let d = data.dim();
    let mut components = a.components.unwrap_or_else(|| defaults.n_components(d));
    let k = a.k.unwrap_or_else(|| defaults.neighbors(n));
    if components == 0 {
        return Err(CliError::Usage("--components must be at least 1".into()));
    }
    let pts = &data.points;
    let mean = MeanConfig::default();
    let out = match a.method {
        ReduceMethod::Pga => {
            let model = pga_fit(pts, components, &mean)?;
            Reduced {
                coords: model.transform(pts)?,
                model_json: model.to_json()?,
                spectrum: model.eigenvalues.iter().copied().collect(),
                notes: vec![],
            }
        }
        ReduceMethod::Rrpca => {
            let res = rrpca_fit(pts, &RrpcaConfig::default())?;
            let sv = singular_values(&res.low_rank);
            Reduced {
                coords: res.transform(pts, components)?,
                model_json: serde_json::to_string_pretty(&res).map_err(Error::from)?,
                spectrum: sv.iter().take(components).copied().collect(),
                notes: vec![
                    ("lambda".into(), format!("{:.6e}", res.lambda)),
                    ("residual".into(), format!("{:.3e}", res.residual)),
                ],
            }
        }
        ReduceMethod::Ronpp => {
            let model = onpp_fit(pts, components, k, &default_rgd(), &mean)?;
            let trace = &model.objective_trace;
            Reduced {
                coords: model.transform(pts)?,
                model_json: model.to_json()?,
                spectrum: vec![],
                notes: vec![
                    ("objective".into(), format!("{:.6e}", trace.last().copied().unwrap_or(f64::NAN))),
                    ("iterations".into(), trace.len().to_string()),
                ],
            }
        }
        ReduceMethod::Rle | ReduceMethod::Risomap => {
            let g = neighbor_graph(pts, k, a.grow_k)?;
            let emb = if a.method == ReduceMethod::Rle {
                laplacian_embed(&heat_weights(&g, None)?, components, false)?
            } else {
                isomap_from_graph(&g, components)?
            };
            Reduced {
                coords: emb.coords.clone(),
                model_json: serde_json::to_string_pretty(&emb).map_err(Error::from)?,
                spectrum: emb.spectrum.iter().copied().collect(),
                notes: vec![("edges".into(), g.n_edges().to_string())],
            }
        }
        ReduceMethod::Rlda => {
            let classes = data.n_classes();
            if classes < 2 {
                return Err(CliError::Usage("rlda needs at least two classes".into()));
            }
            if components > classes - 1 {
                warn!("rlda yields at most C-1 = {} components; clamping {components}", classes - 1);
                components = classes - 1;
            }
            let model = rlda_fit(pts, &data.labels, components, &mean)?;
            Reduced {
                coords: model.transform(pts)?,
                model_json: model.to_json()?,
                spectrum: model.eigenvalues.iter().copied().collect(),
                notes: vec![],
            }
        }
        ReduceMethod::Rsvm => reduce_rsvm(&data)?,
    };
    components = out.coords.ncols();
    write_embedding(&a.out, &out.coords, &data.labels)?;
    let model_path = a.out.with_extension("model.json");
    write_file(&model_path, &out.model_json)?;

    println!("method: {}", method_name(a.method));
    println!("points: {n}");
    println!("dimension: {d}");
    println!("components: {components}");
    if !out.spectrum.is_empty() {
        let s: Vec<String> = out.spectrum.iter().map(|v| format!("{v:.6e}")).collect();
        println!("spectrum: {}", s.join(" "));
    }
    for (key, value) in &out.notes {
        println!("{key}: {value}");
    }
    Ok(())
}

fn method_name(m: ReduceMethod) -> String {
    m.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
}

/// Geodesic-kernel SVM; the "embedding" is the decision value of each point.
fn reduce_rsvm(data: &LabeledDataset) -> Result<Reduced, CliError> {
    if data.n_classes() != 2 {
        return Err(CliError::Usage(format!("rsvm needs a binary dataset, found {} classes", data.n_classes())));
    }
    let y: Vec<i32> = data.labels.iter().map(|&l| if l == 0 { -1 } else { 1 }).collect();
    let cfg = RsvmConfig { mode: SvmMode::GeodesicKernel { sigma: None }, ..RsvmConfig::default() };
    let model = rsvm_fit(&data.points, &y, &cfg)?;
    let values = data
        .points
        .iter()
        .map(|p| model.decision_function(p))
        .collect::<Result<Vec<_>, _>>()?;
    let correct = values.iter().zip(&y).filter(|(v, &l)| (**v >= 0.0) == (l > 0)).count();
    let support = model.dual.iter().filter(|&&a| a > 1e-8).count();
    let mut notes = vec![
        ("train_accuracy".into(), format!("{:.2}", 100.0 * correct as f64 / y.len() as f64)),
        ("support_vectors".into(), support.to_string()),
        ("kkt_gap".into(), format!("{:.3e}", model.kkt_gap)),
    ];
    if let SvmDecision::GeodesicKernel { sigma, gram_min_eig, .. } = &model.decision {
        notes.push(("sigma".into(), format!("{sigma:.6e}")));
        notes.push(("gram_min_eig".into(), format!("{gram_min_eig:.3e}")));
    }
    Ok(Reduced {
        coords: DMatrix::from_column_slice(values.len(), 1, &values),
        model_json: model.to_json()?,
        spectrum: vec![],
        notes,
    })
}

/// `y0..y{k-1},label` rows.
fn write_embedding(path: &Path, coords: &DMatrix<f64>, labels: &[usize]) -> Result<(), CliError> {
    let mut text: String = (0..coords.ncols()).map(|j| format!("y{j},")).collect();
    text.push_str("label\n");
    for (row, label) in coords.row_iter().zip(labels) {
        for v in row.iter() {
            text.push_str(&format!("{v:?},"));
        }
        text.push_str(&format!("{label}\n"));
    }
    write_file(path, &text)
}

fn csv_row(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

pub fn mean(a: &MeanArgs) -> CliResult {
    let data = load(&a.input, a.spec.as_deref(), &a.label_column)?;
    if data.is_empty() {
        return Err(CliError::Usage("input has no rows".into()));
    }
    let m = frechet_mean(&data.points, a.tol, a.max_iter)?;
    // Re-validate against the manifold so drift is reported, not printed.
    let m = Point::new(data.spec, m.data().clone())?;
    let header: Vec<String> = (0..data.dim()).map(|j| format!("x{j}")).collect();
    println!("{}", header.join(","));
    println!("{}", csv_row(&m.to_vec()));
    Ok(())
}

pub fn geodesic(a: &GeodesicArgs) -> CliResult {
    let spec = parse_spec(&a.spec)?;
    let parse = |s: &str| -> Result<Vec<f64>, CliError> {
        s.split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::Usage(format!("cannot parse coordinates '{s}'")))
    };
    let x = Point::from_slice(spec, &parse(&a.x)?)?;
    let y = Point::from_slice(spec, &parse(&a.y)?)?;
    println!("{:.12}", geodesic_dist(&x, &y)?);
    Ok(())
}

pub fn benchmark(a: &BenchmarkArgs) -> CliResult {
    let cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::File(path.clone(), e.into()))?;
            BenchConfig::from_json(&text).map_err(at(path))?
        }
        None => BenchConfig::default(),
    };
    let mut datasets = synthetic_datasets(cfg.seed)?;
    if let Some(dir) = &a.include_real {
        let real = real_datasets(dir, &cfg).map_err(at(dir))?;
        if real.is_empty() {
            warn!("no real datasets found in {}", dir.display());
        }
        datasets.extend(real);
    }
    let mut methods = Method::GRID.to_vec();
    if a.with_rsvm {
        methods.push(Method::Rsvm);
    }
    let report = run_benchmark(&datasets, &methods, &cfg);
    for row in report.rows.iter().filter(|r| r.error.is_some()) {
        warn!("{} / {}: {}", row.dataset, row.method, row.error.as_deref().unwrap_or_default());
    }
    write_file(&a.out, &report.to_csv())?;
    write_file(&a.out.with_extension("json"), &report.to_json()?)?;
    print!("{}", report.grid());
    if report.any_success() {
        Ok(())
    } else {
        Err(CliError::NoSuccessfulCell)
    }
}
