//! Neighborhood graphs, Laplacian eigenmaps and Isomap on geodesic distances.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gen_eig, sym_eig};
use crate::manifold::{raw_dist, Point};

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const NULL_EIGEN_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphKind {
    Distance,
    Heat { t: f64 },
}

/// Symmetric weighted graph in adjacency-list form; lists are sorted by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborGraph {
    pub n: usize,
    pub kind: GraphKind,
    pub adj: Vec<Vec<(usize, f64)>>,
}

impl NeighborGraph {
    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.adj[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .ok()
            .map(|pos| self.adj[i][pos].1)
    }

    pub fn n_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.n, self.n);
        for (i, row) in self.adj.iter().enumerate() {
            for &(j, v) in row {
                w[(i, j)] = v;
            }
        }
        w
    }

    /// Sizes of connected components, largest first.
    pub fn component_sizes(&self) -> Vec<usize> {
        let mut seen = vec![false; self.n];
        let mut sizes = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut stack = vec![s];
            let mut size = 0;
            while let Some(u) = stack.pop() {
                size += 1;
                for &(v, _) in &self.adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            sizes.push(size);
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }

    pub fn ensure_connected(&self) -> Result<()> {
        let sizes = self.component_sizes();
        if sizes.len() > 1 {
            return Err(Error::DisconnectedGraph(sizes));
        }
        Ok(())
    }

    /// Median of the squared edge weights (distance graphs).
    pub fn median_sq_weight(&self) -> f64 {
        let mut sq: Vec<f64> = self
            .adj
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().filter(move |&&(j, _)| j > i).map(|&(_, d)| d * d))
            .collect();
        median(&mut sq)
    }
}

pub(crate) fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn check_same_spec(points: &[Point]) -> Result<()> {
    if let Some(first) = points.first() {
        if let Some(i) = points.iter().position(|p| p.spec() != first.spec()) {
            return Err(Error::ShapeMismatch(format!(
                "point {i} lives on {}, expected {}",
                points[i].spec(),
                first.spec()
            )));
        }
    }
    Ok(())
}

/// Dense symmetric matrix of geodesic distances.
pub fn pairwise_distances(points: &[Point]) -> Result<DMatrix<f64>> {
    check_same_spec(points)?;
    let n = points.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let spec = points[i].spec();
            ((i + 1)..n)
                .map(|j| raw_dist(spec, points[i].data(), points[j].data()).map_err(|e| e.at(j)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut d = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    Ok(d)
}

/// Indices of the `k` nearest columns of row `i`, ordered by (distance, index).
pub(crate) fn nearest(dist: &DMatrix<f64>, i: usize, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dist.ncols()).filter(|&j| j != i).collect();
    order.sort_by(|&a, &b| dist[(i, a)].total_cmp(&dist[(i, b)]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Union-symmetrized kNN graph from a precomputed distance matrix.
pub fn knn_graph_from_distances(dist: &DMatrix<f64>, k: usize) -> Result<NeighborGraph> {
    let n = dist.nrows();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!("need 1 <= k < N, got k={k}, N={n}")));
    }
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in nearest(dist, i, k) {
            adj[i].push((j, dist[(i, j)]));
            adj[j].push((i, dist[(i, j)]));
        }
    }
    for row in &mut adj {
        row.sort_by_key(|&(j, _)| j);
        row.dedup_by_key(|&mut (j, _)| j);
    }
    Ok(NeighborGraph { n, kind: GraphKind::Distance, adj })
}

/// Edge `(i, j)` iff `j ∈ kNN(i)` or `i ∈ kNN(j)`, weighted by geodesic distance.
pub fn knn_graph(points: &[Point], k: usize) -> Result<NeighborGraph> {
    knn_graph_from_distances(&pairwise_distances(points)?, k)
}

/// Smallest `k' ≥ k` whose kNN graph is connected.
pub fn knn_graph_connected(dist: &DMatrix<f64>, k: usize) -> Result<(NeighborGraph, usize)> {
    let n = dist.nrows();
    let mut k = k;
    loop {
        let g = knn_graph_from_distances(dist, k)?;
        if g.component_sizes().len() == 1 || k + 1 >= n {
            g.ensure_connected()?;
            return Ok((g, k));
        }
        log::info!("kNN graph with k={k} is disconnected; retrying with k={}", k + 1);
        k += 1;
    }
}

/// `exp(−d²/t)` on every edge; `t` defaults to the median squared edge length.
pub fn heat_weights(g: &NeighborGraph, t: Option<f64>) -> Result<NeighborGraph> {
    if g.kind != GraphKind::Distance {
        return Err(Error::InvalidArgument("heat weights need a distance graph".into()));
    }
    let t = match t {
        Some(t) => t,
        None => {
            let m = g.median_sq_weight();
            if m > 0.0 {
                m
            } else {
                1.0
            }
        }
    };
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("heat scale must be positive, got {t}")));
    }
    let adj = g
        .adj
        .iter()
        .map(|row| row.iter().map(|&(j, d)| (j, (-d * d / t).exp())).collect())
        .collect();
    Ok(NeighborGraph { n: g.n, kind: GraphKind::Heat { t }, adj })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedMethod {
    LaplacianEigenmaps,
    NormalizedLaplacian,
    Isomap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingResult {
    /// `N × d_out`.
    #[serde(with = "crate::serde_mat::matrix")]
    pub coords: DMatrix<f64>,
    /// Ascending for Laplacian methods, descending for Isomap.
    #[serde(with = "crate::serde_mat::vector")]
    pub spectrum: DVector<f64>,
    pub method: EmbedMethod,
}

impl EmbeddingResult {
    /// CSV with header `y0,y1,...`.
    pub fn to_csv(&self) -> String {
        let mut out = (0..self.coords.ncols())
            .map(|j| format!("y{j}"))
            .collect::<Vec<_>>()
            .join(",");
        out.push('\n');
        for row in self.coords.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Generalized eigenvectors of `(D − W, D)` for the `d_out` smallest nonzero
/// eigenvalues, so that `YᵀDY = I`. With `normalized`, eigenvectors of
/// `I − D^{-1/2} W D^{-1/2}` are returned instead.
pub fn laplacian_embed(g: &NeighborGraph, d_out: usize, normalized: bool) -> Result<EmbeddingResult> {
    if !matches!(g.kind, GraphKind::Heat { .. }) {
        return Err(Error::InvalidArgument("Laplacian embedding needs heat weights".into()));
    }
    if d_out == 0 || d_out >= g.n {
        return Err(Error::InvalidArgument(format!("need 1 <= d_out < N, got {d_out}")));
    }
    g.ensure_connected()?;
    let w = g.to_dense();
    let deg = DVector::from_iterator(g.n, w.row_iter().map(|r| r.sum()));
    let (values, vectors) = if normalized {
        let s = deg.map(|d| 1.0 / d.sqrt());
        let mut l = -&w;
        for i in 0..g.n {
            for j in 0..g.n {
                l[(i, j)] *= s[i] * s[j];
            }
            l[(i, i)] += 1.0;
        }
        let e = sym_eig(&l)?;
        (e.values, e.vectors)
    } else {
        let mut l = -&w;
        for i in 0..g.n {
            l[(i, i)] += deg[i];
        }
        let e = gen_eig(&l, &DMatrix::from_diagonal(&deg))?;
        (e.values, e.vectors)
    };
    // Values arrive descending; walk from the bottom.
    let cutoff = NULL_EIGEN_RTOL * values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let chosen: Vec<usize> = (0..values.len()).rev().filter(|&i| values[i] >= cutoff).take(d_out).collect();
    if chosen.len() < d_out {
        return Err(Error::InvalidArgument(format!(
            "only {} nonzero Laplacian eigenvalues available",
            chosen.len()
        )));
    }
    let coords = DMatrix::from_fn(g.n, d_out, |i, c| vectors[(i, chosen[c])]);
    let spectrum = DVector::from_iterator(d_out, chosen.iter().map(|&i| values[i]));
    let method = if normalized { EmbedMethod::NormalizedLaplacian } else { EmbedMethod::LaplacianEigenmaps };
    Ok(EmbeddingResult { coords, spectrum, method })
}

/// Heat-weighted average of the embeddings of `x_new`'s `k` nearest training points.
pub fn nystrom_extend(train: &[Point], model: &EmbeddingResult, x_new: &Point, k: usize, t: f64) -> Result<DVector<f64>> {
    if train.len() != model.coords.nrows() {
        return Err(Error::LengthMismatch(train.len(), model.coords.nrows()));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("heat scale must be positive, got {t}")));
    }
    let spec = x_new.spec();
    let mut d: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(j, p)| {
            if p.spec() != spec {
                return Err(Error::ShapeMismatch(format!("training point {j} lives on {}", p.spec())));
            }
            raw_dist(spec, x_new.data(), p.data()).map(|v| (v, j))
        })
        .collect::<Result<_>>()?;
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.truncate(k.max(1));
    let mut acc = DVector::zeros(model.coords.ncols());
    let mut total = 0.0;
    for &(dist, j) in &d {
        let w = (-dist * dist / t).exp();
        acc += model.coords.row(j).transpose() * w;
        total += w;
    }
    if total == 0.0 {
        return Err(Error::NoNeighbors);
    }
    Ok(acc / total)
}

/// Mantissa bits available to path lengths; sums of two lengths stay below 2^53.
const PATH_BITS: i32 = 52;

/// Dijkstra over integer edge lengths. Integer sums are associative, so the
/// result is an exact shortest-path metric.
fn dijkstra(adj: &[Vec<(usize, u64)>], source: usize) -> Vec<u64> {
    let mut dist = vec![u64::MAX; adj.len()];
    dist[source] = 0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((0u64, source)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((nd, v)));
            }
        }
    }
    dist
}

/// All-pairs shortest paths, one Dijkstra run per source.
///
/// Edge lengths are quantized to multiples of a power of two `2^e` chosen so
/// that every path length is below `2^52` units. Every returned entry and every
/// sum of two entries is then exactly representable, so `D` is symmetric and
/// `D_ij ≤ D_il + D_lj` holds bit-exactly. Quantization changes each length by
/// at most `N·2^(e−1)`, about `N·2^-53` relative to the longest possible path.
pub fn shortest_paths(g: &NeighborGraph) -> Result<DMatrix<f64>> {
    if g.kind != GraphKind::Distance {
        return Err(Error::InvalidArgument("shortest paths need a distance graph".into()));
    }
    g.ensure_connected()?;
    let max_w = g.adj.iter().flatten().fold(0.0f64, |m, e| m.max(e.1));
    let mut d = DMatrix::zeros(g.n, g.n);
    if max_w == 0.0 {
        return Ok(d);
    }
    // Longest simple path: at most n − 1 edges of weight ≤ max_w.
    let bound = max_w * g.n.saturating_sub(1).max(1) as f64;
    let exp = bound.log2().ceil() as i32 + 1 - PATH_BITS;
    let unit = 2f64.powi(exp);
    let adj: Vec<Vec<(usize, u64)>> = g
        .adj
        .iter()
        .map(|row| row.iter().map(|&(j, w)| (j, (w / unit).round() as u64)).collect())
        .collect();
    let rows: Vec<Vec<u64>> = (0..g.n).into_par_iter().map(|s| dijkstra(&adj, s)).collect();
    for i in 0..g.n {
        for j in 0..g.n {
            d[(i, j)] = rows[i][j] as f64 * unit;
        }
    }
    Ok(d)
}

/// Classical MDS of a distance matrix: top `d_out` positive eigenpairs of
/// `−½ H D⁽²⁾ H`. Missing positive directions are filled with zero columns.
pub fn classical_mds(d: &DMatrix<f64>, d_out: usize) -> Result<EmbeddingResult> {
    let n = d.nrows();
    let sq = d.map(|v| v * v);
    let row_means = DVector::from_iterator(n, sq.row_iter().map(|r| r.mean()));
    let total = row_means.mean();
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + total));
    let e = sym_eig(&b)?;
    let scale = e.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let positive = e
        .values
        .iter()
        .take(d_out)
        .take_while(|&&v| v > NULL_EIGEN_RTOL * scale)
        .count();
    if positive == 0 {
        return Err(Error::NoPositiveSpectrum);
    }
    if positive < d_out {
        log::warn!("only {positive} positive MDS eigenvalues; padding with zero coordinates");
    }
    let mut coords = DMatrix::zeros(n, d_out);
    for c in 0..positive {
        let s = e.values[c].sqrt();
        for i in 0..n {
            coords[(i, c)] = e.vectors[(i, c)] * s;
        }
    }
    let spectrum = DVector::from_iterator(d_out, e.values.iter().take(d_out).copied());
    Ok(EmbeddingResult { coords, spectrum, method: EmbedMethod::Isomap })
}

/// Geodesic kNN graph → shortest paths → classical MDS.
pub fn isomap_embed(points: &[Point], k: usize, d_out: usize) -> Result<EmbeddingResult> {
    isomap_from_graph(&knn_graph(points, k)?, d_out)
}

pub fn isomap_from_graph(g: &NeighborGraph, d_out: usize) -> Result<EmbeddingResult> {
    if d_out == 0 || d_out >= g.n {
        return Err(Error::InvalidArgument(format!("need 1 <= d_out < N, got {d_out}")));
    }
    classical_mds(&shortest_paths(g)?, d_out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ManifoldSpec;

    fn euclid(values: &[&[f64]]) -> Vec<Point> {
        values
            .iter()
            .map(|v| Point::from_slice(ManifoldSpec::Euclidean { dim: v.len() }, v).unwrap())
            .collect()
    }

    fn sphere3(v: [f64; 3]) -> Point {
        Point::projected(ManifoldSpec::Sphere { dim: 3 }, &DMatrix::from_column_slice(3, 1, &v)).unwrap()
    }

    #[test]
    fn equidistant_tie_break_is_deterministic() {
        let pts = [sphere3([1.0, 0.0, 0.0]), sphere3([0.0, 1.0, 0.0]), sphere3([0.0, 0.0, 1.0])];
        let g = knn_graph(&pts, 1).unwrap();
        // 0→1, 1→0, 2→0 under (distance, index) ordering.
        assert_eq!(g.adj[0].iter().map(|e| e.0).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(g.adj[1].iter().map(|e| e.0).collect::<Vec<_>>(), vec![0]);
        assert_eq!(g, knn_graph(&pts, 1).unwrap());
    }

    #[test]
    fn full_k_gives_complete_symmetric_graph() {
        let pts = euclid(&[&[0.0], &[1.0], &[3.0], &[7.0]]);
        let g = knn_graph(&pts, 3).unwrap();
        assert_eq!(g.n_edges(), 6);
        let w = g.to_dense();
        assert_eq!(w, w.transpose());
        assert!(knn_graph(&pts, 4).is_err());
    }

    #[test]
    fn heat_weight_values() {
        let pts = euclid(&[&[0.0], &[1.0], &[1.0]]);
        let h = heat_weights(&knn_graph(&pts, 2).unwrap(), Some(1.0)).unwrap();
        assert_eq!(h.weight(1, 2), Some(1.0));
        assert!((h.weight(0, 1).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        let far = heat_weights(&knn_graph(&pts, 2).unwrap(), Some(1e300)).unwrap();
        assert!(far.adj.iter().flatten().all(|&(_, w)| (w - 1.0).abs() < 1e-12));
    }

    #[test]
    fn two_node_laplacian() {
        let g = NeighborGraph { n: 2, kind: GraphKind::Heat { t: 1.0 }, adj: vec![vec![(1, 1.0)], vec![(0, 1.0)]] };
        let e = laplacian_embed(&g, 1, false).unwrap();
        assert!((e.spectrum[0] - 2.0).abs() < 1e-12);
        assert!(e.coords[(0, 0)] * e.coords[(1, 0)] < 0.0);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0]));
        assert!(((e.coords.transpose() * d * &e.coords)[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disconnected_graph_lists_components() {
        let pts = euclid(&[&[0.0], &[0.1], &[10.0], &[10.1], &[10.2]]);
        let g = heat_weights(&knn_graph(&pts, 1).unwrap(), None).unwrap();
        match laplacian_embed(&g, 1, false).unwrap_err() {
            Error::DisconnectedGraph(sizes) => assert_eq!(sizes, vec![3, 2]),
            other => panic!("unexpected {other}"),
        }
        let dist = pairwise_distances(&pts).unwrap();
        let (g, k) = knn_graph_connected(&dist, 1).unwrap();
        assert_eq!(k, 2);
        assert!(g.ensure_connected().is_ok());
    }

    #[test]
    fn nystrom_cases() {
        let train = euclid(&[&[0.0], &[1.0], &[5.0]]);
        let model = EmbeddingResult {
            coords: DMatrix::from_row_slice(3, 1, &[-1.0, 3.0, 10.0]),
            spectrum: DVector::from_vec(vec![1.0]),
            method: EmbedMethod::LaplacianEigenmaps,
        };
        let at = |x: f64, k, t| nystrom_extend(&train, &model, &euclid(&[&[x]])[0], k, t).unwrap()[0];
        assert!((at(1.0, 3, 1e-3) - 3.0).abs() < 1e-12);
        assert!((at(0.5, 2, 1.0) - 1.0).abs() < 1e-12);
        let far = nystrom_extend(&train, &model, &euclid(&[&[1e6]])[0], 1, 1.0);
        assert!(matches!(far, Err(Error::NoNeighbors)));
    }

    #[test]
    fn isomap_collinear() {
        let pts = euclid(&[&[0.0], &[1.0], &[2.0]]);
        let e = isomap_embed(&pts, 2, 1).unwrap();
        let y: Vec<f64> = e.coords.column(0).iter().map(|v| -(v * e.coords[(0, 0)].signum())).collect();
        for (a, b) in y.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-12, "{y:?}");
        }
    }

    #[test]
    fn complete_graph_isomap_is_classical_mds() {
        let pts = euclid(&[&[0.0, 0.0], &[3.0, 0.0], &[0.0, 4.0], &[1.0, 1.0]]);
        let d = pairwise_distances(&pts).unwrap();
        let a = isomap_embed(&pts, 3, 2).unwrap();
        let b = classical_mds(&d, 2).unwrap();
        assert!((a.coords - b.coords).norm() < 1e-12);
    }

    #[test]
    fn embedding_csv_header() {
        let e = EmbeddingResult {
            coords: DMatrix::from_row_slice(1, 2, &[0.5, -1.0]),
            spectrum: DVector::from_vec(vec![1.0, 2.0]),
            method: EmbedMethod::Isomap,
        };
        assert_eq!(e.to_csv(), "y0,y1\n0.5,-1.0\n");
    }
}
