//! kNN classification in an embedded space and the accuracy metric.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Majority vote over the `k` nearest training rows (Euclidean, ties in
/// distance broken by index). Vote ties go to the label with the smaller summed
/// neighbor distance, then to the smaller label.
pub fn knn_classify(train: &DMatrix<f64>, train_labels: &[usize], test: &DMatrix<f64>, k: usize) -> Result<Vec<usize>> {
    if train.nrows() != train_labels.len() {
        return Err(Error::LengthMismatch(train.nrows(), train_labels.len()));
    }
    if train.ncols() != test.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "train has {} columns, test has {}",
            train.ncols(),
            test.ncols()
        )));
    }
    if k == 0 || k > train.nrows() {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k <= {}, got {k}",
            train.nrows()
        )));
    }
    let n_labels = train_labels.iter().max().map_or(0, |m| m + 1);
    let pred = (0..test.nrows())
        .into_par_iter()
        .map(|q| {
            let row = test.row(q);
            let mut d: Vec<(f64, usize)> = (0..train.nrows())
                .map(|i| ((train.row(i) - row).norm(), i))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut votes = vec![0usize; n_labels];
            let mut spread = vec![0.0f64; n_labels];
            for &(dist, i) in &d[..k] {
                votes[train_labels[i]] += 1;
                spread[train_labels[i]] += dist;
            }
            (0..n_labels)
                .filter(|&l| votes[l] > 0)
                .min_by(|&a, &b| {
                    votes[b]
                        .cmp(&votes[a])
                        .then(spread[a].total_cmp(&spread[b]))
                        .then(a.cmp(&b))
                })
                .expect("k >= 1 neighbors vote")
        })
        .collect();
    Ok(pred)
}

/// Percentage of positions where `pred` matches `truth`.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty set".into()));
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64 * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn exact_match_with_k1() {
        let train = col(&[0.0, 1.0, 2.0]);
        assert_eq!(knn_classify(&train, &[0, 1, 2], &col(&[1.0]), 1).unwrap(), vec![1]);
    }

    #[test]
    fn separated_clusters() {
        let train = col(&[-10.0, -10.2, -9.9, -10.1, -9.8, 10.0, 10.1, 9.9, 10.2, 9.8]);
        let labels = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let test = col(&[-9.5, -10.5, 9.7, 10.4]);
        assert_eq!(knn_classify(&train, &labels, &test, 5).unwrap(), vec![0, 0, 1, 1]);
    }

    #[test]
    fn vote_tie_uses_summed_distance() {
        let train = col(&[1.0, 1.5, -0.5, -3.0]);
        let labels = [0, 0, 1, 1];
        // Label 0 sums 2.5, label 1 sums 3.5.
        assert_eq!(knn_classify(&train, &labels, &col(&[0.0]), 4).unwrap(), vec![0]);
        let labels = [1, 1, 0, 0];
        assert_eq!(knn_classify(&train, &labels, &col(&[0.0]), 4).unwrap(), vec![1]);
    }

    #[test]
    fn accuracy_values() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 100.0);
        assert_eq!(accuracy(&[0, 0], &[1, 1]).unwrap(), 0.0);
        assert_eq!(accuracy(&[1, 1, 1, 0], &[1, 1, 1, 1]).unwrap(), 75.0);
        assert!(matches!(accuracy(&[1], &[1, 2]), Err(Error::LengthMismatch(1, 2))));
    }
}
