//! Two-dimensional embeddings of the cohort for batch-effect inspection.
//!
//! Each dataset is described by 23 features: the eight numeric metadata
//! fields followed by the fifteen measurements. Features are mean-imputed and
//! z-scored before t-SNE and UMAP are run on them.

mod pca;
pub mod tsne;
pub mod umap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Measure, MeasureRecord};
use crate::volume::MetadataRecord;

pub use pca::project2;

pub const NUM_FEATURES: usize = 23;
pub const METADATA_FEATURES: [&str; 8] = ["VRX", "VRY", "VRZ", "ROWS", "COLS", "TR", "TE", "NUM"];

/// Column names in feature order.
pub fn feature_names() -> Vec<&'static str> {
    METADATA_FEATURES
        .iter()
        .copied()
        .chain(Measure::ALL.iter().map(|m| m.name()))
        .collect()
}

/// Raw feature vector of one dataset.
pub fn features(meta: &MetadataRecord, record: &MeasureRecord) -> [Option<f64>; NUM_FEATURES] {
    let mut out = [None; NUM_FEATURES];
    let md = [
        meta.vrx,
        meta.vry,
        meta.vrz,
        Some(meta.rows as f64),
        Some(meta.cols as f64),
        meta.tr,
        meta.te,
        Some(meta.num as f64),
    ];
    out[..8].copy_from_slice(&md);
    out[8..].copy_from_slice(&record.values);
    out
}

/// Whitened features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
    /// Rows with at least one imputed entry.
    pub imputed: Vec<bool>,
    /// Columns that were constant (or entirely missing) and are all zero.
    pub constant: Vec<bool>,
}

impl FeatureMatrix {
    pub fn to_optional(&self) -> Array2<Option<f64>> {
        self.values.mapv(Some)
    }

    /// The whitened values restricted to non-constant columns.
    pub fn informative(&self) -> Array2<f64> {
        let keep: Vec<usize> = (0..self.constant.len())
            .filter(|&j| !self.constant[j])
            .collect();
        Array2::from_shape_fn((self.values.nrows(), keep.len()), |(i, k)| {
            self.values[[i, keep[k]]]
        })
    }
}

/// Mean-imputes missing entries and z-scores every column with the
/// population SD. Constant columns become zero and are flagged.
pub fn whiten(raw: &Array2<Option<f64>>) -> Result<FeatureMatrix> {
    let (n, d) = raw.dim();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "whitening needs at least 2 datasets, got {n}"
        )));
    }
    let mut values = Array2::zeros((n, d));
    let mut imputed = vec![false; n];
    let mut constant = vec![false; d];
    for j in 0..d {
        let present: Vec<f64> = raw
            .column(j)
            .iter()
            .flatten()
            .copied()
            .filter(|v| v.is_finite())
            .collect();
        if present.is_empty() {
            // no value to impute from: the column carries no information
            constant[j] = true;
            continue;
        }
        let mean = present.iter().sum::<f64>() / present.len() as f64;
        let col: Vec<f64> = raw
            .column(j)
            .iter()
            .enumerate()
            .map(|(i, v)| match v {
                Some(x) if x.is_finite() => *x,
                _ => {
                    imputed[i] = true;
                    mean
                }
            })
            .collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        if sd <= 1e-12 * (1.0 + mean.abs()) {
            constant[j] = true;
            continue;
        }
        for (i, x) in col.iter().enumerate() {
            values[[i, j]] = (x - mean) / sd;
        }
    }
    Ok(FeatureMatrix {
        values,
        imputed,
        constant,
    })
}

/// Pairwise squared Euclidean distances between rows.
pub fn sq_distances(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

/// Per-dataset coordinates; a method is `None` when the cohort is too small
/// for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub tsne: Option<Vec<[f64; 2]>>,
    pub umap: Option<Vec<[f64; 2]>>,
}

fn points(y: Array2<f64>) -> Vec<[f64; 2]> {
    y.rows().into_iter().map(|r| [r[0], r[1]]).collect()
}

/// Runs both embeddings on whitened features.
pub fn embed(features: &FeatureMatrix, seed: u64) -> Embedding {
    let x = &features.values;
    let n = x.nrows();
    let tsne = tsne::tsne(x, seed).map(points);
    if tsne.is_none() {
        log::warn!(
            "t-SNE needs at least {} datasets, got {n}; skipped",
            tsne::MIN_POINTS
        );
    }
    let umap = umap::umap(x, seed).map(points);
    if umap.is_none() {
        log::warn!(
            "UMAP needs at least {} datasets, got {n}; skipped",
            umap::MIN_POINTS
        );
    }
    let finite = |p: &Option<Vec<[f64; 2]>>| {
        p.as_ref()
            .is_none_or(|v| v.iter().flatten().all(|c| c.is_finite()))
    };
    debug_assert!(finite(&tsne) && finite(&umap));
    Embedding { tsne, umap }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn whiten_examples() {
        let raw = array![
            [Some(1.0), Some(5.0), Some(2.0)],
            [Some(3.0), Some(5.0), None],
            [Some(2.0), Some(5.0), Some(4.0)]
        ];
        let w = whiten(&raw).unwrap();
        let s = (2.0f64 / 3.0).sqrt();
        assert!((w.values[[0, 0]] + 1.0 / s).abs() < 1e-12);
        assert_eq!(w.constant, [false, true, false]);
        assert!(w.values.column(1).iter().all(|&v| v == 0.0));
        assert_eq!(w.values[[1, 2]], 0.0);
        assert_eq!(w.imputed, [false, true, false]);
        let two = array![[Some(1.0)], [Some(3.0)]];
        assert_eq!(whiten(&two).unwrap().values, array![[-1.0], [1.0]]);
        assert!(whiten(&array![[Some(1.0)]]).is_err());
    }

    #[test]
    fn feature_order() {
        let names = feature_names();
        assert_eq!(names.len(), NUM_FEATURES);
        assert_eq!(names[7], "NUM");
        assert_eq!(names[8], "MEAN");
        assert_eq!(names[22], "FBER");
    }
}
