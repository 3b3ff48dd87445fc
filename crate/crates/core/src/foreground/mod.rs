//! Unsupervised foreground detection.
//!
//! Per slice: the slice is normalized to `[0, 1]` and thresholded with the
//! volume-mean Otsu level, its histogram-equalized copy is thresholded the
//! same way, the two masked intensity images are blended with weights
//! `w1`, `w2`, the blend is Otsu-thresholded and the convex hull of the
//! result becomes the foreground. Everything else is background.

mod components;
mod equalize;
mod hull;
mod otsu;

use ndarray::{Array2, Array3, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Volume;
pub use components::connected_components;
pub use equalize::equalize_histogram;
pub use hull::fill_convex_hull;
pub use otsu::otsu_threshold;

/// Per-object components smaller than this fraction of the slice are noise.
pub const MIN_OBJECT_FRACTION: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskMode {
    SingleRegion,
    PerObject,
}

/// Blend weights of the normalized slice and its equalized copy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub original: f64,
    pub equalized: f64,
}

impl Weights {
    pub fn new(original: f64, equalized: f64) -> Result<Self> {
        let ok = |w: f64| w.is_finite() && (0.0..=1.0).contains(&w);
        if !ok(original) || !ok(equalized) || ((original + equalized) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "weights must be in [0, 1] and sum to 1, got ({original}, {equalized})"
            )));
        }
        Ok(Weights {
            original,
            equalized,
        })
    }
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            original: 0.5,
            equalized: 0.5,
        }
    }
}

/// Per-slice foreground/background partition of a volume.
#[derive(Debug, Clone, PartialEq)]
pub struct ForegroundMask {
    masks: Array3<bool>,
    /// Thresholded blend before hull filling; the source of per-object splits.
    thresholded: Array3<bool>,
    object_count: Vec<usize>,
    degenerate: Vec<bool>,
    mode: MaskMode,
}

impl ForegroundMask {
    /// Wraps externally supplied masks (a known ground truth, say). Slices
    /// with an empty mask are degenerate.
    pub fn from_masks(masks: Array3<bool>) -> Self {
        let degenerate: Vec<bool> = masks.outer_iter().map(|s| !s.iter().any(|&v| v)).collect();
        let object_count = degenerate.iter().map(|&d| usize::from(!d)).collect();
        ForegroundMask {
            thresholded: masks.clone(),
            masks,
            object_count,
            degenerate,
            mode: MaskMode::SingleRegion,
        }
    }

    pub fn masks(&self) -> &Array3<bool> {
        &self.masks
    }

    pub fn slice(&self, z: usize) -> ArrayView2<'_, bool> {
        self.masks.index_axis(Axis(0), z)
    }

    pub fn thresholded(&self) -> &Array3<bool> {
        &self.thresholded
    }

    pub fn num_slices(&self) -> usize {
        self.degenerate.len()
    }

    pub fn is_degenerate(&self, z: usize) -> bool {
        self.degenerate[z]
    }

    pub fn object_count(&self, z: usize) -> usize {
        self.object_count[z]
    }

    pub fn mode(&self) -> MaskMode {
        self.mode
    }

    pub fn foreground_count(&self, z: usize) -> usize {
        self.slice(z).iter().filter(|&&v| v).count()
    }
}

/// Min-max normalization; `None` for a constant slice.
fn normalize(slice: ArrayView2<'_, f64>) -> Option<Array2<f64>> {
    let (lo, hi) = slice
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return None;
    }
    let span = hi - lo;
    Some(slice.mapv(|v| (v - lo) / span))
}

struct Prepared {
    normalized: Array2<f64>,
    equalized: Array2<f64>,
    t_normalized: f64,
    t_equalized: f64,
}

fn prepare(slice: ArrayView2<'_, f64>) -> Option<Prepared> {
    let normalized = normalize(slice)?;
    let equalized = equalize_histogram(normalized.view());
    let t_normalized = otsu_threshold(normalized.as_slice()?).ok()?;
    let t_equalized = otsu_threshold(equalized.as_slice()?).ok()?;
    Some(Prepared {
        normalized,
        equalized,
        t_normalized,
        t_equalized,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    s / n as f64
}

/// Clears components under [`MIN_OBJECT_FRACTION`] of the slice so that a
/// stray noise pixel cannot stretch the hull. If nothing reaches the floor the
/// largest component is kept.
fn drop_specks(mask: &Array2<bool>) -> Array2<bool> {
    let (rows, cols) = mask.dim();
    let floor = MIN_OBJECT_FRACTION * (rows * cols) as f64;
    let comps = connected_components(mask);
    let mut out = Array2::from_elem((rows, cols), false);
    let mut kept = comps.iter().filter(|c| c.len() as f64 >= floor).peekable();
    let keep: Vec<&Vec<(usize, usize)>> = if kept.peek().is_some() {
        kept.collect()
    } else {
        comps.iter().max_by_key(|c| c.len()).into_iter().collect()
    };
    for c in keep {
        for &(r, k) in c {
            out[[r, k]] = true;
        }
    }
    out
}

/// Detects the foreground of every slice in single-region mode.
///
/// Constant slices, and slices whose blend is constant, get an empty
/// foreground and are flagged degenerate. A volume whose slices are all
/// degenerate is an error.
pub fn detect_foreground(volume: &Volume, weights: Weights) -> Result<ForegroundMask> {
    let (num, rows, cols) = volume.dims();
    let prepared: Vec<Option<Prepared>> = (0..num)
        .into_par_iter()
        .map(|z| prepare(volume.slice(z)))
        .collect();
    if prepared.iter().all(Option::is_none) {
        return Err(Error::Degenerate(format!(
            "{}: every slice is constant",
            volume.id()
        )));
    }
    let t1 = mean(prepared.iter().flatten().map(|p| p.t_normalized));
    let t2 = mean(prepared.iter().flatten().map(|p| p.t_equalized));

    let per_slice: Vec<Option<(Array2<bool>, Array2<bool>)>> = prepared
        .into_par_iter()
        .map(|p| {
            let p = p?;
            let mut combined = Array2::<f64>::zeros((rows, cols));
            ndarray::Zip::from(&mut combined)
                .and(&p.normalized)
                .and(&p.equalized)
                .for_each(|c, &n, &e| {
                    let a = if n > t1 { n } else { 0.0 };
                    let b = if e > t2 { e } else { 0.0 };
                    *c = weights.original * a + weights.equalized * b;
                });
            let t3 = otsu_threshold(combined.as_slice()?).ok()?;
            let thresholded = combined.mapv(|v| v > t3);
            let filled = fill_convex_hull(&drop_specks(&thresholded));
            Some((thresholded, filled))
        })
        .collect();

    let mut masks = Array3::from_elem((num, rows, cols), false);
    let mut thresholded = Array3::from_elem((num, rows, cols), false);
    let mut degenerate = vec![true; num];
    let mut object_count = vec![0; num];
    for (z, s) in per_slice.into_iter().enumerate() {
        if let Some((t, f)) = s {
            if f.iter().any(|&v| v) {
                object_count[z] = connected_components(&f).len();
                degenerate[z] = false;
                thresholded.index_axis_mut(Axis(0), z).assign(&t);
                masks.index_axis_mut(Axis(0), z).assign(&f);
            }
        }
    }
    if degenerate.iter().all(|&d| d) {
        return Err(Error::Degenerate(format!(
            "{}: no slice has a detectable foreground",
            volume.id()
        )));
    }
    Ok(ForegroundMask {
        masks,
        thresholded,
        object_count,
        degenerate,
        mode: MaskMode::SingleRegion,
    })
}

/// Splits a mask into one mask per foreground object.
///
/// Objects are the 8-connected components of the thresholded blend, each
/// hull-filled on its own; components under [`MIN_OBJECT_FRACTION`] of the
/// slice are dropped. Within a slice objects are ranked left to right by
/// centroid column (then row), and the `k`-th returned mask holds the `k`-th
/// object of every slice; slices without a `k`-th object are flagged
/// degenerate in that mask.
pub fn split_objects(mask: &ForegroundMask) -> Vec<ForegroundMask> {
    let (num, rows, cols) = mask.thresholded.dim();
    let floor = MIN_OBJECT_FRACTION * (rows * cols) as f64;
    let per_slice: Vec<Vec<Vec<(usize, usize)>>> = (0..num)
        .into_par_iter()
        .map(|z| {
            if mask.degenerate[z] {
                return Vec::new();
            }
            let t = mask.thresholded.index_axis(Axis(0), z).to_owned();
            let mut comps: Vec<_> = connected_components(&t)
                .into_iter()
                .filter(|c| c.len() as f64 >= floor)
                .collect();
            let centroid = |c: &Vec<(usize, usize)>| {
                let n = c.len() as f64;
                let (sr, sc) = c
                    .iter()
                    .fold((0.0, 0.0), |(a, b), &(r, k)| (a + r as f64, b + k as f64));
                (sc / n, sr / n)
            };
            comps.sort_by(|a, b| {
                let (ca, cb) = (centroid(a), centroid(b));
                ca.0.total_cmp(&cb.0).then(ca.1.total_cmp(&cb.1))
            });
            comps
        })
        .collect();
    let count = per_slice.iter().map(Vec::len).max().unwrap_or(0);
    let counts: Vec<usize> = per_slice.iter().map(Vec::len).collect();
    (0..count)
        .map(|k| {
            let mut masks = Array3::from_elem((num, rows, cols), false);
            let mut thresholded = Array3::from_elem((num, rows, cols), false);
            let mut degenerate = vec![true; num];
            for (z, comps) in per_slice.iter().enumerate() {
                if let Some(comp) = comps.get(k) {
                    let mut t = Array2::from_elem((rows, cols), false);
                    for &(r, c) in comp {
                        t[[r, c]] = true;
                    }
                    masks
                        .index_axis_mut(Axis(0), z)
                        .assign(&fill_convex_hull(&t));
                    thresholded.index_axis_mut(Axis(0), z).assign(&t);
                    degenerate[z] = false;
                }
            }
            ForegroundMask {
                masks,
                thresholded,
                object_count: counts.clone(),
                degenerate,
                mode: MaskMode::PerObject,
            }
        })
        .collect()
}
