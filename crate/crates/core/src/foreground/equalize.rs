use ndarray::{Array2, ArrayView2};

/// Histogram equalization by the empirical cumulative distribution: each
/// pixel maps to the fraction of pixels with intensity less than or equal to
/// its own. Output lies in (0, 1] and is monotone in the input; a constant
/// slice maps to all ones.
pub fn equalize_histogram(slice: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = slice.len();
    if n == 0 {
        return Array2::zeros(slice.raw_dim());
    }
    let mut sorted: Vec<f64> = slice.iter().copied().collect();
    sorted.sort_by(f64::total_cmp);
    slice.mapv(|v| sorted.partition_point(|&s| s <= v) as f64 / n as f64)
}
