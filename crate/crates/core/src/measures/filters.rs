//! Neighbourhood filters evaluated at single pixels with replicate-edge
//! padding.

use ndarray::ArrayView2;

#[inline]
fn clamped(slice: &ArrayView2<'_, f64>, r: isize, c: isize) -> f64 {
    let (rows, cols) = slice.dim();
    let r = r.clamp(0, rows as isize - 1) as usize;
    let c = c.clamp(0, cols as isize - 1) as usize;
    slice[[r, c]]
}

/// Response of the 3x3 kernel `(1/8)[[-1,-1,-1],[-1,8,-1],[-1,-1,-1]]`.
pub fn laplacian_at(slice: &ArrayView2<'_, f64>, r: usize, c: usize) -> f64 {
    let (r, c) = (r as isize, c as isize);
    let mut neighbours = 0.0;
    for dr in -1..=1 {
        for dc in -1..=1 {
            if dr != 0 || dc != 0 {
                neighbours += clamped(slice, r + dr, c + dc);
            }
        }
    }
    (8.0 * clamped(slice, r, c) - neighbours) / 8.0
}

/// Median of the 5x5 window centred on `(r, c)`.
pub fn median5_at(slice: &ArrayView2<'_, f64>, r: usize, c: usize) -> f64 {
    let (r, c) = (r as isize, c as isize);
    let mut w = [0.0f64; 25];
    let mut k = 0;
    for dr in -2..=2 {
        for dc in -2..=2 {
            w[k] = clamped(slice, r + dr, c + dc);
            k += 1;
        }
    }
    *w.select_nth_unstable_by(12, f64::total_cmp).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn laplacian_cases() {
        let flat = Array2::from_elem((5, 5), 3.0);
        assert_eq!(laplacian_at(&flat.view(), 0, 0), 0.0);
        let mut imp = Array2::zeros((5, 5));
        imp[[2, 2]] = 8.0;
        assert_eq!(laplacian_at(&imp.view(), 2, 2), 8.0);
        assert_eq!(laplacian_at(&imp.view(), 1, 1), -1.0);
        // checkerboard: the 4 diagonal neighbours share the centre value
        let board = Array2::from_shape_fn((6, 6), |(r, c)| ((r + c) % 2) as f64);
        assert_eq!(laplacian_at(&board.view(), 2, 3), 0.5);
        assert_eq!(laplacian_at(&board.view(), 2, 2), -0.5);
    }

    #[test]
    fn median_replicates_edges() {
        let mut s = Array2::zeros((5, 5));
        s[[0, 0]] = 10.0;
        // corner window sees (0,0) replicated 9 times out of 25
        assert_eq!(median5_at(&s.view(), 0, 0), 0.0);
        let ramp = Array2::from_shape_fn((7, 7), |(r, c)| (r * 7 + c) as f64);
        assert_eq!(median5_at(&ramp.view(), 3, 3), 24.0);
    }
}
