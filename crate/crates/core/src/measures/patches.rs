use ndarray::ArrayView2;
use rand::Rng;

pub const PATCH_SIZE: usize = 5;
/// Rejected placements before a patch is declared missing.
pub const MAX_DRAWS: usize = 1000;

/// A 5x5 window; `values` are in raster order.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub row: usize,
    pub col: usize,
    pub values: Vec<f64>,
}

fn fits(region: &ArrayView2<'_, bool>, r: usize, c: usize) -> bool {
    (r..r + PATCH_SIZE).all(|i| (c..c + PATCH_SIZE).all(|j| region[[i, j]]))
}

/// Draws a uniformly placed 5x5 window lying entirely inside `region`, with
/// up to [`MAX_DRAWS`] attempts.
pub fn sample_patch<R: Rng + ?Sized>(
    slice: &ArrayView2<'_, f64>,
    region: &ArrayView2<'_, bool>,
    rng: &mut R,
) -> Option<Patch> {
    let (rows, cols) = slice.dim();
    if rows < PATCH_SIZE || cols < PATCH_SIZE || !region.iter().any(|&v| v) {
        return None;
    }
    for _ in 0..MAX_DRAWS {
        let r = rng.gen_range(0..=rows - PATCH_SIZE);
        let c = rng.gen_range(0..=cols - PATCH_SIZE);
        if fits(region, r, c) {
            let values = slice
                .slice(ndarray::s![r..r + PATCH_SIZE, c..c + PATCH_SIZE])
                .iter()
                .copied()
                .collect();
            return Some(Patch {
                row: r,
                col: c,
                values,
            });
        }
    }
    None
}

/// Foreground then background patch, drawn from the same generator.
pub fn sample_patches<R: Rng + ?Sized>(
    slice: &ArrayView2<'_, f64>,
    foreground: &ArrayView2<'_, bool>,
    background: &ArrayView2<'_, bool>,
    rng: &mut R,
) -> (Option<Patch>, Option<Patch>) {
    let fp = sample_patch(slice, foreground, rng);
    let bp = sample_patch(slice, background, rng);
    (fp, bp)
}
