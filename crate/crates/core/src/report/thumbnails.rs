use std::fs;
use std::path::{Path, PathBuf};

use image::imageops::{resize, FilterType};
use image::GrayImage;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::Volume;

pub const MAX_EDGE: u32 = 256;

/// Percentile with linear interpolation between closest ranks.
pub fn percentile(values: &mut [f64], p: f64) -> f64 {
    let n = values.len();
    let pos = p / 100.0 * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    let (_, &mut a, upper) = values.select_nth_unstable_by(lo, f64::total_cmp);
    if frac == 0.0 || upper.is_empty() {
        return a;
    }
    let b = upper.iter().copied().fold(f64::INFINITY, f64::min);
    a + frac * (b - a)
}

/// Thumbnail size for a `rows x cols` slice: the long edge is capped at
/// [`MAX_EDGE`], aspect kept. Returns `(width, height)`.
pub fn thumbnail_size(rows: usize, cols: usize) -> (u32, u32) {
    let long = rows.max(cols) as f64;
    if long <= f64::from(MAX_EDGE) {
        return (cols as u32, rows as u32);
    }
    let s = f64::from(MAX_EDGE) / long;
    let w = ((cols as f64 * s).round() as u32).max(1);
    let h = ((rows as f64 * s).round() as u32).max(1);
    (w, h)
}

/// Writes one 8-bit PNG per slice to `<cohort_dir>/<id>/<id>_<NNN>.png`,
/// windowed to the volume's 1st..99th percentile. A constant window renders
/// mid-gray.
pub fn write_thumbnails(volume: &Volume, cohort_dir: &Path) -> Result<Vec<PathBuf>> {
    let id = volume.id();
    let dir = cohort_dir.join(id);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut all: Vec<f64> = volume.voxels().iter().copied().collect();
    let lo = percentile(&mut all, 1.0);
    let hi = percentile(&mut all, 99.0);
    drop(all);
    let (num, rows, cols) = volume.dims();
    let width = 3.max((num.saturating_sub(1)).to_string().len());
    let (tw, th) = thumbnail_size(rows, cols);
    (0..num)
        .into_par_iter()
        .map(|z| {
            let slice = volume.slice(z);
            let img = GrayImage::from_fn(cols as u32, rows as u32, |x, y| {
                let v = slice[[y as usize, x as usize]];
                let g = if hi > lo {
                    ((v - lo) / (hi - lo)).clamp(0.0, 1.0) * 255.0
                } else {
                    128.0
                };
                image::Luma([g.round() as u8])
            });
            let img = if (tw, th) != (cols as u32, rows as u32) {
                resize(&img, tw, th, FilterType::Triangle)
            } else {
                img
            };
            let path = dir.join(format!("{id}_{z:0width$}.png"));
            img.save(&path)
                .map_err(|e| Error::io(&path, std::io::Error::other(e.to_string())))?;
            Ok(path)
        })
        .collect()
}
