//! Otsu's threshold over a fixed 256-bin histogram.

use crate::error::{Error, Result};

pub const BINS: usize = 256;

/// Threshold maximizing the between-class variance of a 256-bin histogram
/// spanning the sample range.
///
/// The returned value is the upper edge of the last background bin, so the
/// foreground is every value strictly greater than it. Ties between equally
/// good splits resolve to the lowest one.
pub fn otsu_threshold(values: &[f64]) -> Result<f64> {
    let (lo, hi) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !(hi > lo) {
        return Err(Error::Degenerate(
            "Otsu threshold needs at least two distinct values".into(),
        ));
    }
    let width = (hi - lo) / BINS as f64;
    let mut hist = [0u64; BINS];
    for &v in values.iter().filter(|v| v.is_finite()) {
        hist[bin_of(v, lo, width)] += 1;
    }
    let total: f64 = hist.iter().sum::<u64>() as f64;
    let weighted_total: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();

    let mut best = (f64::NEG_INFINITY, 0usize);
    let (mut w0, mut sum0) = (0.0, 0.0);
    for (t, &count) in hist.iter().enumerate().take(BINS - 1) {
        w0 += count as f64;
        sum0 += t as f64 * count as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (weighted_total - sum0) / w1;
        let between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if between > best.0 {
            best = (between, t);
        }
    }
    Ok(lo + (best.1 + 1) as f64 * width)
}

#[inline]
fn bin_of(v: f64, lo: f64, width: f64) -> usize {
    (((v - lo) / width) as usize).min(BINS - 1)
}
