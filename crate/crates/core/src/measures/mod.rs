//! The fifteen per-dataset quality measurements.
//!
//! Every measurement is computed on each slice from the foreground `F`, the
//! background `B` and one random 5x5 patch of each (`FP`, `BP`), then averaged
//! over the slices where it is defined. Undefined values (empty operands,
//! zero denominators) are `None` and never infinities.

mod filters;
mod patches;
pub mod stats;

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::foreground::ForegroundMask;
use crate::seed;
use crate::volume::Volume;
pub use filters::{laplacian_at, median5_at};
pub use patches::{sample_patch, sample_patches, Patch, MAX_DRAWS, PATCH_SIZE};
use stats::{mean, median, ratio, std_dev, variance};

pub const NUM_MEASURES: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Measure {
    Mean,
    Rng,
    Var,
    Cv,
    Cpp,
    Psnr,
    Snr1,
    Snr2,
    Snr3,
    Snr4,
    Cnr,
    Cvp,
    Cjv,
    Efc,
    Fber,
}

impl Measure {
    pub const ALL: [Measure; NUM_MEASURES] = [
        Measure::Mean,
        Measure::Rng,
        Measure::Var,
        Measure::Cv,
        Measure::Cpp,
        Measure::Psnr,
        Measure::Snr1,
        Measure::Snr2,
        Measure::Snr3,
        Measure::Snr4,
        Measure::Cnr,
        Measure::Cvp,
        Measure::Cjv,
        Measure::Efc,
        Measure::Fber,
    ];

    /// Column name in the results table.
    pub fn name(self) -> &'static str {
        match self {
            Measure::Mean => "MEAN",
            Measure::Rng => "RNG",
            Measure::Var => "VAR",
            Measure::Cv => "CV",
            Measure::Cpp => "CPP",
            Measure::Psnr => "PSNR",
            Measure::Snr1 => "SNR1",
            Measure::Snr2 => "SNR2",
            Measure::Snr3 => "SNR3",
            Measure::Snr4 => "SNR4",
            Measure::Cnr => "CNR",
            Measure::Cvp => "CVP",
            Measure::Cjv => "CJV",
            Measure::Efc => "EFC",
            Measure::Fber => "FBER",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// One value per [`Measure`], in [`Measure::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasureRecord {
    pub values: [Option<f64>; NUM_MEASURES],
}

impl MeasureRecord {
    pub fn get(&self, m: Measure) -> Option<f64> {
        self.values[m.index()]
    }

    pub fn set(&mut self, m: Measure, v: Option<f64>) {
        self.values[m.index()] = v;
    }
}

/// Operands of one slice.
#[derive(Debug, Clone)]
pub struct SliceContext<'a> {
    pub slice: ArrayView2<'a, f64>,
    pub foreground: ArrayView2<'a, bool>,
    pub f: Vec<f64>,
    pub b: Vec<f64>,
    pub fp: Option<Patch>,
    pub bp: Option<Patch>,
}

impl<'a> SliceContext<'a> {
    /// Splits `slice` by `foreground`/`background` (which need not be
    /// complements) and draws the patches from `rng`.
    pub fn new<R: rand::Rng + ?Sized>(
        slice: ArrayView2<'a, f64>,
        foreground: ArrayView2<'a, bool>,
        background: ArrayView2<'a, bool>,
        rng: &mut R,
    ) -> Self {
        let mut f = Vec::new();
        let mut b = Vec::new();
        Zip::from(&slice)
            .and(&foreground)
            .and(&background)
            .for_each(|&v, &fg, &bg| {
                if fg {
                    f.push(v);
                } else if bg {
                    b.push(v);
                }
            });
        let (fp, bp) = sample_patches(&slice, &foreground, &background, rng);
        SliceContext {
            slice,
            foreground,
            f,
            b,
            fp,
            bp,
        }
    }
}

/// MEAN, RNG, VAR and CV of the foreground.
pub fn first_order(f: &[f64]) -> [Option<f64>; 4] {
    let mu = mean(f);
    let range = (!f.is_empty()).then(|| {
        let (lo, hi) = f
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        hi - lo
    });
    let var = if f.len() >= 2 { variance(f) } else { None };
    let cv = match (var, mu) {
        (Some(v), Some(m)) => ratio(v.sqrt(), m),
        _ => None,
    };
    [mu, range, var, cv]
}

/// Mean Laplacian response over the foreground pixels.
pub fn cpp(slice: &ArrayView2<'_, f64>, foreground: &ArrayView2<'_, bool>) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((r, c), &fg) in foreground.indexed_iter() {
        if fg {
            sum += laplacian_at(slice, r, c);
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// `10 log10(max(F)^2 / MSE)` against the 5x5 median-filtered slice.
pub fn psnr(slice: &ArrayView2<'_, f64>, foreground: &ArrayView2<'_, bool>) -> Option<f64> {
    let mut sq = 0.0;
    let mut n = 0usize;
    let mut peak = f64::NEG_INFINITY;
    for ((r, c), &fg) in foreground.indexed_iter() {
        if fg {
            let v = slice[[r, c]];
            let d = v - median5_at(slice, r, c);
            sq += d * d;
            peak = peak.max(v);
            n += 1;
        }
    }
    if n == 0 {
        return None;
    }
    let mse = sq / n as f64;
    let v = 10.0 * ratio(peak * peak, mse)?.log10();
    v.is_finite().then_some(v)
}

/// SNR1..SNR4.
pub fn snr_suite(f: &[f64], b: &[f64], fp: Option<&Patch>, bp: Option<&Patch>) -> [Option<f64>; 4] {
    let sd_b = std_dev(b);
    let mu_fp = fp.and_then(|p| mean(&p.values));
    let snr1 = std_dev(f).zip(sd_b).and_then(|(a, s)| ratio(a, s));
    let snr2 = mu_fp.zip(sd_b).and_then(|(m, s)| ratio(m, s));
    let snr3 = fp.zip(mu_fp).and_then(|(p, m)| {
        let centred: Vec<f64> = p.values.iter().map(|v| v - m).collect();
        ratio(m, std_dev(&centred)?)
    });
    let snr4 = mu_fp
        .zip(bp.and_then(|p| std_dev(&p.values)))
        .and_then(|(m, s)| ratio(m, s));
    [snr1, snr2, snr3, snr4]
}

/// Mean of the elementwise patch difference over the background patch SD.
pub fn cnr(fp: &Patch, bp: &Patch) -> Option<f64> {
    let diff: Vec<f64> = fp
        .values
        .iter()
        .zip(&bp.values)
        .map(|(a, b)| a - b)
        .collect();
    ratio(mean(&diff)?, std_dev(&bp.values)?)
}

pub fn cvp(fp: &Patch) -> Option<f64> {
    ratio(std_dev(&fp.values)?, mean(&fp.values)?)
}

pub fn cjv(f: &[f64], b: &[f64]) -> Option<f64> {
    let (mf, mb) = (mean(f)?, mean(b)?);
    ratio(std_dev(f)? + std_dev(b)?, (mf - mb).abs())
}

/// Entropy focus criterion of the whole slice, natural logarithms.
pub fn efc(slice: &ArrayView2<'_, f64>) -> Option<f64> {
    let fmax = slice.iter().map(|v| v * v).sum::<f64>().sqrt();
    if fmax == 0.0 || !fmax.is_finite() {
        return None;
    }
    let e: f64 = slice
        .iter()
        .map(|&v| {
            let x = v / fmax;
            if x == 0.0 {
                0.0
            } else {
                -x * x.abs().ln()
            }
        })
        .sum();
    if !(e > 0.0) {
        return None;
    }
    let root = (slice.len() as f64).sqrt();
    let v = root * (e / root).ln();
    v.is_finite().then_some(v)
}

pub fn fber(f: &[f64], b: &[f64]) -> Option<f64> {
    let sq = |v: &[f64]| v.iter().map(|x| x * x).collect::<Vec<_>>();
    ratio(median(&sq(f))?, median(&sq(b))?)
}

/// All fifteen measurements of one slice.
pub fn slice_measures(ctx: &SliceContext<'_>) -> MeasureRecord {
    let (f, b) = (&ctx.f[..], &ctx.b[..]);
    let (fp, bp) = (ctx.fp.as_ref(), ctx.bp.as_ref());
    let [m1, m2, m3, m4] = first_order(f);
    let [m7, m8, m9, m10] = snr_suite(f, b, fp, bp);
    let values = [
        m1,
        m2,
        m3,
        m4,
        cpp(&ctx.slice, &ctx.foreground),
        psnr(&ctx.slice, &ctx.foreground),
        m7,
        m8,
        m9,
        m10,
        fp.zip(bp).and_then(|(a, b)| cnr(a, b)),
        fp.and_then(cvp),
        cjv(f, b),
        efc(&ctx.slice),
        fber(f, b),
    ];
    MeasureRecord { values }
}

/// Averages per-slice records over the slices where each value is defined.
pub fn aggregate(slices: &[MeasureRecord]) -> MeasureRecord {
    let mut out = MeasureRecord::default();
    for k in 0..NUM_MEASURES {
        let defined: Vec<f64> = slices.iter().filter_map(|r| r.values[k]).collect();
        out.values[k] = mean(&defined).filter(|v| v.is_finite());
    }
    out
}

fn record_for(
    volume: &Volume,
    mask: &ForegroundMask,
    background: impl Fn(usize) -> Array2<bool> + Sync,
    stream_seed: u64,
) -> MeasureRecord {
    let per_slice: Vec<MeasureRecord> = (0..volume.num_slices())
        .into_par_iter()
        .filter(|&z| !mask.is_degenerate(z))
        .map(|z| {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
            rng.set_stream(z as u64);
            let bg = background(z);
            let ctx = SliceContext::new(volume.slice(z), mask.slice(z), bg.view(), &mut rng);
            slice_measures(&ctx)
        })
        .collect();
    aggregate(&per_slice)
}

/// Volume-level record. The patch generator is seeded from `seed` and the
/// volume id, so equal inputs give bit-identical records.
pub fn compute_record(volume: &Volume, mask: &ForegroundMask, seed: u64) -> MeasureRecord {
    let stream = seed::for_name(seed, volume.id());
    record_for(volume, mask, |z| mask.slice(z).mapv(|v| !v), stream)
}

/// One record per object mask. Background is everything outside all objects.
pub fn compute_object_records(
    volume: &Volume,
    objects: &[ForegroundMask],
    seed: u64,
) -> Vec<MeasureRecord> {
    let base = seed::for_name(seed, volume.id());
    let outside = |z: usize| {
        let mut bg = Array2::from_elem(volume.slice(z).dim(), true);
        for o in objects {
            Zip::from(&mut bg)
                .and(&o.masks().index_axis(Axis(0), z))
                .for_each(|b, &m| *b &= !m);
        }
        bg
    };
    objects
        .iter()
        .enumerate()
        .map(|(k, o)| record_for(volume, o, outside, seed::for_index(base, k as u64)))
        .collect()
}
