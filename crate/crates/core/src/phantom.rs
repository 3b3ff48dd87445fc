//! Synthetic volumes with a known foreground and controlled artifacts.

use std::path::Path;

use ndarray::{Array3, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::volume::{Spacing, Volume};

/// In-plane shape, repeated on every slice. Coordinates are `(row, col)` in
/// pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Disk {
        center: (f64, f64),
        radius: f64,
    },
    Ellipse {
        center: (f64, f64),
        radii: (f64, f64),
    },
}

impl Shape {
    pub fn contains(&self, row: f64, col: f64) -> bool {
        match *self {
            Shape::Disk { center, radius } => {
                (row - center.0).powi(2) + (col - center.1).powi(2) <= radius * radius
            }
            Shape::Ellipse { center, radii } => {
                ((row - center.0) / radii.0).powi(2) + ((col - center.1) / radii.1).powi(2) <= 1.0
            }
        }
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let (c, (rr, rc)) = match *self {
            Shape::Disk { center, radius } => (center, (radius, radius)),
            Shape::Ellipse { center, radii } => (center, radii),
        };
        (c.0 - rr, c.0 + rr, c.1 - rc, c.1 + rc)
    }

    fn radii_positive(&self) -> bool {
        match *self {
            Shape::Disk { radius, .. } => radius > 0.0,
            Shape::Ellipse { radii, .. } => radii.0 > 0.0 && radii.1 > 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Artifact {
    Noise { sigma: f64 },
    Bias { strength: f64 },
    Ghosting { shift: usize, alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub id: String,
    /// `(NUM, ROWS, COLS)`
    pub dims: (usize, usize, usize),
    pub shapes: Vec<Shape>,
    pub fg_intensity: f64,
    pub bg_intensity: f64,
    pub spacing: Spacing,
    pub artifacts: Vec<Artifact>,
    pub seed: u64,
}

impl PhantomSpec {
    /// A centred disk on every slice, unit spacing, no artifacts.
    pub fn disk(id: &str, dims: (usize, usize, usize), radius: f64) -> Self {
        let center = ((dims.1 as f64 - 1.0) / 2.0, (dims.2 as f64 - 1.0) / 2.0);
        PhantomSpec {
            id: id.to_string(),
            dims,
            shapes: vec![Shape::Disk { center, radius }],
            fg_intensity: 100.0,
            bg_intensity: 0.0,
            spacing: Spacing::new(1.0, 1.0, 1.0),
            artifacts: Vec::new(),
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        let (n, rows, cols) = self.dims;
        if n == 0 || rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "phantom dims {:?}",
                self.dims
            )));
        }
        if self.shapes.is_empty() {
            return Err(Error::InvalidArgument("phantom has no shapes".into()));
        }
        if self.fg_intensity == self.bg_intensity {
            return Err(Error::InvalidArgument(
                "foreground and background intensities are equal".into(),
            ));
        }
        for s in &self.shapes {
            let (r0, r1, c0, c1) = s.bounds();
            let inside =
                r0 >= 0.0 && c0 >= 0.0 && r1 <= rows as f64 - 1.0 && c1 <= cols as f64 - 1.0;
            if !s.radii_positive() || !inside {
                return Err(Error::InvalidArgument(format!(
                    "shape {s:?} does not fit the slice"
                )));
            }
        }
        for a in &self.artifacts {
            match *a {
                Artifact::Noise { sigma } if !(sigma >= 0.0) => {}
                Artifact::Bias { strength } if !(0.0..1.0).contains(&strength) => {}
                Artifact::Ghosting { alpha, .. } if !(0.0..1.0).contains(&alpha) => {}
                _ => continue,
            }
            return Err(Error::InvalidArgument(format!(
                "artifact {a:?} out of range"
            )));
        }
        Ok(())
    }
}

/// Builds the phantom and its analytic foreground mask; artifacts are applied
/// in order, noise seeded from `spec.seed` and the artifact position.
pub fn generate(spec: &PhantomSpec) -> Result<(Volume, Array3<bool>)> {
    spec.validate()?;
    let mask = Array3::from_shape_fn(spec.dims, |(_, r, c)| {
        spec.shapes.iter().any(|s| s.contains(r as f64, c as f64))
    });
    let voxels = mask.mapv(|m| {
        if m {
            spec.fg_intensity
        } else {
            spec.bg_intensity
        }
    });
    let mut volume = Volume::new(spec.id.clone(), voxels, spec.spacing)?;
    for (k, a) in spec.artifacts.iter().enumerate() {
        volume = match *a {
            Artifact::Noise { sigma } => {
                apply_noise(&volume, sigma, seed::for_index(spec.seed, k as u64))
            }
            Artifact::Bias { strength } => apply_bias(&volume, strength),
            Artifact::Ghosting { shift, alpha } => apply_ghosting(&volume, shift, alpha),
        };
    }
    Ok((volume, mask))
}

/// Adds i.i.d. zero-mean Gaussian noise.
pub fn apply_noise(volume: &Volume, sigma: f64, seed: u64) -> Volume {
    if sigma == 0.0 {
        return volume.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = volume.voxels().clone();
    v.iter_mut().for_each(|x| *x += normal.sample(&mut rng));
    rebuild(volume, v)
}

/// Multiplies column `j` by `(1 - strength) + strength * j / (cols - 1)`.
pub fn apply_bias(volume: &Volume, strength: f64) -> Volume {
    let cols = volume.dims().2;
    let denom = (cols.max(2) - 1) as f64;
    let mut v = volume.voxels().clone();
    for (j, mut col) in v.axis_iter_mut(Axis(2)).enumerate() {
        let factor = (1.0 - strength) + strength * j as f64 / denom;
        col.mapv_inplace(|x| x * factor);
    }
    rebuild(volume, v)
}

/// `(1 - alpha) v + alpha roll(v)`, the roll moving every row down by `shift`
/// (cyclically).
pub fn apply_ghosting(volume: &Volume, shift: usize, alpha: f64) -> Volume {
    let (_, rows, _) = volume.dims();
    let src = volume.voxels();
    let mut out = src.clone();
    for (z, mut slice) in out.outer_iter_mut().enumerate() {
        let s = src.index_axis(Axis(0), z);
        for (r, row) in slice.outer_iter_mut().enumerate() {
            let ghost = s.index_axis(Axis(0), (r + rows - shift % rows) % rows);
            Zip::from(row)
                .and(&ghost)
                .for_each(|o, &g| *o = (1.0 - alpha) * *o + alpha * g);
        }
    }
    rebuild(volume, out)
}

fn rebuild(volume: &Volume, voxels: Array3<f64>) -> Volume {
    volume.with_voxels(voxels).expect("artifacts preserve dims")
}

/// Writes the phantom as NIfTI so it can run through the full pipeline.
pub fn write_nifti(volume: &Volume, path: &Path) -> Result<()> {
    crate::io::nifti::write(volume, path)
}
