//! The in-memory volume and the header metadata carried alongside it.

use indexmap::IndexMap;
use ndarray::{Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest in-plane extent for which the measurements are defined.
pub const MIN_IN_PLANE: usize = 8;

/// Voxel spacing in millimetres. Absent components stay `None`; a zero or
/// negative spacing is never stored.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Spacing {
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub z: Option<f64>,
}

impl Spacing {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Spacing {
            x: positive(x),
            y: positive(y),
            z: positive(z),
        }
    }

    pub fn missing() -> Self {
        Spacing::default()
    }
}

/// Keeps only finite, strictly positive values.
pub(crate) fn positive(v: f64) -> Option<f64> {
    (v.is_finite() && v > 0.0).then_some(v)
}

/// A 3-D scalar volume indexed `(slice, row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    id: String,
    voxels: Array3<f64>,
    spacing: Spacing,
}

impl Volume {
    /// Builds a volume, rejecting empty arrays and invalid spacing values.
    pub fn new(id: impl Into<String>, voxels: Array3<f64>, spacing: Spacing) -> Result<Self> {
        let (num, rows, cols) = voxels.dim();
        if num == 0 || rows == 0 || cols == 0 {
            return Err(Error::InvalidVolume(format!(
                "empty voxel array ({num}, {rows}, {cols})"
            )));
        }
        for s in [spacing.x, spacing.y, spacing.z].into_iter().flatten() {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidVolume(format!("non-positive spacing {s}")));
            }
        }
        Ok(Volume {
            id: id.into(),
            voxels,
            spacing,
        })
    }

    /// Rejects volumes too small in-plane for the quality measures.
    pub fn ensure_measurable(&self) -> Result<()> {
        let (_, rows, cols) = self.dims();
        if rows < MIN_IN_PLANE || cols < MIN_IN_PLANE {
            return Err(Error::InvalidVolume(format!(
                "slices of {rows}x{cols} are smaller than {MIN_IN_PLANE}x{MIN_IN_PLANE}"
            )));
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn voxels(&self) -> &Array3<f64> {
        &self.voxels
    }

    pub fn into_voxels(self) -> Array3<f64> {
        self.voxels
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    /// `(NUM, ROWS, COLS)`
    pub fn dims(&self) -> (usize, usize, usize) {
        self.voxels.dim()
    }

    pub fn num_slices(&self) -> usize {
        self.voxels.len_of(Axis(0))
    }

    pub fn slice(&self, z: usize) -> ArrayView2<'_, f64> {
        self.voxels.index_axis(Axis(0), z)
    }

    pub fn slices(&self) -> impl Iterator<Item = ArrayView2<'_, f64>> {
        self.voxels.axis_iter(Axis(0))
    }

    /// Same geometry and id, new intensities.
    pub fn with_voxels(&self, voxels: Array3<f64>) -> Result<Self> {
        if voxels.dim() != self.voxels.dim() {
            return Err(Error::InvalidVolume(format!(
                "replacement voxels {:?} do not match {:?}",
                voxels.dim(),
                self.voxels.dim()
            )));
        }
        Ok(Volume {
            id: self.id.clone(),
            voxels,
            spacing: self.spacing,
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

/// Header metadata of one dataset. Acquisition fields absent from the source
/// header are `None` and serialize as `NA`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetadataRecord {
    /// Manufacturer.
    pub mfr: Option<String>,
    /// Magnetic field strength in tesla.
    pub mfs: Option<f64>,
    pub vrx: Option<f64>,
    pub vry: Option<f64>,
    pub vrz: Option<f64>,
    pub rows: usize,
    pub cols: usize,
    /// Repetition time in ms.
    pub tr: Option<f64>,
    /// Echo time in ms.
    pub te: Option<f64>,
    pub num: usize,
    /// User-requested header tags, in request order.
    pub extra: IndexMap<String, Option<String>>,
}

impl MetadataRecord {
    /// Geometry-only metadata derived from a volume.
    pub fn from_geometry(volume: &Volume) -> Self {
        let (num, rows, cols) = volume.dims();
        let sp = volume.spacing();
        MetadataRecord {
            vrx: sp.x,
            vry: sp.y,
            vrz: sp.z,
            rows,
            cols,
            num,
            ..Default::default()
        }
    }
}
