//! DICOM series assembly.
//!
//! Every file of a series is parsed, slices are ordered by their position
//! along the slice normal (ties and missing positions fall back to the
//! instance number) and native pixel data is decoded with the modality
//! rescale applied. Encapsulated (compressed) transfer syntaxes are rejected.

use std::borrow::Cow;
use std::path::{Path, PathBuf};

use dicom_core::value::{PrimitiveValue, Value};
use dicom_core::Tag;
use dicom_dictionary_std::tags;
use dicom_object::file::ReadPreamble;
use dicom_object::{DefaultDicomObject, OpenFileOptions};
use ndarray::Array3;

use super::tags::TagName;
use crate::error::{Error, Result};
use crate::volume::{positive, MetadataRecord, Spacing, Volume};

const NATIVE_TRANSFER_SYNTAXES: [&str; 4] = [
    "1.2.840.10008.1.2",
    "1.2.840.10008.1.2.1",
    "1.2.840.10008.1.2.1.99",
    "1.2.840.10008.1.2.2",
];

pub fn open(path: &Path) -> Result<DefaultDicomObject> {
    OpenFileOptions::new()
        .read_preamble(ReadPreamble::Auto)
        .open_file(path)
        .map_err(|e| Error::format("DICOM", path, e.to_string()))
}

fn text(obj: &DefaultDicomObject, tag: Tag) -> Option<String> {
    let elem = obj.element_opt(tag).ok().flatten()?;
    let s = elem.to_str().ok()?;
    let s = s.trim_matches(|c: char| c == '\0' || c.is_whitespace());
    (!s.is_empty()).then(|| s.to_string())
}

fn float(obj: &DefaultDicomObject, tag: Tag) -> Option<f64> {
    floats(obj, tag)?.first().copied()
}

fn floats(obj: &DefaultDicomObject, tag: Tag) -> Option<Vec<f64>> {
    let elem = obj.element_opt(tag).ok().flatten()?;
    elem.to_multi_float64().ok().filter(|v| !v.is_empty())
}

fn int(obj: &DefaultDicomObject, tag: Tag) -> Option<i64> {
    obj.element_opt(tag).ok().flatten()?.to_int::<i64>().ok()
}

/// Header fields of one file needed to place and decode its frames.
struct SliceFile {
    path: PathBuf,
    rows: usize,
    cols: usize,
    frames: usize,
    position: Option<[f64; 3]>,
    orientation: Option<[f64; 6]>,
    instance: Option<i64>,
    pixels: Vec<f64>,
}

fn decode_pixels(obj: &DefaultDicomObject, path: &Path, count: usize) -> Result<Vec<f64>> {
    let unsupported = |reason: String| Error::Unsupported {
        path: path.to_path_buf(),
        reason,
    };
    let ts = obj.meta().transfer_syntax().trim_end_matches('\0');
    if !NATIVE_TRANSFER_SYNTAXES.contains(&ts) {
        return Err(unsupported(format!("compressed transfer syntax {ts}")));
    }
    let samples = int(obj, tags::SAMPLES_PER_PIXEL).unwrap_or(1);
    if samples != 1 {
        return Err(unsupported(format!("{samples} samples per pixel")));
    }
    let bits = int(obj, tags::BITS_ALLOCATED)
        .ok_or_else(|| Error::format("DICOM", path, "missing BitsAllocated"))?;
    let signed = int(obj, tags::PIXEL_REPRESENTATION).unwrap_or(0) == 1;
    let elem = obj
        .element_opt(tags::PIXEL_DATA)
        .ok()
        .flatten()
        .ok_or_else(|| Error::format("DICOM", path, "missing PixelData"))?;
    let prim = match elem.value() {
        Value::Primitive(p) => p,
        _ => return Err(unsupported("encapsulated pixel data".into())),
    };
    let big_endian = ts == "1.2.840.10008.1.2.2";
    let bytes: Cow<'_, [u8]> = match prim {
        PrimitiveValue::U8(b) => Cow::Borrowed(&b[..]),
        PrimitiveValue::U16(w) => Cow::Owned(w.iter().flat_map(|v| v.to_le_bytes()).collect()),
        PrimitiveValue::I16(w) => Cow::Owned(w.iter().flat_map(|v| v.to_le_bytes()).collect()),
        other => Cow::Owned(other.to_bytes().into_owned()),
    };
    // U16/I16 words were already decoded to native values; only raw byte
    // buffers carry the transfer syntax byte order.
    let swap = big_endian && matches!(prim, PrimitiveValue::U8(_));
    let width = match bits {
        8 => 1,
        16 => 2,
        32 => 4,
        b => return Err(unsupported(format!("{b} bits allocated"))),
    };
    if bytes.len() < count * width {
        return Err(Error::format(
            "DICOM",
            path,
            format!(
                "truncated pixel data: {} bytes, expected {}",
                bytes.len(),
                count * width
            ),
        ));
    }
    let word = |i: usize| -> [u8; 4] {
        let mut w = [0u8; 4];
        w[..width].copy_from_slice(&bytes[i * width..(i + 1) * width]);
        if swap {
            w[..width].reverse();
        }
        w
    };
    let out = (0..count)
        .map(|i| {
            let w = word(i);
            match (width, signed) {
                (1, false) => f64::from(w[0]),
                (1, true) => f64::from(w[0] as i8),
                (2, false) => f64::from(u16::from_le_bytes([w[0], w[1]])),
                (2, true) => f64::from(i16::from_le_bytes([w[0], w[1]])),
                (_, false) => f64::from(u32::from_le_bytes(w)),
                (_, true) => f64::from(i32::from_le_bytes(w)),
            }
        })
        .collect();
    Ok(out)
}

fn read_slice(path: &Path) -> Result<(SliceFile, DefaultDicomObject)> {
    let obj = open(path)?;
    let rows = int(&obj, tags::ROWS).ok_or_else(|| Error::format("DICOM", path, "missing Rows"))?;
    let cols =
        int(&obj, tags::COLUMNS).ok_or_else(|| Error::format("DICOM", path, "missing Columns"))?;
    if rows <= 0 || cols <= 0 {
        return Err(Error::format(
            "DICOM",
            path,
            format!("image size {rows}x{cols}"),
        ));
    }
    let (rows, cols) = (rows as usize, cols as usize);
    let frames = int(&obj, tags::NUMBER_OF_FRAMES).unwrap_or(1).max(1) as usize;
    let slope = float(&obj, tags::RESCALE_SLOPE)
        .filter(|s| *s != 0.0)
        .unwrap_or(1.0);
    let intercept = float(&obj, tags::RESCALE_INTERCEPT).unwrap_or(0.0);
    let mut pixels = decode_pixels(&obj, path, rows * cols * frames)?;
    if slope != 1.0 || intercept != 0.0 {
        pixels.iter_mut().for_each(|v| *v = *v * slope + intercept);
    }
    let position = floats(&obj, tags::IMAGE_POSITION_PATIENT)
        .filter(|v| v.len() == 3)
        .map(|v| [v[0], v[1], v[2]]);
    let orientation = floats(&obj, tags::IMAGE_ORIENTATION_PATIENT)
        .filter(|v| v.len() == 6)
        .map(|v| [v[0], v[1], v[2], v[3], v[4], v[5]]);
    let slice = SliceFile {
        path: path.to_path_buf(),
        rows,
        cols,
        frames,
        position,
        orientation,
        instance: int(&obj, tags::INSTANCE_NUMBER),
        pixels,
    };
    Ok((slice, obj))
}

fn slice_normal(orientation: Option<[f64; 6]>) -> [f64; 3] {
    match orientation {
        Some(o) => {
            let (r, c) = ([o[0], o[1], o[2]], [o[3], o[4], o[5]]);
            [
                r[1] * c[2] - r[2] * c[1],
                r[2] * c[0] - r[0] * c[2],
                r[0] * c[1] - r[1] * c[0],
            ]
        }
        None => [0.0, 0.0, 1.0],
    }
}

/// A decoded series plus the header of its first slice, kept for tag lookups.
pub struct DicomSeries {
    pub volume: Volume,
    pub metadata: MetadataRecord,
    first: DefaultDicomObject,
}

impl DicomSeries {
    pub fn lookup(&self, tag: &TagName) -> Option<String> {
        lookup(&self.first, tag)
    }
}

/// Resolves a user-requested tag against a parsed header.
pub fn lookup(obj: &DefaultDicomObject, tag: &TagName) -> Option<String> {
    let elem = match tag {
        TagName::Keyword(k) => match obj.element_by_name_opt(k) {
            Ok(e) => e,
            Err(_) => {
                log::warn!("unknown DICOM keyword {k}");
                None
            }
        },
        TagName::Numeric { group, element, .. } => {
            obj.element_opt(Tag(*group, *element)).ok().flatten()
        }
    }?;
    match elem.to_str() {
        Ok(s) => {
            let s = s.trim_matches(|c: char| c == '\0' || c.is_whitespace());
            (!s.is_empty()).then(|| s.to_string())
        }
        Err(_) => {
            log::warn!("tag {tag} has no text representation");
            None
        }
    }
}

pub fn read_series(files: &[PathBuf], id: &str) -> Result<DicomSeries> {
    if files.is_empty() {
        return Err(Error::InvalidVolume(format!("{id}: empty DICOM series")));
    }
    let mut slices = Vec::with_capacity(files.len());
    for path in files {
        slices.push(read_slice(path)?);
    }
    let (rows, cols) = (slices[0].0.rows, slices[0].0.cols);
    if let Some((s, _)) = slices
        .iter()
        .find(|(s, _)| (s.rows, s.cols) != (rows, cols))
    {
        return Err(Error::InvalidVolume(format!(
            "{id}: inconsistent slice dimensions, {} is {}x{} but the series starts with {rows}x{cols}",
            s.path.display(),
            s.rows,
            s.cols
        )));
    }

    let normal = slice_normal(slices[0].0.orientation);
    let all_positioned = slices.iter().all(|(s, _)| s.position.is_some());
    let key = |s: &SliceFile| {
        s.position
            .filter(|_| all_positioned)
            .map(|p| p[0] * normal[0] + p[1] * normal[1] + p[2] * normal[2])
    };
    slices.sort_by(|(a, _), (b, _)| {
        let by_pos = match (key(a), key(b)) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            _ => std::cmp::Ordering::Equal,
        };
        by_pos
            .then_with(|| a.instance.cmp(&b.instance))
            .then_with(|| a.path.cmp(&b.path))
    });

    let num: usize = slices.iter().map(|(s, _)| s.frames).sum();
    let mut data = Vec::with_capacity(num * rows * cols);
    for (s, _) in &slices {
        data.extend_from_slice(&s.pixels);
    }
    let voxels = Array3::from_shape_vec((num, rows, cols), data)
        .map_err(|e| Error::InvalidVolume(format!("{id}: {e}")))?;

    let first = slices.swap_remove(0).1;
    let pixel_spacing = floats(&first, tags::PIXEL_SPACING).filter(|v| v.len() == 2);
    let vry = pixel_spacing.as_ref().and_then(|v| positive(v[0]));
    let vrx = pixel_spacing.as_ref().and_then(|v| positive(v[1]));
    let vrz = float(&first, tags::SLICE_THICKNESS)
        .and_then(positive)
        .or_else(|| float(&first, tags::SPACING_BETWEEN_SLICES).and_then(positive));
    let volume = Volume::new(
        id,
        voxels,
        Spacing {
            x: vrx,
            y: vry,
            z: vrz,
        },
    )?;
    let metadata = MetadataRecord {
        mfr: text(&first, tags::MANUFACTURER),
        mfs: float(&first, tags::MAGNETIC_FIELD_STRENGTH),
        tr: float(&first, tags::REPETITION_TIME),
        te: float(&first, tags::ECHO_TIME),
        ..MetadataRecord::from_geometry(&volume)
    };
    Ok(DicomSeries {
        volume,
        metadata,
        first,
    })
}
