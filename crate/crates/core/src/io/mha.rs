//! MetaImage volumes (`.mha`): a `Key = Value` text header followed by raw
//! voxel data, optionally zlib-compressed.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use flate2::read::ZlibDecoder;
use indexmap::IndexMap;
use ndarray::Array3;

use crate::error::{Error, Result};
use crate::volume::{Spacing, Volume};

#[derive(Debug, Clone, Copy)]
enum ElementType {
    Char,
    UChar,
    Short,
    UShort,
    Int,
    UInt,
    LongLong,
    ULongLong,
    Float,
    Double,
}

impl ElementType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "MET_CHAR" => ElementType::Char,
            "MET_UCHAR" => ElementType::UChar,
            "MET_SHORT" => ElementType::Short,
            "MET_USHORT" => ElementType::UShort,
            "MET_INT" | "MET_LONG" => ElementType::Int,
            "MET_UINT" | "MET_ULONG" => ElementType::UInt,
            "MET_LONG_LONG" => ElementType::LongLong,
            "MET_ULONG_LONG" => ElementType::ULongLong,
            "MET_FLOAT" => ElementType::Float,
            "MET_DOUBLE" => ElementType::Double,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            ElementType::Char | ElementType::UChar => 1,
            ElementType::Short | ElementType::UShort => 2,
            ElementType::Int | ElementType::UInt | ElementType::Float => 4,
            ElementType::LongLong | ElementType::ULongLong | ElementType::Double => 8,
        }
    }

    fn decode<B: ByteOrder>(self, b: &[u8]) -> f64 {
        match self {
            ElementType::Char => f64::from(b[0] as i8),
            ElementType::UChar => f64::from(b[0]),
            ElementType::Short => f64::from(B::read_i16(b)),
            ElementType::UShort => f64::from(B::read_u16(b)),
            ElementType::Int => f64::from(B::read_i32(b)),
            ElementType::UInt => f64::from(B::read_u32(b)),
            ElementType::LongLong => B::read_i64(b) as f64,
            ElementType::ULongLong => B::read_u64(b) as f64,
            ElementType::Float => f64::from(B::read_f32(b)),
            ElementType::Double => B::read_f64(b),
        }
    }
}

/// A decoded MetaImage file: the volume plus every header field, kept so that
/// user-requested tags can be resolved against it.
#[derive(Debug, Clone)]
pub struct MetaImage {
    pub volume: Volume,
    pub header: IndexMap<String, String>,
}

fn parse_bool(s: &str) -> bool {
    matches!(s.to_ascii_lowercase().as_str(), "true" | "1" | "yes")
}

fn numbers<T: std::str::FromStr>(s: &str, key: &str, path: &Path) -> Result<Vec<T>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| Error::format("MetaImage", path, format!("bad {key} value {t:?}")))
        })
        .collect()
}

pub fn read(path: &Path, id: &str) -> Result<MetaImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut header = IndexMap::new();
    let mut pos = 0usize;
    let mut data_file = None;
    while pos < bytes.len() {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| pos + p + 1)
            .unwrap_or(bytes.len());
        let line = std::str::from_utf8(&bytes[pos..end])
            .map_err(|_| Error::format("MetaImage", path, "non-text header line"))?
            .trim();
        pos = end;
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::format("MetaImage", path, format!("bad header line {line:?}")))?;
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        if key.eq_ignore_ascii_case("ElementDataFile") {
            data_file = Some(value.clone());
            header.insert(key, value);
            break;
        }
        header.insert(key, value);
    }
    let data_file =
        data_file.ok_or_else(|| Error::format("MetaImage", path, "missing ElementDataFile"))?;
    let get = |k: &str| {
        header
            .iter()
            .find(|(key, _)| key.eq_ignore_ascii_case(k))
            .map(|(_, v)| v.as_str())
    };

    let dims: Vec<usize> = numbers(
        get("DimSize").ok_or_else(|| Error::format("MetaImage", path, "missing DimSize"))?,
        "DimSize",
        path,
    )?;
    if let Some(n) = get("NDims") {
        let n: usize = n
            .parse()
            .map_err(|_| Error::format("MetaImage", path, "bad NDims"))?;
        if n != dims.len() {
            return Err(Error::format(
                "MetaImage",
                path,
                "NDims does not match DimSize",
            ));
        }
    }
    if dims.is_empty() || dims.len() > 4 || dims.contains(&0) {
        return Err(Error::format(
            "MetaImage",
            path,
            format!("DimSize {dims:?}"),
        ));
    }
    if let Some(c) = get("ElementNumberOfChannels") {
        if c.trim() != "1" {
            return Err(Error::Unsupported {
                path: path.to_path_buf(),
                reason: format!("{c} channels per voxel"),
            });
        }
    }
    let spacing: Vec<f64> = match get("ElementSpacing").or_else(|| get("ElementSize")) {
        Some(s) => numbers(s, "ElementSpacing", path)?,
        None => Vec::new(),
    };
    let etype = get("ElementType")
        .and_then(ElementType::parse)
        .ok_or_else(|| Error::Unsupported {
            path: path.to_path_buf(),
            reason: format!("ElementType {:?}", get("ElementType")),
        })?;
    let big_endian = get("ElementByteOrderMSB")
        .or_else(|| get("BinaryDataByteOrderMSB"))
        .map(parse_bool)
        .unwrap_or(false);
    let compressed = get("CompressedData").map(parse_bool).unwrap_or(false);

    let raw: Vec<u8> = if data_file.eq_ignore_ascii_case("LOCAL") {
        bytes[pos..].to_vec()
    } else {
        let p = path
            .parent()
            .map(|d| d.join(&data_file))
            .unwrap_or_else(|| data_file.clone().into());
        fs::read(&p).map_err(|e| Error::io(&p, e))?
    };
    let raw = if compressed {
        let mut out = Vec::new();
        ZlibDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::format("MetaImage", path, format!("zlib: {e}")))?;
        out
    } else {
        raw
    };

    let nx = dims[0];
    let ny = dims.get(1).copied().unwrap_or(1);
    let nz = dims.get(2).copied().unwrap_or(1);
    if dims.get(3).copied().unwrap_or(1) > 1 {
        log::warn!(
            "{}: more than three dimensions, using the first volume",
            path.display()
        );
    }
    let count = nx * ny * nz;
    if raw.len() < count * etype.size() {
        return Err(Error::format(
            "MetaImage",
            path,
            format!(
                "truncated data: {} bytes, expected {}",
                raw.len(),
                count * etype.size()
            ),
        ));
    }
    let decode = |i: usize| {
        let b = &raw[i * etype.size()..];
        if big_endian {
            etype.decode::<BigEndian>(b)
        } else {
            etype.decode::<LittleEndian>(b)
        }
    };
    let voxels = Array3::from_shape_fn((nz, ny, nx), |(z, y, x)| decode(x + nx * (y + ny * z)));
    let sp = |k: usize| spacing.get(k).copied().unwrap_or(0.0);
    let volume = Volume::new(id, voxels, Spacing::new(sp(0), sp(1), sp(2)))?;
    Ok(MetaImage { volume, header })
}

/// Writes an uncompressed float64 MetaImage with local data.
pub fn write(volume: &Volume, path: &Path) -> Result<()> {
    let (nz, ny, nx) = volume.dims();
    let sp = volume.spacing();
    let mut out = format!(
        "ObjectType = Image\nNDims = 3\nBinaryData = True\nBinaryDataByteOrderMSB = False\n\
         CompressedData = False\nDimSize = {nx} {ny} {nz}\n"
    );
    if let (Some(x), Some(y), Some(z)) = (sp.x, sp.y, sp.z) {
        out.push_str(&format!("ElementSpacing = {x} {y} {z}\n"));
    }
    out.push_str("ElementType = MET_DOUBLE\nElementDataFile = LOCAL\n");
    let mut buf = out.into_bytes();
    let start = buf.len();
    buf.resize(start + nx * ny * nz * 8, 0);
    for (i, v) in volume.voxels().iter().enumerate() {
        LittleEndian::write_f64(&mut buf[start + 8 * i..], *v);
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}
