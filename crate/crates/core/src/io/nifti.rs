//! NIfTI-1 single-file volumes (`.nii`, `.nii.gz`).
//!
//! Only the fields needed for quality control are interpreted: dimensions,
//! voxel sizes, data type, the linear intensity rescale and the data offset.
//! Orientation matrices are ignored; voxels are laid out with `x` as the
//! column index, `y` as the row index and `z` as the slice index.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use ndarray::Array3;

use crate::error::{Error, Result};
use crate::volume::{Spacing, Volume};

const HEADER_SIZE: usize = 348;
const DEFAULT_VOX_OFFSET: usize = 352;

mod offsets {
    pub const SIZEOF_HDR: usize = 0;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const XYZT_UNITS: usize = 123;
    pub const MAGIC: usize = 344;
}

/// NIfTI-1 data type codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DataType {
    U8,
    I8,
    I16,
    U16,
    I32,
    U32,
    I64,
    U64,
    F32,
    F64,
}

impl DataType {
    fn from_code(code: i16) -> Option<Self> {
        Some(match code {
            2 => DataType::U8,
            4 => DataType::I16,
            8 => DataType::I32,
            16 => DataType::F32,
            64 => DataType::F64,
            256 => DataType::I8,
            512 => DataType::U16,
            768 => DataType::U32,
            1024 => DataType::I64,
            1280 => DataType::U64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            DataType::U8 | DataType::I8 => 1,
            DataType::I16 | DataType::U16 => 2,
            DataType::I32 | DataType::U32 | DataType::F32 => 4,
            DataType::I64 | DataType::U64 | DataType::F64 => 8,
        }
    }

    fn decode<B: ByteOrder>(self, b: &[u8]) -> f64 {
        match self {
            DataType::U8 => f64::from(b[0]),
            DataType::I8 => f64::from(b[0] as i8),
            DataType::I16 => f64::from(B::read_i16(b)),
            DataType::U16 => f64::from(B::read_u16(b)),
            DataType::I32 => f64::from(B::read_i32(b)),
            DataType::U32 => f64::from(B::read_u32(b)),
            DataType::I64 => B::read_i64(b) as f64,
            DataType::U64 => B::read_u64(b) as f64,
            DataType::F32 => f64::from(B::read_f32(b)),
            DataType::F64 => B::read_f64(b),
        }
    }
}

/// Decoded header fields.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeader {
    pub dim: [i16; 8],
    pub pixdim: [f32; 8],
    pub datatype: i16,
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub big_endian: bool,
}

fn is_gzip(path: &Path) -> bool {
    path.file_name()
        .and_then(|n| n.to_str())
        .map(|n| n.to_ascii_lowercase().ends_with(".gz"))
        .unwrap_or(false)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if is_gzip(path) {
        let mut out = Vec::new();
        MultiGzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::format("NIfTI", path, format!("gzip: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn parse_header_with<B: ByteOrder>(bytes: &[u8], big_endian: bool) -> NiftiHeader {
    let mut dim = [0i16; 8];
    let mut pixdim = [0f32; 8];
    for k in 0..8 {
        dim[k] = B::read_i16(&bytes[offsets::DIM + 2 * k..]);
        pixdim[k] = B::read_f32(&bytes[offsets::PIXDIM + 4 * k..]);
    }
    NiftiHeader {
        dim,
        pixdim,
        datatype: B::read_i16(&bytes[offsets::DATATYPE..]),
        vox_offset: B::read_f32(&bytes[offsets::VOX_OFFSET..]),
        scl_slope: B::read_f32(&bytes[offsets::SCL_SLOPE..]),
        scl_inter: B::read_f32(&bytes[offsets::SCL_INTER..]),
        big_endian,
    }
}

/// Parses the 348-byte header, detecting byte order from `sizeof_hdr`.
pub fn parse_header(bytes: &[u8], path: &Path) -> Result<NiftiHeader> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::format("NIfTI", path, "truncated header"));
    }
    let header = if LittleEndian::read_i32(&bytes[offsets::SIZEOF_HDR..]) == HEADER_SIZE as i32 {
        parse_header_with::<LittleEndian>(bytes, false)
    } else if BigEndian::read_i32(&bytes[offsets::SIZEOF_HDR..]) == HEADER_SIZE as i32 {
        parse_header_with::<BigEndian>(bytes, true)
    } else {
        return Err(Error::format(
            "NIfTI",
            path,
            "sizeof_hdr is not 348 (NIfTI-2 and Analyze files are not supported)",
        ));
    };
    let magic = &bytes[offsets::MAGIC..offsets::MAGIC + 4];
    if magic != b"n+1\0" {
        return Err(Error::format(
            "NIfTI",
            path,
            "magic is not \"n+1\" (detached .hdr/.img pairs are not supported)",
        ));
    }
    Ok(header)
}

/// Reads a `.nii` or `.nii.gz` file. Intensities have the header's linear
/// rescale applied when `scl_slope` is non-zero. A fourth dimension is
/// truncated to its first volume.
pub fn read(path: &Path, id: &str) -> Result<Volume> {
    let bytes = read_bytes(path)?;
    let header = parse_header(&bytes, path)?;
    let ndim = header.dim[0];
    if !(1..=7).contains(&ndim) {
        return Err(Error::format("NIfTI", path, format!("dim[0] = {ndim}")));
    }
    let extent = |k: usize| -> Result<usize> {
        if k as i16 > ndim {
            return Ok(1);
        }
        let d = header.dim[k];
        if d < 1 {
            return Err(Error::format("NIfTI", path, format!("dim[{k}] = {d}")));
        }
        Ok(d as usize)
    };
    let (nx, ny, nz) = (extent(1)?, extent(2)?, extent(3)?);
    if (4..=7).any(|k| extent(k).map(|d| d > 1).unwrap_or(false)) {
        log::warn!(
            "{}: more than three dimensions, using the first volume",
            path.display()
        );
    }
    let dtype = DataType::from_code(header.datatype).ok_or_else(|| Error::Unsupported {
        path: path.to_path_buf(),
        reason: format!("NIfTI datatype {}", header.datatype),
    })?;
    let offset = header.vox_offset.max(0.0) as usize;
    let count = nx * ny * nz;
    let needed = offset + count * dtype.size();
    if bytes.len() < needed {
        return Err(Error::format(
            "NIfTI",
            path,
            format!("truncated data: {} bytes, expected {needed}", bytes.len()),
        ));
    }
    let data = &bytes[offset..needed];
    let (slope, inter) = if header.scl_slope != 0.0 && header.scl_slope.is_finite() {
        (
            f64::from(header.scl_slope),
            if header.scl_inter.is_finite() {
                f64::from(header.scl_inter)
            } else {
                0.0
            },
        )
    } else {
        (1.0, 0.0)
    };
    let decode = |i: usize| {
        let b = &data[i * dtype.size()..];
        let raw = if header.big_endian {
            dtype.decode::<BigEndian>(b)
        } else {
            dtype.decode::<LittleEndian>(b)
        };
        raw * slope + inter
    };
    // x varies fastest on disk, which is C order for (z, y, x).
    let voxels = Array3::from_shape_fn((nz, ny, nx), |(z, y, x)| decode(x + nx * (y + ny * z)));
    let spacing = Spacing::new(
        f64::from(header.pixdim[1]),
        f64::from(header.pixdim[2]),
        if ndim >= 3 {
            f64::from(header.pixdim[3])
        } else {
            0.0
        },
    );
    Volume::new(id, voxels, spacing)
}

/// Writes a volume as a float64 NIfTI-1 file; a `.gz` suffix compresses it.
/// Missing spacing components are written as zero.
pub fn write(volume: &Volume, path: &Path) -> Result<()> {
    let (nz, ny, nx) = volume.dims();
    let to_i16 = |d: usize| {
        i16::try_from(d)
            .map_err(|_| Error::InvalidArgument(format!("extent {d} exceeds the NIfTI-1 limit")))
    };
    let mut buf = vec![0u8; DEFAULT_VOX_OFFSET + nx * ny * nz * 8];
    let hdr = &mut buf[..];
    LittleEndian::write_i32(&mut hdr[offsets::SIZEOF_HDR..], HEADER_SIZE as i32);
    let dims = [3, to_i16(nx)?, to_i16(ny)?, to_i16(nz)?, 1, 1, 1, 1];
    for (k, d) in dims.iter().enumerate() {
        LittleEndian::write_i16(&mut hdr[offsets::DIM + 2 * k..], *d);
    }
    LittleEndian::write_i16(&mut hdr[offsets::DATATYPE..], 64);
    LittleEndian::write_i16(&mut hdr[offsets::BITPIX..], 64);
    let sp = volume.spacing();
    let pixdim = [
        1.0,
        sp.x.unwrap_or(0.0) as f32,
        sp.y.unwrap_or(0.0) as f32,
        sp.z.unwrap_or(0.0) as f32,
        0.0,
        0.0,
        0.0,
        0.0,
    ];
    for (k, p) in pixdim.iter().enumerate() {
        LittleEndian::write_f32(&mut hdr[offsets::PIXDIM + 4 * k..], *p);
    }
    LittleEndian::write_f32(&mut hdr[offsets::VOX_OFFSET..], DEFAULT_VOX_OFFSET as f32);
    LittleEndian::write_f32(&mut hdr[offsets::SCL_SLOPE..], 1.0);
    // millimetres, seconds
    hdr[offsets::XYZT_UNITS] = 2 | 8;
    hdr[offsets::MAGIC..offsets::MAGIC + 4].copy_from_slice(b"n+1\0");
    let data = &mut buf[DEFAULT_VOX_OFFSET..];
    for (i, v) in volume.voxels().iter().enumerate() {
        LittleEndian::write_f64(&mut data[8 * i..], *v);
    }

    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let result = if is_gzip(path) {
        let mut enc = GzEncoder::new(file, Compression::fast());
        enc.write_all(&buf).and_then(|_| enc.finish().map(|_| ()))
    } else {
        let mut file = file;
        file.write_all(&buf)
    };
    result.map_err(|e| Error::io(path, e))
}
