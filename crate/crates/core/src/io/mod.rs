//! Dataset discovery and decoding.

pub mod dicom;
pub mod mha;
pub mod nifti;
pub mod tags;

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::volume::{MetadataRecord, Volume};
pub use tags::{parse_tag_list, read_tag_list, TagName};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    DicomSeries,
    Nifti,
    MetaImage,
}

/// One dataset found under the input root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub id: String,
    pub format: DatasetFormat,
    pub files: Vec<PathBuf>,
}

/// A decoded dataset.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub volume: Volume,
    pub metadata: MetadataRecord,
}

fn classify(path: &Path) -> Option<DatasetFormat> {
    let name = path.file_name()?.to_str()?.to_ascii_lowercase();
    if name.ends_with(".nii") || name.ends_with(".nii.gz") {
        return Some(DatasetFormat::Nifti);
    }
    if name.ends_with(".mha") {
        return Some(DatasetFormat::MetaImage);
    }
    if name.ends_with(".dcm") || name.ends_with(".ima") {
        return Some(DatasetFormat::DicomSeries);
    }
    // extension-less files are common in DICOM exports
    if !name.contains('.') && has_dicom_magic(path) {
        return Some(DatasetFormat::DicomSeries);
    }
    None
}

fn has_dicom_magic(path: &Path) -> bool {
    let mut buf = [0u8; 132];
    fs::File::open(path)
        .and_then(|mut f| f.read_exact(&mut buf))
        .map(|_| &buf[128..] == b"DICM")
        .unwrap_or(false)
}

fn strip_format_ext(name: &str) -> &str {
    let lower = name.to_ascii_lowercase();
    for ext in [".nii.gz", ".nii", ".mha"] {
        if lower.ends_with(ext) {
            return &name[..name.len() - ext.len()];
        }
    }
    name
}

fn id_from_relative(rel: &Path) -> String {
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("_")
}

/// Finds every dataset below `root`.
///
/// Each directory holding DICOM files is one dataset; each NIfTI or MetaImage
/// file is one dataset. `root` may also be a single volume file.
/// Unrecognized files are skipped with a warning. Descriptors are sorted by id.
pub fn discover_cohort(root: &Path) -> Result<Vec<DatasetDescriptor>> {
    let meta = fs::metadata(root).map_err(|e| Error::UnreadableRoot {
        path: root.to_path_buf(),
        reason: e.to_string(),
    })?;
    if meta.is_file() {
        return match classify(root) {
            Some(format) => {
                let name = root
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                Ok(vec![DatasetDescriptor {
                    id: strip_format_ext(&name).to_string(),
                    format,
                    files: vec![root.to_path_buf()],
                }])
            }
            None => Err(Error::UnreadableRoot {
                path: root.to_path_buf(),
                reason: "not a directory or a supported volume file".into(),
            }),
        };
    }
    fs::read_dir(root).map_err(|e| Error::UnreadableRoot {
        path: root.to_path_buf(),
        reason: e.to_string(),
    })?;

    let root_name = root
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "root".to_string());
    let mut series: BTreeMap<PathBuf, Vec<PathBuf>> = BTreeMap::new();
    let mut out = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                log::warn!("skipping unreadable entry: {e}");
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        let rel = path.strip_prefix(root).unwrap_or(path);
        match classify(path) {
            Some(DatasetFormat::DicomSeries) => {
                let dir = rel.parent().map(Path::to_path_buf).unwrap_or_default();
                series.entry(dir).or_default().push(path.to_path_buf());
            }
            Some(format) => {
                let name = rel
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let rel_id = rel.with_file_name(strip_format_ext(&name));
                out.push(DatasetDescriptor {
                    id: id_from_relative(&rel_id),
                    format,
                    files: vec![path.to_path_buf()],
                });
            }
            None => log::warn!("skipping unrecognized file {}", path.display()),
        }
    }
    for (dir, files) in series {
        let id = if dir.as_os_str().is_empty() {
            root_name.clone()
        } else {
            id_from_relative(&dir)
        };
        out.push(DatasetDescriptor {
            id,
            format: DatasetFormat::DicomSeries,
            files,
        });
    }
    out.sort_by(|a, b| a.id.cmp(&b.id).then_with(|| a.files.cmp(&b.files)));
    // ids must be unique: they name output folders and table rows
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for d in &mut out {
        let n = seen.entry(d.id.clone()).or_insert(0);
        *n += 1;
        if *n > 1 {
            d.id = format!("{}_{}", d.id, n);
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

/// Decodes a dataset and its header metadata, resolving `tags` into
/// `metadata.extra`. Fails for corrupt files, inconsistent series and
/// volumes too small to measure.
pub fn load_volume(desc: &DatasetDescriptor, tags: &[TagName]) -> Result<LoadedDataset> {
    let (volume, mut metadata, extra) = match desc.format {
        DatasetFormat::Nifti => {
            let path = single_file(desc)?;
            let volume = nifti::read(path, &desc.id)?;
            let metadata = MetadataRecord::from_geometry(&volume);
            (volume, metadata, missing_tags(tags))
        }
        DatasetFormat::MetaImage => {
            let m = mha::read(single_file(desc)?, &desc.id)?;
            let metadata = MetadataRecord::from_geometry(&m.volume);
            let extra = header_tags(&m.header, tags);
            (m.volume, metadata, extra)
        }
        DatasetFormat::DicomSeries => {
            let s = dicom::read_series(&desc.files, &desc.id)?;
            let extra = tags
                .iter()
                .map(|t| (t.as_str().to_string(), s.lookup(t)))
                .collect();
            (s.volume, s.metadata, extra)
        }
    };
    volume.ensure_measurable()?;
    metadata.extra = extra;
    Ok(LoadedDataset { volume, metadata })
}

/// Resolves user-requested tags from the dataset header; absent tags map to
/// `None`. NIfTI headers carry no named tags.
pub fn extract_extra_tags(
    desc: &DatasetDescriptor,
    tags: &[TagName],
) -> Result<IndexMap<String, Option<String>>> {
    if tags.is_empty() {
        return Ok(IndexMap::new());
    }
    match desc.format {
        DatasetFormat::Nifti => Ok(missing_tags(tags)),
        DatasetFormat::MetaImage => {
            let m = mha::read(single_file(desc)?, &desc.id)?;
            Ok(header_tags(&m.header, tags))
        }
        DatasetFormat::DicomSeries => {
            let first = desc
                .files
                .first()
                .ok_or_else(|| Error::InvalidVolume(format!("{}: empty DICOM series", desc.id)))?;
            let obj = dicom::open(first)?;
            Ok(tags
                .iter()
                .map(|t| (t.as_str().to_string(), dicom::lookup(&obj, t)))
                .collect())
        }
    }
}

fn single_file(desc: &DatasetDescriptor) -> Result<&Path> {
    match desc.files.as_slice() {
        [one] => Ok(one),
        _ => Err(Error::InvalidArgument(format!(
            "{}: expected exactly one file, got {}",
            desc.id,
            desc.files.len()
        ))),
    }
}

fn missing_tags(tags: &[TagName]) -> IndexMap<String, Option<String>> {
    tags.iter()
        .map(|t| (t.as_str().to_string(), None))
        .collect()
}

fn header_tags(
    header: &IndexMap<String, String>,
    tags: &[TagName],
) -> IndexMap<String, Option<String>> {
    tags.iter()
        .map(|t| {
            let v = header
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(t.as_str()))
                .map(|(_, v)| v.clone());
            (t.as_str().to_string(), v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Spacing;
    use ndarray::Array3;

    fn vol(id: &str) -> Volume {
        Volume::new(
            id,
            Array3::from_elem((2, 8, 8), 1.0),
            Spacing::new(1.0, 1.0, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn discovers_files_sorted() {
        let dir = tempfile::tempdir().unwrap();
        mha::write(&vol("b"), &dir.path().join("b.mha")).unwrap();
        nifti::write(&vol("a"), &dir.path().join("a.nii")).unwrap();
        fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let found = discover_cohort(dir.path()).unwrap();
        let ids: Vec<_> = found.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(found[0].format, DatasetFormat::Nifti);
        assert_eq!(found[1].format, DatasetFormat::MetaImage);
    }

    #[test]
    fn empty_and_missing_roots() {
        let dir = tempfile::tempdir().unwrap();
        assert!(discover_cohort(dir.path()).unwrap().is_empty());
        assert!(matches!(
            discover_cohort(&dir.path().join("nope")),
            Err(Error::UnreadableRoot { .. })
        ));
    }

    #[test]
    fn duplicate_ids_made_unique() {
        let dir = tempfile::tempdir().unwrap();
        nifti::write(&vol("a"), &dir.path().join("a.nii")).unwrap();
        mha::write(&vol("a"), &dir.path().join("a.mha")).unwrap();
        let ids: Vec<_> = discover_cohort(dir.path())
            .unwrap()
            .into_iter()
            .map(|d| d.id)
            .collect();
        assert_eq!(ids, ["a", "a_2"]);
    }

    #[test]
    fn mha_tags_and_nifti_missing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.mha");
        mha::write(&vol("m"), &p).unwrap();
        let desc = DatasetDescriptor {
            id: "m".into(),
            format: DatasetFormat::MetaImage,
            files: vec![p],
        };
        let tags = parse_tag_list("ObjectType\nStationName\n");
        let got = extract_extra_tags(&desc, &tags).unwrap();
        assert_eq!(got["ObjectType"].as_deref(), Some("Image"));
        assert_eq!(got["StationName"], None);
        assert!(extract_extra_tags(&desc, &[]).unwrap().is_empty());
    }

    #[test]
    fn load_rejects_small_slices() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.nii");
        let v = Volume::new("s", Array3::zeros((4, 4, 4)), Spacing::new(1.0, 1.0, 1.0)).unwrap();
        nifti::write(&v, &p).unwrap();
        let desc = DatasetDescriptor {
            id: "s".into(),
            format: DatasetFormat::Nifti,
            files: vec![p],
        };
        assert!(matches!(
            load_volume(&desc, &[]),
            Err(Error::InvalidVolume(_))
        ));
    }
}
