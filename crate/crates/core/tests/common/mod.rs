#![allow(dead_code)]

use std::path::{Path, PathBuf};

use cohortqc::phantom::{self, PhantomSpec};
use cohortqc::{Spacing, Volume};
use dicom_core::value::PrimitiveValue;
use dicom_core::{DataElement, VR};
use dicom_dictionary_std::tags;
use dicom_object::{FileMetaTableBuilder, InMemDicomObject};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Header fields of one synthetic DICOM slice.
#[derive(Clone)]
pub struct Slice {
    pub rows: u16,
    pub cols: u16,
    pub pixels: Vec<u16>,
    pub position: Option<[f64; 3]>,
    pub instance: Option<i32>,
    pub pixel_spacing: Option<(f64, f64)>,
    pub thickness: Option<f64>,
    pub echo_time: Option<f64>,
    pub station: Option<&'static str>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

impl Slice {
    pub fn new(rows: u16, cols: u16, fill: impl Fn(usize, usize) -> u16) -> Slice {
        let pixels = (0..rows as usize)
            .flat_map(|r| (0..cols as usize).map(move |c| (r, c)))
            .map(|(r, c)| fill(r, c))
            .collect();
        Slice {
            rows,
            cols,
            pixels,
            position: None,
            instance: None,
            pixel_spacing: Some((0.5, 0.5)),
            thickness: Some(3.0),
            echo_time: Some(12.0),
            station: None,
            slope: None,
            intercept: None,
        }
    }
}

fn ds(v: f64) -> String {
    format!("{v}")
}

pub fn write_dicom(path: &Path, s: &Slice) {
    let mut elems = vec![
        DataElement::new(
            tags::SOP_CLASS_UID,
            VR::UI,
            PrimitiveValue::from("1.2.840.10008.5.1.4.1.1.4"),
        ),
        DataElement::new(
            tags::SOP_INSTANCE_UID,
            VR::UI,
            PrimitiveValue::from("1.2.3.4.5.6"),
        ),
        DataElement::new(tags::MODALITY, VR::CS, PrimitiveValue::from("MR")),
        DataElement::new(tags::MANUFACTURER, VR::LO, PrimitiveValue::from("ACME")),
        DataElement::new(
            tags::MAGNETIC_FIELD_STRENGTH,
            VR::DS,
            PrimitiveValue::from("3"),
        ),
        DataElement::new(tags::REPETITION_TIME, VR::DS, PrimitiveValue::from("2000")),
        DataElement::new(tags::SAMPLES_PER_PIXEL, VR::US, PrimitiveValue::from(1u16)),
        DataElement::new(
            tags::PHOTOMETRIC_INTERPRETATION,
            VR::CS,
            PrimitiveValue::from("MONOCHROME2"),
        ),
        DataElement::new(tags::ROWS, VR::US, PrimitiveValue::from(s.rows)),
        DataElement::new(tags::COLUMNS, VR::US, PrimitiveValue::from(s.cols)),
        DataElement::new(tags::BITS_ALLOCATED, VR::US, PrimitiveValue::from(16u16)),
        DataElement::new(tags::BITS_STORED, VR::US, PrimitiveValue::from(16u16)),
        DataElement::new(tags::HIGH_BIT, VR::US, PrimitiveValue::from(15u16)),
        DataElement::new(
            tags::PIXEL_REPRESENTATION,
            VR::US,
            PrimitiveValue::from(0u16),
        ),
        DataElement::new(
            tags::PIXEL_DATA,
            VR::OW,
            PrimitiveValue::U16(s.pixels.clone().into()),
        ),
    ];
    if let Some((r, c)) = s.pixel_spacing {
        elems.push(DataElement::new(
            tags::PIXEL_SPACING,
            VR::DS,
            PrimitiveValue::from(format!("{}\\{}", ds(r), ds(c))),
        ));
    }
    if let Some(t) = s.thickness {
        elems.push(DataElement::new(
            tags::SLICE_THICKNESS,
            VR::DS,
            PrimitiveValue::from(ds(t)),
        ));
    }
    if let Some(te) = s.echo_time {
        elems.push(DataElement::new(
            tags::ECHO_TIME,
            VR::DS,
            PrimitiveValue::from(ds(te)),
        ));
    }
    if let Some(p) = s.position {
        let text = format!("{}\\{}\\{}", ds(p[0]), ds(p[1]), ds(p[2]));
        elems.push(DataElement::new(
            tags::IMAGE_POSITION_PATIENT,
            VR::DS,
            PrimitiveValue::from(text),
        ));
        elems.push(DataElement::new(
            tags::IMAGE_ORIENTATION_PATIENT,
            VR::DS,
            PrimitiveValue::from("1\\0\\0\\0\\1\\0"),
        ));
    }
    if let Some(i) = s.instance {
        elems.push(DataElement::new(
            tags::INSTANCE_NUMBER,
            VR::IS,
            PrimitiveValue::from(i.to_string()),
        ));
    }
    if let Some(st) = s.station {
        elems.push(DataElement::new(
            tags::STATION_NAME,
            VR::SH,
            PrimitiveValue::from(st),
        ));
    }
    if let Some(v) = s.slope {
        elems.push(DataElement::new(
            tags::RESCALE_SLOPE,
            VR::DS,
            PrimitiveValue::from(ds(v)),
        ));
    }
    if let Some(v) = s.intercept {
        elems.push(DataElement::new(
            tags::RESCALE_INTERCEPT,
            VR::DS,
            PrimitiveValue::from(ds(v)),
        ));
    }
    let obj = InMemDicomObject::from_element_iter(elems)
        .with_meta(FileMetaTableBuilder::new().transfer_syntax("1.2.840.10008.1.2.1"))
        .expect("meta table");
    obj.write_to_file(path).expect("write dicom");
}

/// Writes a centred-disk phantom with `radius` as NIfTI under `dir`.
pub fn write_disk(
    dir: &Path,
    id: &str,
    dims: (usize, usize, usize),
    radius: f64,
    seed: u64,
) -> (PathBuf, Volume) {
    let mut spec = PhantomSpec::disk(id, dims, radius);
    spec.bg_intensity = 2.0;
    spec.artifacts = vec![phantom::Artifact::Noise { sigma: 3.0 }];
    spec.seed = seed;
    let (v, _) = phantom::generate(&spec).unwrap();
    let p = dir.join(format!("{id}.nii"));
    phantom::write_nifti(&v, &p).unwrap();
    (p, v)
}

/// Dice overlap of two masks.
pub fn dice<'a>(
    a: impl IntoIterator<Item = &'a bool>,
    b: impl IntoIterator<Item = &'a bool>,
) -> f64 {
    let (mut both, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.into_iter().zip(b) {
        both += usize::from(x && y);
        na += usize::from(x);
        nb += usize::from(y);
    }
    2.0 * both as f64 / (na + nb) as f64
}

pub const SITES: [&str; 3] = ["siteA", "siteB", "siteC"];
pub const PER_SITE: usize = 20;

/// In-plane spacing, slice thickness and noise sigma of each site.
const SITE_PARAMS: [(f64, f64, f64); 3] = [(0.8, 3.0, 3.0), (1.0, 5.0, 8.0), (0.5, 1.5, 15.0)];

/// Phantom specs for 3 sites x 20 subjects. Subjects vary in disk radius,
/// intensity and a small spacing/noise jitter; sites differ in spacing and
/// noise unless `homogenized`, in which case every site uses the same
/// parameters. Returns `(spec, site)` pairs.
pub fn site_specs(homogenized: bool, seed: u64) -> Vec<(PhantomSpec, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (s, site) in SITES.iter().enumerate() {
        let (px, thick, sigma) = SITE_PARAMS[if homogenized { 1 } else { s }];
        for i in 0..PER_SITE {
            let id = format!("{site}_{i:02}");
            let mut spec = PhantomSpec::disk(&id, (6, 64, 64), rng.gen_range(16.0..24.0));
            spec.fg_intensity = rng.gen_range(90.0..110.0);
            spec.bg_intensity = 5.0;
            let j = rng.gen_range(0.98..1.02);
            spec.spacing = Spacing::new(px * j, px * j, thick * rng.gen_range(0.98..1.02));
            spec.artifacts = vec![phantom::Artifact::Noise {
                sigma: sigma * rng.gen_range(0.9..1.1),
            }];
            spec.seed = rng.gen();
            out.push((spec, site.to_string()));
        }
    }
    out
}

/// Writes the site cohort as NIfTI under `dir` and a sites TSV at `sites`.
pub fn write_site_cohort(dir: &Path, sites: &Path, homogenized: bool, seed: u64) {
    std::fs::create_dir_all(dir).unwrap();
    let mut tsv = String::from("id\tsite\n");
    for (spec, site) in site_specs(homogenized, seed) {
        let (v, _) = phantom::generate(&spec).unwrap();
        phantom::write_nifti(&v, &dir.join(format!("{}.nii", spec.id))).unwrap();
        tsv.push_str(&format!("{}\t{site}\n", spec.id));
    }
    std::fs::write(sites, tsv).unwrap();
}

/// Mean silhouette of 2-D points under the given labels.
pub fn silhouette(points: &[[f64; 2]], labels: &[String]) -> f64 {
    let d = |a: &[f64; 2], b: &[f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut groups: std::collections::BTreeMap<&str, (f64, usize)> = Default::default();
        for j in 0..n {
            if i != j {
                let e = groups.entry(labels[j].as_str()).or_default();
                e.0 += d(&points[i], &points[j]);
                e.1 += 1;
            }
        }
        let own = groups.get(labels[i].as_str()).copied().unwrap_or((0.0, 0));
        if own.1 == 0 {
            continue;
        }
        let a = own.0 / own.1 as f64;
        let b = groups
            .iter()
            .filter(|(k, _)| **k != labels[i])
            .map(|(_, &(sum, c))| sum / c as f64)
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    total / n as f64
}
