//! `results.tsv` and slice thumbnails.
//!
//! The table has one row per dataset (or per dataset object in per-object
//! mode) with the columns
//!
//! ```text
//! id status [object] MFR MFS VRX VRY VRZ ROWS COLS TR TE NUM
//! MEAN RNG VAR CV CPP PSNR SNR1 SNR2 SNR3 SNR4 CNR CVP CJV EFC FBER
//! tsne_x tsne_y umap_x umap_y <extra tags...>
//! ```
//!
//! Missing values are written `NA`; numbers use 6 significant digits. The
//! `status` column is `ok`, `ok:imputed` (some features were mean-imputed for
//! the embedding) or `failed:<reason>`.

mod format;
mod thumbnails;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::measures::{Measure, MeasureRecord, NUM_MEASURES};
use crate::volume::MetadataRecord;
pub use format::format_number;
pub use thumbnails::{percentile, thumbnail_size, write_thumbnails, MAX_EDGE};

pub const RESULTS_FILE: &str = "results.tsv";
pub const NA: &str = "NA";
pub const METADATA_COLUMNS: [&str; 10] = [
    "MFR", "MFS", "VRX", "VRY", "VRZ", "ROWS", "COLS", "TR", "TE", "NUM",
];
pub const EMBEDDING_COLUMNS: [&str; 4] = ["tsne_x", "tsne_y", "umap_x", "umap_y"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    Imputed,
    Failed(String),
}

impl RowStatus {
    pub fn is_ok(&self) -> bool {
        !matches!(self, RowStatus::Failed(_))
    }

    fn parse(s: &str) -> Option<RowStatus> {
        match s {
            "ok" => Some(RowStatus::Ok),
            "ok:imputed" => Some(RowStatus::Imputed),
            _ => s
                .strip_prefix("failed:")
                .map(|r| RowStatus::Failed(r.to_string())),
        }
    }
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowStatus::Ok => f.write_str("ok"),
            RowStatus::Imputed => f.write_str("ok:imputed"),
            RowStatus::Failed(reason) => write!(f, "failed:{}", sanitize(reason)),
        }
    }
}

/// One line of the table.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub id: String,
    pub status: RowStatus,
    /// 1-based object index in per-object mode.
    pub object: Option<usize>,
    /// `None` for datasets that failed before their header was read.
    pub metadata: Option<MetadataRecord>,
    pub measures: MeasureRecord,
    /// `[tsne_x, tsne_y, umap_x, umap_y]`
    pub coords: [Option<f64>; 4],
}

impl Row {
    pub fn failed(id: &str, reason: &str, object: Option<usize>) -> Row {
        Row {
            id: id.to_string(),
            status: RowStatus::Failed(reason.to_string()),
            object,
            metadata: None,
            measures: MeasureRecord::default(),
            coords: [None; 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortTable {
    pub per_object: bool,
    /// User-requested header tags, in request order.
    pub extra_columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl CohortTable {
    pub fn columns(&self) -> Vec<String> {
        let mut c = vec!["id".to_string(), "status".to_string()];
        if self.per_object {
            c.push("object".to_string());
        }
        c.extend(METADATA_COLUMNS.iter().map(|s| s.to_string()));
        c.extend(Measure::ALL.iter().map(|m| m.name().to_string()));
        c.extend(EMBEDDING_COLUMNS.iter().map(|s| s.to_string()));
        c.extend(self.extra_columns.iter().cloned());
        c
    }

    /// The full file contents.
    pub fn to_tsv(&self) -> String {
        let mut out = self.columns().join("\t");
        out.push('\n');
        for row in &self.rows {
            let mut cells: Vec<String> = vec![sanitize(&row.id), row.status.to_string()];
            if self.per_object {
                cells.push(row.object.map_or_else(|| NA.to_string(), |o| o.to_string()));
            }
            let num = |v: Option<f64>| v.map_or_else(|| NA.to_string(), format_number);
            match &row.metadata {
                Some(m) => {
                    cells.push(m.mfr.as_deref().map_or_else(|| NA.to_string(), sanitize));
                    for v in [m.mfs, m.vrx, m.vry, m.vrz] {
                        cells.push(num(v));
                    }
                    cells.push(m.rows.to_string());
                    cells.push(m.cols.to_string());
                    cells.push(num(m.tr));
                    cells.push(num(m.te));
                    cells.push(m.num.to_string());
                }
                None => cells.extend(std::iter::repeat_n(NA.to_string(), METADATA_COLUMNS.len())),
            }
            cells.extend(row.measures.values.iter().map(|&v| num(v)));
            cells.extend(row.coords.iter().map(|&v| num(v)));
            for tag in &self.extra_columns {
                let v = row
                    .metadata
                    .as_ref()
                    .and_then(|m| m.extra.get(tag).cloned().flatten());
                cells.push(v.as_deref().map_or_else(|| NA.to_string(), sanitize));
            }
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }
}

/// Replaces tabs and line breaks, which would break the TSV layout.
fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c == '\t' || c == '\n' || c == '\r' {
                ' '
            } else {
                c
            }
        })
        .collect()
}

/// Writes `<out_dir>/<cohort>/results.tsv` through a temporary file and a
/// rename, so an interrupted run never leaves a partial table.
pub fn write_results(table: &CohortTable, out_dir: &Path, cohort: &str) -> Result<PathBuf> {
    let dir = out_dir.join(cohort);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join(RESULTS_FILE);
    let tmp = dir.join(format!(".{RESULTS_FILE}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(table.to_tsv().as_bytes())
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn parse_num(s: &str) -> std::result::Result<Option<f64>, String> {
    if s == NA {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| format!("bad number {s:?}"))
}

fn parse_count(s: &str) -> std::result::Result<usize, String> {
    s.parse::<usize>().map_err(|_| format!("bad count {s:?}"))
}

/// Parses a table written by [`write_results`].
pub fn read_results(path: &Path) -> Result<CohortTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_results(&text).map_err(|(line, reason)| Error::Table {
        path: path.to_path_buf(),
        line,
        reason,
    })
}

/// Parses table text; errors carry the 1-based line number.
pub fn parse_results(text: &str) -> std::result::Result<CohortTable, (usize, String)> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or((1, "empty file".to_string()))?
        .split('\t')
        .collect();
    let per_object = header.get(2) == Some(&"object");
    let table = CohortTable {
        per_object,
        extra_columns: Vec::new(),
        rows: Vec::new(),
    };
    let expected: Vec<String> = table.columns();
    let fixed = expected.len();
    if header.len() < fixed
        || header[..fixed] != expected.iter().map(String::as_str).collect::<Vec<_>>()[..]
    {
        return Err((
            1,
            "header does not match the results column layout".to_string(),
        ));
    }
    let extra_columns: Vec<String> = header[fixed..].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let lineno = n + 2;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != header.len() {
            return Err((
                lineno,
                format!("{} fields, header has {}", cells.len(), header.len()),
            ));
        }
        let row = parse_row(&cells, per_object, &extra_columns).map_err(|e| (lineno, e))?;
        rows.push(row);
    }
    Ok(CohortTable {
        per_object,
        extra_columns,
        rows,
    })
}

fn parse_row(
    cells: &[&str],
    per_object: bool,
    extra: &[String],
) -> std::result::Result<Row, String> {
    let status = RowStatus::parse(cells[1]).ok_or_else(|| format!("bad status {:?}", cells[1]))?;
    let mut k = 2;
    let object = if per_object {
        k += 1;
        match cells[2] {
            NA => None,
            s => Some(parse_count(s)?),
        }
    } else {
        None
    };
    let md = &cells[k..k + 10];
    k += 10;
    let metadata = if md[5] == NA {
        None
    } else {
        let extra_map: IndexMap<String, Option<String>> = extra
            .iter()
            .zip(&cells[k + NUM_MEASURES + 4..])
            .map(|(name, v)| (name.clone(), (*v != NA).then(|| v.to_string())))
            .collect();
        Some(MetadataRecord {
            mfr: (md[0] != NA).then(|| md[0].to_string()),
            mfs: parse_num(md[1])?,
            vrx: parse_num(md[2])?,
            vry: parse_num(md[3])?,
            vrz: parse_num(md[4])?,
            rows: parse_count(md[5])?,
            cols: parse_count(md[6])?,
            tr: parse_num(md[7])?,
            te: parse_num(md[8])?,
            num: parse_count(md[9])?,
            extra: extra_map,
        })
    };
    let mut measures = MeasureRecord::default();
    for i in 0..NUM_MEASURES {
        measures.values[i] = parse_num(cells[k + i])?;
    }
    k += NUM_MEASURES;
    let mut coords = [None; 4];
    for (i, c) in coords.iter_mut().enumerate() {
        *c = parse_num(cells[k + i])?;
    }
    Ok(Row {
        id: cells[0].to_string(),
        status,
        object,
        metadata,
        measures,
        coords,
    })
}
