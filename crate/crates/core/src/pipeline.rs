//! End-to-end runs: discovery, decoding, foreground, measurements,
//! thumbnails, embeddings and the results table; plus the offline batch
//! analysis over a finished table.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use indexmap::IndexMap;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::batch::{self, ConsensusConfig, ConsensusResult, Overlap};
use crate::embedding::{self, NUM_FEATURES};
use crate::error::{Error, Result};
use crate::foreground::{self, Weights};
use crate::io::{self, DatasetDescriptor, TagName};
use crate::measures::{self, MeasureRecord};
use crate::report::{self, CohortTable, Row, RowStatus};

pub const DEFAULT_OUT_ROOT: &str = "UserInterface/Data";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub output_name: String,
    pub input_dir: PathBuf,
    pub out_root: PathBuf,
    pub tags_file: Option<PathBuf>,
    pub per_object: bool,
    pub seed: u64,
    pub weights: Weights,
    /// Worker threads; 0 picks one per core.
    pub jobs: usize,
    pub thumbnails: bool,
}

impl RunConfig {
    pub fn new(output_name: impl Into<String>, input_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            output_name: output_name.into(),
            input_dir: input_dir.into(),
            out_root: PathBuf::from(DEFAULT_OUT_ROOT),
            tags_file: None,
            per_object: false,
            seed: 0,
            weights: Weights::default(),
            jobs: 0,
            thumbnails: true,
        }
    }

    pub fn cohort_dir(&self) -> PathBuf {
        self.out_root.join(&self.output_name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    /// Every dataset was processed.
    Complete,
    /// Some datasets failed; the table was still written.
    Partial,
    /// No datasets were found; nothing was written.
    Empty,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Complete => 0,
            RunStatus::Partial => 2,
            RunStatus::Empty => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetTiming {
    pub id: String,
    pub status: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub datasets: Vec<DatasetTiming>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub status: RunStatus,
    pub results: Option<PathBuf>,
    pub table: CohortTable,
    pub failed: usize,
}

struct Processed {
    rows: Vec<Row>,
    seconds: f64,
}

fn process(desc: &DatasetDescriptor, tags: &[TagName], config: &RunConfig) -> Result<Vec<Row>> {
    let loaded = io::load_volume(desc, tags)?;
    let mask = foreground::detect_foreground(&loaded.volume, config.weights)?;
    let records: Vec<(Option<usize>, MeasureRecord)> = if config.per_object {
        let objects = foreground::split_objects(&mask);
        if objects.is_empty() {
            return Err(Error::Degenerate(format!(
                "{}: no foreground objects",
                desc.id
            )));
        }
        measures::compute_object_records(&loaded.volume, &objects, config.seed)
            .into_iter()
            .enumerate()
            .map(|(k, r)| (Some(k + 1), r))
            .collect()
    } else {
        vec![(
            None,
            measures::compute_record(&loaded.volume, &mask, config.seed),
        )]
    };
    if config.thumbnails {
        report::write_thumbnails(&loaded.volume, &config.cohort_dir())?;
    }
    Ok(records
        .into_iter()
        .map(|(object, measures)| Row {
            id: desc.id.clone(),
            status: RowStatus::Ok,
            object,
            metadata: Some(loaded.metadata.clone()),
            measures,
            coords: [None; 4],
        })
        .collect())
}

/// Short single-line failure text for the status column.
fn reason(e: &Error) -> String {
    e.to_string().lines().next().unwrap_or_default().to_string()
}

fn raw_features(rows: &[&Row]) -> Array2<Option<f64>> {
    let mut x = Array2::from_elem((rows.len(), NUM_FEATURES), None);
    for (i, r) in rows.iter().enumerate() {
        let meta = r.metadata.as_ref().expect("successful rows carry metadata");
        for (j, v) in embedding::features(meta, &r.measures)
            .into_iter()
            .enumerate()
        {
            x[[i, j]] = v;
        }
    }
    x
}

/// Whitens the successful rows, embeds them and fills their coordinates and
/// imputation status.
fn attach_embeddings(rows: &mut [Row], seed: u64) {
    let ok: Vec<usize> = (0..rows.len())
        .filter(|&i| rows[i].status.is_ok())
        .collect();
    if ok.len() < 2 {
        log::warn!("fewer than 2 successful datasets; embeddings skipped");
        return;
    }
    let refs: Vec<&Row> = ok.iter().map(|&i| &rows[i]).collect();
    let whitened = match embedding::whiten(&raw_features(&refs)) {
        Ok(w) => w,
        Err(e) => {
            log::warn!("embeddings skipped: {e}");
            return;
        }
    };
    let emb = embedding::embed(&whitened, seed);
    for (k, &i) in ok.iter().enumerate() {
        if whitened.imputed[k] {
            rows[i].status = RowStatus::Imputed;
        }
        if let Some(t) = &emb.tsne {
            rows[i].coords[0] = Some(t[k][0]);
            rows[i].coords[1] = Some(t[k][1]);
        }
        if let Some(u) = &emb.umap {
            rows[i].coords[2] = Some(u[k][0]);
            rows[i].coords[3] = Some(u[k][1]);
        }
    }
}

/// Runs the whole pipeline. Per-dataset failures become `failed:` rows;
/// an unreadable input root or an unwritable output is an error.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    let start = Instant::now();
    let tags = match &config.tags_file {
        Some(p) => io::read_tag_list(p)?,
        None => Vec::new(),
    };
    let datasets = io::discover_cohort(&config.input_dir)?;
    let empty_table = CohortTable {
        per_object: config.per_object,
        extra_columns: tags.iter().map(|t| t.as_str().to_string()).collect(),
        rows: Vec::new(),
    };
    if datasets.is_empty() {
        log::warn!("no datasets found under {}", config.input_dir.display());
        return Ok(RunSummary {
            status: RunStatus::Empty,
            results: None,
            table: empty_table,
            failed: 0,
        });
    }
    let cohort_dir = config.cohort_dir();
    fs::create_dir_all(&cohort_dir).map_err(|e| Error::io(&cohort_dir, e))?;
    log::info!("{} dataset(s) found", datasets.len());

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let total = datasets.len();
    let processed: Vec<Processed> = pool.install(|| {
        datasets
            .par_iter()
            .enumerate()
            .map(|(i, desc)| {
                let t = Instant::now();
                let rows = match process(desc, &tags, config) {
                    Ok(rows) => rows,
                    Err(e) => {
                        log::error!("{}: {e}", desc.id);
                        vec![Row::failed(&desc.id, &reason(&e), None)]
                    }
                };
                let seconds = t.elapsed().as_secs_f64();
                let state = if rows[0].status.is_ok() {
                    "ok"
                } else {
                    "failed"
                };
                log::info!("[{}/{total}] {} {state} ({seconds:.2} s)", i + 1, desc.id);
                Processed { rows, seconds }
            })
            .collect()
    });

    let timings: Vec<DatasetTiming> = processed
        .iter()
        .map(|p| DatasetTiming {
            id: p.rows[0].id.clone(),
            status: p.rows[0].status.to_string(),
            seconds: p.seconds,
        })
        .collect();
    let failed = processed
        .iter()
        .filter(|p| !p.rows[0].status.is_ok())
        .count();
    let mut rows: Vec<Row> = processed.into_iter().flat_map(|p| p.rows).collect();
    pool.install(|| attach_embeddings(&mut rows, config.seed));
    let table = CohortTable {
        rows,
        ..empty_table
    };
    let results = report::write_results(&table, &config.out_root, &config.output_name)?;

    let total_seconds = start.elapsed().as_secs_f64();
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        datasets: timings,
        total_seconds,
    };
    let manifest_path = cohort_dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, json + "\n").map_err(|e| Error::io(&manifest_path, e))?;
    log::info!(
        "{} of {total} dataset(s) processed in {total_seconds:.2} s; results in {}",
        total - failed,
        results.display()
    );
    Ok(RunSummary {
        status: if failed == 0 {
            RunStatus::Complete
        } else {
            RunStatus::Partial
        },
        results: Some(results),
        table,
        failed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchConfig {
    pub results: PathBuf,
    pub sites: PathBuf,
    pub consensus: ConsensusConfig,
    /// Output directory; defaults to the directory of `results`.
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub ids: Vec<String>,
    pub consensus: ConsensusResult,
    pub overlap: Overlap,
}

/// Row label in the consensus outputs; per-object rows get an object suffix.
fn row_label(r: &Row) -> String {
    match r.object {
        Some(o) => format!("{}#{o}", r.id),
        None => r.id.clone(),
    }
}

/// Consensus clustering of the successful rows of a results table against
/// site labels; writes the consensus matrix and summary next to the table.
pub fn analyze_batch(config: &BatchConfig) -> Result<BatchOutcome> {
    let table = report::read_results(&config.results)?;
    let sites = batch::read_sites(&config.sites)?;
    let rows: Vec<&Row> = table.rows.iter().filter(|r| r.status.is_ok()).collect();
    let skipped = table.rows.len() - rows.len();
    if skipped > 0 {
        log::warn!("{skipped} failed row(s) excluded from the analysis");
    }
    let mut missing: Vec<&str> = rows
        .iter()
        .map(|r| r.id.as_str())
        .filter(|id| !sites.contains_key(*id))
        .collect();
    missing.dedup();
    let extra: Vec<&str> = sites
        .keys()
        .map(String::as_str)
        .filter(|id| !table.rows.iter().any(|r| r.id == *id))
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        let mut msg = Vec::new();
        if !missing.is_empty() {
            msg.push(format!("ids without a site: {}", missing.join(", ")));
        }
        if !extra.is_empty() {
            msg.push(format!("site ids not in the results: {}", extra.join(", ")));
        }
        return Err(Error::IdMismatch(msg.join("; ")));
    }
    let whitened = embedding::whiten(&raw_features(&rows))?;
    let features = whitened.informative();
    if features.ncols() < 2 {
        return Err(Error::InvalidArgument(format!(
            "{} informative feature(s); Pearson distance needs at least 2",
            features.ncols()
        )));
    }
    let consensus = batch::consensus_cluster(&features, config.consensus)?;
    let site_of: Vec<String> = rows.iter().map(|r| sites[&r.id].clone()).collect();
    let overlap = batch::overlap_accuracy(&consensus.labels, &site_of)?;
    let ids: Vec<String> = rows.iter().map(|r| row_label(r)).collect();
    let summary = batch::Summary {
        k: consensus.k,
        iterations: config.consensus.iterations,
        subsample: config.consensus.subsample,
        seed: config.consensus.seed,
        labels: ids
            .iter()
            .cloned()
            .zip(consensus.labels.iter().copied())
            .collect::<IndexMap<_, _>>(),
        overlap: overlap.clone(),
    };
    let out_dir = match &config.out_dir {
        Some(d) => d.clone(),
        None => config
            .results
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default(),
    };
    batch::write_outputs(&out_dir, &ids, &consensus, &summary)?;
    for (site, acc) in &overlap.accuracy {
        log::info!("site {site}: overlap accuracy {acc:.3}");
    }
    Ok(BatchOutcome {
        ids,
        consensus,
        overlap,
    })
}
