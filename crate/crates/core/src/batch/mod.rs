//! Batch-effect analysis by resampled consensus clustering.
//!
//! Datasets are clustered many times on random 80% subsamples with average
//! linkage on Pearson distance. The fraction of co-sampled runs in which two
//! datasets share a cluster forms the consensus matrix, which is clustered
//! once more for the final labels. Clusters are then matched to acquisition
//! sites to measure how strongly sites separate.

mod linkage;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
pub use linkage::average_linkage;

pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_SUBSAMPLE: f64 = 0.8;

/// `1 - r` between rows. Rows with zero variance are at distance 1 from all
/// other rows; their indices are returned alongside.
pub fn pearson_distance(features: &Array2<f64>) -> (Array2<f64>, Vec<usize>) {
    let n = features.nrows();
    let centred: Vec<Option<Vec<f64>>> = features
        .rows()
        .into_iter()
        .map(|r| {
            let m = r.sum() / r.len() as f64;
            let c: Vec<f64> = r.iter().map(|v| v - m).collect();
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            (norm > 0.0 && norm.is_finite()).then(|| c.iter().map(|v| v / norm).collect())
        })
        .collect();
    let flagged: Vec<usize> = (0..n).filter(|&i| centred[i].is_none()).collect();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v = match (&centred[i], &centred[j]) {
                (Some(a), Some(b)) => {
                    let r: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                    1.0 - r.clamp(-1.0, 1.0)
                }
                _ => 1.0,
            };
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    (d, flagged)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsensusConfig {
    pub k: usize,
    pub iterations: usize,
    pub subsample: f64,
    pub seed: u64,
}

impl ConsensusConfig {
    pub fn new(k: usize) -> Self {
        ConsensusConfig {
            k,
            iterations: DEFAULT_ITERATIONS,
            subsample: DEFAULT_SUBSAMPLE,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusResult {
    pub k: usize,
    /// Co-clustering frequency; `None` for pairs never sampled together.
    pub matrix: Array2<Option<f64>>,
    /// Final cluster per dataset, in `1..=k`.
    pub labels: Vec<usize>,
}

/// Consensus clustering of the rows of `features` into `k` clusters.
pub fn consensus_cluster(
    features: &Array2<f64>,
    config: ConsensusConfig,
) -> Result<ConsensusResult> {
    let n = features.nrows();
    let k = config.k;
    if k < 2 || n < 2 * k {
        return Err(Error::InvalidArgument(format!(
            "consensus clustering needs k >= 2 and at least 2k datasets, got k = {k}, n = {n}"
        )));
    }
    if !(config.subsample > 0.0 && config.subsample <= 1.0) || config.iterations == 0 {
        return Err(Error::InvalidArgument(format!(
            "subsample must be in (0, 1] and iterations positive, got {} and {}",
            config.subsample, config.iterations
        )));
    }
    let (dist, flagged) = pearson_distance(features);
    if !flagged.is_empty() {
        log::warn!(
            "{} dataset(s) have constant features; Pearson distance set to 1",
            flagged.len()
        );
    }
    let off_diag: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| dist[[i, j]])
        .collect();
    if off_diag.iter().all(|&v| v == off_diag[0]) {
        log::warn!("all pairwise distances are equal; the clustering has no structure to find");
    }
    let m = ((config.subsample * n as f64).ceil() as usize).clamp(k, n);

    let run = |t: usize| -> (Array2<u32>, Array2<u32>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::for_index(config.seed, t as u64));
        let mut idx = sample(&mut rng, n, m).into_vec();
        idx.sort_unstable();
        let sub = Array2::from_shape_fn((m, m), |(a, b)| dist[[idx[a], idx[b]]]);
        let labels = average_linkage(&sub, k);
        let mut together = Array2::zeros((n, n));
        let mut sampled = Array2::zeros((n, n));
        for a in 0..m {
            for b in 0..m {
                sampled[[idx[a], idx[b]]] += 1;
                if labels[a] == labels[b] {
                    together[[idx[a], idx[b]]] += 1;
                }
            }
        }
        (together, sampled)
    };
    let zero = || (Array2::<u32>::zeros((n, n)), Array2::<u32>::zeros((n, n)));
    let (together, sampled) = (0..config.iterations)
        .into_par_iter()
        .map(run)
        .reduce(zero, |(a1, b1), (a2, b2)| (a1 + a2, b1 + b2));

    let mut missing = 0usize;
    let matrix = Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            Some(1.0)
        } else if sampled[[i, j]] == 0 {
            missing += 1;
            None
        } else {
            Some(f64::from(together[[i, j]]) / f64::from(sampled[[i, j]]))
        }
    });
    if missing > 0 {
        log::warn!(
            "{} dataset pairs were never sampled together; treated as distance 1",
            missing / 2
        );
    }
    let consensus_dist = matrix.mapv(|c| c.map_or(1.0, |c| 1.0 - c));
    let labels = average_linkage(&consensus_dist, k)
        .into_iter()
        .map(|l| l + 1)
        .collect();
    Ok(ConsensusResult { k, matrix, labels })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStat {
    pub cluster: usize,
    pub site: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    /// Fraction of each site's datasets in its matched cluster, by site name.
    pub accuracy: IndexMap<String, f64>,
    /// Matched cluster per site.
    pub matched: IndexMap<String, usize>,
    pub pairs: Vec<PairStat>,
}

/// Matches clusters to sites greedily by F1 (highest first, each used once)
/// and reports per-site accuracy. Sites are listed in sorted order.
pub fn overlap_accuracy(labels: &[usize], sites: &[String]) -> Result<Overlap> {
    if labels.len() != sites.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} site entries",
            labels.len(),
            sites.len()
        )));
    }
    let mut site_names: Vec<&String> = sites.iter().collect();
    site_names.sort();
    site_names.dedup();
    let mut clusters: Vec<usize> = labels.to_vec();
    clusters.sort_unstable();
    clusters.dedup();
    if clusters.len() != site_names.len() {
        return Err(Error::InvalidArgument(format!(
            "{} clusters but {} sites; k must equal the number of sites",
            clusters.len(),
            site_names.len()
        )));
    }
    let mut pairs = Vec::new();
    let mut both: BTreeMap<(usize, &str), usize> = BTreeMap::new();
    for (l, s) in labels.iter().zip(sites) {
        *both.entry((*l, s.as_str())).or_default() += 1;
    }
    for &c in &clusters {
        let csize = labels.iter().filter(|&&l| l == c).count();
        for s in &site_names {
            let ssize = sites.iter().filter(|x| x == s).count();
            let hit = both.get(&(c, s.as_str())).copied().unwrap_or(0) as f64;
            let precision = hit / csize as f64;
            let recall = hit / ssize as f64;
            let f1 = if hit == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            pairs.push(PairStat {
                cluster: c,
                site: (*s).clone(),
                precision,
                recall,
                f1,
            });
        }
    }
    let mut order: Vec<&PairStat> = pairs.iter().collect();
    order.sort_by(|a, b| {
        b.f1.total_cmp(&a.f1)
            .then(a.cluster.cmp(&b.cluster))
            .then(a.site.cmp(&b.site))
    });
    let mut matched_pairs: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    let mut used = Vec::new();
    for p in order {
        if used.contains(&p.cluster) || matched_pairs.contains_key(&p.site) {
            continue;
        }
        used.push(p.cluster);
        matched_pairs.insert(p.site.clone(), (p.cluster, p.recall));
    }
    let accuracy = matched_pairs
        .iter()
        .map(|(s, &(_, r))| (s.clone(), r))
        .collect();
    let matched = matched_pairs
        .iter()
        .map(|(s, &(c, _))| (s.clone(), c))
        .collect();
    Ok(Overlap {
        accuracy,
        matched,
        pairs,
    })
}

/// Reads a two-column `id<TAB>site` file. A header line whose first field is
/// `id` is skipped; blank lines are ignored.
pub fn read_sites(path: &Path) -> Result<IndexMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = IndexMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = |reason: String| Error::Table {
            path: path.to_path_buf(),
            line: n + 1,
            reason,
        };
        if fields.len() != 2 {
            return Err(bad(format!(
                "expected 2 tab-separated fields, got {}",
                fields.len()
            )));
        }
        if n == 0 && fields[0].eq_ignore_ascii_case("id") {
            continue;
        }
        if out
            .insert(fields[0].to_string(), fields[1].to_string())
            .is_some()
        {
            return Err(bad(format!("duplicate id {}", fields[0])));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub k: usize,
    pub iterations: usize,
    pub subsample: f64,
    pub seed: u64,
    pub labels: IndexMap<String, usize>,
    pub overlap: Overlap,
}

/// Writes `consensus_matrix.tsv` (ids as header row and first column, `NA`
/// for never co-sampled pairs) and `consensus_summary.json` into `dir`.
pub fn write_outputs(
    dir: &Path,
    ids: &[String],
    result: &ConsensusResult,
    summary: &Summary,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tsv = String::from("id");
    for id in ids {
        tsv.push('\t');
        tsv.push_str(id);
    }
    tsv.push('\n');
    for (i, id) in ids.iter().enumerate() {
        tsv.push_str(id);
        for j in 0..ids.len() {
            tsv.push('\t');
            match result.matrix[[i, j]] {
                Some(v) => tsv.push_str(&crate::report::format_number(v)),
                None => tsv.push_str("NA"),
            }
        }
        tsv.push('\n');
    }
    let matrix_path = dir.join("consensus_matrix.tsv");
    fs::write(&matrix_path, tsv).map_err(|e| Error::io(&matrix_path, e))?;
    let json = serde_json::to_string_pretty(summary).expect("summary serializes");
    let summary_path = dir.join("consensus_summary.json");
    fs::write(&summary_path, json + "\n").map_err(|e| Error::io(&summary_path, e))
}
