//! Quality control for structural MRI cohorts.
//!
//! The crate ingests volumes (DICOM series, NIfTI, MetaImage), separates the
//! body from the background on every slice, computes a fixed set of header
//! metadata and fifteen image quality measurements per dataset, embeds the
//! cohort in two dimensions and writes a `results.tsv` table for curation.
//! The [`batch`] module adds an offline consensus-clustering analysis that
//! quantifies how strongly acquisition sites separate in measurement space.

// `!(a > b)` is used on purpose: it is also true for NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod embedding;
pub mod error;
pub mod foreground;
pub mod io;
pub mod measures;
pub mod phantom;
pub mod pipeline;
pub mod report;
mod seed;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{MetadataRecord, Spacing, Volume};
