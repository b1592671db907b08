//! Causal tracing of factual recall in small speech/text transformers.
//!
//! - [`model`]: an instrumentable decoder-only transformer with capture and
//!   patch hooks, plus random, passthrough and planted-fact builders.
//! - [`tracer`]: clean / corrupted / restored runs, indirect effects, token
//!   buckets and averaged grids.
//! - [`aligner`]: CTC forced alignment from frame emissions to word spans and
//!   speech-token ranges.
//! - [`dataset`]: Known-style prompt ingestion, answer judging, filtering and
//!   word error rate.
//! - [`report`]: grid/trace files, tables and SVG heatmaps.

pub mod aligner;
pub mod dataset;
pub mod fixtures;
pub mod model;
pub mod report;
pub mod seed;
pub mod tracer;
