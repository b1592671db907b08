//! Grid and trace files, plus SVG heatmaps.
//!
//! Grid JSON holds `[bucket][layer]` matrices with `null` for absent cells.
//! Grid CSV holds one row per `(bucket, layer)` with empty fields for absent
//! cells; both formats round-trip exactly.

mod svg;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use svg::{grid_heatmap_svg, ramp_color, trellis_heatmap_svg, HeatmapScale, ABSENT_COLOR, RAMP};

use crate::model::ComponentKind;
use crate::tracer::{AieGrid, TokenBucket, TraceResult};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("malformed grid: {0}")]
    MalformedGrid(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Run settings stored alongside a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub noise_scale: f64,
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFile {
    pub kind: ComponentKind,
    pub window: usize,
    pub n_layers: usize,
    pub n_prompts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<GridMeta>,
    pub buckets: Vec<TokenBucket>,
    pub values: Vec<Vec<Option<f64>>>,
    pub log10_values: Vec<Vec<Option<f64>>>,
    pub counts: Vec<Vec<usize>>,
}

impl GridFile {
    pub fn new(grid: &AieGrid, meta: Option<GridMeta>) -> Self {
        Self {
            kind: grid.kind,
            window: grid.window,
            n_layers: grid.n_layers,
            n_prompts: grid.n_prompts,
            meta,
            buckets: grid.buckets.clone(),
            values: grid.values.clone(),
            log10_values: grid.log_values.clone(),
            counts: grid.counts.clone(),
        }
    }

    pub fn to_grid(&self) -> Result<AieGrid, ReportError> {
        let bad = |m: String| Err(ReportError::MalformedGrid(m));
        if self.values.len() != self.buckets.len() || self.counts.len() != self.buckets.len() {
            return bad(format!("{} buckets but {} value rows", self.buckets.len(), self.values.len()));
        }
        if let Some(row) = self.values.iter().find(|r| r.len() != self.n_layers) {
            return bad(format!("value row of length {} for {} layers", row.len(), self.n_layers));
        }
        if self.counts.iter().any(|r| r.len() != self.n_layers) {
            return bad("count row length differs from layer count".into());
        }
        let mut grid = AieGrid::from_values(
            self.kind,
            self.window,
            self.buckets.clone(),
            self.values.clone(),
            self.counts.clone(),
            self.n_prompts,
        );
        grid.n_layers = self.n_layers;
        Ok(grid)
    }
}

pub fn write_grid_json<W: Write>(grid: &AieGrid, meta: Option<GridMeta>, mut w: W) -> Result<(), ReportError> {
    serde_json::to_writer_pretty(&mut w, &GridFile::new(grid, meta))?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_grid_json<R: Read>(r: R) -> Result<(AieGrid, Option<GridMeta>), ReportError> {
    let file: GridFile = serde_json::from_reader(r)?;
    Ok((file.to_grid()?, file.meta))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `kind,window,n_prompts,bucket,layer,aie,log10_aie,count`.
pub fn write_grid_csv<W: Write>(grid: &AieGrid, w: W) -> Result<(), ReportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["kind", "window", "n_prompts", "bucket", "layer", "aie", "log10_aie", "count"])?;
    for (r, b) in grid.buckets.iter().enumerate() {
        for l in 0..grid.n_layers {
            out.write_record([
                grid.kind.as_str().to_string(),
                grid.window.to_string(),
                grid.n_prompts.to_string(),
                b.as_str().to_string(),
                l.to_string(),
                opt(grid.values[r][l]),
                opt(grid.log_values[r][l]),
                grid.counts[r][l].to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_grid_csv<R: Read>(r: R) -> Result<AieGrid, ReportError> {
    let bad = |m: String| ReportError::MalformedGrid(m);
    let mut rdr = csv::Reader::from_reader(r);
    let mut header: Option<(ComponentKind, usize, usize)> = None;
    let mut buckets: Vec<TokenBucket> = Vec::new();
    let mut cells: Vec<(usize, usize, Option<f64>, usize)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 8 {
            return Err(bad(format!("row {} has {} fields", i + 1, rec.len())));
        }
        let num = |k: usize| -> Result<usize, ReportError> {
            rec[k].parse().map_err(|_| bad(format!("row {}: {:?} is not an integer", i + 1, &rec[k])))
        };
        let kind: ComponentKind = rec[0].parse().map_err(|_| bad(format!("row {}: bad kind", i + 1)))?;
        let this = (kind, num(1)?, num(2)?);
        match header {
            None => header = Some(this),
            Some(h) if h != this => return Err(bad(format!("row {}: mixed grids in one file", i + 1))),
            _ => {}
        }
        let bucket: TokenBucket = rec[3].parse().map_err(|_| bad(format!("row {}: bad bucket", i + 1)))?;
        let row = match buckets.iter().position(|b| *b == bucket) {
            Some(r) => r,
            None => {
                buckets.push(bucket);
                buckets.len() - 1
            }
        };
        let value = match &rec[5] {
            "" => None,
            s => Some(s.parse::<f64>().map_err(|_| bad(format!("row {}: bad value {s:?}", i + 1)))?),
        };
        cells.push((row, num(4)?, value, num(7)?));
    }
    let (kind, window, n_prompts) = header.ok_or_else(|| bad("no rows".into()))?;
    let n_layers = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
    if cells.len() != buckets.len() * n_layers {
        return Err(bad(format!("{} rows for {} buckets x {n_layers} layers", cells.len(), buckets.len())));
    }
    let mut values = vec![vec![None; n_layers]; buckets.len()];
    let mut counts = vec![vec![0; n_layers]; buckets.len()];
    let mut seen = vec![vec![false; n_layers]; buckets.len()];
    for (r, l, v, c) in cells {
        if std::mem::replace(&mut seen[r][l], true) {
            return Err(bad(format!("duplicate cell ({}, {l})", buckets[r])));
        }
        values[r][l] = v;
        counts[r][l] = c;
    }
    let mut grid = AieGrid::from_values(kind, window, buckets, values, counts, n_prompts);
    grid.n_layers = n_layers;
    Ok(grid)
}

/// Long-form bucketed effects:
/// `prompt_id,kind,window,layer,bucket,positions,ie`. Absent buckets have an
/// empty `ie`.
pub fn write_trace_csv<W: Write>(results: &[TraceResult], w: W) -> Result<(), ReportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["prompt_id", "kind", "window", "layer", "bucket", "positions", "ie"])?;
    for r in results {
        for (layer, row) in r.bucket_ie.iter().enumerate() {
            for b in TokenBucket::ALL {
                out.write_record([
                    r.prompt_id.clone(),
                    r.kind.as_str().to_string(),
                    r.window.to_string(),
                    layer.to_string(),
                    b.as_str().to_string(),
                    r.bucket_positions[b.index()].to_string(),
                    opt(row[b.index()]),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Per-site effects: `prompt_id,kind,window,layer,position,ie`.
pub fn write_raw_ie_csv<W: Write>(results: &[TraceResult], w: W) -> Result<(), ReportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["prompt_id", "kind", "window", "layer", "position", "ie"])?;
    for r in results {
        for (layer, row) in r.raw_ie.iter().enumerate() {
            for (pos, ie) in row.iter().enumerate() {
                out.write_record([
                    r.prompt_id.clone(),
                    r.kind.as_str().to_string(),
                    r.window.to_string(),
                    layer.to_string(),
                    pos.to_string(),
                    ie.to_string(),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// `prompt_id,kind,p_clean,p_corrupt`.
pub fn write_summary_csv<W: Write>(results: &[TraceResult], w: W) -> Result<(), ReportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["prompt_id", "kind", "p_clean", "p_corrupt"])?;
    for r in results {
        out.write_record([
            r.prompt_id.clone(),
            r.kind.as_str().to_string(),
            r.p_clean.to_string(),
            r.p_corrupt.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
