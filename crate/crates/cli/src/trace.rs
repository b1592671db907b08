use std::fmt;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use cmtrace::dataset::{load_known, record_prompt, FieldMap};
use cmtrace::model::{ComponentKind, Lexicon, Model};
use cmtrace::report::{
    grid_heatmap_svg, write_grid_csv, write_grid_json, write_raw_ie_csv, write_summary_csv, write_trace_csv, GridMeta,
    HeatmapScale,
};
use cmtrace::tracer::{average_grids, default_window, CorruptionSpec, TargetMode, Tracer};
use serde_json::json;

use crate::{require_files, write_file, write_json, ModalityArg, OutputArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetModeArg {
    First,
    Joint,
}

#[derive(Debug, Clone, Args)]
pub struct TraceArgs {
    /// Weight file.
    #[arg(long)]
    pub model: PathBuf,
    /// Lexicon, one word per line.
    #[arg(long)]
    pub lexicon: PathBuf,
    /// Known-style JSON array (usually the output of `filter`).
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value = "t2t")]
    pub modality: ModalityArg,
    /// Component kinds to trace.
    #[arg(long, value_delimiter = ',', default_value = "hidden_state,mlp_out,attn_out")]
    pub kinds: Vec<ComponentKind>,
    /// Window override as `kind=size`, e.g. `mlp_out=1`.
    #[arg(long = "window")]
    pub windows: Vec<String>,
    /// Noise std in units of the embedding std.
    #[arg(long, default_value_t = 3.0)]
    pub noise_scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "first")]
    pub target_mode: TargetModeArg,
    /// Field-name overrides, e.g. `attribute=target,id=case_id`.
    #[arg(long, default_value = "")]
    pub fields: String,
    /// Trace only the first N records.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Skip SVG heatmaps.
    #[arg(long)]
    pub no_heatmap: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub n_prompts: usize,
    pub mean_p_clean: f64,
    pub mean_p_corrupt: f64,
    pub sigma: f64,
    pub output_dir: PathBuf,
}

impl fmt::Display for TraceSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "traced {} prompts: mean p_clean {:.6}, mean p_corrupt {:.6} (sigma {:.6}); output in {}",
            self.n_prompts,
            self.mean_p_clean,
            self.mean_p_corrupt,
            self.sigma,
            self.output_dir.display()
        )
    }
}

fn windows(args: &TraceArgs) -> Result<Vec<(ComponentKind, usize)>> {
    let mut out: Vec<(ComponentKind, usize)> = Vec::new();
    for k in &args.kinds {
        if *k == ComponentKind::EmbeddingOut {
            bail!("embedding_out has no layers to trace");
        }
        if !out.iter().any(|(o, _)| o == k) {
            out.push((*k, default_window(*k)));
        }
    }
    for spec in &args.windows {
        let (k, w) = spec.split_once('=').with_context(|| format!("--window {spec:?}: expected kind=size"))?;
        let kind: ComponentKind = k.parse()?;
        let size: usize = w.parse().with_context(|| format!("--window {spec:?}: bad size"))?;
        match out.iter_mut().find(|(o, _)| *o == kind) {
            Some(slot) => slot.1 = size,
            None => bail!("--window {spec:?} names a kind that is not traced"),
        }
    }
    Ok(out)
}

pub fn cmd_trace(args: &TraceArgs) -> Result<TraceSummary> {
    require_files(&[
        ("--model", args.model.as_path()),
        ("--lexicon", args.lexicon.as_path()),
        ("--dataset", args.dataset.as_path()),
    ])?;
    if !(args.noise_scale.is_finite() && args.noise_scale >= 0.0) {
        bail!("--noise-scale must be a finite non-negative number");
    }
    let kinds = windows(args)?;
    let model = Model::load(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let lexicon = Lexicon::load(&args.lexicon, model.vocab())?;
    let fields = FieldMap::default().with_overrides(&args.fields)?;
    let mut records = load_known(&args.dataset, &fields)?;
    if let Some(n) = args.limit {
        records.truncate(n);
    }
    let out = args.output.prepare()?;

    let corruption = CorruptionSpec::for_model(&model, args.noise_scale, args.seed);
    let mode = match args.target_mode {
        TargetModeArg::First => TargetMode::FirstToken,
        TargetModeArg::Joint => TargetMode::Joint,
    };
    let tracer = Tracer::new(&model, corruption).with_target_mode(mode);
    let mut per_kind: Vec<Vec<_>> = vec![Vec::new(); kinds.len()];
    for rec in &records {
        let prompt = record_prompt(rec, &lexicon, &model, args.modality.modality())?;
        let results =
            tracer.trace_prompt_kinds(&prompt, &kinds).with_context(|| format!("tracing record {}", rec.id))?;
        for (slot, r) in per_kind.iter_mut().zip(results) {
            slot.push(r);
        }
    }
    let all: Vec<_> = per_kind.iter().flatten().cloned().collect();
    let first = per_kind.first().map(Vec::as_slice).unwrap_or(&[]);
    let n = first.len();
    let mean = |f: fn(&cmtrace::tracer::TraceResult) -> f64| {
        if n == 0 {
            0.0
        } else {
            first.iter().map(f).sum::<f64>() / n as f64
        }
    };
    let summary = TraceSummary {
        n_prompts: n,
        mean_p_clean: mean(|r| r.p_clean),
        mean_p_corrupt: mean(|r| r.p_corrupt),
        sigma: corruption.sigma,
        output_dir: out.to_path_buf(),
    };

    let mut buf = Vec::new();
    write_summary_csv(first, &mut buf)?;
    write_file(&out.join("summary.csv"), &buf)?;
    let mut buf = Vec::new();
    write_trace_csv(&all, &mut buf)?;
    write_file(&out.join("traces.csv"), &buf)?;
    let mut buf = Vec::new();
    write_raw_ie_csv(&all, &mut buf)?;
    write_file(&out.join("raw_ie.csv"), &buf)?;

    let meta = GridMeta { noise_scale: args.noise_scale, sigma: corruption.sigma, seed: args.seed };
    let mut grid_names = Vec::new();
    if n > 0 {
        for ((kind, window), results) in kinds.iter().zip(&per_kind) {
            let grid = average_grids(results, *kind)?;
            let stem = format!("grid_{}", kind.as_str());
            let mut buf = Vec::new();
            write_grid_json(&grid, Some(meta), &mut buf)?;
            write_file(&out.join(format!("{stem}.json")), &buf)?;
            let mut buf = Vec::new();
            write_grid_csv(&grid, &mut buf)?;
            write_file(&out.join(format!("{stem}.csv")), &buf)?;
            if !args.no_heatmap {
                let title = format!("{} (window {window}, {n} prompts), log10 AIE", kind.as_str());
                write_file(
                    &out.join(format!("{stem}.svg")),
                    grid_heatmap_svg(&grid, &title, HeatmapScale::Log).as_bytes(),
                )?;
            }
            grid_names.push(stem);
        }
    } else {
        log::warn!("no records to trace; grids not written");
    }

    let run = json!({
        "modality": args.modality.as_str(),
        "kinds": kinds.iter().map(|(k, w)| json!({"kind": k.as_str(), "window": w})).collect::<Vec<_>>(),
        "noise_scale": args.noise_scale,
        "sigma": corruption.sigma,
        "seed": args.seed,
        "target_mode": match mode { TargetMode::FirstToken => "first", TargetMode::Joint => "joint" },
        "n_prompts": n,
        "mean_p_clean": summary.mean_p_clean,
        "mean_p_corrupt": summary.mean_p_corrupt,
        "grids": grid_names,
    });
    write_json(&out.join("run.json"), &run)?;
    Ok(summary)
}
