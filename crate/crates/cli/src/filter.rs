use std::fmt;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use cmtrace::dataset::{filter_dataset, load_known, FieldMap, JudgeRules, Verdict, DEFAULT_MAX_NEW};
use cmtrace::model::{Lexicon, Model};
use serde_json::json;

use crate::{require_files, write_json, ModalityArg, OutputArgs};

#[derive(Debug, Clone, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub lexicon: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Modalities to filter; one output file each.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "t2t")]
    pub modality: Vec<ModalityArg>,
    /// Greedy tokens generated per record.
    #[arg(long, default_value_t = DEFAULT_MAX_NEW)]
    pub max_new: usize,
    /// Generated words allowed before the attribute for an exact verdict.
    #[arg(long, default_value_t = 0)]
    pub exact_offset: usize,
    /// Drop partial matches.
    #[arg(long)]
    pub exact_only: bool,
    /// Field-name overrides, e.g. `attribute=target,id=case_id`.
    #[arg(long, default_value = "")]
    pub fields: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterSummary {
    /// `(modality, kept, input)`.
    pub retained: Vec<(ModalityArg, usize, usize)>,
}

impl fmt::Display for FilterSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.retained.iter().map(|(m, k, n)| format!("{}: kept {k} of {n}", m.as_str())).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Writes `known_<modality>.json` per modality and `filter_summary.json`.
pub fn cmd_filter(args: &FilterArgs) -> Result<FilterSummary> {
    require_files(&[
        ("--model", args.model.as_path()),
        ("--lexicon", args.lexicon.as_path()),
        ("--dataset", args.dataset.as_path()),
    ])?;
    let model = Model::load(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let lexicon = Lexicon::load(&args.lexicon, model.vocab())?;
    let fields = FieldMap::default().with_overrides(&args.fields)?;
    let records = load_known(&args.dataset, &fields)?;
    let out = args.output.prepare()?;

    let rules = JudgeRules { exact_offset: args.exact_offset, keep_partial: !args.exact_only };
    let mut retained = Vec::new();
    let mut report = Vec::new();
    for &m in &args.modality {
        if retained.iter().any(|(seen, _, _)| *seen == m) {
            continue;
        }
        let filtered = filter_dataset(&model, &lexicon, &records, m.modality(), args.max_new, &rules)?;
        write_json(&out.join(format!("known_{}.json", m.as_str())), &filtered.to_json(&fields))?;
        let exact = filtered.records.iter().filter(|r| r.judgment.verdict == Verdict::Exact).count();
        report.push(json!({
            "modality": m.as_str(),
            "input": records.len(),
            "kept": filtered.records.len(),
            "exact": exact,
            "partial": filtered.records.len() - exact,
            "retention": filtered.retention(),
        }));
        retained.push((m, filtered.records.len(), records.len()));
    }
    let summary = json!({
        "max_new": args.max_new,
        "exact_offset": args.exact_offset,
        "keep_partial": !args.exact_only,
        "modalities": report,
    });
    write_json(&out.join("filter_summary.json"), &summary)?;
    Ok(FilterSummary { retained })
}
