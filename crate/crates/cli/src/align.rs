use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use cmtrace::aligner::{align, parse_rate, read_emissions, subject_span};
use cmtrace::report::trellis_heatmap_svg;
use serde_json::json;

use crate::{require_files, write_file, write_json, OutputArgs};

#[derive(Debug, Clone, Args)]
pub struct AlignArgs {
    /// Emissions file.
    #[arg(long)]
    pub emissions: PathBuf,
    /// Raw transcript; numbers and symbols are spelled out.
    #[arg(long)]
    pub transcript: String,
    /// Speech tokens per second (`25`, `12.5`, `50/3`). Overrides the header.
    #[arg(long)]
    pub token_rate: Option<String>,
    /// Report the union speech-token range of these words.
    #[arg(long)]
    pub subject: Option<String>,
    /// Also write `trellis.svg` with the best path overlaid.
    #[arg(long)]
    pub trellis_heatmap: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Writes `spans.json` (and optionally `trellis.svg`); returns the span count.
pub fn cmd_align(args: &AlignArgs) -> Result<usize> {
    require_files(&[("--emissions", args.emissions.as_path())])?;
    let file = std::fs::File::open(&args.emissions)
        .with_context(|| format!("opening emissions {}", args.emissions.display()))?;
    let em = read_emissions(BufReader::new(file))
        .with_context(|| format!("reading emissions {}", args.emissions.display()))?;
    let rate = args.token_rate.as_deref().map(parse_rate).transpose()?;
    let meta = em.meta(rate).context("a token rate is required (--token-rate)")?;
    let al = align(&em.emissions, &args.transcript, &meta)?;

    let out = args.output.prepare()?;
    let subject = match &args.subject {
        Some(s) => {
            let words: Vec<String> = cmtrace::aligner::preprocess_transcript(s, em.emissions.vocab())?.tokens;
            let (a, b) = subject_span(&al.spans, &words)?;
            Some(json!({"tokens": words, "speech_token_range": [a, b]}))
        }
        None => None,
    };
    let doc = json!({
        "transcript": al.transcript.joined,
        "frames": meta.frame_count,
        "sample_rate": meta.sample_rate,
        "samples": meta.sample_count,
        "token_rate": meta.token_rate.to_string(),
        "path_log_prob": al.trellis.score(),
        "spans": al.spans.iter().map(|s| json!({
            "token": s.token_text,
            "frame_range": [s.frame_start, s.frame_end],
            "time_range": [s.time_start, s.time_end],
            "speech_token_range": [s.token_start, s.token_end],
            "score": s.score,
        })).collect::<Vec<_>>(),
        "subject": subject,
    });
    write_json(&out.join("spans.json"), &doc)?;
    if args.trellis_heatmap {
        let labels: Vec<char> = al.transcript.joined.chars().collect();
        write_file(&out.join("trellis.svg"), trellis_heatmap_svg(&al.trellis, &al.path, &labels).as_bytes())?;
    }
    Ok(al.spans.len())
}
