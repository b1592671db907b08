use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use cmtrace::aligner::write_emissions;
use cmtrace::dataset::FieldMap;
use cmtrace::fixtures::{demo_emissions, planted_bundle, DEMO_TRANSCRIPT};
use serde_json::Value;

use crate::{write_file, write_json};

pub const FIXTURE_TRANSCRIPT: &str = DEMO_TRANSCRIPT;

#[derive(Debug, Clone, Args)]
pub struct FixtureArgs {
    #[arg(long, short = 'o', env = "CMTRACE_OUTPUT_DIR", default_value = "fixtures/planted")]
    pub output_dir: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub n_layers: usize,
    /// Std of random weights added outside the planted circuit.
    #[arg(long, default_value_t = 0.0)]
    pub background: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Writes `model.weights`, `lexicon.txt`, `known.json`, `emissions.bin` and
/// `transcript.txt`.
pub fn cmd_fixture(args: &FixtureArgs) -> Result<PathBuf> {
    let out = &args.output_dir;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let bundle = planted_bundle(args.n_layers, args.background, args.seed)?;
    bundle.planted.model.save(out.join("model.weights"))?;
    bundle.lexicon.save(out.join("lexicon.txt"))?;
    let fields = FieldMap::default();
    let known: Vec<Value> = bundle.records.iter().map(|r| Value::Object(r.to_json(&fields))).collect();
    write_json(&out.join("known.json"), &known)?;

    let em = demo_emissions(DEMO_TRANSCRIPT, args.seed)?;
    let mut buf = Vec::new();
    write_emissions(&em, &mut buf)?;
    write_file(&out.join("emissions.bin"), &buf)?;
    write_file(&out.join("transcript.txt"), format!("{DEMO_TRANSCRIPT}\n").as_bytes())?;
    Ok(out.clone())
}
