use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use cmtrace::report::{grid_heatmap_svg, read_grid_csv, read_grid_json, write_grid_csv, write_grid_json, HeatmapScale};

use crate::{require_files, write_file, OutputArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Svg,
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Grid files (`.json` or `.csv`).
    #[arg(required = true)]
    pub grids: Vec<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "svg,csv")]
    pub format: Vec<ReportFormat>,
    /// Colour linear AIE instead of log10 AIE.
    #[arg(long)]
    pub linear: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Re-exports each grid in the requested formats; returns the grid count.
pub fn cmd_report(args: &ReportArgs) -> Result<usize> {
    for path in &args.grids {
        require_files(&[("grid file", path.as_path())])?;
    }
    let out = args.output.prepare()?;
    for path in &args.grids {
        let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let reader = BufReader::new(file);
        let (grid, meta) = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => read_grid_json(reader),
            Some("csv") => read_grid_csv(reader).map(|g| (g, None)),
            _ => bail!("{}: grid files must end in .json or .csv", path.display()),
        }
        .with_context(|| format!("reading grid {}", path.display()))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("grid");
        for fmt in &args.format {
            match fmt {
                ReportFormat::Svg => {
                    let scale = if args.linear { HeatmapScale::Linear } else { HeatmapScale::Log };
                    let title = format!(
                        "{} (window {}, {} prompts), {}",
                        grid.kind.as_str(),
                        grid.window,
                        grid.n_prompts,
                        if args.linear { "AIE" } else { "log10 AIE" }
                    );
                    write_file(&out.join(format!("{stem}.svg")), grid_heatmap_svg(&grid, &title, scale).as_bytes())?;
                }
                ReportFormat::Csv => {
                    let mut buf = Vec::new();
                    write_grid_csv(&grid, &mut buf)?;
                    write_file(&out.join(format!("{stem}.csv")), &buf)?;
                }
                ReportFormat::Json => {
                    let mut buf = Vec::new();
                    write_grid_json(&grid, meta, &mut buf)?;
                    write_file(&out.join(format!("{stem}.json")), &buf)?;
                }
            }
        }
    }
    Ok(args.grids.len())
}
