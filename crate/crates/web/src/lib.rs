//! Browser bindings for the demo page in `www/`.
//!
//! Each export returns a JSON string; errors surface as thrown JS errors.

use cmtrace::aligner::{align, frame_to_time, parse_rate, time_to_speech_tokens, AudioMeta};
use cmtrace::dataset::record_prompt;
use cmtrace::fixtures::{demo_emissions, demo_meta, planted_bundle};
use cmtrace::model::{ComponentKind, Modality};
use cmtrace::report::{grid_heatmap_svg, trellis_heatmap_svg, HeatmapScale};
use cmtrace::tracer::{average_grids, CorruptionSpec, Tracer};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const DEMO_LAYERS: usize = 4;
const DEMO_BACKGROUND: f64 = 0.02;

/// Traces the planted-fact model's MLP outputs over its eight prompts.
pub fn planted_trace(noise_scale: f64, seed: u64, window: usize) -> Result<Value, String> {
    if !(noise_scale.is_finite() && noise_scale >= 0.0) {
        return Err("noise scale must be a finite non-negative number".into());
    }
    let bundle = planted_bundle(DEMO_LAYERS, DEMO_BACKGROUND, 0).map_err(|e| e.to_string())?;
    let model = &bundle.planted.model;
    let corruption = CorruptionSpec::for_model(model, noise_scale, seed);
    let tracer = Tracer::new(model, corruption);
    let mut results = Vec::new();
    for rec in &bundle.records {
        let prompt = record_prompt(rec, &bundle.lexicon, model, Modality::Text).map_err(|e| e.to_string())?;
        results.push(tracer.trace_prompt(&prompt, ComponentKind::MlpOut, window).map_err(|e| e.to_string())?);
    }
    let grid = average_grids(&results, ComponentKind::MlpOut).map_err(|e| e.to_string())?;
    let n = results.len() as f64;
    let title = format!("mlp_out (window {window}, {} prompts), log10 AIE", results.len());
    Ok(json!({
        "svg": grid_heatmap_svg(&grid, &title, HeatmapScale::Log),
        "argmax": grid.argmax().map(|(b, l, v)| json!({"bucket": b.as_str(), "layer": l, "aie": v})),
        "mean_p_clean": results.iter().map(|r| r.p_clean).sum::<f64>() / n,
        "mean_p_corrupt": results.iter().map(|r| r.p_corrupt).sum::<f64>() / n,
        "sigma": corruption.sigma,
    }))
}

/// Aligns `transcript` against synthetic emissions built for it.
pub fn align_demo(transcript: &str, seed: u64) -> Result<Value, String> {
    let file = demo_emissions(transcript, seed).map_err(|e| e.to_string())?;
    let meta = demo_meta(&file);
    let al = align(&file.emissions, transcript, &meta).map_err(|e| e.to_string())?;
    let labels: Vec<char> = al.transcript.joined.chars().collect();
    Ok(json!({
        "svg": trellis_heatmap_svg(&al.trellis, &al.path, &labels),
        "frames": meta.frame_count,
        "spans": al.spans.iter().map(|s| json!({
            "token": s.token_text,
            "frames": [s.frame_start, s.frame_end],
            "seconds": [s.time_start, s.time_end],
            "speech_tokens": [s.token_start, s.token_end],
            "score": s.score,
        })).collect::<Vec<_>>(),
    }))
}

/// Maps the frame range `f0..f1` to seconds and a speech-token range.
pub fn frame_span(
    sample_count: i64,
    sample_rate: i64,
    frame_count: usize,
    token_rate: &str,
    f0: usize,
    f1: usize,
) -> Result<Value, String> {
    let token_rate = parse_rate(token_rate).map_err(|e| e.to_string())?;
    let meta = AudioMeta { sample_count, sample_rate, frame_count, token_rate };
    let (s0, s1) = frame_to_time(f0, f1, &meta).map_err(|e| e.to_string())?;
    let (k0, k1) = time_to_speech_tokens(s0, s1, token_rate).map_err(|e| e.to_string())?;
    Ok(json!({
        "samples": [meta.samples_at(f0), meta.samples_at(f1)],
        "seconds": [s0.to_string(), s1.to_string()],
        "speech_tokens": [k0, k1],
    }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = plantedTrace)]
pub fn planted_trace_js(noise_scale: f64, seed: u32, window: u32) -> Result<String, JsError> {
    to_js(planted_trace(noise_scale, u64::from(seed), window as usize))
}

#[wasm_bindgen(js_name = alignDemo)]
pub fn align_demo_js(transcript: &str, seed: u32) -> Result<String, JsError> {
    to_js(align_demo(transcript, u64::from(seed)))
}

#[wasm_bindgen(js_name = frameSpan)]
pub fn frame_span_js(
    sample_count: f64,
    sample_rate: f64,
    frame_count: u32,
    token_rate: &str,
    f0: u32,
    f1: u32,
) -> Result<String, JsError> {
    let int = |x: f64, name: &str| {
        if x.fract() == 0.0 && x.abs() < 9.0e15 {
            Ok(x as i64)
        } else {
            Err(format!("{name} must be an integer"))
        }
    };
    let r = int(sample_count, "sample count").and_then(|m| {
        let sr = int(sample_rate, "sample rate")?;
        frame_span(m, sr, frame_count as usize, token_rate, f0 as usize, f1 as usize)
    });
    to_js(r)
}
