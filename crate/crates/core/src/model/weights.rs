//! In-memory weights and the on-disk weight file.
//!
//! File layout: an ASCII header of `key=value` lines terminated by a line
//! reading `end_header`, followed by every tensor as little-endian `f64`,
//! row-major, in the order listed under `tensors=`. Matrices are stored
//! `[out][in]` so that `y = W x`.
//!
//! ```text
//! cmtrace-weights v1
//! n_layers=2
//! d_model=8
//! n_heads=2
//! d_mlp=16
//! max_positions=8
//! rng_seed=1
//! text_tokens=2..12
//! speech_tokens=12..16
//! text_marker=0
//! speech_marker=1
//! tensors=token_embedding:16x8,position_embedding:8x8,layer0.attn_norm:8,...
//! end_header
//! ```

use std::io::{BufRead, Write};
use std::ops::Range;

use super::{ModelConfig, ModelError, VocabLayout};

const MAGIC: &str = "cmtrace-weights v1";
const END: &str = "end_header";

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// `out = self · x`
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = row.iter().zip(x).map(|(w, v)| w * v).sum();
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub attn_norm: Vec<f64>,
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
    pub w_o: Matrix,
    pub mlp_norm: Vec<f64>,
    pub w_up: Matrix,
    pub b_up: Vec<f64>,
    pub w_down: Matrix,
}

impl LayerWeights {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let d = cfg.d_model;
        Self {
            attn_norm: vec![1.0; d],
            w_q: Matrix::zeros(d, d),
            w_k: Matrix::zeros(d, d),
            w_v: Matrix::zeros(d, d),
            w_o: Matrix::zeros(d, d),
            mlp_norm: vec![1.0; d],
            w_up: Matrix::zeros(cfg.d_mlp, d),
            b_up: vec![0.0; cfg.d_mlp],
            w_down: Matrix::zeros(d, cfg.d_mlp),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub token_embedding: Matrix,
    pub position_embedding: Matrix,
    pub layers: Vec<LayerWeights>,
    pub final_norm: Vec<f64>,
    pub unembedding: Matrix,
}

impl Weights {
    /// All-zero projections with unit norm gains.
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let (v, d) = (cfg.vocab_size(), cfg.d_model);
        Self {
            token_embedding: Matrix::zeros(v, d),
            position_embedding: Matrix::zeros(cfg.max_positions, d),
            layers: (0..cfg.n_layers).map(|_| LayerWeights::zeros(cfg)).collect(),
            final_norm: vec![1.0; d],
            unembedding: Matrix::zeros(v, d),
        }
    }

    /// `(name, shape)` in file order.
    pub fn tensor_layout(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
        let (v, d, m) = (cfg.vocab_size(), cfg.d_model, cfg.d_mlp);
        let mut out = vec![
            ("token_embedding".to_string(), vec![v, d]),
            ("position_embedding".to_string(), vec![cfg.max_positions, d]),
        ];
        for l in 0..cfg.n_layers {
            for (name, shape) in [
                ("attn_norm", vec![d]),
                ("w_q", vec![d, d]),
                ("w_k", vec![d, d]),
                ("w_v", vec![d, d]),
                ("w_o", vec![d, d]),
                ("mlp_norm", vec![d]),
                ("w_up", vec![m, d]),
                ("b_up", vec![m]),
                ("w_down", vec![d, m]),
            ] {
                out.push((format!("layer{l}.{name}"), shape));
            }
        }
        out.push(("final_norm".to_string(), vec![d]));
        out.push(("unembedding".to_string(), vec![v, d]));
        out
    }

    fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.token_embedding.data, &self.position_embedding.data];
        for l in &self.layers {
            out.extend_from_slice(&[
                &l.attn_norm[..],
                &l.w_q.data,
                &l.w_k.data,
                &l.w_v.data,
                &l.w_o.data,
                &l.mlp_norm,
                &l.w_up.data,
                &l.b_up,
                &l.w_down.data,
            ]);
        }
        out.push(&self.final_norm);
        out.push(&self.unembedding.data);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = vec![&mut self.token_embedding.data, &mut self.position_embedding.data];
        for l in &mut self.layers {
            out.push(&mut l.attn_norm);
            out.push(&mut l.w_q.data);
            out.push(&mut l.w_k.data);
            out.push(&mut l.w_v.data);
            out.push(&mut l.w_o.data);
            out.push(&mut l.mlp_norm);
            out.push(&mut l.w_up.data);
            out.push(&mut l.b_up);
            out.push(&mut l.w_down.data);
        }
        out.push(&mut self.final_norm);
        out.push(&mut self.unembedding.data);
        out
    }

    pub(crate) fn check_shapes(&self, cfg: &ModelConfig) -> Result<(), ModelError> {
        for ((name, shape), t) in Self::tensor_layout(cfg).iter().zip(self.tensors()) {
            let want: usize = shape.iter().product();
            if t.len() != want {
                return Err(ModelError::WeightFormat(format!("tensor {name} has {} values, expected {want}", t.len())));
            }
        }
        if self.layers.len() != cfg.n_layers {
            return Err(ModelError::WeightFormat(format!(
                "{} layers present, config declares {}",
                self.layers.len(),
                cfg.n_layers
            )));
        }
        Ok(())
    }
}

fn fmt_range(r: &Range<usize>) -> String {
    format!("{}..{}", r.start, r.end)
}

fn parse_range(s: &str) -> Option<Range<usize>> {
    let (a, b) = s.split_once("..")?;
    Some(a.trim().parse().ok()?..b.trim().parse().ok()?)
}

pub fn write_weights<W: Write>(cfg: &ModelConfig, weights: &Weights, mut w: W) -> Result<(), ModelError> {
    weights.check_shapes(cfg)?;
    let layout = Weights::tensor_layout(cfg);
    let tensors: Vec<String> = layout
        .iter()
        .map(|(n, s)| {
            let dims: Vec<String> = s.iter().map(usize::to_string).collect();
            format!("{n}:{}", dims.join("x"))
        })
        .collect();
    let header = format!(
        "{MAGIC}\nn_layers={}\nd_model={}\nn_heads={}\nd_mlp={}\nmax_positions={}\nrng_seed={}\n\
         text_tokens={}\nspeech_tokens={}\ntext_marker={}\nspeech_marker={}\ntensors={}\n{END}\n",
        cfg.n_layers,
        cfg.d_model,
        cfg.n_heads,
        cfg.d_mlp,
        cfg.max_positions,
        cfg.rng_seed,
        fmt_range(&cfg.vocab.text_tokens),
        fmt_range(&cfg.vocab.speech_tokens),
        cfg.vocab.text_marker,
        cfg.vocab.speech_marker,
        tensors.join(",")
    );
    w.write_all(header.as_bytes())?;
    let mut buf = Vec::new();
    for t in weights.tensors() {
        buf.clear();
        buf.reserve(t.len() * 8);
        for v in t {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_weights<R: BufRead>(mut r: R) -> Result<(ModelConfig, Weights), ModelError> {
    let fmt_err = |m: String| ModelError::WeightFormat(m);
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != MAGIC {
        return Err(fmt_err(format!("bad magic line {:?}", line.trim_end())));
    }
    let mut kv = std::collections::HashMap::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(fmt_err("header ended without end_header".into()));
        }
        let l = line.trim_end();
        if l == END {
            break;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| fmt_err(format!("header line without '=': {l:?}")))?;
        kv.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| kv.get(k).ok_or_else(|| fmt_err(format!("header missing {k}")));
    let num = |k: &str| -> Result<usize, ModelError> {
        get(k)?.parse().map_err(|_| fmt_err(format!("header {k} is not an integer")))
    };
    let range = |k: &str| -> Result<Range<usize>, ModelError> {
        parse_range(get(k)?).ok_or_else(|| fmt_err(format!("header {k} is not a range a..b")))
    };
    let cfg = ModelConfig {
        n_layers: num("n_layers")?,
        d_model: num("d_model")?,
        n_heads: num("n_heads")?,
        d_mlp: num("d_mlp")?,
        max_positions: num("max_positions")?,
        rng_seed: get("rng_seed")?.parse().map_err(|_| fmt_err("header rng_seed is not an integer".into()))?,
        vocab: VocabLayout {
            text_tokens: range("text_tokens")?,
            speech_tokens: range("speech_tokens")?,
            text_marker: num("text_marker")?,
            speech_marker: num("speech_marker")?,
        },
    };
    cfg.validate()?;

    let expected = Weights::tensor_layout(&cfg);
    let declared: Vec<&str> = get("tensors")?.split(',').collect();
    if declared.len() != expected.len() {
        return Err(fmt_err(format!("header declares {} tensors, config implies {}", declared.len(), expected.len())));
    }
    for (decl, (name, shape)) in declared.iter().zip(&expected) {
        let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
        let want = format!("{name}:{}", dims.join("x"));
        if *decl != want {
            return Err(fmt_err(format!("tensor entry {decl:?} does not match expected {want:?}")));
        }
    }

    let mut weights = Weights::zeros(&cfg);
    let total: usize = expected.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    let mut bytes = Vec::with_capacity(total * 8);
    r.read_to_end(&mut bytes)?;
    if bytes.len() != total * 8 {
        return Err(fmt_err(format!(
            "payload is {} bytes, header declares {} f64 values ({} bytes)",
            bytes.len(),
            total,
            total * 8
        )));
    }
    let mut chunks = bytes.chunks_exact(8);
    for t in weights.tensors_mut() {
        for v in t.iter_mut() {
            let c = chunks.next().expect("payload length checked");
            *v = f64::from_le_bytes(c.try_into().expect("chunk of 8"));
        }
    }
    Ok((cfg, weights))
}
