//! Emissions file: ASCII header then `frames × labels` little-endian `f64`
//! log-probabilities, row-major.
//!
//! ```text
//! cmtrace-emissions v1
//! frames=120
//! labels=29
//! label_list=-|ETAONIHSRDLUMWCFGYPBVK'XJQZ
//! blank=-
//! boundary=|
//! sample_rate=16000
//! samples=38400
//! token_rate=25
//! end_header
//! ```
//!
//! `token_rate` may be omitted and supplied by the caller instead.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{parse_rate, AlignError, AudioMeta, EmissionMatrix, LabelVocab, Rational};

const MAGIC: &str = "cmtrace-emissions v1";
const END: &str = "end_header";

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionsFile {
    pub emissions: EmissionMatrix,
    pub sample_rate: i64,
    pub sample_count: i64,
    pub token_rate: Option<Rational>,
}

impl EmissionsFile {
    /// Audio metadata, with `token_rate` taking precedence over the header.
    pub fn meta(&self, token_rate: Option<Rational>) -> Result<AudioMeta, AlignError> {
        let token_rate = token_rate.or(self.token_rate).ok_or_else(|| {
            AlignError::InvalidMeta("no token rate in the emissions header or on the command line".into())
        })?;
        let meta = AudioMeta {
            sample_count: self.sample_count,
            sample_rate: self.sample_rate,
            frame_count: self.emissions.frames(),
            token_rate,
        };
        meta.validate()?;
        Ok(meta)
    }
}

fn check_char(name: &str, c: char) -> Result<(), AlignError> {
    if c.is_whitespace() || c == '=' {
        return Err(AlignError::Format(format!("{name} {c:?} cannot be stored in the header")));
    }
    Ok(())
}

pub fn write_emissions<W: Write>(file: &EmissionsFile, mut w: W) -> Result<(), AlignError> {
    let em = &file.emissions;
    let vocab = em.vocab();
    for &c in vocab.labels() {
        check_char("label", c)?;
    }
    let mut header = format!(
        "{MAGIC}\nframes={}\nlabels={}\nlabel_list={}\nblank={}\nboundary={}\nsample_rate={}\nsamples={}\n",
        em.frames(),
        vocab.len(),
        vocab.labels().iter().collect::<String>(),
        vocab.blank,
        vocab.boundary,
        file.sample_rate,
        file.sample_count,
    );
    if let Some(tr) = file.token_rate {
        header.push_str(&format!("token_rate={tr}\n"));
    }
    header.push_str(END);
    header.push('\n');
    w.write_all(header.as_bytes())?;
    let mut buf = Vec::with_capacity(em.log_probs().len() * 8);
    for v in em.log_probs() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_emissions<R: BufRead>(mut r: R) -> Result<EmissionsFile, AlignError> {
    let err = |m: String| AlignError::Format(m);
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != MAGIC {
        return Err(err(format!("bad magic line {:?}", line.trim_end())));
    }
    let mut kv = HashMap::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(err("header ended without end_header".into()));
        }
        let l = line.trim_end_matches(['\n', '\r']);
        if l == END {
            break;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| err(format!("header line without '=': {l:?}")))?;
        kv.insert(k.trim().to_string(), v.to_string());
    }
    let get = |k: &str| kv.get(k).map(String::as_str).ok_or_else(|| err(format!("header missing {k}")));
    let int = |k: &str| -> Result<i64, AlignError> {
        get(k)?.trim().parse().map_err(|_| err(format!("header {k} is not an integer")))
    };
    let single = |k: &str| -> Result<char, AlignError> {
        let mut cs = get(k)?.chars();
        match (cs.next(), cs.next()) {
            (Some(c), None) => Ok(c),
            _ => Err(err(format!("header {k} must be one character"))),
        }
    };
    let frames = usize::try_from(int("frames")?).map_err(|_| err("negative frame count".into()))?;
    let n_labels = usize::try_from(int("labels")?).map_err(|_| err("negative label count".into()))?;
    let labels: Vec<char> = get("label_list")?.chars().collect();
    if labels.len() != n_labels {
        return Err(err(format!("label_list has {} labels, header says {n_labels}", labels.len())));
    }
    let vocab = LabelVocab::new(labels, single("blank")?, single("boundary")?)?;
    let token_rate = kv.get("token_rate").map(|s| parse_rate(s)).transpose()?;

    let total = frames * n_labels;
    let mut bytes = Vec::with_capacity(total * 8);
    r.read_to_end(&mut bytes)?;
    if bytes.len() != total * 8 {
        return Err(err(format!("payload is {} bytes, expected {}", bytes.len(), total * 8)));
    }
    let lp = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    Ok(EmissionsFile {
        emissions: EmissionMatrix::new(lp, frames, vocab)?,
        sample_rate: int("sample_rate")?,
        sample_count: int("samples")?,
        token_rate,
    })
}
