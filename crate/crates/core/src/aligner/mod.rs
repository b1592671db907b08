//! CTC forced alignment of a transcript against per-frame label emissions.
//!
//! Pipeline: [`preprocess_transcript`] → [`build_trellis`] → [`backtrack`] →
//! [`merge_repeats`] → [`merge_words`] → [`frame_to_time`] →
//! [`time_to_speech_tokens`]. [`align`] runs all of it.

mod fixtures;
mod io;
mod segments;
mod text;
mod timing;
mod trellis;

use thiserror::Error;

pub use fixtures::{synthetic_emissions, SyntheticEmissions};
pub use io::{read_emissions, write_emissions, EmissionsFile};
pub use segments::{merge_repeats, merge_words, Segment, TokenSpan};
pub use text::{number_words, preprocess_transcript, Transcript};
pub use timing::{frame_to_time, parse_rate, time_to_speech_tokens, AudioMeta, Rational};
pub use trellis::{backtrack, build_trellis, path_log_prob, PathPoint, Trellis};

/// Tolerance on `logsumexp` of each emission row.
pub const ROW_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("transcript {0:?} is empty after preprocessing")]
    EmptyTranscript(String),
    #[error("no alignment: {labels} labels cannot fit in {frames} frames")]
    Infeasible { frames: usize, labels: usize },
    #[error("label id {0} is outside the vocabulary")]
    LabelOutOfRange(usize),
    #[error("invalid label vocabulary: {0}")]
    InvalidVocab(String),
    #[error("emission matrix: {0}")]
    InvalidEmissions(String),
    #[error("frame {frame}: row log-sum-exp is {lse}, expected 0")]
    NotNormalized { frame: usize, lse: f64 },
    #[error("frame range {start}..{end} invalid for {frames} frames")]
    InvalidFrameRange { start: usize, end: usize, frames: usize },
    #[error("negative time {0}")]
    NegativeTime(String),
    #[error("invalid audio metadata: {0}")]
    InvalidMeta(String),
    #[error("subject token {0:?} not found among aligned spans")]
    SubjectNotFound(String),
    #[error("emissions file: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for AlignError {
    fn from(e: std::io::Error) -> Self {
        AlignError::Io(e.to_string())
    }
}

/// Ordered CTC labels with a blank and a word-boundary symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVocab {
    labels: Vec<char>,
    pub blank: char,
    pub boundary: char,
}

impl LabelVocab {
    pub fn new(labels: Vec<char>, blank: char, boundary: char) -> Result<Self, AlignError> {
        if blank == boundary {
            return Err(AlignError::InvalidVocab("blank and boundary must differ".into()));
        }
        for (i, c) in labels.iter().enumerate() {
            if labels[..i].contains(c) {
                return Err(AlignError::InvalidVocab(format!("duplicate label {c:?}")));
            }
        }
        for (name, c) in [("blank", blank), ("boundary", boundary)] {
            if !labels.contains(&c) {
                return Err(AlignError::InvalidVocab(format!("{name} {c:?} is not a label")));
            }
        }
        Ok(Self { labels, blank, boundary })
    }

    /// The 29-label English character set of common wav2vec2/HuBERT CTC heads.
    pub fn english() -> Self {
        let labels = "-|ETAONIHSRDLUMWCFGYPBVK'XJQZ".chars().collect();
        Self::new(labels, '-', '|').expect("preset is valid")
    }

    pub fn labels(&self) -> &[char] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index(&self, c: char) -> Option<usize> {
        self.labels.iter().position(|&l| l == c)
    }

    pub fn label(&self, i: usize) -> char {
        self.labels[i]
    }

    pub fn blank_index(&self) -> usize {
        self.index(self.blank).expect("validated")
    }

    pub fn boundary_index(&self) -> usize {
        self.index(self.boundary).expect("validated")
    }

    /// True unless some cased letter in the vocabulary is lowercase.
    pub fn is_uppercase(&self) -> bool {
        !self.labels.iter().any(|c| c.is_lowercase())
    }

    /// Label ids of a preprocessed (joined) transcript.
    pub fn encode(&self, joined: &str) -> Result<Vec<usize>, AlignError> {
        joined
            .chars()
            .map(|c| self.index(c).ok_or_else(|| AlignError::InvalidVocab(format!("character {c:?} is not a label"))))
            .collect()
    }
}

/// `T × V` frame-wise label log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionMatrix {
    log_probs: Vec<f64>,
    frames: usize,
    vocab: LabelVocab,
}

impl EmissionMatrix {
    /// Row-major log-probabilities; every row must be a distribution.
    pub fn new(log_probs: Vec<f64>, frames: usize, vocab: LabelVocab) -> Result<Self, AlignError> {
        let v = vocab.len();
        if log_probs.len() != frames * v {
            return Err(AlignError::InvalidEmissions(format!(
                "{} values for {frames} frames x {v} labels",
                log_probs.len()
            )));
        }
        for (t, row) in log_probs.chunks_exact(v).enumerate() {
            if row.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
                return Err(AlignError::InvalidEmissions(format!("frame {t} has NaN or +inf")));
            }
            let lse = logsumexp(row);
            if lse.is_nan() || lse.abs() > ROW_TOLERANCE {
                return Err(AlignError::NotNormalized { frame: t, lse });
            }
        }
        Ok(Self { log_probs, frames, vocab })
    }

    /// Normalises each row of raw scores with a log-softmax first.
    pub fn from_logits(logits: Vec<f64>, frames: usize, vocab: LabelVocab) -> Result<Self, AlignError> {
        let v = vocab.len().max(1);
        let mut lp = logits;
        for row in lp.chunks_mut(v) {
            let lse = logsumexp(row);
            row.iter_mut().for_each(|x| *x -= lse);
        }
        Self::new(lp, frames, vocab)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn vocab(&self) -> &LabelVocab {
        &self.vocab
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let v = self.vocab.len();
        &self.log_probs[t * v..(t + 1) * v]
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }
}

fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Everything produced by one alignment run.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub transcript: Transcript,
    pub trellis: Trellis,
    pub path: Vec<PathPoint>,
    pub segments: Vec<Segment>,
    pub spans: Vec<TokenSpan>,
}

/// Aligns `raw` against `em` and maps every spoken token to frames, seconds
/// and speech tokens.
pub fn align(em: &EmissionMatrix, raw: &str, meta: &AudioMeta) -> Result<Alignment, AlignError> {
    meta.validate()?;
    if meta.frame_count != em.frames() {
        return Err(AlignError::InvalidMeta(format!(
            "metadata declares {} frames, emissions have {}",
            meta.frame_count,
            em.frames()
        )));
    }
    let vocab = em.vocab();
    let transcript = preprocess_transcript(raw, vocab)?;
    let ids = vocab.encode(&transcript.joined)?;
    let trellis = build_trellis(em, &ids)?;
    let path = backtrack(&trellis, em)?;
    let segments = merge_repeats(&path, &ids, vocab);
    let mut spans = merge_words(&segments, vocab);
    for span in &mut spans {
        span.set_timing(meta)?;
    }
    Ok(Alignment { transcript, trellis, path, segments, spans })
}

/// Union speech-token range of the first run of consecutive spans whose texts
/// equal `subject_tokens` (compared case-insensitively).
pub fn subject_span(spans: &[TokenSpan], subject_tokens: &[String]) -> Result<(i64, i64), AlignError> {
    let want: Vec<String> = subject_tokens.iter().map(|s| s.to_uppercase()).collect();
    let Some(first) = want.first() else {
        return Err(AlignError::SubjectNotFound(String::new()));
    };
    let n = want.len();
    let hit = (0..spans.len().saturating_sub(n - 1))
        .find(|&i| spans[i..i + n].iter().zip(&want).all(|(s, w)| s.token_text.to_uppercase() == *w));
    match hit {
        Some(i) => {
            let group = &spans[i..i + n];
            let start = group.iter().map(|s| s.token_start).min().expect("non-empty");
            let end = group.iter().map(|s| s.token_end).max().expect("non-empty");
            Ok((start, end))
        }
        None => {
            let texts: Vec<String> = spans.iter().map(|s| s.token_text.to_uppercase()).collect();
            let missing = want.iter().find(|w| !texts.contains(w)).unwrap_or(first);
            Err(AlignError::SubjectNotFound(missing.clone()))
        }
    }
}

/// For each of `n_speech` speech tokens, the index of the spoken token it
/// belongs to. Tokens between spans go to the preceding span (the first
/// span before any), and tokens claimed by two spans go to the earlier one.
pub fn text_map_from_spans(spans: &[TokenSpan], n_speech: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n_speech);
    let mut cur = 0usize;
    for k in 0..n_speech as i64 {
        while cur + 1 < spans.len() && spans[cur + 1].token_start <= k && spans[cur].token_end <= k {
            cur += 1;
        }
        out.push(cur);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocab_invariants() {
        assert!(LabelVocab::new(vec!['-', '|', 'A'], '-', '-').is_err());
        assert!(LabelVocab::new(vec!['-', '|', 'A', 'A'], '-', '|').is_err());
        assert!(LabelVocab::new(vec!['-', 'A'], '-', '|').is_err());
        let v = LabelVocab::english();
        assert_eq!(v.len(), 29);
        assert_eq!(v.blank_index(), 0);
        assert_eq!(v.boundary_index(), 1);
        assert!(v.is_uppercase());
        assert!(!LabelVocab::new(vec!['-', '|', 'a'], '-', '|').unwrap().is_uppercase());
    }

    #[test]
    fn emission_rows_must_normalise() {
        let v = LabelVocab::new(vec!['-', '|', 'A'], '-', '|').unwrap();
        let bad = vec![0.5f64.ln(), 0.3f64.ln(), 0.1f64.ln()];
        assert!(matches!(
            EmissionMatrix::new(bad.clone(), 1, v.clone()),
            Err(AlignError::NotNormalized { frame: 0, .. })
        ));
        let fixed = EmissionMatrix::from_logits(bad, 1, v.clone()).unwrap();
        assert!((fixed.row(0).iter().map(|x| x.exp()).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(EmissionMatrix::new(vec![0.0; 4], 1, v).is_err());
    }

    fn span(text: &str, start: i64, end: i64) -> TokenSpan {
        TokenSpan {
            token_text: text.into(),
            frame_start: 0,
            frame_end: 1,
            sample_start: 0,
            sample_end: 0,
            time_start: 0.0,
            time_end: 0.0,
            token_start: start,
            token_end: end,
            score: 1.0,
        }
    }

    #[test]
    fn subject_lookup() {
        let spans: Vec<TokenSpan> =
            [("THE", 0, 2), ("CAPITAL", 2, 6), ("OF", 6, 7), ("ROMAN", 7, 10), ("REPUBLIC", 10, 15), ("IS", 15, 16)]
                .iter()
                .map(|(t, a, b)| span(t, *a, *b))
                .collect();
        let subj = vec!["Roman".to_string(), "Republic".to_string()];
        assert_eq!(subject_span(&spans, &subj), Ok((7, 15)));
        assert_eq!(subject_span(&spans, &["of".to_string()]), Ok((6, 7)));
        assert_eq!(subject_span(&spans, &["PARIS".to_string()]), Err(AlignError::SubjectNotFound("PARIS".into())));
    }

    #[test]
    fn first_match_wins() {
        let spans = vec![span("A", 0, 1), span("B", 1, 2), span("A", 2, 3)];
        assert_eq!(subject_span(&spans, &["A".to_string()]), Ok((0, 1)));
    }

    #[test]
    fn text_map_assigns_gaps_and_overlaps() {
        let spans = vec![span("A", 1, 3), span("B", 2, 5), span("C", 7, 8)];
        assert_eq!(text_map_from_spans(&spans, 9), vec![0, 0, 0, 1, 1, 1, 1, 2, 2]);
    }
}
