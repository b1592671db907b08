use std::ops::Range;

use super::{AlignError, EmissionMatrix, LabelVocab};

/// Emissions with a known best alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEmissions {
    pub emissions: EmissionMatrix,
    /// Frame block of each transcript label.
    pub label_frames: Vec<Range<usize>>,
    /// `(token, frames)` for each boundary-delimited token.
    pub word_frames: Vec<(String, Range<usize>)>,
}

/// Builds emissions for `joined` (a boundary-joined transcript) where label
/// `i` owns `frames_per_label[i]` consecutive frames: the first frame of the
/// block puts probability `peak` on the label and every later frame puts
/// `peak` on the blank. `lead` blank-peaked frames precede the first block.
/// The remaining mass is spread evenly over the other labels.
pub fn synthetic_emissions(
    joined: &str,
    vocab: &LabelVocab,
    frames_per_label: &[usize],
    lead: usize,
    peak: f64,
) -> Result<SyntheticEmissions, AlignError> {
    let ids = vocab.encode(joined)?;
    if ids.is_empty() {
        return Err(AlignError::EmptyTranscript(joined.into()));
    }
    if frames_per_label.len() != ids.len() || frames_per_label.contains(&0) {
        return Err(AlignError::InvalidEmissions(format!(
            "need one positive frame count per label ({} labels)",
            ids.len()
        )));
    }
    let v = vocab.len();
    if !(peak > 0.0 && peak < 1.0) || v < 2 {
        return Err(AlignError::InvalidEmissions("peak must lie in (0, 1)".into()));
    }
    let rest = ((1.0 - peak) / (v - 1) as f64).ln();
    let blank = vocab.blank_index();
    let mut lp = Vec::new();
    let mut push_row = |hot: usize| {
        lp.extend((0..v).map(|c| if c == hot { peak.ln() } else { rest }));
    };
    for _ in 0..lead {
        push_row(blank);
    }
    let mut label_frames = Vec::with_capacity(ids.len());
    let mut t = lead;
    for (&id, &k) in ids.iter().zip(frames_per_label) {
        push_row(id);
        for _ in 1..k {
            push_row(blank);
        }
        label_frames.push(t..t + k);
        t += k;
    }
    let mut word_frames = Vec::new();
    let mut current: Option<(String, Range<usize>)> = None;
    for (c, r) in joined.chars().zip(&label_frames) {
        if c == vocab.boundary {
            word_frames.extend(current.take());
        } else {
            match &mut current {
                Some((w, fr)) => {
                    w.push(c);
                    fr.end = r.end;
                }
                None => current = Some((c.to_string(), r.clone())),
            }
        }
    }
    word_frames.extend(current);
    Ok(SyntheticEmissions { emissions: EmissionMatrix::new(lp, t, vocab.clone())?, label_frames, word_frames })
}
