use serde::{Deserialize, Serialize};

use super::{frame_to_time, time_to_speech_tokens, AlignError, AudioMeta, LabelVocab, PathPoint};

/// Run of path frames sitting on one transcript label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub label: char,
    /// 1-based position in the transcript.
    pub label_index: usize,
    /// Half-open, 0-based frame interval.
    pub frame_start: usize,
    pub frame_end: usize,
    /// Mean per-frame probability.
    pub score: f64,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.frame_end - self.frame_start
    }

    pub fn is_empty(&self) -> bool {
        self.frame_end == self.frame_start
    }
}

/// One spoken token with its frame, time and speech-token ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenSpan {
    pub token_text: String,
    pub frame_start: usize,
    pub frame_end: usize,
    /// `⌊ratio · frame⌋` audio samples.
    pub sample_start: i64,
    pub sample_end: i64,
    /// Seconds (exact value is `sample / sample_rate`).
    pub time_start: f64,
    pub time_end: f64,
    pub token_start: i64,
    pub token_end: i64,
    pub score: f64,
}

impl TokenSpan {
    /// Fills sample, time and speech-token ranges from the frame range.
    pub fn set_timing(&mut self, meta: &AudioMeta) -> Result<(), AlignError> {
        let (s0, s1) = frame_to_time(self.frame_start, self.frame_end, meta)?;
        let (k0, k1) = time_to_speech_tokens(s0, s1, meta.token_rate)?;
        self.sample_start = meta.samples_at(self.frame_start);
        self.sample_end = meta.samples_at(self.frame_end);
        self.time_start = *s0.numer() as f64 / *s0.denom() as f64;
        self.time_end = *s1.numer() as f64 / *s1.denom() as f64;
        self.token_start = k0;
        self.token_end = k1;
        Ok(())
    }
}

/// Collapses consecutive path points on the same label index.
pub fn merge_repeats(path: &[PathPoint], transcript_ids: &[usize], vocab: &LabelVocab) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    let mut sum = 0.0;
    for p in path {
        let frame = p.time_index - 1;
        match out.last_mut() {
            Some(seg) if seg.label_index == p.label_index => {
                seg.frame_end = frame + 1;
                sum += p.score();
                seg.score = sum / seg.len() as f64;
            }
            _ => {
                sum = p.score();
                out.push(Segment {
                    label: vocab.label(transcript_ids[p.label_index - 1]),
                    label_index: p.label_index,
                    frame_start: frame,
                    frame_end: frame + 1,
                    score: sum,
                });
            }
        }
    }
    out
}

/// Groups segments between boundary labels into spoken tokens. Timing fields
/// are left at zero until [`TokenSpan::set_timing`].
pub fn merge_words(segments: &[Segment], vocab: &LabelVocab) -> Vec<TokenSpan> {
    let mut out = Vec::new();
    let mut group: Vec<&Segment> = Vec::new();
    let mut flush = |group: &mut Vec<&Segment>| {
        if let (Some(first), Some(last)) = (group.first(), group.last()) {
            out.push(TokenSpan {
                token_text: group.iter().map(|s| s.label).collect(),
                frame_start: first.frame_start,
                frame_end: last.frame_end,
                sample_start: 0,
                sample_end: 0,
                time_start: 0.0,
                time_end: 0.0,
                token_start: 0,
                token_end: 0,
                score: group.iter().map(|s| s.score).sum::<f64>() / group.len() as f64,
            });
        }
        group.clear();
    };
    for s in segments {
        if s.label == vocab.boundary {
            flush(&mut group);
        } else {
            group.push(s);
        }
    }
    flush(&mut group);
    debug_assert!(out.windows(2).all(|w| w[0].frame_end <= w[1].frame_start));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> LabelVocab {
        LabelVocab::new(vec!['-', '|', 'A', 'B', 'C'], '-', '|').unwrap()
    }

    fn pt(t: usize, j: usize, p: f64) -> PathPoint {
        PathPoint { time_index: t, label_index: j, log_score: p.ln() }
    }

    #[test]
    fn repeats_average_their_frames() {
        let segs = merge_repeats(&[pt(1, 1, 0.8), pt(2, 1, 0.6)], &[2], &vocab());
        assert_eq!(segs.len(), 1);
        assert_eq!((segs[0].frame_start, segs[0].frame_end), (0, 2));
        assert!((segs[0].score - 0.7).abs() < 1e-12);
    }

    #[test]
    fn alternating_and_empty() {
        let segs = merge_repeats(&[pt(1, 1, 0.5), pt(2, 2, 0.5), pt(3, 3, 0.5)], &[2, 3, 2], &vocab());
        assert_eq!(segs.len(), 3);
        assert_eq!(segs.iter().map(|s| s.label).collect::<String>(), "ABA");
        assert!(merge_repeats(&[], &[], &vocab()).is_empty());
    }

    fn seg(label: char, j: usize, a: usize, b: usize, score: f64) -> Segment {
        Segment { label, label_index: j, frame_start: a, frame_end: b, score }
    }

    #[test]
    fn words_split_on_boundary() {
        let segs = vec![
            seg('|', 1, 0, 1, 0.9),
            seg('A', 2, 1, 3, 0.8),
            seg('B', 3, 3, 4, 0.4),
            seg('|', 4, 4, 6, 0.9),
            seg('C', 5, 6, 7, 1.0),
            seg('|', 6, 7, 8, 0.9),
        ];
        let spans = merge_words(&segs, &vocab());
        assert_eq!(spans.len(), 2);
        assert_eq!(spans[0].token_text, "AB");
        assert_eq!((spans[0].frame_start, spans[0].frame_end), (1, 4));
        assert!((spans[0].score - 0.6).abs() < 1e-12);
        assert_eq!(spans[1].token_text, "C");
        assert_eq!((spans[1].frame_start, spans[1].frame_end), (6, 7));
    }
}
