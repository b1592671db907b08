use super::{AlignError, EmissionMatrix};

/// Maximum log-probability of aligning the first `j` transcript labels to the
/// first `t` frames, stored as a `(T+1) x (N+1)` matrix.
///
/// Boundary: `k[0][0] = 0`, `k[0][j] = -inf` for `j >= 1`, and column 0
/// accumulates the blank log-probability frame by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Trellis {
    k: Vec<f64>,
    frames: usize,
    label_ids: Vec<usize>,
}

impl Trellis {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn labels(&self) -> usize {
        self.label_ids.len()
    }

    pub fn label_ids(&self) -> &[usize] {
        &self.label_ids
    }

    pub fn at(&self, t: usize, j: usize) -> f64 {
        self.k[t * (self.label_ids.len() + 1) + j]
    }

    /// `k[T][N]`.
    pub fn score(&self) -> f64 {
        self.at(self.frames, self.label_ids.len())
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let w = self.label_ids.len() + 1;
        &self.k[t * w..(t + 1) * w]
    }
}

/// One frame of the best path: after frame `t` (1-based) the path sits on
/// label `j` (1-based). `log_score` is the emission log-probability used on
/// this frame (the label when advancing, the blank when staying).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub time_index: usize,
    pub label_index: usize,
    pub log_score: f64,
}

impl PathPoint {
    pub fn score(&self) -> f64 {
        self.log_score.exp()
    }
}

/// Fills the trellis in the log domain:
///
/// `k[t+1][j+1] = max(k[t][j] + logp(t+1, c_{j+1}), k[t][j+1] + logp(t+1, blank))`
pub fn build_trellis(em: &EmissionMatrix, transcript_ids: &[usize]) -> Result<Trellis, AlignError> {
    let t_max = em.frames();
    let n = transcript_ids.len();
    if n == 0 {
        return Err(AlignError::EmptyTranscript(String::new()));
    }
    if let Some(&bad) = transcript_ids.iter().find(|&&c| c >= em.vocab().len()) {
        return Err(AlignError::LabelOutOfRange(bad));
    }
    if t_max < n {
        return Err(AlignError::Infeasible { frames: t_max, labels: n });
    }
    let w = n + 1;
    let blank = em.vocab().blank_index();
    let mut k = vec![f64::NEG_INFINITY; (t_max + 1) * w];
    k[0] = 0.0;
    for t in 0..t_max {
        let lp = em.row(t);
        k[(t + 1) * w] = k[t * w] + lp[blank];
        for j in 0..n {
            let advance = k[t * w + j] + lp[transcript_ids[j]];
            let stay = k[t * w + j + 1] + lp[blank];
            k[(t + 1) * w + j + 1] = advance.max(stay);
        }
    }
    Ok(Trellis { k, frames: t_max, label_ids: transcript_ids.to_vec() })
}

/// Walks back from `(T, N)`, taking at each frame the predecessor that
/// attains the recurrence maximum (advancing on ties), until the label index
/// reaches 0. Frames before the first label belong to no path point.
pub fn backtrack(trellis: &Trellis, em: &EmissionMatrix) -> Result<Vec<PathPoint>, AlignError> {
    if trellis.score() == f64::NEG_INFINITY {
        return Err(AlignError::Infeasible { frames: trellis.frames(), labels: trellis.labels() });
    }
    let blank = em.vocab().blank_index();
    let mut points = Vec::with_capacity(trellis.frames());
    let (mut t, mut j) = (trellis.frames(), trellis.labels());
    while j > 0 {
        let lp = em.row(t - 1);
        let label_lp = lp[trellis.label_ids[j - 1]];
        let advance = trellis.at(t - 1, j - 1) + label_lp;
        let stay = trellis.at(t - 1, j) + lp[blank];
        if advance >= stay {
            points.push(PathPoint { time_index: t, label_index: j, log_score: label_lp });
            j -= 1;
        } else {
            points.push(PathPoint { time_index: t, label_index: j, log_score: lp[blank] });
        }
        t -= 1;
    }
    points.reverse();
    Ok(points)
}

/// Summed log-probability of a path including the blank frames before it.
pub fn path_log_prob(path: &[PathPoint], em: &EmissionMatrix) -> f64 {
    let blank = em.vocab().blank_index();
    let lead = path.first().map_or(em.frames(), |p| p.time_index - 1);
    let leading: f64 = (0..lead).map(|t| em.row(t)[blank]).sum();
    leading + path.iter().map(|p| p.log_score).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aligner::LabelVocab;

    fn vocab() -> LabelVocab {
        LabelVocab::new(vec!['-', '|', 'A', 'B'], '-', '|').unwrap()
    }

    fn em(rows: &[[f64; 4]]) -> EmissionMatrix {
        let lp = rows.iter().flat_map(|r| r.iter().map(|p| p.ln())).collect();
        EmissionMatrix::new(lp, rows.len(), vocab()).unwrap()
    }

    #[test]
    fn single_frame_single_label() {
        let e = em(&[[0.05, 0.03, 0.9, 0.02]]);
        let t = build_trellis(&e, &[2]).unwrap();
        assert!((t.at(1, 1) - 0.9f64.ln()).abs() < 1e-15);
        assert_eq!(t.at(0, 0), 0.0);
        assert_eq!(t.at(0, 1), f64::NEG_INFINITY);
        let path = backtrack(&t, &e).unwrap();
        assert_eq!(path.len(), 1);
        assert_eq!((path[0].time_index, path[0].label_index), (1, 1));
        assert!((path[0].score() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn two_frames_one_label_takes_better_alignment() {
        // alignments: advance@1 then blank@2, or blank@1 then advance@2
        let e = em(&[[0.1, 0.1, 0.7, 0.1], [0.6, 0.1, 0.2, 0.1]]);
        let t = build_trellis(&e, &[2]).unwrap();
        let a = 0.7f64.ln() + 0.6f64.ln();
        let b = 0.1f64.ln() + 0.2f64.ln();
        assert!((t.score() - a.max(b)).abs() < 1e-12);
        let path = backtrack(&t, &e).unwrap();
        assert_eq!(path.len(), 2);
        assert!((path_log_prob(&path, &e) - t.score()).abs() < 1e-12);
    }

    #[test]
    fn ties_prefer_advancing() {
        // equal scores either way: the backtrack advances at the last frame
        let e = em(&[[0.25; 4], [0.25; 4]]);
        let t = build_trellis(&e, &[2]).unwrap();
        let path = backtrack(&t, &e).unwrap();
        assert_eq!(path.len(), 1);
        assert_eq!(path[0].time_index, 2);
        assert!((path_log_prob(&path, &e) - t.score()).abs() < 1e-12);
    }

    #[test]
    fn too_few_frames() {
        let e = em(&[[0.25; 4]]);
        assert_eq!(build_trellis(&e, &[2, 3]).unwrap_err(), AlignError::Infeasible { frames: 1, labels: 2 });
    }

    #[test]
    fn doubled_letter_aligns() {
        let e = em(&[[0.05, 0.05, 0.85, 0.05], [0.05, 0.05, 0.85, 0.05], [0.8, 0.1, 0.05, 0.05]]);
        let t = build_trellis(&e, &[2, 2]).unwrap();
        let path = backtrack(&t, &e).unwrap();
        let labels: Vec<usize> = path.iter().map(|p| p.label_index).collect();
        assert_eq!(labels, vec![1, 2, 2]);
    }
}
