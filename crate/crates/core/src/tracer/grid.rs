use super::{TokenBucket, TraceError, TraceResult};
use crate::model::ComponentKind;

/// Floor applied before taking `log10` of an AIE cell.
pub const LOG_FLOOR: f64 = 1e-8;

/// Average indirect effect per `(bucket, layer)` for one component kind.
#[derive(Debug, Clone, PartialEq)]
pub struct AieGrid {
    pub kind: ComponentKind,
    pub window: usize,
    pub n_layers: usize,
    /// Row order of `values`.
    pub buckets: Vec<TokenBucket>,
    /// `[row][layer]`, `None` where no prompt populated the cell.
    pub values: Vec<Vec<Option<f64>>>,
    /// `log10(max(value, LOG_FLOOR))`.
    pub log_values: Vec<Vec<Option<f64>>>,
    /// Prompts contributing to each cell.
    pub counts: Vec<Vec<usize>>,
    pub n_prompts: usize,
}

pub fn log_aie(v: f64) -> f64 {
    v.max(LOG_FLOOR).log10()
}

impl AieGrid {
    /// Builds a grid from raw cell values, deriving the log view.
    pub fn from_values(
        kind: ComponentKind,
        window: usize,
        buckets: Vec<TokenBucket>,
        values: Vec<Vec<Option<f64>>>,
        counts: Vec<Vec<usize>>,
        n_prompts: usize,
    ) -> Self {
        let n_layers = values.first().map_or(0, Vec::len);
        let log_values = values.iter().map(|row| row.iter().map(|v| v.map(log_aie)).collect()).collect();
        Self { kind, window, n_layers, buckets, values, log_values, counts, n_prompts }
    }

    pub fn get(&self, bucket: TokenBucket, layer: usize) -> Option<f64> {
        let row = self.buckets.iter().position(|b| *b == bucket)?;
        self.values[row].get(layer).copied().flatten()
    }

    /// Present cells as `(bucket, layer, value)`.
    pub fn cells(&self) -> impl Iterator<Item = (TokenBucket, usize, f64)> + '_ {
        self.buckets
            .iter()
            .enumerate()
            .flat_map(move |(r, b)| self.values[r].iter().enumerate().filter_map(move |(l, v)| v.map(|v| (*b, l, v))))
    }

    /// Largest present cell; ties resolve to the first in row-major order.
    pub fn argmax(&self) -> Option<(TokenBucket, usize, f64)> {
        self.cells().fold(None, |best, c| match best {
            Some((_, _, v)) if v >= c.2 => best,
            _ => Some(c),
        })
    }

    /// Median of present cells.
    pub fn median(&self) -> Option<f64> {
        let mut v: Vec<f64> = self.cells().map(|c| c.2).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
    }
}

/// Per-cell mean of bucketed IE over `results` of the given kind.
///
/// Results are summed in order of `prompt_id` (then probabilities), so the
/// output does not depend on the order of the input slice.
pub fn average_grids(results: &[TraceResult], kind: ComponentKind) -> Result<AieGrid, TraceError> {
    let first = results.first().ok_or(TraceError::NoResults)?;
    let (window, n_layers) = (first.window, first.n_layers);
    for r in results {
        if r.kind != kind {
            return Err(TraceError::MismatchedResults(format!("kind ({} vs {kind})", r.kind)));
        }
        if r.window != window {
            return Err(TraceError::MismatchedResults("window".into()));
        }
        if r.n_layers != n_layers || r.bucket_ie.len() != n_layers {
            return Err(TraceError::MismatchedResults("layer count".into()));
        }
    }
    let mut ordered: Vec<&TraceResult> = results.iter().collect();
    ordered.sort_by(|a, b| {
        a.prompt_id.cmp(&b.prompt_id).then(a.p_clean.total_cmp(&b.p_clean)).then(a.p_corrupt.total_cmp(&b.p_corrupt))
    });

    let mut sums = vec![vec![0.0f64; n_layers]; 6];
    let mut counts = vec![vec![0usize; n_layers]; 6];
    for r in &ordered {
        for (layer, row) in r.bucket_ie.iter().enumerate() {
            for b in TokenBucket::ALL {
                if let Some(v) = row[b.index()] {
                    sums[b.index()][layer] += v;
                    counts[b.index()][layer] += 1;
                }
            }
        }
    }
    let values = sums
        .iter()
        .zip(&counts)
        .map(|(s, c)| s.iter().zip(c).map(|(s, &c)| (c > 0).then(|| s / c as f64)).collect())
        .collect();
    let mut grid = AieGrid::from_values(kind, window, TokenBucket::ALL.to_vec(), values, counts, results.len());
    grid.n_layers = n_layers;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(id: &str, cell: Option<f64>) -> TraceResult {
        let mut row = [None; 6];
        row[TokenBucket::LastSubject.index()] = cell;
        row[TokenBucket::LastToken.index()] = Some(0.1);
        TraceResult {
            prompt_id: id.into(),
            kind: ComponentKind::MlpOut,
            window: 1,
            n_layers: 1,
            p_clean: 0.9,
            p_corrupt: 0.1,
            raw_ie: vec![vec![]],
            bucket_ie: vec![row],
            bucket_positions: [0; 6],
        }
    }

    #[test]
    fn mean_of_one_and_two() {
        let g = average_grids(&[result("a", Some(0.2))], ComponentKind::MlpOut).unwrap();
        assert_eq!(g.get(TokenBucket::LastSubject, 0), Some(0.2));
        let g = average_grids(&[result("a", Some(0.2)), result("b", Some(0.4))], ComponentKind::MlpOut).unwrap();
        assert!((g.get(TokenBucket::LastSubject, 0).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(g.counts[TokenBucket::LastSubject.index()][0], 2);
    }

    #[test]
    fn unpopulated_cell_is_absent_not_zero() {
        let g = average_grids(&[result("a", None)], ComponentKind::MlpOut).unwrap();
        assert_eq!(g.get(TokenBucket::LastSubject, 0), None);
        assert_eq!(g.get(TokenBucket::MiddleSubject, 0), None);
        assert_eq!(g.log_values[TokenBucket::MiddleSubject.index()][0], None);
    }

    #[test]
    fn log_view_clamps_non_positive_cells() {
        let g = average_grids(&[result("a", Some(-0.3))], ComponentKind::MlpOut).unwrap();
        assert_eq!(g.get(TokenBucket::LastSubject, 0), Some(-0.3));
        assert_eq!(g.log_values[TokenBucket::LastSubject.index()][0], Some(-8.0));
    }

    #[test]
    fn errors() {
        assert_eq!(average_grids(&[], ComponentKind::MlpOut), Err(TraceError::NoResults));
        assert!(average_grids(&[result("a", None)], ComponentKind::AttnOut).is_err());
    }

    #[test]
    fn permutation_invariant() {
        let rs: Vec<TraceResult> =
            [0.1, 0.7, 0.3, 1e-9, 0.33].iter().enumerate().map(|(i, v)| result(&format!("p{i}"), Some(*v))).collect();
        let a = average_grids(&rs, ComponentKind::MlpOut).unwrap();
        let mut rev = rs.clone();
        rev.reverse();
        rev.swap(0, 2);
        assert_eq!(a, average_grids(&rev, ComponentKind::MlpOut).unwrap());
    }
}
