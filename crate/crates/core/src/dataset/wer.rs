use super::{normalize_words, DatasetError};

/// Word error count over reference length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Wer {
    pub errors: usize,
    pub reference_words: usize,
}

impl Wer {
    pub fn rate(&self) -> f64 {
        self.errors as f64 / self.reference_words as f64
    }
}

/// Levenshtein distance over words (unit cost substitution, insertion and
/// deletion).
pub fn word_edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Word error rate after case folding and punctuation stripping.
pub fn wer(reference: &str, hypothesis: &str) -> Result<Wer, DatasetError> {
    let r = normalize_words(reference);
    if r.is_empty() {
        return Err(DatasetError::EmptyReference);
    }
    let h = normalize_words(hypothesis);
    Ok(Wer { errors: word_edit_distance(&r, &h), reference_words: r.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(wer("the capital", "The capital!").unwrap().errors, 0);
        assert_eq!(wer("the capital of italy", "the capital if italy").unwrap().rate(), 0.25);
        assert_eq!(wer("a b", "a b c").unwrap().rate(), 0.5);
        assert_eq!(wer("a b", "").unwrap().rate(), 1.0);
        assert_eq!(wer("", "a"), Err(DatasetError::EmptyReference));
    }
}
