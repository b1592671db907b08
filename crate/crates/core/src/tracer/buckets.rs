use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TraceError;

/// Positional role of a prompt token, used to align traces across prompts of
/// different lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenBucket {
    FirstSubject,
    MiddleSubject,
    LastSubject,
    FirstSubsequent,
    FurtherTokens,
    LastToken,
}

impl TokenBucket {
    pub const ALL: [TokenBucket; 6] = [
        TokenBucket::FirstSubject,
        TokenBucket::MiddleSubject,
        TokenBucket::LastSubject,
        TokenBucket::FirstSubsequent,
        TokenBucket::FurtherTokens,
        TokenBucket::LastToken,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TokenBucket::FirstSubject => "first_subject",
            TokenBucket::MiddleSubject => "middle_subject",
            TokenBucket::LastSubject => "last_subject",
            TokenBucket::FirstSubsequent => "first_subsequent",
            TokenBucket::FurtherTokens => "further_tokens",
            TokenBucket::LastToken => "last_token",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TokenBucket::FirstSubject => "First subject token",
            TokenBucket::MiddleSubject => "Middle subject tokens",
            TokenBucket::LastSubject => "Last subject token",
            TokenBucket::FirstSubsequent => "First subsequent token",
            TokenBucket::FurtherTokens => "Further tokens",
            TokenBucket::LastToken => "Last token",
        }
    }
}

impl fmt::Display for TokenBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TokenBucket {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TokenBucket::ALL.into_iter().find(|b| b.as_str() == s).ok_or_else(|| TraceError::UnknownBucket(s.to_string()))
    }
}

/// Bucket for each aggregation unit.
///
/// `units` are the distinct non-marker units of a prompt in increasing order
/// and `subject` is a range over unit ids. A single-unit subject is
/// `last_subject`. The final unit is `last_token` unless it belongs to the
/// subject. Units before the subject get no bucket.
pub fn assign_buckets(units: &[usize], subject: &Range<usize>) -> Vec<Option<TokenBucket>> {
    let last_unit = units.last().copied();
    let subject_last = subject.end.checked_sub(1);
    let first_after = units.iter().copied().find(|&u| u >= subject.end);
    units
        .iter()
        .map(|&u| {
            if subject.contains(&u) {
                Some(if Some(u) == subject_last {
                    TokenBucket::LastSubject
                } else if u == subject.start {
                    TokenBucket::FirstSubject
                } else {
                    TokenBucket::MiddleSubject
                })
            } else if u < subject.start {
                None
            } else if Some(u) == last_unit {
                Some(TokenBucket::LastToken)
            } else if Some(u) == first_after {
                Some(TokenBucket::FirstSubsequent)
            } else {
                Some(TokenBucket::FurtherTokens)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use TokenBucket::*;

    #[test]
    fn seven_token_prompt() {
        // position 0 is the modality marker
        let units: Vec<usize> = (1..7).collect();
        let b = assign_buckets(&units, &(2..5));
        assert_eq!(
            b,
            vec![
                None,
                Some(FirstSubject),
                Some(MiddleSubject),
                Some(LastSubject),
                Some(FirstSubsequent),
                Some(LastToken)
            ]
        );
        assert!(!b.contains(&Some(FurtherTokens)));
    }

    #[test]
    fn single_token_subject_is_last_subject() {
        let b = assign_buckets(&[1, 2, 3, 4, 5], &(2..3));
        assert_eq!(b, vec![None, Some(LastSubject), Some(FirstSubsequent), Some(FurtherTokens), Some(LastToken)]);
    }

    #[test]
    fn subject_at_end_keeps_subject_bucket() {
        let b = assign_buckets(&[1, 2, 3], &(2..4));
        assert_eq!(b, vec![None, Some(FirstSubject), Some(LastSubject)]);
        let b = assign_buckets(&[1, 2, 3], &(1..3));
        assert_eq!(b, vec![Some(FirstSubject), Some(LastSubject), Some(LastToken)]);
    }

    #[test]
    fn names_round_trip() {
        for b in TokenBucket::ALL {
            assert_eq!(b.as_str().parse::<TokenBucket>().unwrap(), b);
        }
    }
}
