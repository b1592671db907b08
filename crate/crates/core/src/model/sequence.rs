use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{ModelError, TokenId, VocabLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Speech,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalitySpan {
    pub range: Range<usize>,
    pub modality: Modality,
}

/// Interleaved token ids, each span prefixed by its modality marker.
///
/// Spans partition `0..len` in order, and every span starts with the marker
/// matching its modality.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    ids: Vec<TokenId>,
    spans: Vec<ModalitySpan>,
}

impl TokenSequence {
    /// Splits `ids` into spans at every marker token. The first id must be a
    /// marker.
    pub fn from_ids(ids: Vec<TokenId>, vocab: &VocabLayout) -> Result<Self, ModelError> {
        if ids.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        let mut spans: Vec<ModalitySpan> = Vec::new();
        for (pos, &id) in ids.iter().enumerate() {
            let modality = if id == vocab.text_marker {
                Some(Modality::Text)
            } else if id == vocab.speech_marker {
                Some(Modality::Speech)
            } else {
                None
            };
            match (modality, spans.last_mut()) {
                (Some(m), last) => {
                    if let Some(last) = last {
                        last.range.end = pos;
                    }
                    spans.push(ModalitySpan { range: pos..pos + 1, modality: m });
                }
                (None, Some(last)) => last.range.end = pos + 1,
                (None, None) => return Err(ModelError::MissingLeadingMarker),
            }
        }
        Ok(Self { ids, spans })
    }

    /// `[T] + tokens`.
    pub fn text(tokens: &[TokenId], vocab: &VocabLayout) -> Self {
        Self::from_segments(&[(Modality::Text, tokens)], vocab)
    }

    /// Concatenates marker-prefixed segments.
    pub fn from_segments(segments: &[(Modality, &[TokenId])], vocab: &VocabLayout) -> Self {
        let mut ids = Vec::new();
        let mut spans = Vec::new();
        for (modality, tokens) in segments {
            let start = ids.len();
            ids.push(match modality {
                Modality::Text => vocab.text_marker,
                Modality::Speech => vocab.speech_marker,
            });
            ids.extend_from_slice(tokens);
            spans.push(ModalitySpan { range: start..ids.len(), modality: *modality });
        }
        Self { ids, spans }
    }

    pub fn ids(&self) -> &[TokenId] {
        &self.ids
    }

    pub fn spans(&self) -> &[ModalitySpan] {
        &self.spans
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn last_modality(&self) -> Option<Modality> {
        self.spans.last().map(|s| s.modality)
    }

    /// Appends a token to the trailing span. Markers open a new span.
    pub fn push(&mut self, id: TokenId, vocab: &VocabLayout) {
        let pos = self.ids.len();
        self.ids.push(id);
        let modality = if id == vocab.text_marker {
            Some(Modality::Text)
        } else if id == vocab.speech_marker {
            Some(Modality::Speech)
        } else {
            None
        };
        match (modality, self.spans.last_mut()) {
            (Some(m), _) => self.spans.push(ModalitySpan { range: pos..pos + 1, modality: m }),
            (None, Some(last)) => last.range.end = pos + 1,
            (None, None) => {
                // from_ids/from_segments never produce an empty span list for
                // a non-empty sequence; an empty one can only be extended by a
                // marker.
                self.ids.pop();
            }
        }
    }

    pub fn is_marker_at(&self, pos: usize, vocab: &VocabLayout) -> bool {
        self.ids.get(pos).is_some_and(|&id| vocab.is_marker(id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spans_partition_interleaved_ids() {
        let v = VocabLayout::standard(10, 4);
        let seq = TokenSequence::from_ids(vec![1, 12, 13, 0, 4, 5], &v).unwrap();
        assert_eq!(seq.spans().len(), 2);
        assert_eq!(seq.spans()[0].range, 0..3);
        assert_eq!(seq.spans()[0].modality, Modality::Speech);
        assert_eq!(seq.spans()[1].range, 3..6);
        assert_eq!(seq.last_modality(), Some(Modality::Text));
        let covered: usize = seq.spans().iter().map(|s| s.range.len()).sum();
        assert_eq!(covered, seq.len());
    }

    #[test]
    fn leading_marker_required() {
        let v = VocabLayout::standard(10, 4);
        assert_eq!(TokenSequence::from_ids(vec![4, 0], &v), Err(ModelError::MissingLeadingMarker));
        assert_eq!(TokenSequence::from_ids(vec![], &v), Err(ModelError::EmptySequence));
    }

    #[test]
    fn segments_match_from_ids() {
        let v = VocabLayout::standard(10, 4);
        let a = TokenSequence::from_segments(&[(Modality::Speech, &[12, 13][..]), (Modality::Text, &[])], &v);
        let b = TokenSequence::from_ids(vec![1, 12, 13, 0], &v).unwrap();
        assert_eq!(a, b);
        let mut c = TokenSequence::text(&[4], &v);
        c.push(5, &v);
        assert_eq!(c.spans()[0].range, 0..3);
    }
}
