use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::ModelError;

pub type TokenId = usize;

/// Partition of the token id space into text tokens, speech units and the two
/// modality declaration markers.
///
/// The four regions are disjoint and together cover `0..vocab_size()`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabLayout {
    pub text_tokens: Range<TokenId>,
    pub speech_tokens: Range<TokenId>,
    pub text_marker: TokenId,
    pub speech_marker: TokenId,
}

/// Which region a token id belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenClass {
    Text,
    Speech,
    TextMarker,
    SpeechMarker,
}

impl VocabLayout {
    /// Markers at ids 0 and 1, then `n_text` text tokens, then `n_speech`
    /// speech units.
    pub fn standard(n_text: usize, n_speech: usize) -> Self {
        Self {
            text_marker: 0,
            speech_marker: 1,
            text_tokens: 2..2 + n_text,
            speech_tokens: 2 + n_text..2 + n_text + n_speech,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.text_tokens.end.max(self.speech_tokens.end).max(self.text_marker + 1).max(self.speech_marker + 1)
    }

    pub fn classify(&self, id: TokenId) -> Option<TokenClass> {
        if id == self.text_marker {
            Some(TokenClass::TextMarker)
        } else if id == self.speech_marker {
            Some(TokenClass::SpeechMarker)
        } else if self.text_tokens.contains(&id) {
            Some(TokenClass::Text)
        } else if self.speech_tokens.contains(&id) {
            Some(TokenClass::Speech)
        } else {
            None
        }
    }

    pub fn is_marker(&self, id: TokenId) -> bool {
        id == self.text_marker || id == self.speech_marker
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.text_tokens.is_empty() {
            return bad("text token range is empty".into());
        }
        if self.text_marker == self.speech_marker {
            return bad("text and speech markers share an id".into());
        }
        for m in [self.text_marker, self.speech_marker] {
            if self.text_tokens.contains(&m) || self.speech_tokens.contains(&m) {
                return bad(format!("marker {m} lies inside a token range"));
            }
        }
        let (t, s) = (&self.text_tokens, &self.speech_tokens);
        if !s.is_empty() && t.start < s.end && s.start < t.end {
            return bad(format!("text range {t:?} overlaps speech range {s:?}"));
        }
        let covered = t.len() + s.len() + 2;
        if covered != self.vocab_size() {
            return bad(format!("regions cover {covered} ids but vocab spans 0..{}", self.vocab_size()));
        }
        Ok(())
    }
}

/// Shape of a decoder-only transformer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_mlp: usize,
    pub vocab: VocabLayout,
    pub max_positions: usize,
    pub rng_seed: u64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [
            ("n_layers", self.n_layers),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("d_mlp", self.d_mlp),
            ("max_positions", self.max_positions),
        ] {
            if v == 0 {
                return Err(ModelError::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(ModelError::InvalidConfig(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        self.vocab.validate()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.vocab_size()
    }

    pub fn d_head(&self) -> usize {
        self.d_model / self.n_heads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            d_model: 8,
            n_heads: 2,
            d_mlp: 16,
            vocab: VocabLayout::standard(10, 4),
            max_positions: 8,
            rng_seed: 1,
        }
    }

    #[test]
    fn standard_layout_is_valid() {
        let v = VocabLayout::standard(10, 4);
        v.validate().unwrap();
        assert_eq!(v.vocab_size(), 16);
        assert_eq!(v.classify(0), Some(TokenClass::TextMarker));
        assert_eq!(v.classify(2), Some(TokenClass::Text));
        assert_eq!(v.classify(12), Some(TokenClass::Speech));
        assert_eq!(v.classify(16), None);
    }

    #[test]
    fn overlapping_regions_rejected() {
        let mut v = VocabLayout::standard(10, 4);
        v.speech_tokens = 8..14;
        assert!(v.validate().is_err());
        let mut v = VocabLayout::standard(10, 4);
        v.text_marker = 3;
        assert!(v.validate().is_err());
    }

    #[test]
    fn heads_must_divide_width() {
        let mut c = cfg();
        c.validate().unwrap();
        c.n_heads = 3;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.n_layers = 0;
        assert!(c.validate().is_err());
    }
}
