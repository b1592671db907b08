use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::TraceError;
use crate::model::{Modality, Model, TokenId, TokenSequence};
use crate::seed::noise_seed;

/// The `(x, o)` pair of one causal trace plus where the subject sits.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePrompt {
    pub prompt_id: String,
    pub clean_tokens: TokenSequence,
    /// Text prompts: sequence positions. Speech prompts: indices into the
    /// text-token space that `text_token_map` points to.
    pub subject_range: Range<usize>,
    /// Object tokens; the first one is the target unless joint scoring is on.
    pub target: Vec<TokenId>,
    pub modality: Modality,
    /// Per sequence position, the text token a speech unit was aligned to
    /// (`None` at markers). Required for speech prompts.
    pub text_token_map: Option<Vec<Option<usize>>>,
}

impl TracePrompt {
    pub fn text(
        prompt_id: impl Into<String>,
        clean_tokens: TokenSequence,
        subject_range: Range<usize>,
        target: Vec<TokenId>,
    ) -> Self {
        Self {
            prompt_id: prompt_id.into(),
            clean_tokens,
            subject_range,
            target,
            modality: Modality::Text,
            text_token_map: None,
        }
    }

    pub fn speech(
        prompt_id: impl Into<String>,
        clean_tokens: TokenSequence,
        subject_range: Range<usize>,
        target: Vec<TokenId>,
        text_token_map: Vec<Option<usize>>,
    ) -> Self {
        Self {
            prompt_id: prompt_id.into(),
            clean_tokens,
            subject_range,
            target,
            modality: Modality::Speech,
            text_token_map: Some(text_token_map),
        }
    }

    pub fn validate(&self, model: &Model) -> Result<(), TraceError> {
        let n = self.clean_tokens.len();
        let vocab = model.vocab();
        let bad = |m: String| Err(TraceError::InvalidPrompt { prompt_id: self.prompt_id.clone(), reason: m });
        if self.subject_range.is_empty() {
            return bad("empty subject range".into());
        }
        if self.target.is_empty() {
            return bad("no target token".into());
        }
        if let Some(&t) = self.target.iter().find(|&&t| t >= vocab.vocab_size()) {
            return bad(format!("target token {t} outside vocabulary"));
        }
        match self.modality {
            Modality::Text => {
                if self.subject_range.end > n {
                    return bad(format!("subject range {:?} exceeds length {n}", self.subject_range));
                }
            }
            Modality::Speech => {
                let map = self
                    .text_token_map
                    .as_ref()
                    .ok_or_else(|| TraceError::MissingTextTokenMap(self.prompt_id.clone()))?;
                if map.len() != n {
                    return bad(format!("text_token_map has {} entries for {n} tokens", map.len()));
                }
                let mut last = None;
                for (pos, entry) in map.iter().enumerate() {
                    let marker = self.clean_tokens.is_marker_at(pos, vocab);
                    match (entry, marker) {
                        (Some(_), true) => return bad(format!("marker at {pos} is mapped")),
                        (None, false) => return bad(format!("speech token at {pos} is unmapped")),
                        (Some(i), false) => {
                            if last.is_some_and(|l| *i < l) {
                                return bad(format!("text_token_map decreases at {pos}"));
                            }
                            last = Some(*i);
                        }
                        (None, true) => {}
                    }
                }
                let max = last.ok_or_else(|| TraceError::InvalidPrompt {
                    prompt_id: self.prompt_id.clone(),
                    reason: "no mapped speech tokens".into(),
                })?;
                if self.subject_range.end > max + 1 {
                    return bad(format!("subject range {:?} exceeds text length {}", self.subject_range, max + 1));
                }
            }
        }
        Ok(())
    }

    /// Sequence positions that receive corruption noise.
    pub fn corrupted_positions(&self) -> Vec<usize> {
        match (&self.modality, &self.text_token_map) {
            (Modality::Speech, Some(map)) => map
                .iter()
                .enumerate()
                .filter(|(_, m)| m.is_some_and(|i| self.subject_range.contains(&i)))
                .map(|(p, _)| p)
                .collect(),
            _ => self.subject_range.clone().collect(),
        }
    }

    /// Aggregation unit of each sequence position: the position itself for
    /// text, the mapped text token for speech, `None` for markers.
    pub fn units(&self, model: &Model) -> Vec<Option<usize>> {
        match (&self.modality, &self.text_token_map) {
            (Modality::Speech, Some(map)) => map.clone(),
            _ => (0..self.clean_tokens.len())
                .map(|p| (!self.clean_tokens.is_marker_at(p, model.vocab())).then_some(p))
                .collect(),
        }
    }
}

/// Gaussian subject corruption with per-dimension std `noise_scale * sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub noise_scale: f64,
    /// Std over all token-embedding entries of the model.
    pub sigma: f64,
    pub seed: u64,
}

impl CorruptionSpec {
    pub const DEFAULT_NOISE_SCALE: f64 = 3.0;

    pub fn for_model(model: &Model, noise_scale: f64, seed: u64) -> Self {
        Self { noise_scale, sigma: model.embedding_std(), seed }
    }

    /// Deterministic in `(seed, prompt_id, position)`.
    pub fn noise(&self, prompt_id: &str, position: usize, d_model: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed(self.seed, prompt_id, position));
        let std = self.noise_scale * self.sigma;
        (0..d_model)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * std
            })
            .collect()
    }
}
