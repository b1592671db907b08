//! A small pre-norm decoder-only transformer with activation capture and
//! patching hooks at every (layer, component, position) site.
//!
//! Block layout, per layer `l` and position `p`:
//!
//! ```text
//! a      = attn(rmsnorm(x, attn_norm[l]))          // attn_out
//! h      = x + a
//! m      = W_down · relu(W_up · rmsnorm(h, mlp_norm[l]) + b_up)   // mlp_out
//! x'     = h + m                                   // hidden_state
//! ```
//!
//! Attention is causal multi-head scaled dot-product attention without
//! biases. Positions use learned absolute embeddings added to the token
//! embedding (`embedding_out`). The final residual goes through one more
//! RMSNorm (eps = 1e-6) before the unembedding.

mod builders;
mod component;
mod config;
mod forward;
mod sequence;
mod tokenizer;
mod weights;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use thiserror::Error;

pub use builders::{
    build_passthrough_model, build_planted_fact_model, build_random_model, PlantedFact, PlantedFactSpec, PlantedModel,
};
pub use component::{ActivationCache, ComponentKind, ComponentRef, InterventionPlan};
pub use config::{ModelConfig, TokenClass, TokenId, VocabLayout};
pub use forward::{softmax, target_probability, ForwardResult, Generation};
pub use sequence::{Modality, ModalitySpan, TokenSequence};
pub use tokenizer::{speech_units_for_word, split_words, words_covering, Lexicon, SpeechPrompt, TextPrompt};
pub use weights::{read_weights, write_weights, LayerWeights, Matrix, Weights};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("token id {id} at position {position} is outside the vocabulary (size {vocab_size})")]
    TokenOutOfRange { position: usize, id: TokenId, vocab_size: usize },
    #[error("sequence of length {len} exceeds max_positions {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("empty token sequence")]
    EmptySequence,
    #[error("token sequence must start with a modality marker")]
    MissingLeadingMarker,
    #[error("component {component} out of range (n_layers={n_layers}, seq_len={seq_len})")]
    ComponentOutOfRange { component: ComponentRef, n_layers: usize, seq_len: usize },
    #[error("noise position {position} out of range for sequence of length {seq_len}")]
    NoisePositionOutOfRange { position: usize, seq_len: usize },
    #[error("vector has length {got}, expected {expected}")]
    VectorLength { expected: usize, got: usize },
    #[error("two patches target the same site {0}")]
    DuplicatePatch(ComponentRef),
    #[error("target token {0} is outside the vocabulary")]
    TargetOutOfRange(TokenId),
    #[error("unknown component kind {0:?}")]
    UnknownComponentKind(String),
    #[error("max_new must be at least 1")]
    NothingToGenerate,
    #[error("planted-fact spec: {0}")]
    InvalidPlantedSpec(String),
    #[error("weight file: {0}")]
    WeightFormat(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for ModelError {
    fn from(e: std::io::Error) -> Self {
        ModelError::Io(e.to_string())
    }
}

/// Immutable transformer: config plus weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    weights: Weights,
}

impl Model {
    pub fn new(config: ModelConfig, weights: Weights) -> Result<Self, ModelError> {
        config.validate()?;
        weights.check_shapes(&config)?;
        Ok(Self { config, weights })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn vocab(&self) -> &VocabLayout {
        &self.config.vocab
    }

    pub fn n_layers(&self) -> usize {
        self.config.n_layers
    }

    pub fn d_model(&self) -> usize {
        self.config.d_model
    }

    /// Population standard deviation over every scalar of the token
    /// embedding table.
    pub fn embedding_std(&self) -> f64 {
        let data = &self.weights.token_embedding.data;
        let n = data.len() as f64;
        let mean = data.iter().sum::<f64>() / n;
        let var = data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        var.sqrt()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let f = File::open(path.as_ref()).map_err(|e| ModelError::Io(format!("{}: {e}", path.as_ref().display())))?;
        let (cfg, weights) = read_weights(BufReader::new(f))?;
        Self::new(cfg, weights)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let f = File::create(path.as_ref()).map_err(|e| ModelError::Io(format!("{}: {e}", path.as_ref().display())))?;
        let mut w = BufWriter::new(f);
        write_weights(&self.config, &self.weights, &mut w)?;
        std::io::Write::flush(&mut w)?;
        Ok(())
    }
}
