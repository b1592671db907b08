use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{
    ComponentKind, ComponentRef, Matrix, Model, ModelConfig, ModelError, TokenClass, TokenId, VocabLayout, Weights,
};

fn gaussian(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * std
        })
        .collect()
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> Matrix {
    Matrix { rows, cols, data: gaussian(rng, rows * cols, std) }
}

/// Random weights drawn from a ChaCha8 stream seeded with `config.rng_seed`.
///
/// Draw order follows the weight-file tensor order, so a seed pins every
/// value. Projections use std `1/sqrt(fan_in)`, token embeddings std 1,
/// position embeddings std 0.5, norm gains are 1.
pub fn build_random_model(config: &ModelConfig) -> Result<Model, ModelError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let (v, d, m) = (config.vocab_size(), config.d_model, config.d_mlp);
    let inv_d = 1.0 / (d as f64).sqrt();
    let inv_m = 1.0 / (m as f64).sqrt();
    let mut w = Weights::zeros(config);
    w.token_embedding = gaussian_matrix(&mut rng, v, d, 1.0);
    w.position_embedding = gaussian_matrix(&mut rng, config.max_positions, d, 0.5);
    for layer in &mut w.layers {
        layer.w_q = gaussian_matrix(&mut rng, d, d, inv_d);
        layer.w_k = gaussian_matrix(&mut rng, d, d, inv_d);
        layer.w_v = gaussian_matrix(&mut rng, d, d, inv_d);
        layer.w_o = gaussian_matrix(&mut rng, d, d, inv_d);
        layer.w_up = gaussian_matrix(&mut rng, m, d, inv_d);
        layer.b_up = gaussian(&mut rng, m, 0.1);
        layer.w_down = gaussian_matrix(&mut rng, d, m, inv_m);
    }
    w.unembedding = gaussian_matrix(&mut rng, v, d, inv_d);
    Model::new(config.clone(), w)
}

/// A model whose sublayers all output zero, with unit-norm random token
/// embeddings, no position embeddings, and the unembedding tied to the
/// embedding. Greedy decoding therefore repeats the last input token.
pub fn build_passthrough_model(config: &ModelConfig) -> Result<Model, ModelError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let (v, d) = (config.vocab_size(), config.d_model);
    let mut emb = gaussian_matrix(&mut rng, v, d, 1.0);
    for row in emb.data.chunks_exact_mut(d) {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        row.iter_mut().for_each(|x| *x /= norm);
    }
    let mut w = Weights::zeros(config);
    w.unembedding = emb.clone();
    w.token_embedding = emb;
    Model::new(config.clone(), w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlantedFact {
    pub subject: TokenId,
    pub object: TokenId,
}

/// Parameters for [`build_planted_fact_model`].
#[derive(Debug, Clone)]
pub struct PlantedFactSpec {
    pub facts: Vec<PlantedFact>,
    /// Length of every prompt, including the leading modality marker.
    pub template_len: usize,
    /// Position of the subject token in every prompt.
    pub subject_index: usize,
    /// Layer whose MLP stores the associations.
    pub store_layer: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub vocab: VocabLayout,
    pub max_positions: usize,
    /// Std of random weights added to every sublayer. 0 gives exact zeros
    /// outside the planted circuit.
    pub background: f64,
    pub seed: u64,
}

impl PlantedFactSpec {
    pub fn new(facts: Vec<PlantedFact>, template_len: usize, subject_index: usize, store_layer: usize) -> Self {
        Self {
            facts,
            template_len,
            subject_index,
            store_layer,
            n_layers: 4,
            n_heads: 2,
            vocab: VocabLayout::standard(64, 16),
            max_positions: 24,
            background: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedModel {
    pub model: Model,
    /// `(store_layer, mlp_out, subject_index)`.
    pub expected_site: ComponentRef,
    /// Layer whose attention moves the subject residual to later positions.
    pub copy_layer: usize,
}

// Detector fires at half its clean activation; output and copy gains.
const DETECT_THRESHOLD: f64 = 0.5;
const STORE_GAIN: f64 = 4.0;
const COPY_GAIN: f64 = 4.0;
const ATTN_SHARPNESS: f64 = 20.0;

/// Hand-sets a transformer that recalls `subject -> object` through one MLP.
///
/// Token and position embeddings are one-hot in disjoint coordinate blocks
/// (`[0, V)` for tokens, `[V, V + P)` for positions). The MLP at
/// `store_layer` has one ReLU unit per fact that fires on the subject's
/// coordinate and writes the object's coordinate into the residual stream.
/// Head 0 of the last layer's attention queries every position for the key
/// `subject_index` and copies the object block, so the association reaches
/// the final position. The unembedding reads the token block directly.
pub fn build_planted_fact_model(spec: &PlantedFactSpec) -> Result<PlantedModel, ModelError> {
    let bad = |m: String| Err(ModelError::InvalidPlantedSpec(m));
    let vocab = &spec.vocab;
    vocab.validate()?;
    if spec.facts.is_empty() {
        return bad("no facts".into());
    }
    let subjects: BTreeSet<TokenId> = spec.facts.iter().map(|f| f.subject).collect();
    if subjects.len() != spec.facts.len() {
        return bad("duplicate subject tokens".into());
    }
    let objects: BTreeSet<TokenId> = spec.facts.iter().map(|f| f.object).collect();
    if let Some(t) = subjects.intersection(&objects).next() {
        return bad(format!("token {t} is both a subject and an object"));
    }
    for &t in subjects.iter().chain(&objects) {
        if vocab.classify(t) != Some(TokenClass::Text) {
            return bad(format!("token {t} is not a text token"));
        }
    }
    if spec.subject_index == 0 || spec.subject_index >= spec.template_len {
        return bad(format!(
            "subject_index {} must lie in 1..{} (position 0 holds the modality marker)",
            spec.subject_index, spec.template_len
        ));
    }
    if spec.template_len > spec.max_positions {
        return bad("template_len exceeds max_positions".into());
    }
    if spec.n_layers < 2 || spec.store_layer + 1 >= spec.n_layers {
        return bad(format!(
            "store_layer {} needs a later layer to copy from (n_layers = {})",
            spec.store_layer, spec.n_layers
        ));
    }

    let v = vocab.vocab_size();
    let p = spec.max_positions;
    let n_heads = spec.n_heads.max(1);
    let d = (v + p).div_ceil(n_heads) * n_heads;
    let dh = d / n_heads;
    let objects: Vec<TokenId> = objects.into_iter().collect();
    if objects.len() + 1 > dh {
        return bad(format!("{} distinct objects do not fit a head of width {dh}", objects.len()));
    }
    let config = ModelConfig {
        n_layers: spec.n_layers,
        d_model: d,
        n_heads,
        d_mlp: spec.facts.len(),
        vocab: vocab.clone(),
        max_positions: p,
        rng_seed: spec.seed,
    };

    let mut w = Weights::zeros(&config);
    if spec.background > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let noise = Normal::new(0.0, spec.background).expect("positive std");
        let mut fill = |m: &mut Matrix| m.data.iter_mut().for_each(|x| *x = noise.sample(&mut rng));
        for layer in &mut w.layers {
            fill(&mut layer.w_q);
            fill(&mut layer.w_k);
            fill(&mut layer.w_v);
            fill(&mut layer.w_o);
            fill(&mut layer.w_up);
            fill(&mut layer.w_down);
        }
    }
    for t in 0..v {
        w.token_embedding.set(t, t, 1.0);
        w.unembedding.set(t, t, 1.0);
    }
    for pos in 0..p {
        w.position_embedding.set(pos, v + pos, 1.0);
    }

    // A one-hot coordinate of a residual holding exactly two unit one-hots
    // normalises to sqrt(d / 2).
    let clean_coord = (d as f64 / 2.0).sqrt();
    let store = &mut w.layers[spec.store_layer];
    for (unit, fact) in spec.facts.iter().enumerate() {
        store.w_up.set(unit, fact.subject, 1.0 / clean_coord);
        store.b_up[unit] = -DETECT_THRESHOLD;
        store.w_down.set(fact.object, unit, STORE_GAIN / (1.0 - DETECT_THRESHOLD));
    }

    let copy_layer = spec.n_layers - 1;
    let copy = &mut w.layers[copy_layer];
    let sharp = ATTN_SHARPNESS * (dh as f64).sqrt();
    for pos in 0..p {
        copy.w_q.set(0, v + pos, sharp);
    }
    copy.w_k.set(0, v + spec.subject_index, 1.0);
    for (k, &obj) in objects.iter().enumerate() {
        copy.w_v.set(1 + k, obj, 1.0);
        copy.w_o.set(obj, 1 + k, COPY_GAIN);
    }

    let model = Model::new(config, w)?;
    Ok(PlantedModel {
        model,
        expected_site: ComponentRef::new(spec.store_layer, ComponentKind::MlpOut, spec.subject_index),
        copy_layer,
    })
}
