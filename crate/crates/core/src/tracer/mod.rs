//! Three-run causal mediation analysis.
//!
//! For a prompt `x` with target `o`:
//!
//! - clean run: `P_x[o]`, all activations cached;
//! - corrupted run: subject embeddings get Gaussian noise, giving `P_x*[o]`;
//! - restored run: the corrupted run with one site (or a window of layers)
//!   overwritten by its clean value, giving `P_{x*, clean C}[o]`.
//!
//! The indirect effect of a site is `P_{x*, clean C}[o] - P_x*[o]`. Per-site
//! effects are folded into [`TokenBucket`]s and averaged over prompts into an
//! [`AieGrid`].

mod buckets;
mod grid;
mod prompt;

use rayon::prelude::*;
use thiserror::Error;

pub use buckets::{assign_buckets, TokenBucket};
pub use grid::{average_grids, AieGrid, LOG_FLOOR};
pub use prompt::{CorruptionSpec, TracePrompt};

use crate::model::{
    softmax, ActivationCache, ComponentKind, ComponentRef, InterventionPlan, Model, ModelError, TokenSequence,
};

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("prompt {prompt_id}: {reason}")]
    InvalidPrompt { prompt_id: String, reason: String },
    #[error("speech prompt {0} has no text_token_map")]
    MissingTextTokenMap(String),
    #[error("window size {0} must be odd and at least 1")]
    InvalidWindow(usize),
    #[error("layer {layer} out of range for {n_layers} layers")]
    LayerOutOfRange { layer: usize, n_layers: usize },
    #[error("{0} cannot be traced per layer")]
    UntraceableKind(ComponentKind),
    #[error("no trace results to average")]
    NoResults,
    #[error("trace results disagree on {0}")]
    MismatchedResults(String),
    #[error("unknown token bucket {0:?}")]
    UnknownBucket(String),
}

/// How the target probability is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetMode {
    /// Probability of the first object token.
    #[default]
    FirstToken,
    /// Product of teacher-forced probabilities of every object token.
    Joint,
}

/// `p_restored - p_corrupt`.
pub fn indirect_effect(p_restored: f64, p_corrupt: f64) -> f64 {
    p_restored - p_corrupt
}

/// Sites of `kind` at `position` for the layers
/// `[center - window/2, center + window/2]`, clipped to `[0, n_layers)`.
pub fn window_sites(
    center_layer: usize,
    kind: ComponentKind,
    window: usize,
    n_layers: usize,
    position: usize,
) -> Result<Vec<ComponentRef>, TraceError> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(TraceError::InvalidWindow(window));
    }
    if center_layer >= n_layers {
        return Err(TraceError::LayerOutOfRange { layer: center_layer, n_layers });
    }
    if kind == ComponentKind::EmbeddingOut {
        return Err(TraceError::UntraceableKind(kind));
    }
    let half = window / 2;
    let lo = center_layer.saturating_sub(half);
    let hi = (center_layer + half).min(n_layers - 1);
    Ok((lo..=hi).map(|layer| ComponentRef::new(layer, kind, position)).collect())
}

/// Default windows: 1 for hidden states, 5 for MLP and attention outputs.
pub fn default_window(kind: ComponentKind) -> usize {
    match kind {
        ComponentKind::MlpOut | ComponentKind::AttnOut => 5,
        _ => 1,
    }
}

/// Per-prompt causal trace for one component kind.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceResult {
    pub prompt_id: String,
    pub kind: ComponentKind,
    pub window: usize,
    pub n_layers: usize,
    pub p_clean: f64,
    pub p_corrupt: f64,
    /// `[layer][position]` indirect effect of restoring the window centred
    /// on `layer` at `position`.
    pub raw_ie: Vec<Vec<f64>>,
    /// `[layer][bucket]` mean IE, `None` where no token falls in the bucket.
    pub bucket_ie: Vec<[Option<f64>; 6]>,
    /// Sequence positions feeding each bucket.
    pub bucket_positions: [usize; 6],
}

impl TraceResult {
    pub fn bucket(&self, layer: usize, bucket: TokenBucket) -> Option<f64> {
        self.bucket_ie[layer][bucket.index()]
    }
}

/// A model plus the corruption and scoring settings shared by every run.
#[derive(Debug, Clone, Copy)]
pub struct Tracer<'a> {
    pub model: &'a Model,
    pub corruption: CorruptionSpec,
    pub target_mode: TargetMode,
}

impl<'a> Tracer<'a> {
    pub fn new(model: &'a Model, corruption: CorruptionSpec) -> Self {
        Self { model, corruption, target_mode: TargetMode::FirstToken }
    }

    pub fn with_target_mode(mut self, mode: TargetMode) -> Self {
        self.target_mode = mode;
        self
    }

    /// Sequence actually run: the prompt, plus all but the last object token
    /// in joint mode.
    fn scored_sequence(&self, prompt: &TracePrompt) -> TokenSequence {
        let mut seq = prompt.clean_tokens.clone();
        if self.target_mode == TargetMode::Joint {
            for &t in &prompt.target[..prompt.target.len() - 1] {
                seq.push(t, self.model.vocab());
            }
        }
        seq
    }

    fn score(
        &self,
        prompt: &TracePrompt,
        plan: &InterventionPlan,
        capture: &[ComponentKind],
    ) -> Result<(f64, Option<ActivationCache>), TraceError> {
        let seq = self.scored_sequence(prompt);
        let res = self.model.forward(&seq, plan, capture)?;
        let p = match self.target_mode {
            TargetMode::FirstToken => res.next_token_distribution[prompt.target[0]],
            TargetMode::Joint => {
                let base = prompt.clean_tokens.len() - 1;
                prompt.target.iter().enumerate().map(|(k, &t)| softmax(&res.logits[base + k])[t]).product()
            }
        };
        Ok((p, res.cache))
    }

    fn corruption_plan(&self, prompt: &TracePrompt) -> InterventionPlan {
        let d = self.model.d_model();
        prompt
            .corrupted_positions()
            .into_iter()
            .fold(InterventionPlan::new(), |plan, p| plan.with_noise(p, self.corruption.noise(&prompt.prompt_id, p, d)))
    }

    /// `P_x[o]` and the full activation cache.
    pub fn clean_run(&self, prompt: &TracePrompt) -> Result<(f64, ActivationCache), TraceError> {
        prompt.validate(self.model)?;
        let (p, cache) = self.score(prompt, &InterventionPlan::new(), &ComponentKind::ALL)?;
        Ok((p, cache.expect("capture requested")))
    }

    /// `P_x*[o]`.
    pub fn corrupted_run(&self, prompt: &TracePrompt) -> Result<f64, TraceError> {
        prompt.validate(self.model)?;
        Ok(self.score(prompt, &self.corruption_plan(prompt), &[])?.0)
    }

    /// `P_{x*, clean C}[o]` with every site in `sites` restored from `cache`.
    pub fn restored_run(
        &self,
        prompt: &TracePrompt,
        cache: &ActivationCache,
        sites: &[ComponentRef],
    ) -> Result<f64, TraceError> {
        let mut plan = self.corruption_plan(prompt);
        for site in sites {
            if site.position >= prompt.clean_tokens.len() {
                return Err(ModelError::ComponentOutOfRange {
                    component: *site,
                    n_layers: self.model.n_layers(),
                    seq_len: prompt.clean_tokens.len(),
                }
                .into());
            }
            let value = cache.get(site).ok_or(ModelError::ComponentOutOfRange {
                component: *site,
                n_layers: self.model.n_layers(),
                seq_len: cache.seq_len(),
            })?;
            plan.add_patch(*site, value.to_vec())?;
        }
        Ok(self.score(prompt, &plan, &[])?.0)
    }

    pub fn trace_prompt(
        &self,
        prompt: &TracePrompt,
        kind: ComponentKind,
        window: usize,
    ) -> Result<TraceResult, TraceError> {
        Ok(self.trace_prompt_kinds(prompt, &[(kind, window)])?.remove(0))
    }

    /// Traces several `(kind, window)` pairs sharing one clean and one
    /// corrupted run.
    pub fn trace_prompt_kinds(
        &self,
        prompt: &TracePrompt,
        kinds: &[(ComponentKind, usize)],
    ) -> Result<Vec<TraceResult>, TraceError> {
        let n_layers = self.model.n_layers();
        for &(kind, window) in kinds {
            window_sites(0, kind, window, n_layers, 0)?;
        }
        let (p_clean, cache) = self.clean_run(prompt)?;
        let p_corrupt = self.corrupted_run(prompt)?;
        let n = prompt.clean_tokens.len();

        let units = prompt.units(self.model);
        let mut distinct: Vec<usize> = units.iter().flatten().copied().collect();
        distinct.dedup();
        let unit_buckets = assign_buckets(&distinct, &prompt.subject_range);
        let bucket_of_unit = |u: usize| {
            let i = distinct.binary_search(&u).expect("unit listed");
            unit_buckets[i]
        };
        let mut bucket_positions = [0usize; 6];
        for u in units.iter().flatten() {
            if let Some(b) = bucket_of_unit(*u) {
                bucket_positions[b.index()] += 1;
            }
        }

        kinds
            .iter()
            .map(|&(kind, window)| {
                let sites: Vec<(usize, usize)> = (0..n_layers).flat_map(|l| (0..n).map(move |p| (l, p))).collect();
                let ies: Vec<f64> = sites
                    .par_iter()
                    .map(|&(layer, pos)| {
                        let window_refs = window_sites(layer, kind, window, n_layers, pos)?;
                        let p = self.restored_run(prompt, &cache, &window_refs)?;
                        Ok(indirect_effect(p, p_corrupt))
                    })
                    .collect::<Result<_, TraceError>>()?;
                let raw_ie: Vec<Vec<f64>> = ies.chunks(n).map(<[f64]>::to_vec).collect();

                let bucket_ie = raw_ie
                    .iter()
                    .map(|row| {
                        // unit -> (sum, count) over its positions, in unit order
                        let mut unit_sum = vec![(0.0f64, 0usize); distinct.len()];
                        for (pos, u) in units.iter().enumerate() {
                            if let Some(u) = u {
                                let i = distinct.binary_search(u).expect("unit listed");
                                unit_sum[i].0 += row[pos];
                                unit_sum[i].1 += 1;
                            }
                        }
                        let mut acc = [(0.0f64, 0usize); 6];
                        for (i, (s, c)) in unit_sum.iter().enumerate() {
                            if let Some(b) = unit_buckets[i] {
                                acc[b.index()].0 += s / *c as f64;
                                acc[b.index()].1 += 1;
                            }
                        }
                        acc.map(|(s, c)| (c > 0).then(|| s / c as f64))
                    })
                    .collect();

                Ok(TraceResult {
                    prompt_id: prompt.prompt_id.clone(),
                    kind,
                    window,
                    n_layers,
                    p_clean,
                    p_corrupt,
                    raw_ie,
                    bucket_ie,
                    bucket_positions,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_random_model, ModelConfig, VocabLayout};

    fn model() -> Model {
        build_random_model(&ModelConfig {
            n_layers: 3,
            d_model: 16,
            n_heads: 2,
            d_mlp: 32,
            vocab: VocabLayout::standard(20, 8),
            max_positions: 12,
            rng_seed: 21,
        })
        .unwrap()
    }

    fn prompt(m: &Model) -> TracePrompt {
        let seq = TokenSequence::text(&[4, 9, 10, 11, 5, 6], m.vocab());
        TracePrompt::text("p0", seq, 2..5, vec![7, 8])
    }

    #[test]
    fn indirect_effect_examples() {
        assert!((indirect_effect(0.7, 0.2) - 0.5).abs() < 1e-15);
        assert_eq!(indirect_effect(0.3, 0.3), 0.0);
    }

    #[test]
    fn window_examples() {
        let layers = |c, w, n| -> Vec<usize> {
            window_sites(c, ComponentKind::MlpOut, w, n, 0).unwrap().iter().map(|r| r.layer).collect()
        };
        assert_eq!(layers(10, 5, 32), vec![8, 9, 10, 11, 12]);
        assert_eq!(layers(0, 5, 32), vec![0, 1, 2]);
        assert_eq!(layers(31, 5, 32), vec![29, 30, 31]);
        assert_eq!(layers(7, 1, 32), vec![7]);
        assert_eq!(window_sites(0, ComponentKind::MlpOut, 4, 8, 0), Err(TraceError::InvalidWindow(4)));
        assert_eq!(window_sites(0, ComponentKind::MlpOut, 0, 8, 0), Err(TraceError::InvalidWindow(0)));
        assert!(window_sites(8, ComponentKind::MlpOut, 1, 8, 0).is_err());
    }

    #[test]
    fn clean_run_is_deterministic_and_complete() {
        let m = model();
        let t = Tracer::new(&m, CorruptionSpec::for_model(&m, 3.0, 1));
        let p = prompt(&m);
        let (pa, ca) = t.clean_run(&p).unwrap();
        let (pb, cb) = t.clean_run(&p).unwrap();
        assert_eq!(pa, pb);
        assert_eq!(ca, cb);
        assert_eq!(ca.len(), p.clean_tokens.len() * (3 * 3 + 1));
    }

    #[test]
    fn zero_noise_gives_clean_probability() {
        let m = model();
        let t = Tracer::new(&m, CorruptionSpec::for_model(&m, 0.0, 1));
        let p = prompt(&m);
        let (clean, cache) = t.clean_run(&p).unwrap();
        assert_eq!(t.corrupted_run(&p).unwrap(), clean);
        let site = [ComponentRef::new(1, ComponentKind::AttnOut, 3)];
        assert_eq!(t.restored_run(&p, &cache, &site).unwrap(), clean);
    }

    #[test]
    fn full_embedding_restoration_recovers_clean() {
        let m = model();
        let t = Tracer::new(&m, CorruptionSpec::for_model(&m, 5.0, 9));
        let p = prompt(&m);
        let (clean, cache) = t.clean_run(&p).unwrap();
        let corrupt = t.corrupted_run(&p).unwrap();
        assert_ne!(clean, corrupt);
        assert_eq!(t.corrupted_run(&p).unwrap(), corrupt);
        let all: Vec<ComponentRef> = (0..p.clean_tokens.len()).map(ComponentRef::embedding).collect();
        let restored = t.restored_run(&p, &cache, &all).unwrap();
        assert_eq!(restored, clean);
        assert_eq!(indirect_effect(restored, corrupt), clean - corrupt);
    }

    #[test]
    fn joint_mode_multiplies_teacher_forced_probabilities() {
        let m = model();
        let t = Tracer::new(&m, CorruptionSpec::for_model(&m, 0.0, 1)).with_target_mode(TargetMode::Joint);
        let p = prompt(&m);
        let (joint, _) = t.clean_run(&p).unwrap();
        let first = m.run(&p.clean_tokens).unwrap().next_token_distribution[7];
        let mut ext = p.clean_tokens.clone();
        ext.push(7, m.vocab());
        let second = m.run(&ext).unwrap().next_token_distribution[8];
        assert!((joint - first * second).abs() < 1e-15);
    }

    #[test]
    fn speech_prompt_requires_map() {
        let m = model();
        let t = Tracer::new(&m, CorruptionSpec::for_model(&m, 3.0, 1));
        let mut p = prompt(&m);
        p.modality = crate::model::Modality::Speech;
        assert_eq!(t.clean_run(&p).unwrap_err(), TraceError::MissingTextTokenMap("p0".into()));
    }

    #[test]
    fn speech_corruption_follows_the_map() {
        let m = model();
        let seq = TokenSequence::from_ids(vec![1, 22, 23, 24, 25, 26, 0], m.vocab()).unwrap();
        let map = vec![None, Some(0), Some(1), Some(1), Some(2), Some(3), None];
        let p = TracePrompt::speech("s", seq, 1..3, vec![5], map);
        p.validate(&m).unwrap();
        assert_eq!(p.corrupted_positions(), vec![2, 3, 4]);
        let mut bad = p.clone();
        bad.text_token_map = Some(vec![None, Some(1), Some(0), Some(1), Some(2), Some(3), None]);
        assert!(bad.validate(&m).is_err());
    }

    #[test]
    fn buckets_of_a_traced_prompt() {
        let m = model();
        let t = Tracer::new(&m, CorruptionSpec::for_model(&m, 3.0, 4));
        let p = prompt(&m);
        let r = t.trace_prompt(&p, ComponentKind::HiddenState, 1).unwrap();
        // positions: 0 marker, 1 prefix, 2..5 subject, 5 first subsequent, 6 last
        assert_eq!(r.bucket_positions, [1, 1, 1, 1, 0, 1]);
        for layer in 0..3 {
            assert_eq!(r.bucket(layer, TokenBucket::LastSubject), Some(r.raw_ie[layer][4]));
            assert_eq!(r.bucket(layer, TokenBucket::FurtherTokens), None);
            // restoring before the corrupted span changes nothing
            assert_eq!(r.raw_ie[layer][1], 0.0);
        }
        assert!(r.raw_ie.iter().flatten().all(|ie| (-1.0..=1.0).contains(ie)));
    }
}
