use super::{ActivationCache, ComponentKind, InterventionPlan, Modality, Model, ModelError, TokenId, TokenSequence};

const NORM_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardResult {
    /// `[position][vocab]`
    pub logits: Vec<Vec<f64>>,
    /// Softmax of the final position's logits.
    pub next_token_distribution: Vec<f64>,
    pub cache: Option<ActivationCache>,
}

impl ForwardResult {
    pub fn from_logits(logits: Vec<Vec<f64>>) -> Self {
        let next_token_distribution = logits.last().map(|l| softmax(l)).unwrap_or_default();
        Self { logits, next_token_distribution, cache: None }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub fn target_probability(result: &ForwardResult, target: TokenId) -> Result<f64, ModelError> {
    result.next_token_distribution.get(target).copied().ok_or(ModelError::TargetOutOfRange(target))
}

/// Tokens produced by greedy decoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    pub tokens: Vec<TokenId>,
    /// Generation stopped early because the context hit `max_positions`.
    pub truncated: bool,
}

fn rmsnorm(x: &[f64], gain: &[f64], out: &mut [f64]) {
    let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    let inv = 1.0 / (ms + NORM_EPS).sqrt();
    for ((o, v), g) in out.iter_mut().zip(x).zip(gain) {
        *o = v * inv * g;
    }
}

fn add_assign(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

impl Model {
    /// Runs the model on `seq` with the interventions in `plan`, recording
    /// every kind listed in `capture`.
    ///
    /// Noise is added to `embedding_out` first, then patches replace sublayer
    /// outputs as they are produced, so captured values are post-intervention.
    pub fn forward(
        &self,
        seq: &TokenSequence,
        plan: &InterventionPlan,
        capture: &[ComponentKind],
    ) -> Result<ForwardResult, ModelError> {
        let cfg = &self.config;
        let w = &self.weights;
        let n = seq.len();
        let d = cfg.d_model;
        if n == 0 {
            return Err(ModelError::EmptySequence);
        }
        if n > cfg.max_positions {
            return Err(ModelError::SequenceTooLong { len: n, max: cfg.max_positions });
        }
        let vocab_size = cfg.vocab_size();
        for (position, &id) in seq.ids().iter().enumerate() {
            if id >= vocab_size {
                return Err(ModelError::TokenOutOfRange { position, id, vocab_size });
            }
        }
        plan.validate(cfg.n_layers, n, d)?;

        let mut cache = (!capture.is_empty()).then(|| ActivationCache::new(d, cfg.n_layers, n, capture));

        let mut resid: Vec<Vec<f64>> = Vec::with_capacity(n);
        for (p, &id) in seq.ids().iter().enumerate() {
            let mut e: Vec<f64> =
                w.token_embedding.row(id).iter().zip(w.position_embedding.row(p)).map(|(a, b)| a + b).collect();
            if let Some(noise) = plan.noise().get(&p) {
                add_assign(&mut e, noise);
            }
            if let Some(v) = plan.patch_for(ComponentKind::EmbeddingOut, 0, p) {
                e.copy_from_slice(v);
            }
            if let Some(c) = cache.as_mut() {
                c.record(ComponentKind::EmbeddingOut, 0, p, &e);
            }
            resid.push(e);
        }

        let n_heads = cfg.n_heads;
        let dh = cfg.d_head();
        let scale = 1.0 / (dh as f64).sqrt();
        let mut normed = vec![0.0; d];
        let mut q = vec![vec![0.0; d]; n];
        let mut k = vec![vec![0.0; d]; n];
        let mut v = vec![vec![0.0; d]; n];
        let mut concat = vec![0.0; d];
        let mut out = vec![0.0; d];
        let mut hidden_mlp = vec![0.0; cfg.d_mlp];
        let mut scores = Vec::with_capacity(n);

        for (l, lw) in w.layers.iter().enumerate() {
            for p in 0..n {
                rmsnorm(&resid[p], &lw.attn_norm, &mut normed);
                lw.w_q.matvec_into(&normed, &mut q[p]);
                lw.w_k.matvec_into(&normed, &mut k[p]);
                lw.w_v.matvec_into(&normed, &mut v[p]);
            }
            for p in 0..n {
                for h in 0..n_heads {
                    let hs = h * dh..(h + 1) * dh;
                    scores.clear();
                    for s in 0..=p {
                        let dot: f64 = q[p][hs.clone()].iter().zip(&k[s][hs.clone()]).map(|(a, b)| a * b).sum();
                        scores.push(dot * scale);
                    }
                    let attn = softmax(&scores);
                    let slot = &mut concat[hs.clone()];
                    slot.fill(0.0);
                    for (s, a) in attn.iter().enumerate() {
                        for (c, x) in slot.iter_mut().zip(&v[s][hs.clone()]) {
                            *c += a * x;
                        }
                    }
                }
                lw.w_o.matvec_into(&concat, &mut out);
                if let Some(patch) = plan.patch_for(ComponentKind::AttnOut, l, p) {
                    out.copy_from_slice(patch);
                }
                if let Some(c) = cache.as_mut() {
                    c.record(ComponentKind::AttnOut, l, p, &out);
                }
                add_assign(&mut resid[p], &out);
            }
            for p in 0..n {
                rmsnorm(&resid[p], &lw.mlp_norm, &mut normed);
                lw.w_up.matvec_into(&normed, &mut hidden_mlp);
                for (hv, b) in hidden_mlp.iter_mut().zip(&lw.b_up) {
                    *hv = (*hv + b).max(0.0);
                }
                lw.w_down.matvec_into(&hidden_mlp, &mut out);
                if let Some(patch) = plan.patch_for(ComponentKind::MlpOut, l, p) {
                    out.copy_from_slice(patch);
                }
                if let Some(c) = cache.as_mut() {
                    c.record(ComponentKind::MlpOut, l, p, &out);
                }
                add_assign(&mut resid[p], &out);
                if let Some(patch) = plan.patch_for(ComponentKind::HiddenState, l, p) {
                    resid[p].copy_from_slice(patch);
                }
                if let Some(c) = cache.as_mut() {
                    c.record(ComponentKind::HiddenState, l, p, &resid[p]);
                }
            }
        }

        let logits: Vec<Vec<f64>> = resid
            .iter()
            .map(|x| {
                rmsnorm(x, &w.final_norm, &mut normed);
                w.unembedding.matvec(&normed)
            })
            .collect();
        let mut result = ForwardResult::from_logits(logits);
        result.cache = cache;
        Ok(result)
    }

    /// Clean forward pass without capture.
    pub fn run(&self, seq: &TokenSequence) -> Result<ForwardResult, ModelError> {
        self.forward(seq, &InterventionPlan::new(), &[])
    }

    /// Greedy text decoding. Candidates are restricted to text tokens; if the
    /// sequence ends in a speech span a text marker is appended first.
    pub fn greedy_generate(&self, seq: &TokenSequence, max_new: usize) -> Result<Generation, ModelError> {
        if max_new == 0 {
            return Err(ModelError::NothingToGenerate);
        }
        let vocab = &self.config.vocab;
        let mut ctx = seq.clone();
        if ctx.last_modality() != Some(Modality::Text) {
            ctx.push(vocab.text_marker, vocab);
        }
        let mut tokens = Vec::with_capacity(max_new);
        for _ in 0..max_new {
            if ctx.len() > self.config.max_positions {
                return Ok(Generation { tokens, truncated: true });
            }
            let res = self.run(&ctx)?;
            let dist = &res.next_token_distribution;
            let mut best = vocab.text_tokens.start;
            for id in vocab.text_tokens.clone() {
                if dist[id] > dist[best] {
                    best = id;
                }
            }
            tokens.push(best);
            if tokens.len() == max_new {
                break;
            }
            if ctx.len() == self.config.max_positions {
                return Ok(Generation { tokens, truncated: true });
            }
            ctx.push(best, vocab);
        }
        Ok(Generation { tokens, truncated: false })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_passthrough_model, build_random_model, ComponentRef, ModelConfig, VocabLayout};

    fn small_config(seed: u64) -> ModelConfig {
        ModelConfig {
            n_layers: 3,
            d_model: 16,
            n_heads: 4,
            d_mlp: 32,
            vocab: VocabLayout::standard(20, 8),
            max_positions: 12,
            rng_seed: seed,
        }
    }

    fn probe(model: &Model) -> TokenSequence {
        TokenSequence::text(&[3, 9, 14, 5, 7], model.vocab())
    }

    #[test]
    fn capture_all_counts_entries() {
        let m = build_random_model(&small_config(1)).unwrap();
        let seq = probe(&m);
        let r = m.forward(&seq, &InterventionPlan::new(), &ComponentKind::ALL).unwrap();
        let cache = r.cache.unwrap();
        assert_eq!(cache.len(), seq.len() * (3 * 3 + 1));
        assert_eq!(cache.refs().count(), cache.len());
    }

    #[test]
    fn one_layer_five_tokens_has_twenty_entries() {
        let mut cfg = small_config(2);
        cfg.n_layers = 1;
        let m = build_random_model(&cfg).unwrap();
        let seq = TokenSequence::text(&[3, 4, 5, 6], m.vocab());
        assert_eq!(seq.len(), 5);
        let r = m.forward(&seq, &InterventionPlan::new(), &ComponentKind::ALL).unwrap();
        assert_eq!(r.cache.unwrap().len(), 5 * (3 + 1));
    }

    #[test]
    fn zero_noise_is_bit_identical() {
        let m = build_random_model(&small_config(3)).unwrap();
        let seq = probe(&m);
        let clean = m.run(&seq).unwrap();
        let plan = InterventionPlan::new().with_noise(2, vec![0.0; 16]).with_noise(3, vec![0.0; 16]);
        let noisy = m.forward(&seq, &plan, &[]).unwrap();
        assert_eq!(clean.logits, noisy.logits);
    }

    #[test]
    fn restoring_embeddings_undoes_corruption() {
        let m = build_random_model(&small_config(4)).unwrap();
        let seq = probe(&m);
        let clean = m.forward(&seq, &InterventionPlan::new(), &[ComponentKind::EmbeddingOut]).unwrap();
        let cache = clean.cache.as_ref().unwrap();
        let mut plan = InterventionPlan::new().with_noise(1, vec![5.0; 16]).with_noise(2, vec![-3.0; 16]);
        let corrupted = m.forward(&seq, &plan, &[]).unwrap();
        assert_ne!(corrupted.logits, clean.logits);
        for p in 0..seq.len() {
            let site = ComponentRef::embedding(p);
            plan.add_patch(site, cache.get(&site).unwrap().to_vec()).unwrap();
        }
        let restored = m.forward(&seq, &plan, &[]).unwrap();
        assert_eq!(restored.logits, clean.logits);
    }

    #[test]
    fn patch_does_not_touch_earlier_sites() {
        let m = build_random_model(&small_config(5)).unwrap();
        let seq = probe(&m);
        let clean = m.forward(&seq, &InterventionPlan::new(), &ComponentKind::ALL).unwrap();
        let site = ComponentRef::new(1, ComponentKind::MlpOut, 3);
        let plan = InterventionPlan::new().with_patch(site, vec![1.5; 16]).unwrap();
        let patched = m.forward(&seq, &plan, &ComponentKind::ALL).unwrap();
        let (a, b) = (clean.cache.unwrap(), patched.cache.unwrap());
        for r in a.refs() {
            let earlier_layer = r.kind != ComponentKind::EmbeddingOut && r.layer < 1;
            let same_layer_before = r.layer == 1 && r.position < 3;
            if r.kind == ComponentKind::EmbeddingOut || earlier_layer || same_layer_before {
                assert_eq!(a.get(&r), b.get(&r), "{r} changed");
            }
        }
        assert_eq!(b.get(&site).unwrap(), &[1.5; 16][..]);
    }

    #[test]
    fn distribution_is_normalised() {
        let m = build_random_model(&small_config(6)).unwrap();
        let r = m.run(&probe(&m)).unwrap();
        let s: f64 = r.next_token_distribution.iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
        assert!(r.next_token_distribution.iter().all(|p| *p >= 0.0));
    }

    #[test]
    fn uniform_and_saturated_targets() {
        let uniform = ForwardResult::from_logits(vec![vec![0.0; 8]]);
        assert!((target_probability(&uniform, 5).unwrap() - 1.0 / 8.0).abs() < 1e-15);
        let mut logits = vec![0.0; 8];
        logits[3] = 50.0;
        let peaked = ForwardResult::from_logits(vec![logits]);
        assert!(target_probability(&peaked, 3).unwrap() >= 0.99);
        assert_eq!(target_probability(&peaked, 8), Err(ModelError::TargetOutOfRange(8)));
    }

    #[test]
    fn invalid_inputs_report_offending_index() {
        let m = build_random_model(&small_config(7)).unwrap();
        let bad = TokenSequence::from_ids(vec![0, 3, 999], m.vocab()).unwrap();
        assert_eq!(m.run(&bad).unwrap_err(), ModelError::TokenOutOfRange { position: 2, id: 999, vocab_size: 30 });
        let long = TokenSequence::text(&[3; 12], m.vocab());
        assert!(matches!(m.run(&long), Err(ModelError::SequenceTooLong { len: 13, max: 12 })));
        let plan =
            InterventionPlan::new().with_patch(ComponentRef::new(3, ComponentKind::AttnOut, 0), vec![0.0; 16]).unwrap();
        assert!(matches!(m.forward(&probe(&m), &plan, &[]), Err(ModelError::ComponentOutOfRange { .. })));
    }

    #[test]
    fn passthrough_model_repeats_last_token() {
        let m = build_passthrough_model(&small_config(8)).unwrap();
        let seq = TokenSequence::text(&[4, 11, 6], m.vocab());
        let g = m.greedy_generate(&seq, 3).unwrap();
        assert_eq!(g.tokens, vec![6, 6, 6]);
        assert!(!g.truncated);
    }

    #[test]
    fn generation_is_deterministic_and_flags_truncation() {
        let m = build_random_model(&small_config(9)).unwrap();
        let seq = probe(&m);
        let a = m.greedy_generate(&seq, 4).unwrap();
        let b = m.greedy_generate(&seq, 4).unwrap();
        assert_eq!(a, b);
        assert!(a.tokens.iter().all(|t| m.vocab().text_tokens.contains(t)));
        let g = m.greedy_generate(&seq, 20).unwrap();
        assert!(g.truncated);
        assert_eq!(seq.len() + g.tokens.len(), 12 + 1);
        assert_eq!(m.greedy_generate(&seq, 0), Err(ModelError::NothingToGenerate));
    }
}
