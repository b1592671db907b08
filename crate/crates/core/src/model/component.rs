use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Patchable sublayer outputs.
///
/// `EmbeddingOut` has no layer of its own; refs to it always use layer 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    /// Residual stream after the whole block.
    HiddenState,
    /// MLP output before it is added to the residual stream.
    MlpOut,
    /// Attention output (after the output projection) before residual addition.
    AttnOut,
    /// Token plus position embedding, after any corruption noise.
    EmbeddingOut,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 4] =
        [ComponentKind::HiddenState, ComponentKind::MlpOut, ComponentKind::AttnOut, ComponentKind::EmbeddingOut];

    /// The three per-layer kinds that causal traces scan.
    pub const LAYERED: [ComponentKind; 3] = [ComponentKind::HiddenState, ComponentKind::MlpOut, ComponentKind::AttnOut];

    pub fn as_str(self) -> &'static str {
        match self {
            ComponentKind::HiddenState => "hidden_state",
            ComponentKind::MlpOut => "mlp_out",
            ComponentKind::AttnOut => "attn_out",
            ComponentKind::EmbeddingOut => "embedding_out",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ComponentKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hidden_state" | "hidden" => Ok(ComponentKind::HiddenState),
            "mlp_out" | "mlp" => Ok(ComponentKind::MlpOut),
            "attn_out" | "attn" | "attention" => Ok(ComponentKind::AttnOut),
            "embedding_out" | "embedding" => Ok(ComponentKind::EmbeddingOut),
            other => Err(ModelError::UnknownComponentKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ComponentRef {
    pub layer: usize,
    pub kind: ComponentKind,
    pub position: usize,
}

impl ComponentRef {
    pub fn new(layer: usize, kind: ComponentKind, position: usize) -> Self {
        Self { layer, kind, position }
    }

    pub fn embedding(position: usize) -> Self {
        Self { layer: 0, kind: ComponentKind::EmbeddingOut, position }
    }

    pub(crate) fn check(&self, n_layers: usize, seq_len: usize) -> Result<(), ModelError> {
        let layer_ok = match self.kind {
            ComponentKind::EmbeddingOut => self.layer == 0,
            _ => self.layer < n_layers,
        };
        if !layer_ok || self.position >= seq_len {
            return Err(ModelError::ComponentOutOfRange { component: *self, n_layers, seq_len });
        }
        Ok(())
    }
}

impl fmt::Display for ComponentRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@L{}:p{}", self.kind, self.layer, self.position)
    }
}

/// Activations recorded by one forward pass, dense per captured kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationCache {
    d_model: usize,
    n_layers: usize,
    seq_len: usize,
    // Indexed by ComponentKind::index(); layout [layer][position][d_model].
    slots: [Option<Vec<f64>>; 4],
}

impl ActivationCache {
    pub(crate) fn new(d_model: usize, n_layers: usize, seq_len: usize, capture: &[ComponentKind]) -> Self {
        let mut slots: [Option<Vec<f64>>; 4] = Default::default();
        for kind in capture {
            let layers = if *kind == ComponentKind::EmbeddingOut { 1 } else { n_layers };
            slots[kind.index()] = Some(vec![0.0; layers * seq_len * d_model]);
        }
        Self { d_model, n_layers, seq_len, slots }
    }

    fn offset(&self, layer: usize, position: usize) -> usize {
        (layer * self.seq_len + position) * self.d_model
    }

    pub(crate) fn record(&mut self, kind: ComponentKind, layer: usize, position: usize, v: &[f64]) {
        let off = self.offset(layer, position);
        let d = self.d_model;
        if let Some(buf) = self.slots[kind.index()].as_mut() {
            buf[off..off + d].copy_from_slice(v);
        }
    }

    pub fn captures(&self, kind: ComponentKind) -> bool {
        self.slots[kind.index()].is_some()
    }

    pub fn get(&self, site: &ComponentRef) -> Option<&[f64]> {
        site.check(self.n_layers, self.seq_len).ok()?;
        let buf = self.slots[site.kind.index()].as_ref()?;
        let off = self.offset(site.layer, site.position);
        Some(&buf[off..off + self.d_model])
    }

    /// Number of stored vectors.
    pub fn len(&self) -> usize {
        ComponentKind::ALL
            .iter()
            .filter(|k| self.captures(**k))
            .map(|k| {
                let layers = if *k == ComponentKind::EmbeddingOut { 1 } else { self.n_layers };
                layers * self.seq_len
            })
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn d_model(&self) -> usize {
        self.d_model
    }

    pub fn refs(&self) -> impl Iterator<Item = ComponentRef> + '_ {
        ComponentKind::ALL.into_iter().filter(|k| self.captures(*k)).flat_map(move |kind| {
            let layers = if kind == ComponentKind::EmbeddingOut { 1 } else { self.n_layers };
            (0..layers)
                .flat_map(move |layer| (0..self.seq_len).map(move |position| ComponentRef { layer, kind, position }))
        })
    }
}

/// Embedding noise for a set of positions plus clean-value patches.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InterventionPlan {
    corrupt: BTreeMap<usize, Vec<f64>>,
    patches: BTreeMap<ComponentRef, Vec<f64>>,
}

impl InterventionPlan {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `noise` to the embedding output at `position` before layer 0.
    pub fn with_noise(mut self, position: usize, noise: Vec<f64>) -> Self {
        self.corrupt.insert(position, noise);
        self
    }

    pub fn add_patch(&mut self, site: ComponentRef, value: Vec<f64>) -> Result<(), ModelError> {
        if self.patches.contains_key(&site) {
            return Err(ModelError::DuplicatePatch(site));
        }
        self.patches.insert(site, value);
        Ok(())
    }

    pub fn with_patch(mut self, site: ComponentRef, value: Vec<f64>) -> Result<Self, ModelError> {
        self.add_patch(site, value)?;
        Ok(self)
    }

    pub fn noise(&self) -> &BTreeMap<usize, Vec<f64>> {
        &self.corrupt
    }

    pub fn patches(&self) -> &BTreeMap<ComponentRef, Vec<f64>> {
        &self.patches
    }

    pub fn is_empty(&self) -> bool {
        self.corrupt.is_empty() && self.patches.is_empty()
    }

    pub(crate) fn patch_for(&self, kind: ComponentKind, layer: usize, pos: usize) -> Option<&[f64]> {
        if self.patches.is_empty() {
            return None;
        }
        self.patches.get(&ComponentRef { layer, kind, position: pos }).map(Vec::as_slice)
    }

    pub(crate) fn validate(&self, n_layers: usize, seq_len: usize, d_model: usize) -> Result<(), ModelError> {
        for (&position, noise) in &self.corrupt {
            if position >= seq_len {
                return Err(ModelError::NoisePositionOutOfRange { position, seq_len });
            }
            if noise.len() != d_model {
                return Err(ModelError::VectorLength { expected: d_model, got: noise.len() });
            }
        }
        for (site, value) in &self.patches {
            site.check(n_layers, seq_len)?;
            if value.len() != d_model {
                return Err(ModelError::VectorLength { expected: d_model, got: value.len() });
            }
        }
        Ok(())
    }
}
