use serde::{Deserialize, Serialize};

use crate::error::{GdmError, Result};
use crate::metric::MetricKind;

/// Which learning rate drives context-descriptor adaptation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ContextRate {
    /// `lr_context` for the BMU, `lr_neighbor` for its neighbours.
    #[default]
    Separate,
    /// Contexts use the same rate as the weights (`lr_bmu` / `lr_neighbor`).
    FollowWeights,
}

/// Hyperparameters of one Gamma-GWR network.
///
/// `context_weights` holds `alpha_0 ..= alpha_K`; its length fixes the number
/// of context descriptors `K = context_weights.len() - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GwrParams {
    pub insertion_threshold: f64,
    pub habituation_threshold: f64,
    pub context_blend: f64,
    pub context_weights: Vec<f64>,
    pub lr_bmu: f64,
    pub lr_neighbor: f64,
    pub lr_context: f64,
    pub hab_tau_bmu: f64,
    pub hab_tau_neighbor: f64,
    pub hab_kappa: f64,
    pub max_edge_age: u32,
    /// Controlled-removal threshold. Values `>= 1.0` switch controlled
    /// removal off and fall back to plain GWR pruning.
    pub removal_threshold: f64,
    pub label_delta_pos: f64,
    pub label_delta_neg: f64,
    #[serde(default)]
    pub metric: MetricKind,
    #[serde(default)]
    pub context_rate: ContextRate,
}

/// Default edge-age limit.
pub const DEFAULT_MAX_EDGE_AGE: u32 = 100;

/// Default context weights `(alpha_0, alpha_1, alpha_2)`.
pub const DEFAULT_CONTEXT_WEIGHTS: [f64; 3] = [0.63, 0.234, 0.086];

impl GwrParams {
    /// Shared values of both profiles; per-profile fields are
    /// overwritten by [`crate::gdm::Profile`].
    pub fn base() -> Self {
        Self {
            insertion_threshold: 0.7,
            habituation_threshold: 0.1,
            context_blend: 0.5,
            context_weights: DEFAULT_CONTEXT_WEIGHTS.to_vec(),
            lr_bmu: 0.3,
            lr_neighbor: 0.003,
            lr_context: 0.001,
            hab_tau_bmu: 0.3,
            hab_tau_neighbor: 0.1,
            hab_kappa: 1.05,
            max_edge_age: DEFAULT_MAX_EDGE_AGE,
            removal_threshold: 0.2,
            label_delta_pos: 1.0,
            label_delta_neg: 0.1,
            metric: MetricKind::Manhattan,
            context_rate: ContextRate::Separate,
        }
    }

    /// Plain GWR: no temporal context, unit input weight.
    pub fn plain(insertion_threshold: f64) -> Self {
        Self {
            insertion_threshold,
            context_weights: vec![1.0],
            ..Self::base()
        }
    }

    pub fn context_count(&self) -> usize {
        self.context_weights.len().saturating_sub(1)
    }

    /// Truncates the context weights to `k` descriptors (keeps `alpha_0`).
    pub fn with_context_count(mut self, k: usize) -> Self {
        self.context_weights.truncate(k + 1);
        self
    }

    /// True when the habituation-gated removal rule is active.
    pub fn controlled_removal(&self) -> bool {
        self.removal_threshold < 1.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(GdmError::Config(what.to_string()));
        let in_open_closed = |v: f64| v > 0.0 && v <= 1.0;
        if !in_open_closed(self.insertion_threshold) {
            return bad("insertion_threshold must lie in (0, 1]");
        }
        if !(self.habituation_threshold > 0.0 && self.habituation_threshold < 1.0) {
            return bad("habituation_threshold must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.context_blend) {
            return bad("context_blend must lie in [0, 1]");
        }
        if self.context_weights.is_empty() {
            return bad("context_weights needs at least alpha_0");
        }
        if self.context_weights.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return bad("context_weights must be non-negative");
        }
        if !(self.context_weights.iter().sum::<f64>() > 0.0) {
            return bad("context_weights must not sum to zero");
        }
        if self.context_weights.windows(2).any(|w| w[1] > w[0]) {
            return bad("context_weights must be non-increasing");
        }
        for (name, v) in [
            ("lr_bmu", self.lr_bmu),
            ("lr_neighbor", self.lr_neighbor),
            ("lr_context", self.lr_context),
        ] {
            if !in_open_closed(v) {
                return Err(GdmError::Config(format!("{name} must lie in (0, 1]")));
            }
        }
        if !(self.hab_tau_bmu > 0.0 && self.hab_tau_neighbor > 0.0) {
            return bad("habituation rates must be positive");
        }
        if !(self.hab_kappa > 1.0) {
            return bad("hab_kappa must exceed 1");
        }
        if self.max_edge_age == 0 {
            return bad("max_edge_age must be positive");
        }
        if !(0.0..=1.0).contains(&self.removal_threshold) {
            return bad("removal_threshold must lie in [0, 1]");
        }
        if !(self.label_delta_pos > 0.0) || !(self.label_delta_neg >= 0.0) {
            return bad("label deltas must be delta_pos > 0 and delta_neg >= 0");
        }
        Ok(())
    }
}
