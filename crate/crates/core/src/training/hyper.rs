use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainingError;
use crate::gnn::{BlockKind, ModelConfig};
use crate::graph::{EDGE_FEATURES, NODE_FEATURES, NUM_RELATIONS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    pub batch_size: usize,
    pub hidden_units: usize,
    #[serde(default = "default_heads")]
    pub attention_heads: usize,
    #[serde(default = "default_bases")]
    pub num_bases: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub weight_decay: f64,
    pub layers: usize,
    #[serde(default)]
    pub dropout: f64,
    pub alpha: f64,
    pub block_kind: BlockKind,
    #[serde(default)]
    pub rng_seed: u64,
    /// Explicit layer widths; overrides the taper from `hidden_units`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub widths: Option<Vec<usize>>,
    #[serde(default = "default_final_units")]
    pub final_units: usize,
}

fn default_max_epochs() -> usize {
    1000
}

fn default_patience() -> usize {
    4
}

fn default_heads() -> usize {
    4
}

fn default_bases() -> usize {
    8
}

fn default_final_units() -> usize {
    3
}

/// Linear taper from `first` to `last` over `layers` widths.
pub fn tapered_widths(first: usize, last: usize, layers: usize) -> Vec<usize> {
    match layers {
        0 => vec![],
        1 => vec![last],
        _ => (0..layers)
            .map(|i| {
                let t = i as f64 / (layers - 1) as f64;
                (first as f64 + (last as f64 - first as f64) * t).round() as usize
            })
            .collect(),
    }
}

impl HyperParams {
    /// Best configuration reported for the dataset: six MPNN blocks with
    /// 40, 30, 21, 12, 3 and 3 units, batch 57, learning rate 2.5e-4.
    pub fn reference() -> Self {
        Self {
            max_epochs: 1000,
            patience: 4,
            batch_size: 57,
            hidden_units: 40,
            attention_heads: default_heads(),
            num_bases: default_bases(),
            learning_rate: 2.5e-4,
            weight_decay: 1e-6,
            layers: 6,
            dropout: 0.0,
            alpha: 0.2,
            block_kind: BlockKind::Mpnn,
            rng_seed: 0,
            widths: Some(vec![40, 30, 21, 12, 3, 3]),
            final_units: 3,
        }
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.widths
            .clone()
            .unwrap_or_else(|| tapered_widths(self.hidden_units, self.final_units, self.layers))
    }

    pub fn validate(&self) -> Result<(), TrainingError> {
        let bad = |m: &str| Err(TrainingError::InvalidHyperParams(m.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        if let Some(w) = &self.widths {
            if w.len() != self.layers {
                return bad("widths must list one entry per layer");
            }
        }
        self.model_config()
            .validate()
            .map_err(|e| TrainingError::InvalidHyperParams(e.to_string()))
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            kind: self.block_kind,
            input_dim: NODE_FEATURES,
            widths: self.hidden_widths(),
            heads: self.attention_heads,
            bases: self.num_bases,
            alpha: self.alpha,
            dropout: self.dropout,
            num_relations: NUM_RELATIONS,
            edge_dim: EDGE_FEATURES,
        }
    }
}

/// Draws a configuration from the search ranges. Integers are uniform over
/// inclusive ranges, reals uniform; identical seeds give identical results.
pub fn sample_hyperparams(rng_seed: u64) -> HyperParams {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let block_kind = BlockKind::ALL[rng.random_range(0..BlockKind::ALL.len())];
    HyperParams {
        max_epochs: 1000,
        patience: 4,
        batch_size: rng.random_range(25..=70),
        hidden_units: rng.random_range(20..=90),
        attention_heads: rng.random_range(3..=10),
        num_bases: rng.random_range(4..=24),
        learning_rate: rng.random_range(1e-4..=5e-4),
        weight_decay: rng.random_range(0.0..=1e-6),
        layers: rng.random_range(3..=9),
        dropout: rng.random_range(0.0..=1e-6),
        alpha: rng.random_range(0.1..=0.3),
        block_kind,
        rng_seed,
        widths: None,
        final_units: 3,
    }
}
