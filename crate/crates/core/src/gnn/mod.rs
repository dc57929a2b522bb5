//! Message-passing blocks and the stacked scoring model.
//!
//! A [`GnnStack`] applies a homogeneous sequence of layers to a
//! [`BatchedGraph`], reads the last-frame room node of every member graph and
//! maps it through a linear head and a logistic function to the two scores.

mod layers;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{BatchedGraph, EDGE_FEATURES, NODE_FEATURES, NUM_RELATIONS};
use crate::tensor::{Activation, Linear, ParamStore, Tape, Tensor, TensorError, Var};

pub use layers::{GatLayer, GcnLayer, Layer, MpnnLayer, RgcnLayer};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GnnError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("UNKNOWN_RELATION: edge relation {relation} but the layer has {num_relations}")]
    UnknownRelation { relation: usize, num_relations: usize },
    #[error("invalid model configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Gcn,
    Rgcn,
    Gat,
    Mpnn,
}

impl BlockKind {
    pub const ALL: [BlockKind; 4] = [Self::Gcn, Self::Rgcn, Self::Gat, Self::Mpnn];

    pub fn name(self) -> &'static str {
        match self {
            Self::Gcn => "gcn",
            Self::Rgcn => "rgcn",
            Self::Gat => "gat",
            Self::Mpnn => "mpnn",
        }
    }
}

impl std::str::FromStr for BlockKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s) || (s.eq_ignore_ascii_case("r-gcn") && *k == Self::Rgcn))
            .ok_or_else(|| format!("unknown block kind `{s}` (expected gcn, rgcn, gat or mpnn)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: BlockKind,
    pub input_dim: usize,
    /// Output width of each layer. For GAT this is the per-head width.
    pub widths: Vec<usize>,
    #[serde(default = "default_heads")]
    pub heads: usize,
    #[serde(default = "default_bases")]
    pub bases: usize,
    /// Negative slope of the leaky ReLU used after every layer and in GAT scores.
    pub alpha: f64,
    #[serde(default)]
    pub dropout: f64,
    #[serde(default = "default_relations")]
    pub num_relations: usize,
    #[serde(default = "default_edge_dim")]
    pub edge_dim: usize,
}

fn default_heads() -> usize {
    1
}

fn default_bases() -> usize {
    1
}

fn default_relations() -> usize {
    NUM_RELATIONS
}

fn default_edge_dim() -> usize {
    EDGE_FEATURES
}

impl ModelConfig {
    /// The six-block MPNN with 40, 30, 21, 12, 3 and 3 units.
    pub fn reference() -> Self {
        Self {
            kind: BlockKind::Mpnn,
            input_dim: NODE_FEATURES,
            widths: vec![40, 30, 21, 12, 3, 3],
            heads: 1,
            bases: 1,
            alpha: 0.2,
            dropout: 0.0,
            num_relations: NUM_RELATIONS,
            edge_dim: EDGE_FEATURES,
        }
    }

    pub fn validate(&self) -> Result<(), GnnError> {
        let bad = |m: &str| Err(GnnError::Config(m.to_string()));
        if self.widths.is_empty() || self.widths.contains(&0) {
            return bad("widths must be a non-empty list of positive sizes");
        }
        if self.input_dim == 0 {
            return bad("input_dim must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return bad("alpha must be a finite non-negative slope");
        }
        match self.kind {
            BlockKind::Gat if self.heads == 0 => bad("GAT needs at least one head"),
            BlockKind::Rgcn if self.bases == 0 || self.num_relations == 0 => {
                bad("R-GCN needs at least one basis and one relation")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnStack {
    pub config: ModelConfig,
    pub layers: Vec<Layer>,
    pub head: Linear,
    pub params: ParamStore,
}

impl GnnStack {
    /// Builds the model with Glorot-uniform weights drawn from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, GnnError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let act = Activation::LeakyRelu(config.alpha);
        let mut layers = Vec::with_capacity(config.widths.len());
        let mut width = config.input_dim;
        for (i, &w) in config.widths.iter().enumerate() {
            let name = format!("layer{i}");
            let last = i + 1 == config.widths.len();
            let layer = match config.kind {
                BlockKind::Gcn => Layer::Gcn(GcnLayer::new(&mut params, &name, width, w, act, &mut rng)?),
                BlockKind::Rgcn => Layer::Rgcn(RgcnLayer::new(
                    &mut params,
                    &name,
                    width,
                    w,
                    config.num_relations,
                    config.bases,
                    act,
                    &mut rng,
                )?),
                BlockKind::Gat => Layer::Gat(GatLayer::new(
                    &mut params,
                    &name,
                    width,
                    w,
                    config.heads,
                    !last,
                    config.alpha,
                    act,
                    &mut rng,
                )?),
                BlockKind::Mpnn => {
                    Layer::Mpnn(MpnnLayer::new(&mut params, &name, width, config.edge_dim, w, act, &mut rng)?)
                }
            };
            width = layer.out_dim();
            layers.push(layer);
        }
        let head = Linear::new(&mut params, "head", width, 2, &mut rng)?;
        Ok(Self {
            config,
            layers,
            head,
            params,
        })
    }

    /// Records the forward pass and returns the `B x 2` predictions.
    /// Passing an RNG enables inverted dropout between layers.
    pub fn forward(
        &self,
        tape: &mut Tape,
        batch: &BatchedGraph,
        mut dropout: Option<&mut dyn RngCore>,
    ) -> Result<Var, GnnError> {
        if batch.node_features.cols() != self.config.input_dim {
            return Err(TensorError::ShapeMismatch {
                op: "model_input",
                left: batch.node_features.shape(),
                right: (batch.num_nodes, self.config.input_dim),
            }
            .into());
        }
        let mut h = tape.constant(batch.node_features.clone())?;
        let edges = match self.config.kind {
            BlockKind::Mpnn => Some(tape.constant(batch.edge_features.clone())?),
            _ => None,
        };
        let p = self.config.dropout;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, &self.params, batch, h, edges)?;
            if let (Some(rng), true) = (dropout.as_deref_mut(), p > 0.0 && i + 1 < self.layers.len()) {
                let (r, c) = tape.value(h).shape();
                let keep = 1.0 / (1.0 - p);
                let mask = (0..r * c)
                    .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
                    .collect();
                h = tape.mul_const(h, Tensor::new(r, c, mask)?)?;
            }
        }
        let rooms = tape.gather_rows(h, &batch.readout)?;
        let logits = self.head.forward(tape, &self.params, rooms)?;
        Ok(tape.sigmoid(logits)?)
    }

    pub fn predict(&self, batch: &BatchedGraph) -> Result<Tensor, GnnError> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, batch, None)?;
        Ok(tape.value(out).clone())
    }

    /// Mean squared error against `batch.labels` and its gradient for every parameter.
    pub fn loss_and_gradients(
        &self,
        batch: &BatchedGraph,
        dropout: Option<&mut dyn RngCore>,
    ) -> Result<(f64, Vec<Tensor>), GnnError> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, batch, dropout)?;
        let loss = tape.mse(out, &batch.labels)?;
        let value = tape.value(loss).get(0, 0);
        let grads = tape.backward(loss)?;
        Ok((value, grads.for_store(&self.params)))
    }

    /// Sets the readout head to zero so every prediction is exactly 0.5.
    pub fn zero_head(&mut self) {
        for id in [self.head.weight, self.head.bias] {
            self.params.get_mut(id).data_mut().fill(0.0);
        }
    }
}
