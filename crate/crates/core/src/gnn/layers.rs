use rand::Rng;

use super::GnnError;
use crate::graph::BatchedGraph;
use crate::tensor::{glorot_uniform, Activation, Linear, Mlp, ParamId, ParamStore, Tape, Tensor, Var};

/// `v_i' = act(W [e_i, v_i] + b)` where `e_i` sums the features of the
/// sources of all edges entering `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnLayer {
    pub phi: Linear,
    pub activation: Activation,
}

impl GcnLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Result<Self, GnnError> {
        Ok(Self {
            phi: Linear::new(store, &format!("{name}.phi"), 2 * in_dim, out_dim, rng)?,
            activation,
        })
    }

    pub fn out_dim(&self) -> usize {
        self.phi.out_dim
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, g: &BatchedGraph, h: Var) -> Result<Var, GnnError> {
        let messages = tape.gather_rows(h, &g.sources)?;
        let agg = tape.segment_sum(messages, &g.targets, g.num_nodes)?;
        let cat = tape.concat_cols(agg, h)?;
        let out = self.phi.forward(tape, store, cat)?;
        Ok(tape.activation(out, self.activation)?)
    }
}

/// Relational convolution with basis decomposition `W_r = sum_b a[r, b] V_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgcnLayer {
    /// `in x (B * out)`: the bases side by side.
    pub bases: ParamId,
    /// `R x B` mixing coefficients.
    pub coefficients: ParamId,
    pub self_weight: ParamId,
    pub bias: ParamId,
    pub num_relations: usize,
    pub num_bases: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl RgcnLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        num_relations: usize,
        num_bases: usize,
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Result<Self, GnnError> {
        if num_bases == 0 || num_relations == 0 {
            return Err(GnnError::Config("R-GCN needs at least one relation and one basis".into()));
        }
        let mut bases = Tensor::zeros(in_dim, num_bases * out_dim);
        for b in 0..num_bases {
            let v = glorot_uniform(rng, in_dim, out_dim);
            for r in 0..in_dim {
                bases.row_mut(r)[b * out_dim..(b + 1) * out_dim].copy_from_slice(v.row(r));
            }
        }
        let coefficients = glorot_uniform(rng, num_relations, num_bases);
        Ok(Self {
            bases: store.add(format!("{name}.bases"), bases)?,
            coefficients: store.add(format!("{name}.coefficients"), coefficients)?,
            self_weight: store.add(format!("{name}.self_weight"), glorot_uniform(rng, in_dim, out_dim))?,
            bias: store.add(format!("{name}.bias"), Tensor::zeros(1, out_dim))?,
            num_relations,
            num_bases,
            out_dim,
            activation,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, g: &BatchedGraph, h: Var) -> Result<Var, GnnError> {
        if let Some(&r) = g.relations.iter().find(|&&r| r >= self.num_relations) {
            return Err(GnnError::UnknownRelation {
                relation: r,
                num_relations: self.num_relations,
            });
        }
        let bases = tape.param(store, self.bases)?;
        let coefficients = tape.param(store, self.coefficients)?;
        let self_weight = tape.param(store, self.self_weight)?;
        let bias = tape.param(store, self.bias)?;

        let projected = tape.matmul(h, bases)?;
        let per_edge = tape.gather_rows(projected, &g.sources)?;
        let mix = tape.gather_rows(coefficients, &g.relations)?;
        let messages = tape.group_weighted_sum(per_edge, mix)?;
        let agg = tape.segment_sum(messages, &g.targets, g.num_nodes)?;
        let own = tape.matmul(h, self_weight)?;
        let sum = tape.add(agg, own)?;
        let out = tape.add_row(sum, bias)?;
        Ok(tape.activation(out, self.activation)?)
    }
}

/// Multi-head graph attention. Hidden layers concatenate the heads, the
/// final layer averages them.
#[derive(Debug, Clone, PartialEq)]
pub struct GatLayer {
    /// `in x (H * d)`
    pub weight: ParamId,
    /// `1 x (H * d)` attention vector halves for source and receiver.
    pub attn_source: ParamId,
    pub attn_target: ParamId,
    pub bias: ParamId,
    pub heads: usize,
    pub head_dim: usize,
    pub concat: bool,
    pub alpha: f64,
    pub activation: Activation,
}

impl GatLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        head_dim: usize,
        heads: usize,
        concat: bool,
        alpha: f64,
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Result<Self, GnnError> {
        if heads == 0 {
            return Err(GnnError::Config("GAT needs at least one head".into()));
        }
        let width = heads * head_dim;
        let out = if concat { width } else { head_dim };
        Ok(Self {
            weight: store.add(format!("{name}.weight"), glorot_uniform(rng, in_dim, width))?,
            attn_source: store.add(format!("{name}.attn_source"), glorot_uniform(rng, 1, width))?,
            attn_target: store.add(format!("{name}.attn_target"), glorot_uniform(rng, 1, width))?,
            bias: store.add(format!("{name}.bias"), Tensor::zeros(1, out))?,
            heads,
            head_dim,
            concat,
            alpha,
            activation,
        })
    }

    pub fn out_dim(&self) -> usize {
        if self.concat {
            self.heads * self.head_dim
        } else {
            self.head_dim
        }
    }

    /// Returns the layer output and the `E x H` attention weights.
    pub fn forward_with_attention(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        g: &BatchedGraph,
        h: Var,
    ) -> Result<(Var, Var), GnnError> {
        let w = tape.param(store, self.weight)?;
        let a_src = tape.param(store, self.attn_source)?;
        let a_dst = tape.param(store, self.attn_target)?;
        let bias = tape.param(store, self.bias)?;

        let z = tape.matmul(h, w)?;
        let left = tape.head_dot(z, a_src, self.heads)?;
        let right = tape.head_dot(z, a_dst, self.heads)?;
        let left = tape.gather_rows(left, &g.sources)?;
        let right = tape.gather_rows(right, &g.targets)?;
        let raw = tape.add(left, right)?;
        let scores = tape.leaky_relu(raw, self.alpha)?;
        let attention = tape.segment_softmax(scores, &g.targets, g.num_nodes)?;
        let z_src = tape.gather_rows(z, &g.sources)?;
        let weighted = tape.mul_groups(z_src, attention)?;
        let mut agg = tape.segment_sum(weighted, &g.targets, g.num_nodes)?;
        if !self.concat {
            let mean = tape.constant(Tensor::filled(g.num_nodes, self.heads, 1.0 / self.heads as f64))?;
            agg = tape.group_weighted_sum(agg, mean)?;
        }
        let out = tape.add_row(agg, bias)?;
        Ok((tape.activation(out, self.activation)?, attention))
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, g: &BatchedGraph, h: Var) -> Result<Var, GnnError> {
        Ok(self.forward_with_attention(tape, store, g, h)?.0)
    }
}

/// Message passing with edge features: `m_k = MLP([v_src, e_k])`,
/// `v_i' = MLP([sum m_k, v_i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct MpnnLayer {
    pub message: Mlp,
    pub update: Mlp,
}

impl MpnnLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        edge_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Result<Self, GnnError> {
        Ok(Self {
            message: Mlp::new(store, &format!("{name}.message"), &[in_dim + edge_dim, out_dim], activation, rng)?,
            update: Mlp::new(store, &format!("{name}.update"), &[out_dim + in_dim, out_dim], activation, rng)?,
        })
    }

    pub fn out_dim(&self) -> usize {
        self.update.out_dim()
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        g: &BatchedGraph,
        h: Var,
        edge_features: Var,
    ) -> Result<Var, GnnError> {
        let src = tape.gather_rows(h, &g.sources)?;
        let input = tape.concat_cols(src, edge_features)?;
        let messages = self.message.forward(tape, store, input)?;
        let agg = tape.segment_sum(messages, &g.targets, g.num_nodes)?;
        let cat = tape.concat_cols(agg, h)?;
        Ok(self.update.forward(tape, store, cat)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Gcn(GcnLayer),
    Rgcn(RgcnLayer),
    Gat(GatLayer),
    Mpnn(MpnnLayer),
}

impl Layer {
    pub fn out_dim(&self) -> usize {
        match self {
            Self::Gcn(l) => l.out_dim(),
            Self::Rgcn(l) => l.out_dim,
            Self::Gat(l) => l.out_dim(),
            Self::Mpnn(l) => l.out_dim(),
        }
    }

    /// `edge_features` is only read by MPNN layers.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        g: &BatchedGraph,
        h: Var,
        edge_features: Option<Var>,
    ) -> Result<Var, GnnError> {
        match self {
            Self::Gcn(l) => l.forward(tape, store, g, h),
            Self::Rgcn(l) => l.forward(tape, store, g, h),
            Self::Gat(l) => l.forward(tape, store, g, h),
            Self::Mpnn(l) => {
                let e = edge_features.ok_or_else(|| GnnError::Config("MPNN layer needs edge features".into()))?;
                l.forward(tape, store, g, h, e)
            }
        }
    }
}
