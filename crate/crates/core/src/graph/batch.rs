use std::sync::Arc;

use crate::tensor::Tensor;

use super::{GraphError, SocialGraph, EDGE_FEATURES, NODE_FEATURES};

/// Disjoint union of several graphs, ready for a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchedGraph {
    pub num_nodes: usize,
    pub sources: Arc<[usize]>,
    pub targets: Arc<[usize]>,
    pub relations: Arc<[usize]>,
    pub node_features: Tensor,
    pub edge_features: Tensor,
    /// One row index per member graph: its last-frame room node.
    pub readout: Arc<[usize]>,
    /// `B x 2` targets.
    pub labels: Tensor,
    /// First node of each member graph.
    pub node_offsets: Vec<usize>,
}

impl BatchedGraph {
    pub fn num_graphs(&self) -> usize {
        self.readout.len()
    }

    pub fn num_edges(&self) -> usize {
        self.sources.len()
    }
}

pub fn batch_graphs(graphs: &[&SocialGraph]) -> Result<BatchedGraph, GraphError> {
    if graphs.is_empty() {
        return Err(GraphError::EmptyBatch);
    }
    let total_nodes: usize = graphs.iter().map(|g| g.num_nodes()).sum();
    let total_edges: usize = graphs.iter().map(|g| g.num_edges()).sum();
    let mut sources = Vec::with_capacity(total_edges);
    let mut targets = Vec::with_capacity(total_edges);
    let mut relations = Vec::with_capacity(total_edges);
    let mut nodes = Vec::with_capacity(total_nodes * NODE_FEATURES);
    let mut edge_data = Vec::with_capacity(total_edges * EDGE_FEATURES);
    let mut readout = Vec::with_capacity(graphs.len());
    let mut labels = Vec::with_capacity(graphs.len() * 2);
    let mut node_offsets = Vec::with_capacity(graphs.len());
    let mut offset = 0;
    for g in graphs {
        node_offsets.push(offset);
        for e in &g.edges {
            sources.push(e.source + offset);
            targets.push(e.target + offset);
            relations.push(e.relation.index());
        }
        nodes.extend_from_slice(g.node_features.data());
        edge_data.extend_from_slice(g.edge_features().data());
        readout.push(g.readout_node() + offset);
        labels.extend_from_slice(&g.labels);
        offset += g.num_nodes();
    }
    let b = graphs.len();
    Ok(BatchedGraph {
        num_nodes: total_nodes,
        sources: sources.into(),
        targets: targets.into(),
        relations: relations.into(),
        node_features: Tensor::new(total_nodes, NODE_FEATURES, nodes).expect("row widths"),
        edge_features: Tensor::new(total_edges, EDGE_FEATURES, edge_data).expect("row widths"),
        readout: readout.into(),
        labels: Tensor::new(b, 2, labels).expect("two labels per graph"),
        node_offsets,
    })
}
