//! Temporal scene graphs.
//!
//! Each of the three selected snapshots becomes a frame graph with one room
//! node, one node per wall segment, a goal node, and one node per object and
//! human. The robot has no node: every feature is expressed in the robot's
//! frame of reference. Frame graphs are concatenated in frame order and linked
//! by temporal edges that run from each entity to its counterpart in the next
//! frame.

mod batch;
mod features;

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geometry::{distance, polygon_centroid, Point};
use crate::scene::{select_frames, EntityId, FrameTriple, Labels, Scenario, ScenarioError, Snapshot};
use crate::tensor::Tensor;

pub use batch::{batch_graphs, BatchedGraph};
pub use features::{encode_node_features, layout, EDGE_FEATURES, NODE_FEATURES};

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("ENTITY_MISMATCH: entity {id} is a {earlier:?} in frame {frame} but a {later:?} in frame {}", frame + 1)]
    EntityMismatch {
        id: EntityId,
        frame: usize,
        earlier: NodeType,
        later: NodeType,
    },
    #[error("cannot batch an empty list of graphs")]
    EmptyBatch,
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeType {
    Room = 0,
    Wall = 1,
    Goal = 2,
    Object = 3,
    Human = 4,
}

impl NodeType {
    pub const ALL: [NodeType; 5] = [Self::Room, Self::Wall, Self::Goal, Self::Object, Self::Human];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Room => "room",
            Self::Wall => "wall",
            Self::Goal => "goal",
            Self::Object => "object",
            Self::Human => "human",
        }
    }
}

pub const NUM_RELATIONS: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationType {
    SelfLoop = 0,
    Temporal,
    InteractsHh,
    InteractsHo,
    InteractsOh,
    HumanRoom,
    RoomHuman,
    ObjectRoom,
    RoomObject,
    WallRoom,
    RoomWall,
    GoalRoom,
    RoomGoal,
}

impl RelationType {
    pub const ALL: [RelationType; NUM_RELATIONS] = [
        Self::SelfLoop,
        Self::Temporal,
        Self::InteractsHh,
        Self::InteractsHo,
        Self::InteractsOh,
        Self::HumanRoom,
        Self::RoomHuman,
        Self::ObjectRoom,
        Self::RoomObject,
        Self::WallRoom,
        Self::RoomWall,
        Self::GoalRoom,
        Self::RoomGoal,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::SelfLoop => "self",
            Self::Temporal => "temporal",
            Self::InteractsHh => "interacts_hh",
            Self::InteractsHo => "interacts_ho",
            Self::InteractsOh => "interacts_oh",
            Self::HumanRoom => "human_room",
            Self::RoomHuman => "room_human",
            Self::ObjectRoom => "object_room",
            Self::RoomObject => "room_object",
            Self::WallRoom => "wall_room",
            Self::RoomWall => "room_wall",
            Self::GoalRoom => "goal_room",
            Self::RoomGoal => "room_goal",
        }
    }

    /// Endpoint types `(source, target)`; `None` for relations that link a
    /// node to one of the same type (self and temporal edges).
    pub fn endpoints(self) -> Option<(NodeType, NodeType)> {
        use NodeType::*;
        Some(match self {
            Self::SelfLoop | Self::Temporal => return None,
            Self::InteractsHh => (Human, Human),
            Self::InteractsHo => (Human, Object),
            Self::InteractsOh => (Object, Human),
            Self::HumanRoom => (Human, Room),
            Self::RoomHuman => (Room, Human),
            Self::ObjectRoom => (Object, Room),
            Self::RoomObject => (Room, Object),
            Self::WallRoom => (Wall, Room),
            Self::RoomWall => (Room, Wall),
            Self::GoalRoom => (Goal, Room),
            Self::RoomGoal => (Room, Goal),
        })
    }

    fn room_links(t: NodeType) -> (Self, Self) {
        match t {
            NodeType::Human => (Self::HumanRoom, Self::RoomHuman),
            NodeType::Object => (Self::ObjectRoom, Self::RoomObject),
            NodeType::Wall => (Self::WallRoom, Self::RoomWall),
            NodeType::Goal => (Self::GoalRoom, Self::RoomGoal),
            NodeType::Room => unreachable!("the room is not linked to itself"),
        }
    }
}

/// Identity of the scene element behind a node, used to match nodes across frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityKey {
    Room,
    /// Wall segments are matched by their position in the wall list.
    Wall(usize),
    Goal,
    Object(EntityId),
    Human(EntityId),
}

impl EntityKey {
    pub fn node_type(self) -> NodeType {
        match self {
            Self::Room => NodeType::Room,
            Self::Wall(_) => NodeType::Wall,
            Self::Goal => NodeType::Goal,
            Self::Object(_) => NodeType::Object,
            Self::Human(_) => NodeType::Human,
        }
    }

    fn tracked_id(self) -> Option<EntityId> {
        match self {
            Self::Object(id) | Self::Human(id) => Some(id),
            _ => None,
        }
    }
}

impl std::fmt::Display for EntityKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Room => write!(f, "room"),
            Self::Wall(i) => write!(f, "wall:{i}"),
            Self::Goal => write!(f, "goal"),
            Self::Object(id) => write!(f, "object:{id}"),
            Self::Human(id) => write!(f, "human:{id}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub relation: RelationType,
    /// Distance between the linked entities in decametres (0 for self and temporal edges).
    pub distance: f64,
}

/// A single snapshot's graph before temporal merging.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGraph {
    pub frame_index: usize,
    pub entities: Vec<EntityKey>,
    pub features: Vec<[f64; NODE_FEATURES]>,
    pub edges: Vec<Edge>,
}

impl FrameGraph {
    pub fn num_nodes(&self) -> usize {
        self.entities.len()
    }
}

/// Entities of a snapshot in canonical node order: room, walls, goal,
/// objects by id, humans by id.
fn entities_of(snap: &Snapshot) -> Vec<(EntityKey, Point)> {
    let mut out = vec![(EntityKey::Room, polygon_centroid(&snap.room_polygon()))];
    out.extend(
        snap.walls
            .iter()
            .enumerate()
            .map(|(i, w)| (EntityKey::Wall(i), w.centre())),
    );
    out.push((EntityKey::Goal, snap.goal.position()));
    let mut objects: Vec<_> = snap.objects.iter().map(|o| (o.id, o.pose.position())).collect();
    objects.sort_by_key(|o| o.0);
    out.extend(objects.into_iter().map(|(id, p)| (EntityKey::Object(id), p)));
    let mut humans: Vec<_> = snap.humans.iter().map(|h| (h.id, h.pose.position())).collect();
    humans.sort_by_key(|h| h.0);
    out.extend(humans.into_iter().map(|(id, p)| (EntityKey::Human(id), p)));
    out
}

pub fn build_frame_graph(snap: &Snapshot, frame_index: usize) -> FrameGraph {
    assert!(frame_index < 3, "frame index must be 0, 1 or 2");
    let entities = entities_of(snap);
    let keys: Vec<EntityKey> = entities.iter().map(|e| e.0).collect();
    let features = keys
        .iter()
        .map(|&k| {
            let mut f = encode_node_features(snap, k).expect("entity taken from the snapshot");
            f[layout::FRAME + frame_index] = 1.0;
            f
        })
        .collect();

    let mut edges: Vec<Edge> = (0..keys.len())
        .map(|i| Edge {
            source: i,
            target: i,
            relation: RelationType::SelfLoop,
            distance: 0.0,
        })
        .collect();
    let room_pos = entities[0].1;
    for (i, &(key, pos)) in entities.iter().enumerate().skip(1) {
        let (to_room, from_room) = RelationType::room_links(key.node_type());
        let d = distance(pos, room_pos) / 10.0;
        edges.push(Edge {
            source: i,
            target: 0,
            relation: to_room,
            distance: d,
        });
        edges.push(Edge {
            source: 0,
            target: i,
            relation: from_room,
            distance: d,
        });
    }

    let index: HashMap<EntityKey, usize> = keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let lookup = |id: EntityId| {
        index
            .get(&EntityKey::Human(id))
            .or_else(|| index.get(&EntityKey::Object(id)))
            .copied()
    };
    let mut seen = BTreeSet::new();
    for it in &snap.interactions {
        let (Some(&h), Some(t)) = (index.get(&EntityKey::Human(it.source)), lookup(it.target)) else {
            continue;
        };
        if h == t || !seen.insert((h.min(t), h.max(t))) {
            continue;
        }
        let d = distance(entities[h].1, entities[t].1) / 10.0;
        let (forward, backward) = match keys[t] {
            EntityKey::Human(_) => (RelationType::InteractsHh, RelationType::InteractsHh),
            _ => (RelationType::InteractsHo, RelationType::InteractsOh),
        };
        edges.push(Edge {
            source: h,
            target: t,
            relation: forward,
            distance: d,
        });
        edges.push(Edge {
            source: t,
            target: h,
            relation: backward,
            distance: d,
        });
    }

    FrameGraph {
        frame_index,
        entities: keys,
        features,
        edges,
    }
}

/// Merged three-frame graph for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialGraph {
    pub node_types: Vec<NodeType>,
    pub frame_index: Vec<usize>,
    pub entities: Vec<EntityKey>,
    pub edges: Vec<Edge>,
    /// `N x 37` node feature matrix.
    pub node_features: Tensor,
    /// Q1 and Q2 on the unit interval.
    pub labels: [f64; 2],
    /// Room node of each frame; the last one is the readout node.
    pub room_nodes: [usize; 3],
}

pub fn merge_temporal(frames: [FrameGraph; 3], labels: [f64; 2]) -> Result<SocialGraph, GraphError> {
    for (f, pair) in frames.windows(2).enumerate() {
        let earlier: HashMap<EntityId, NodeType> = pair[0]
            .entities
            .iter()
            .filter_map(|k| k.tracked_id().map(|id| (id, k.node_type())))
            .collect();
        for k in &pair[1].entities {
            if let Some(id) = k.tracked_id() {
                if let Some(&t) = earlier.get(&id) {
                    if t != k.node_type() {
                        return Err(GraphError::EntityMismatch {
                            id,
                            frame: f,
                            earlier: t,
                            later: k.node_type(),
                        });
                    }
                }
            }
        }
    }

    let mut node_types = Vec::new();
    let mut frame_index = Vec::new();
    let mut entities = Vec::new();
    let mut edges = Vec::new();
    let mut data = Vec::new();
    let mut room_nodes = [0; 3];
    let mut offsets = [0; 3];
    for (f, frame) in frames.iter().enumerate() {
        let offset = entities.len();
        offsets[f] = offset;
        room_nodes[f] = offset;
        for (k, feats) in frame.entities.iter().zip(&frame.features) {
            node_types.push(k.node_type());
            frame_index.push(f);
            entities.push(*k);
            let mut row = *feats;
            row[layout::FRAME..layout::FRAME + 3].fill(0.0);
            row[layout::FRAME + f] = 1.0;
            data.extend_from_slice(&row);
        }
        edges.extend(frame.edges.iter().map(|e| Edge {
            source: e.source + offset,
            target: e.target + offset,
            ..*e
        }));
    }
    for f in 0..2 {
        let next: HashMap<EntityKey, usize> = frames[f + 1]
            .entities
            .iter()
            .enumerate()
            .map(|(i, &k)| (k, i))
            .collect();
        for (i, k) in frames[f].entities.iter().enumerate() {
            if let Some(&j) = next.get(k) {
                edges.push(Edge {
                    source: offsets[f] + i,
                    target: offsets[f + 1] + j,
                    relation: RelationType::Temporal,
                    distance: 0.0,
                });
            }
        }
    }
    let n = entities.len();
    Ok(SocialGraph {
        node_types,
        frame_index,
        entities,
        edges,
        node_features: Tensor::new(n, NODE_FEATURES, data).expect("rows have fixed width"),
        labels,
        room_nodes,
    })
}

impl SocialGraph {
    pub fn from_triple(triple: &FrameTriple, labels: Labels) -> Result<Self, GraphError> {
        let [a, b, c] = &triple.frames;
        merge_temporal(
            [build_frame_graph(a, 0), build_frame_graph(b, 1), build_frame_graph(c, 2)],
            labels.unit(),
        )
    }

    /// Selects three frames `spacing_s` apart and builds the merged graph.
    pub fn from_scenario(s: &Scenario, spacing_s: f64) -> Result<Self, GraphError> {
        Self::from_triple(&select_frames(s, spacing_s)?, s.labels)
    }

    pub fn num_nodes(&self) -> usize {
        self.node_types.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn readout_node(&self) -> usize {
        self.room_nodes[2]
    }

    pub fn relation_ids(&self) -> Vec<usize> {
        self.edges.iter().map(|e| e.relation.index()).collect()
    }

    /// `E x 14`: relation one-hot followed by the distance in decametres.
    pub fn edge_features(&self) -> Tensor {
        let mut t = Tensor::zeros(self.edges.len(), EDGE_FEATURES);
        for (i, e) in self.edges.iter().enumerate() {
            let row = t.row_mut(i);
            row[e.relation.index()] = 1.0;
            row[NUM_RELATIONS] = e.distance;
        }
        t
    }

    /// Line-based text dump, one node or edge per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        writeln!(out, "graph nodes={} edges={} labels={} {}", self.num_nodes(), self.num_edges(), self.labels[0], self.labels[1]).unwrap();
        for i in 0..self.num_nodes() {
            write!(out, "node {i} {} f{} {}", self.node_types[i].name(), self.frame_index[i], self.entities[i]).unwrap();
            for v in self.node_features.row(i) {
                write!(out, " {v}").unwrap();
            }
            out.push('\n');
        }
        for e in &self.edges {
            writeln!(out, "edge {} {} {} {}", e.source, e.target, e.relation.name(), e.distance).unwrap();
        }
        out
    }
}
