//! Recorded navigation scenarios: types, JSON I/O, validation, augmentation
//! and frame selection.
//!
//! Poses are stored in the world frame. Conversion to the robot frame happens
//! when a snapshot is encoded as a graph.

mod augment;
mod convert;
mod frames;
mod generate;
mod io;
mod validate;

use serde::{Deserialize, Serialize};

use crate::geometry::Point;

pub use augment::{mirror, rotate_half_turn, Augmentation};
pub use convert::convert_legacy;
pub use frames::{select_frames, FrameTriple};
pub use generate::{generate_random_scenario, synthetic_labels, RoomKind};
pub use io::{parse_scenario, read_scenario, to_json, write_scenario, SCHEMA_VERSION};
pub use validate::{validate_scenario, Violation, ViolationCode};

pub type EntityId = i64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn position(&self) -> Point {
        [self.x, self.y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Velocity {
    pub vx: f64,
    pub vy: f64,
    pub vtheta: f64,
}

/// Velocity command sent to the robot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Command {
    /// Advance speed along the robot's forward axis, m/s.
    pub adv: f64,
    /// Rotation speed, rad/s.
    pub rot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose,
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Human {
    pub id: EntityId,
    pub pose: Pose,
    #[serde(default)]
    pub velocity: Velocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectEntity {
    pub id: EntityId,
    pub pose: Pose,
    #[serde(default)]
    pub velocity: Velocity,
    pub shape: Shape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XY {
    pub x: f64,
    pub y: f64,
}

impl XY {
    pub fn point(&self) -> Point {
        [self.x, self.y]
    }
}

impl From<Point> for XY {
    fn from(p: Point) -> Self {
        XY { x: p[0], y: p[1] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallSegment {
    pub start: XY,
    pub end: XY,
}

impl WallSegment {
    pub fn centre(&self) -> Point {
        crate::geometry::midpoint(self.start.point(), self.end.point())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalPoint {
    pub x: f64,
    pub y: f64,
}

impl GoalPoint {
    pub fn position(&self) -> Point {
        [self.x, self.y]
    }
}

/// A human interacting with another human or with an object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub source: EntityId,
    pub target: EntityId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub timestamp: f64,
    pub robot: RobotState,
    #[serde(default)]
    pub humans: Vec<Human>,
    #[serde(default)]
    pub objects: Vec<ObjectEntity>,
    pub walls: Vec<WallSegment>,
    pub goal: GoalPoint,
    #[serde(default)]
    pub interactions: Vec<Interaction>,
}

impl Snapshot {
    /// Wall polygon vertices (segment start points in order).
    pub fn room_polygon(&self) -> Vec<Point> {
        self.walls.iter().map(|w| w.start.point()).collect()
    }

    pub fn human(&self, id: EntityId) -> Option<&Human> {
        self.humans.iter().find(|h| h.id == id)
    }

    pub fn object(&self, id: EntityId) -> Option<&ObjectEntity> {
        self.objects.iter().find(|o| o.id == id)
    }
}

/// Scores on the 0..=100 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub q1: f64,
    pub q2: f64,
}

impl Labels {
    /// Labels mapped to the unit interval, as used for training targets.
    pub fn unit(&self) -> [f64; 2] {
        [self.q1 / 100.0, self.q2 / 100.0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub snapshots: Vec<Snapshot>,
    pub labels: Labels,
}

impl Scenario {
    pub fn duration_s(&self) -> f64 {
        match (self.snapshots.first(), self.snapshots.last()) {
            (Some(a), Some(b)) => b.timestamp - a.timestamp,
            _ => 0.0,
        }
    }

    pub fn map_snapshots(&self, id: String, f: impl Fn(&Snapshot) -> Snapshot) -> Scenario {
        Scenario {
            id,
            snapshots: self.snapshots.iter().map(f).collect(),
            labels: self.labels,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("unsupported schema version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error("invalid scenario: {}", summarize(.0))]
    Semantic(Vec<Violation>),
    #[error("scenario spans {duration:.3} s but frame selection needs {required:.3} s (TOO_SHORT)")]
    TooShort { duration: f64, required: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn summarize(violations: &[Violation]) -> String {
    let shown: Vec<String> = violations.iter().take(5).map(|v| v.to_string()).collect();
    let mut s = shown.join("; ");
    if violations.len() > 5 {
        s.push_str(&format!("; ... ({} total)", violations.len()));
    }
    s
}
