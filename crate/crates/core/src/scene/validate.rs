use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;

use super::{Scenario, Snapshot};

const CLOSURE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    TooFewSnapshots,
    TimestampsNotIncreasing,
    LabelOutOfRange,
    NonFinite,
    AngleOutOfRange,
    TooFewWalls,
    DegenerateWall,
    WallsNotClosed,
    DuplicateId,
    NonPositiveShape,
    DanglingInteraction,
    InteractionSourceNotHuman,
    SelfInteraction,
}

impl ViolationCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::TooFewSnapshots => "TOO_FEW_SNAPSHOTS",
            Self::TimestampsNotIncreasing => "TIMESTAMPS_NOT_INCREASING",
            Self::LabelOutOfRange => "LABEL_OUT_OF_RANGE",
            Self::NonFinite => "NON_FINITE",
            Self::AngleOutOfRange => "ANGLE_OUT_OF_RANGE",
            Self::TooFewWalls => "TOO_FEW_WALLS",
            Self::DegenerateWall => "DEGENERATE_WALL",
            Self::WallsNotClosed => "WALLS_NOT_CLOSED",
            Self::DuplicateId => "DUPLICATE_ID",
            Self::NonPositiveShape => "NON_POSITIVE_SHAPE",
            Self::DanglingInteraction => "DANGLING_INTERACTION",
            Self::InteractionSourceNotHuman => "INTERACTION_SOURCE_NOT_HUMAN",
            Self::SelfInteraction => "SELF_INTERACTION",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.code, self.path, self.message)
    }
}

struct Report(Vec<Violation>);

impl Report {
    fn push(&mut self, code: ViolationCode, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation {
            code,
            path: path.into(),
            message: message.into(),
        });
    }

    fn finite(&mut self, path: &str, values: &[f64]) -> bool {
        if values.iter().all(|v| v.is_finite()) {
            true
        } else {
            self.push(ViolationCode::NonFinite, path, "non-finite coordinate");
            false
        }
    }

    fn angle(&mut self, path: &str, theta: f64) {
        if theta.is_finite() && !(theta > -PI && theta <= PI) {
            self.push(
                ViolationCode::AngleOutOfRange,
                path,
                format!("theta {theta} outside (-pi, pi]"),
            );
        }
    }
}

/// Checks every scenario invariant. An empty result means the scenario is valid.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut r = Report(Vec::new());

    for (name, value) in [("labels.q1", s.labels.q1), ("labels.q2", s.labels.q2)] {
        if !(0.0..=100.0).contains(&value) {
            r.push(ViolationCode::LabelOutOfRange, name, format!("{value} outside [0, 100]"));
        }
    }
    if s.snapshots.len() < 3 {
        r.push(
            ViolationCode::TooFewSnapshots,
            "snapshots",
            format!("{} snapshots, at least 3 required", s.snapshots.len()),
        );
    }
    for (i, pair) in s.snapshots.windows(2).enumerate() {
        if !(pair[1].timestamp > pair[0].timestamp) {
            r.push(
                ViolationCode::TimestampsNotIncreasing,
                format!("snapshots[{}].timestamp", i + 1),
                format!("{} does not follow {}", pair[1].timestamp, pair[0].timestamp),
            );
        }
    }
    for (i, snap) in s.snapshots.iter().enumerate() {
        validate_snapshot(&mut r, &format!("snapshots[{i}]"), snap);
    }
    r.0
}

fn validate_snapshot(r: &mut Report, base: &str, snap: &Snapshot) {
    r.finite(&format!("{base}.timestamp"), &[snap.timestamp]);

    let robot = &snap.robot;
    let p = format!("{base}.robot");
    r.finite(
        &p,
        &[robot.pose.x, robot.pose.y, robot.pose.theta, robot.command.adv, robot.command.rot],
    );
    r.angle(&format!("{p}.pose.theta"), robot.pose.theta);

    r.finite(&format!("{base}.goal"), &[snap.goal.x, snap.goal.y]);

    let mut ids = HashSet::new();
    for (i, h) in snap.humans.iter().enumerate() {
        let p = format!("{base}.humans[{i}]");
        r.finite(
            &p,
            &[h.pose.x, h.pose.y, h.pose.theta, h.velocity.vx, h.velocity.vy, h.velocity.vtheta],
        );
        r.angle(&format!("{p}.pose.theta"), h.pose.theta);
        if !ids.insert(h.id) {
            r.push(ViolationCode::DuplicateId, format!("{p}.id"), format!("id {} repeated", h.id));
        }
    }
    for (i, o) in snap.objects.iter().enumerate() {
        let p = format!("{base}.objects[{i}]");
        r.finite(
            &p,
            &[
                o.pose.x,
                o.pose.y,
                o.pose.theta,
                o.velocity.vx,
                o.velocity.vy,
                o.velocity.vtheta,
                o.shape.width,
                o.shape.height,
            ],
        );
        r.angle(&format!("{p}.pose.theta"), o.pose.theta);
        if !(o.shape.width > 0.0 && o.shape.height > 0.0) {
            r.push(
                ViolationCode::NonPositiveShape,
                format!("{p}.shape"),
                format!("shape {}x{}", o.shape.width, o.shape.height),
            );
        }
        if !ids.insert(o.id) {
            r.push(ViolationCode::DuplicateId, format!("{p}.id"), format!("id {} repeated", o.id));
        }
    }

    if snap.walls.len() < 3 {
        r.push(
            ViolationCode::TooFewWalls,
            format!("{base}.walls"),
            format!("{} segments cannot enclose a room", snap.walls.len()),
        );
    }
    let n = snap.walls.len();
    for (i, w) in snap.walls.iter().enumerate() {
        let p = format!("{base}.walls[{i}]");
        if !r.finite(&p, &[w.start.x, w.start.y, w.end.x, w.end.y]) {
            continue;
        }
        if w.start == w.end {
            r.push(ViolationCode::DegenerateWall, p.clone(), "start equals end");
        }
        let next = &snap.walls[(i + 1) % n];
        let gap = crate::geometry::distance(w.end.point(), next.start.point());
        if gap > CLOSURE_TOLERANCE {
            r.push(
                ViolationCode::WallsNotClosed,
                format!("{p}.end"),
                format!("gap of {gap} m to walls[{}].start", (i + 1) % n),
            );
        }
    }

    for (i, it) in snap.interactions.iter().enumerate() {
        let p = format!("{base}.interactions[{i}]");
        let source_human = snap.human(it.source).is_some();
        let source_known = source_human || snap.object(it.source).is_some();
        let target_known = snap.human(it.target).is_some() || snap.object(it.target).is_some();
        if !source_known {
            r.push(
                ViolationCode::DanglingInteraction,
                format!("{p}.source"),
                format!("no entity with id {}", it.source),
            );
        } else if !source_human {
            r.push(
                ViolationCode::InteractionSourceNotHuman,
                format!("{p}.source"),
                format!("entity {} is not a human", it.source),
            );
        }
        if !target_known {
            r.push(
                ViolationCode::DanglingInteraction,
                format!("{p}.target"),
                format!("no entity with id {}", it.target),
            );
        }
        if it.source == it.target {
            r.push(ViolationCode::SelfInteraction, p, format!("entity {} interacts with itself", it.source));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_random_scenario, Interaction, RoomKind, XY};

    fn codes(s: &Scenario) -> Vec<ViolationCode> {
        validate_scenario(s).into_iter().map(|v| v.code).collect()
    }

    #[test]
    fn generated_scenario_is_valid() {
        let s = generate_random_scenario(1, 2, 1, RoomKind::Rectangular);
        assert_eq!(validate_scenario(&s), vec![]);
    }

    #[test]
    fn open_wall_polygon() {
        let mut s = generate_random_scenario(1, 0, 0, RoomKind::Rectangular);
        let last = s.snapshots.len() - 1;
        s.snapshots[last].walls[2].end = XY { x: 100.0, y: 100.0 };
        let v = validate_scenario(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].code, ViolationCode::WallsNotClosed);
        assert_eq!(v[0].path, format!("snapshots[{last}].walls[2].end"));
    }

    #[test]
    fn dangling_interaction() {
        let mut s = generate_random_scenario(1, 2, 0, RoomKind::Rectangular);
        let h = s.snapshots[0].humans[0].id;
        for snap in &mut s.snapshots {
            snap.interactions = vec![Interaction { source: h, target: 99 }];
        }
        let c = codes(&s);
        assert!(!c.is_empty());
        assert!(c.iter().all(|&c| c == ViolationCode::DanglingInteraction));
    }

    #[test]
    fn timestamps_and_labels() {
        let mut s = generate_random_scenario(2, 1, 1, RoomKind::LShaped);
        s.snapshots[5].timestamp = s.snapshots[4].timestamp;
        s.labels.q2 = -1.0;
        let c = codes(&s);
        assert!(c.contains(&ViolationCode::TimestampsNotIncreasing));
        assert!(c.contains(&ViolationCode::LabelOutOfRange));
    }

    #[test]
    fn duplicate_ids_across_humans_and_objects() {
        let mut s = generate_random_scenario(4, 1, 1, RoomKind::Rectangular);
        for snap in &mut s.snapshots {
            snap.objects[0].id = snap.humans[0].id;
            snap.interactions.clear();
        }
        assert!(codes(&s).contains(&ViolationCode::DuplicateId));
    }

    #[test]
    fn angle_range_is_half_open() {
        let mut s = generate_random_scenario(5, 1, 0, RoomKind::Rectangular);
        s.snapshots[0].humans[0].pose.theta = PI;
        assert!(codes(&s).is_empty());
        s.snapshots[0].humans[0].pose.theta = -PI;
        assert_eq!(codes(&s), vec![ViolationCode::AngleOutOfRange]);
    }
}
