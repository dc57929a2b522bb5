//! Synthetic scenarios for tests and desk-scale experiments.
//!
//! Scenes are sampled in a rectangular or L-shaped room; the robot follows a
//! constant unicycle command and walking humans move at constant velocity.
//! Labels come from [`synthetic_labels`], a deterministic scorer that rates
//! the final snapshot by proximity to humans and progress towards the goal.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    Command, GoalPoint, Human, Interaction, Labels, ObjectEntity, Pose, RobotState, Scenario,
    Shape, Snapshot, Velocity, WallSegment,
};
use crate::geometry::{
    distance, heading_vector, point_in_polygon, point_segment_distance, wrap_angle, Point,
    RobotFrame,
};

const SNAPSHOTS: usize = 35;
const DURATION_S: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoomKind {
    Rectangular,
    LShaped,
}

fn room_vertices(rng: &mut ChaCha8Rng, kind: RoomKind) -> Vec<Point> {
    let w: f64 = rng.random_range(4.0..9.0);
    let h: f64 = rng.random_range(4.0..9.0);
    let (x0, x1, y0, y1) = (-w / 2.0, w / 2.0, -h / 2.0, h / 2.0);
    match kind {
        RoomKind::Rectangular => vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]],
        RoomKind::LShaped => {
            let cw = w * rng.random_range(0.3..0.6);
            let ch = h * rng.random_range(0.3..0.6);
            vec![
                [x0, y0],
                [x1, y0],
                [x1, y1 - ch],
                [x1 - cw, y1 - ch],
                [x1 - cw, y1],
                [x0, y1],
            ]
        }
    }
}

fn sample_inside(rng: &mut ChaCha8Rng, poly: &[Point], margin: f64) -> Point {
    let (lo, hi) = crate::geometry::bounding_box(poly);
    loop {
        let p = [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1])];
        let clear = (0..poly.len())
            .all(|i| point_segment_distance(p, poly[i], poly[(i + 1) % poly.len()]) >= margin);
        if clear && point_in_polygon(p, poly) {
            return p;
        }
    }
}

fn sample_angle(rng: &mut ChaCha8Rng) -> f64 {
    wrap_angle(rng.random_range(-PI..PI))
}

/// Generates a valid scenario; identical arguments give identical output.
pub fn generate_random_scenario(
    rng_seed: u64,
    n_humans: usize,
    n_objects: usize,
    room_kind: RoomKind,
) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let poly = room_vertices(&mut rng, room_kind);
    let walls: Vec<WallSegment> = (0..poly.len())
        .map(|i| WallSegment {
            start: poly[i].into(),
            end: poly[(i + 1) % poly.len()].into(),
        })
        .collect();

    let robot_start = sample_inside(&mut rng, &poly, 0.5);
    let robot_theta = sample_angle(&mut rng);
    let command = Command {
        adv: rng.random_range(-0.2..0.6),
        rot: rng.random_range(-0.5..0.5),
    };

    struct Walker {
        id: i64,
        start: Point,
        theta: f64,
        velocity: [f64; 2],
    }
    let walkers: Vec<Walker> = (0..n_humans)
        .map(|i| {
            let start = sample_inside(&mut rng, &poly, 0.3);
            let theta = sample_angle(&mut rng);
            let speed = if rng.random_bool(0.5) {
                0.0
            } else {
                rng.random_range(0.2..1.0)
            };
            let dir = heading_vector(theta);
            Walker {
                id: i as i64 + 1,
                start,
                theta,
                velocity: [dir[0] * speed, dir[1] * speed],
            }
        })
        .collect();

    let objects: Vec<ObjectEntity> = (0..n_objects)
        .map(|i| {
            let p = sample_inside(&mut rng, &poly, 0.3);
            ObjectEntity {
                id: (n_humans + i) as i64 + 1,
                pose: Pose {
                    x: p[0],
                    y: p[1],
                    theta: sample_angle(&mut rng),
                },
                velocity: Velocity::default(),
                shape: Shape {
                    width: rng.random_range(0.3..1.5),
                    height: rng.random_range(0.3..1.5),
                },
            }
        })
        .collect();

    let mut interactions = Vec::new();
    let entity_count = n_humans + n_objects;
    for w in &walkers {
        if entity_count > 1 && rng.random_bool(0.3) {
            let mut target = rng.random_range(1..=entity_count as i64);
            if target == w.id {
                target = target % entity_count as i64 + 1;
            }
            interactions.push(Interaction {
                source: w.id,
                target,
            });
        }
    }

    let goal = sample_inside(&mut rng, &poly, 0.3);

    let dt = DURATION_S / (SNAPSHOTS - 1) as f64;
    let mut robot_pos = robot_start;
    let mut robot_heading = robot_theta;
    let mut snapshots = Vec::with_capacity(SNAPSHOTS);
    for step in 0..SNAPSHOTS {
        let t = step as f64 * dt;
        let humans = walkers
            .iter()
            .map(|w| Human {
                id: w.id,
                pose: Pose {
                    x: w.start[0] + w.velocity[0] * t,
                    y: w.start[1] + w.velocity[1] * t,
                    theta: w.theta,
                },
                velocity: Velocity {
                    vx: w.velocity[0],
                    vy: w.velocity[1],
                    vtheta: 0.0,
                },
            })
            .collect();
        snapshots.push(Snapshot {
            timestamp: t,
            robot: RobotState {
                pose: Pose {
                    x: robot_pos[0],
                    y: robot_pos[1],
                    theta: robot_heading,
                },
                command,
            },
            humans,
            objects: objects.clone(),
            walls: walls.clone(),
            goal: GoalPoint {
                x: goal[0],
                y: goal[1],
            },
            interactions: interactions.clone(),
        });
        let dir = heading_vector(robot_heading);
        robot_pos = [
            robot_pos[0] + dir[0] * command.adv * dt,
            robot_pos[1] + dir[1] * command.adv * dt,
        ];
        robot_heading = wrap_angle(robot_heading + command.rot * dt);
    }

    let mut scenario = Scenario {
        id: format!("synthetic-{rng_seed:06}"),
        snapshots,
        labels: Labels { q1: 0.0, q2: 0.0 },
    };
    scenario.labels = synthetic_labels(&scenario);
    scenario
}

/// Rule-based scores for the final snapshot of a scenario.
///
/// Q1 decays with proximity to the nearest human, with a comfort radius that
/// grows with the robot's speed. Q2 scales Q1 by how much the advance speed
/// carries the robot towards the goal. Both are invariant under the
/// mirror and half-turn augmentations.
pub fn synthetic_labels(s: &Scenario) -> Labels {
    let Some(snap) = s.snapshots.last() else {
        return Labels { q1: 0.0, q2: 0.0 };
    };
    let robot = snap.robot.pose;
    let frame = RobotFrame::new(robot.position(), robot.theta);
    let adv = snap.robot.command.adv;

    let radius = 0.6 + 1.5 * adv.abs();
    let comfort = snap
        .humans
        .iter()
        .map(|h| {
            let d = distance(robot.position(), h.pose.position());
            1.0 - (-(d / radius).powi(2)).exp()
        })
        .fold(1.0, f64::min);

    let goal = frame.point(snap.goal.position());
    let reach = goal[0].hypot(goal[1]);
    let alignment = if reach < 0.3 { 1.0 } else { goal[1] / reach };
    let efficiency = 0.5 + 0.5 * (adv * alignment / 0.4).clamp(-1.0, 1.0);

    let q1 = (100.0 * comfort).clamp(0.0, 100.0);
    Labels {
        q1,
        q2: (q1 * efficiency).clamp(0.0, 100.0),
    }
}
