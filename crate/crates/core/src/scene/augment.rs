use serde::{Deserialize, Serialize};

use super::{GoalPoint, Pose, Scenario, Snapshot, Velocity, WallSegment, XY};
use crate::geometry::wrap_angle;

/// Reflects the scene across the vertical axis: `x -> -x`, `theta -> -theta`.
///
/// The robot is reflected along with everything else, so in the robot frame
/// every entity is mirrored across the forward axis and the rotation command
/// changes sign while the advance speed is kept.
pub fn mirror(s: &Scenario) -> Scenario {
    s.map_snapshots(s.id.clone(), mirror_snapshot)
}

fn mirror_pose(p: Pose) -> Pose {
    Pose {
        x: -p.x,
        y: p.y,
        theta: wrap_angle(-p.theta),
    }
}

fn mirror_velocity(v: Velocity) -> Velocity {
    Velocity {
        vx: -v.vx,
        vy: v.vy,
        vtheta: -v.vtheta,
    }
}

fn mirror_xy(p: XY) -> XY {
    XY { x: -p.x, y: p.y }
}

fn mirror_snapshot(snap: &Snapshot) -> Snapshot {
    let mut out = snap.clone();
    out.robot.pose = mirror_pose(snap.robot.pose);
    out.robot.command.rot = -snap.robot.command.rot;
    for h in &mut out.humans {
        h.pose = mirror_pose(h.pose);
        h.velocity = mirror_velocity(h.velocity);
    }
    for o in &mut out.objects {
        o.pose = mirror_pose(o.pose);
        o.velocity = mirror_velocity(o.velocity);
    }
    for w in &mut out.walls {
        *w = WallSegment {
            start: mirror_xy(w.start),
            end: mirror_xy(w.end),
        };
    }
    out.goal = GoalPoint {
        x: -snap.goal.x,
        y: snap.goal.y,
    };
    out
}

/// Rotates every entity by pi about the robot position of its snapshot and
/// reverses the robot's advance speed. The robot pose itself is kept, so in
/// the robot frame positions and linear velocities change sign while angular
/// rates are unchanged.
pub fn rotate_half_turn(s: &Scenario) -> Scenario {
    s.map_snapshots(s.id.clone(), rotate_snapshot)
}

fn rotate_snapshot(snap: &Snapshot) -> Snapshot {
    let c = snap.robot.pose.position();
    let turn = |x: f64, y: f64| (2.0 * c[0] - x, 2.0 * c[1] - y);
    let turn_pose = |p: Pose| {
        let (x, y) = turn(p.x, p.y);
        Pose {
            x,
            y,
            theta: wrap_angle(p.theta + std::f64::consts::PI),
        }
    };
    let turn_velocity = |v: Velocity| Velocity {
        vx: -v.vx,
        vy: -v.vy,
        vtheta: v.vtheta,
    };
    let turn_xy = |p: XY| {
        let (x, y) = turn(p.x, p.y);
        XY { x, y }
    };

    let mut out = snap.clone();
    out.robot.command.adv = -snap.robot.command.adv;
    for h in &mut out.humans {
        h.pose = turn_pose(h.pose);
        h.velocity = turn_velocity(h.velocity);
    }
    for o in &mut out.objects {
        o.pose = turn_pose(o.pose);
        o.velocity = turn_velocity(o.velocity);
    }
    for w in &mut out.walls {
        *w = WallSegment {
            start: turn_xy(w.start),
            end: turn_xy(w.end),
        };
    }
    let (gx, gy) = turn(snap.goal.x, snap.goal.y);
    out.goal = GoalPoint { x: gx, y: gy };
    out
}

/// The four label-preserving variants produced by dataset augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Augmentation {
    Original,
    Mirrored,
    Rotated,
    MirroredRotated,
}

impl Augmentation {
    pub const ALL: [Augmentation; 4] = [
        Augmentation::Original,
        Augmentation::Mirrored,
        Augmentation::Rotated,
        Augmentation::MirroredRotated,
    ];

    pub fn suffix(&self) -> &'static str {
        match self {
            Self::Original => "",
            Self::Mirrored => "_m",
            Self::Rotated => "_r",
            Self::MirroredRotated => "_mr",
        }
    }

    /// Applies the variant; the result's id carries the variant suffix.
    pub fn apply(&self, s: &Scenario) -> Scenario {
        let mut out = match self {
            Self::Original => s.clone(),
            Self::Mirrored => mirror(s),
            Self::Rotated => rotate_half_turn(s),
            Self::MirroredRotated => rotate_half_turn(&mirror(s)),
        };
        out.id = format!("{}{}", s.id, self.suffix());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{distance, RobotFrame};
    use crate::scene::{generate_random_scenario, validate_scenario, Human, RoomKind};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn scenario_with_human(x: f64, y: f64, theta: f64) -> Scenario {
        let mut s = generate_random_scenario(0, 0, 0, RoomKind::Rectangular);
        for snap in &mut s.snapshots {
            snap.robot.pose = Pose { x: 0.0, y: 0.0, theta: 0.0 };
            snap.robot.command.adv = 0.4;
            snap.robot.command.rot = 0.2;
            snap.humans = vec![Human {
                id: 1,
                pose: Pose { x, y, theta },
                velocity: Velocity { vx: 0.3, vy: -0.1, vtheta: 0.05 },
            }];
        }
        s
    }

    #[test]
    fn mirror_reflects_x_and_rotation() {
        let s = mirror(&scenario_with_human(1.0, 2.0, PI / 2.0));
        let snap = &s.snapshots[0];
        let h = snap.humans[0];
        assert_eq!((h.pose.x, h.pose.y), (-1.0, 2.0));
        assert!((h.pose.theta + PI / 2.0).abs() < 1e-15);
        assert_eq!((h.velocity.vx, h.velocity.vy, h.velocity.vtheta), (-0.3, -0.1, -0.05));
        assert_eq!((snap.robot.command.adv, snap.robot.command.rot), (0.4, -0.2));
    }

    #[test]
    fn half_turn_negates_positions_and_advance() {
        let s = rotate_half_turn(&scenario_with_human(1.0, 2.0, 0.5));
        let snap = &s.snapshots[0];
        let h = snap.humans[0];
        assert_eq!((h.pose.x, h.pose.y), (-1.0, -2.0));
        assert!((h.pose.theta - (0.5 - PI)).abs() < 1e-15);
        assert_eq!((h.velocity.vx, h.velocity.vy, h.velocity.vtheta), (-0.3, 0.1, 0.05));
        assert_eq!((snap.robot.command.adv, snap.robot.command.rot), (-0.4, 0.2));
    }

    #[test]
    fn variants_keep_labels_and_validity() {
        let s = generate_random_scenario(7, 4, 2, RoomKind::LShaped);
        for aug in Augmentation::ALL {
            let v = aug.apply(&s);
            assert_eq!(v.labels, s.labels);
            assert_eq!(validate_scenario(&v), vec![], "{aug:?}");
            assert_eq!(v.id, format!("{}{}", s.id, aug.suffix()));
        }
    }

    fn max_pose_diff(a: &Scenario, b: &Scenario) -> f64 {
        let mut m: f64 = 0.0;
        for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
            let mut d = |x: f64, y: f64| m = m.max((x - y).abs());
            d(sa.robot.pose.x, sb.robot.pose.x);
            d(sa.robot.pose.y, sb.robot.pose.y);
            d(sa.robot.pose.theta, sb.robot.pose.theta);
            d(sa.robot.command.adv, sb.robot.command.adv);
            d(sa.robot.command.rot, sb.robot.command.rot);
            d(sa.goal.x, sb.goal.x);
            d(sa.goal.y, sb.goal.y);
            for (ha, hb) in sa.humans.iter().zip(&sb.humans) {
                d(ha.pose.x, hb.pose.x);
                d(ha.pose.y, hb.pose.y);
                d(ha.pose.theta, hb.pose.theta);
                d(ha.velocity.vx, hb.velocity.vx);
                d(ha.velocity.vy, hb.velocity.vy);
                d(ha.velocity.vtheta, hb.velocity.vtheta);
            }
            for (oa, ob) in sa.objects.iter().zip(&sb.objects) {
                d(oa.pose.x, ob.pose.x);
                d(oa.pose.y, ob.pose.y);
                d(oa.pose.theta, ob.pose.theta);
            }
            for (wa, wb) in sa.walls.iter().zip(&sb.walls) {
                d(wa.start.x, wb.start.x);
                d(wa.start.y, wb.start.y);
                d(wa.end.x, wb.end.x);
                d(wa.end.y, wb.end.y);
            }
        }
        m
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn augmentations_are_involutions(seed in 0u64..10_000, nh in 0usize..6, no in 0usize..4, l in any::<bool>()) {
            let kind = if l { RoomKind::LShaped } else { RoomKind::Rectangular };
            let s = generate_random_scenario(seed, nh, no, kind);
            prop_assert!(max_pose_diff(&mirror(&mirror(&s)), &s) <= 1e-12);
            prop_assert!(max_pose_diff(&rotate_half_turn(&rotate_half_turn(&s)), &s) <= 1e-12);
            prop_assert_eq!(mirror(&s).labels, s.labels);
            prop_assert_eq!(rotate_half_turn(&s).labels, s.labels);
        }

        #[test]
        fn augmentations_preserve_robot_distances(seed in 0u64..10_000, nh in 1usize..6) {
            let s = generate_random_scenario(seed, nh, 1, RoomKind::Rectangular);
            for v in [mirror(&s), rotate_half_turn(&s), rotate_half_turn(&mirror(&s))] {
                for (a, b) in s.snapshots.iter().zip(&v.snapshots) {
                    let (ra, rb) = (a.robot.pose.position(), b.robot.pose.position());
                    for (ha, hb) in a.humans.iter().zip(&b.humans) {
                        let da = distance(ra, ha.pose.position());
                        let db = distance(rb, hb.pose.position());
                        prop_assert!((da - db).abs() <= 1e-12);
                    }
                    let ga = distance(ra, a.goal.position());
                    let gb = distance(rb, b.goal.position());
                    prop_assert!((ga - gb).abs() <= 1e-12);
                    // robot-frame coordinates transform as advertised
                    let fa = RobotFrame::new(ra, a.robot.pose.theta);
                    let fb = RobotFrame::new(rb, b.robot.pose.theta);
                    let pa = fa.point(a.goal.position());
                    let pb = fb.point(b.goal.position());
                    prop_assert!((pa[0].abs() - pb[0].abs()).abs() <= 1e-9);
                    prop_assert!((pa[1].abs() - pb[1].abs()).abs() <= 1e-9);
                }
            }
        }
    }
}
