use crate::geometry::{distance, heading_of, RobotFrame};
use crate::scene::Snapshot;

use super::EntityKey;

pub const NODE_FEATURES: usize = 37;
pub const EDGE_FEATURES: usize = super::NUM_RELATIONS + 1;

/// Column offsets of each section of a node feature row.
pub mod layout {
    pub const TYPE: usize = 0;
    pub const FRAME: usize = 5;
    /// `n_humans / 10, adv, rot`
    pub const ROOM: usize = 8;
    /// `x, y, vx, vy, vtheta, sin, cos, dist`
    pub const HUMAN: usize = 11;
    /// Human layout followed by `width, height`.
    pub const OBJECT: usize = 19;
    /// `x, y, sin, cos, dist`
    pub const WALL: usize = 29;
    /// `x, y, dist`
    pub const GOAL: usize = 34;
}

const DECAMETRE: f64 = 10.0;

/// Feature row for one entity of `snap`, in the frame of `snap.robot`.
/// The frame one-hot section is left at zero. Returns `None` if the entity
/// does not exist in the snapshot.
pub fn encode_node_features(snap: &Snapshot, entity: EntityKey) -> Option<[f64; NODE_FEATURES]> {
    let robot = snap.robot.pose;
    let frame = RobotFrame::new(robot.position(), robot.theta);
    let mut f = [0.0; NODE_FEATURES];
    f[layout::TYPE + entity.node_type().index()] = 1.0;

    let mut moving = |base: usize, pos, theta: f64, vel: crate::scene::Velocity| {
        let p = frame.point(pos);
        let v = frame.vector([vel.vx, vel.vy]);
        let rel = frame.angle(theta);
        f[base..base + 8].copy_from_slice(&[
            p[0] / DECAMETRE,
            p[1] / DECAMETRE,
            v[0],
            v[1],
            vel.vtheta,
            rel.sin(),
            rel.cos(),
            distance(pos, robot.position()) / DECAMETRE,
        ]);
    };
    match entity {
        EntityKey::Room => {
            f[layout::ROOM] = snap.humans.len() as f64 / 10.0;
            f[layout::ROOM + 1] = snap.robot.command.adv;
            f[layout::ROOM + 2] = snap.robot.command.rot;
        }
        EntityKey::Human(id) => {
            let h = snap.human(id)?;
            moving(layout::HUMAN, h.pose.position(), h.pose.theta, h.velocity);
        }
        EntityKey::Object(id) => {
            let o = snap.object(id)?;
            moving(layout::OBJECT, o.pose.position(), o.pose.theta, o.velocity);
            f[layout::OBJECT + 8] = o.shape.width / DECAMETRE;
            f[layout::OBJECT + 9] = o.shape.height / DECAMETRE;
        }
        EntityKey::Wall(i) => {
            let w = snap.walls.get(i)?;
            let c = w.centre();
            let p = frame.point(c);
            let dir = frame.vector([w.end.x - w.start.x, w.end.y - w.start.y]);
            let tangent = heading_of(dir);
            f[layout::WALL..layout::WALL + 5].copy_from_slice(&[
                p[0] / DECAMETRE,
                p[1] / DECAMETRE,
                tangent.sin(),
                tangent.cos(),
                distance(c, robot.position()) / DECAMETRE,
            ]);
        }
        EntityKey::Goal => {
            let g = snap.goal.position();
            let p = frame.point(g);
            f[layout::GOAL..layout::GOAL + 3].copy_from_slice(&[
                p[0] / DECAMETRE,
                p[1] / DECAMETRE,
                distance(g, robot.position()) / DECAMETRE,
            ]);
        }
    }
    Some(f)
}
