//! Converter stub for natively recorded sequences.
//!
//! The native layout is taken to be a JSON array of frames (or an object with
//! a `sequence` array), each frame carrying `timestamp`, `robot_pose
//! {x, y, a}`, `command` (`[adv, rot]` or `[adv, side, rot]`), `goal`
//! (object or one-element array with `x`, `y`), `people` / `objects` entries
//! with `id, x, y, a, vx, vy, va` (objects add `size_x, size_y`), `walls`
//! entries `{x1, y1, x2, y2}`, `interaction` entries `{src, dst}` and the
//! scores `label_Q1` / `label_Q2` on the last frame. These names have not been
//! checked against the upstream repository; any mismatch surfaces as a
//! schema error naming the missing key.

use serde_json::Value;

use super::{
    validate_scenario, Command, GoalPoint, Human, Interaction, Labels, ObjectEntity, Pose,
    RobotState, Scenario, ScenarioError, Shape, Snapshot, Velocity, WallSegment, XY,
};
use crate::geometry::wrap_angle;

fn schema(path: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn num(v: &Value, key: &str, path: &str) -> Result<f64, ScenarioError> {
    v.get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| schema(format!("{path}.{key}"), "missing or non-numeric field"))
}

fn num_or(v: &Value, key: &str, default: f64) -> f64 {
    v.get(key).and_then(Value::as_f64).unwrap_or(default)
}

fn list<'a>(v: &'a Value, key: &str) -> &'a [Value] {
    v.get(key).and_then(Value::as_array).map(Vec::as_slice).unwrap_or(&[])
}

fn pose(v: &Value, path: &str) -> Result<Pose, ScenarioError> {
    Ok(Pose {
        x: num(v, "x", path)?,
        y: num(v, "y", path)?,
        theta: wrap_angle(num(v, "a", path)?),
    })
}

fn velocity(v: &Value) -> Velocity {
    Velocity {
        vx: num_or(v, "vx", 0.0),
        vy: num_or(v, "vy", 0.0),
        vtheta: num_or(v, "va", 0.0),
    }
}

fn frame(v: &Value, path: &str) -> Result<Snapshot, ScenarioError> {
    let robot = v
        .get("robot_pose")
        .ok_or_else(|| schema(format!("{path}.robot_pose"), "missing field"))?;
    let command = match v.get("command").and_then(Value::as_array) {
        Some(c) if c.len() == 2 || c.len() == 3 => {
            let at = |i: usize| c[i].as_f64().ok_or_else(|| schema(format!("{path}.command[{i}]"), "non-numeric"));
            Command {
                adv: at(0)?,
                rot: at(c.len() - 1)?,
            }
        }
        _ => return Err(schema(format!("{path}.command"), "expected an array of 2 or 3 numbers")),
    };
    let goal_value = match v.get("goal") {
        Some(Value::Array(a)) if !a.is_empty() => &a[0],
        Some(g @ Value::Object(_)) => g,
        _ => return Err(schema(format!("{path}.goal"), "missing goal")),
    };
    let goal = GoalPoint {
        x: num(goal_value, "x", &format!("{path}.goal"))?,
        y: num(goal_value, "y", &format!("{path}.goal"))?,
    };

    let humans = list(v, "people")
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let pp = format!("{path}.people[{i}]");
            Ok(Human {
                id: num(p, "id", &pp)? as i64,
                pose: pose(p, &pp)?,
                velocity: velocity(p),
            })
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    let objects = list(v, "objects")
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let op = format!("{path}.objects[{i}]");
            Ok(ObjectEntity {
                id: num(o, "id", &op)? as i64,
                pose: pose(o, &op)?,
                velocity: velocity(o),
                shape: Shape {
                    width: num(o, "size_x", &op)?,
                    height: num(o, "size_y", &op)?,
                },
            })
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    let walls = list(v, "walls")
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let wp = format!("{path}.walls[{i}]");
            Ok(WallSegment {
                start: XY {
                    x: num(w, "x1", &wp)?,
                    y: num(w, "y1", &wp)?,
                },
                end: XY {
                    x: num(w, "x2", &wp)?,
                    y: num(w, "y2", &wp)?,
                },
            })
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    let interactions = list(v, "interaction")
        .iter()
        .enumerate()
        .map(|(i, it)| {
            let ip = format!("{path}.interaction[{i}]");
            Ok(Interaction {
                source: num(it, "src", &ip)? as i64,
                target: num(it, "dst", &ip)? as i64,
            })
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;

    Ok(Snapshot {
        timestamp: num(v, "timestamp", path)?,
        robot: RobotState {
            pose: pose(robot, &format!("{path}.robot_pose"))?,
            command,
        },
        humans,
        objects,
        walls,
        goal,
        interactions,
    })
}

/// Converts a natively recorded sequence into a validated [`Scenario`].
pub fn convert_legacy(raw: &[u8], id: &str) -> Result<Scenario, ScenarioError> {
    let value: Value = serde_json::from_slice(raw).map_err(|e| ScenarioError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let frames = match &value {
        Value::Array(a) => a.as_slice(),
        Value::Object(_) => list(&value, "sequence"),
        _ => &[],
    };
    if frames.is_empty() {
        return Err(schema("$", "expected a non-empty array of frames"));
    }
    let t0 = num(&frames[0], "timestamp", "[0]")?;
    let mut snapshots = frames
        .iter()
        .enumerate()
        .map(|(i, f)| frame(f, &format!("[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    for s in &mut snapshots {
        s.timestamp -= t0;
    }
    let last = frames.last().unwrap_or(&Value::Null);
    let labels = Labels {
        q1: num(last, "label_Q1", &format!("[{}]", frames.len() - 1))?,
        q2: num(last, "label_Q2", &format!("[{}]", frames.len() - 1))?,
    };
    let scenario = Scenario {
        id: id.to_string(),
        snapshots,
        labels,
    };
    let violations = validate_scenario(&scenario);
    if violations.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Semantic(violations))
    }
}
