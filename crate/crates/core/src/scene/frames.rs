use super::{Scenario, ScenarioError, Snapshot};

const TIE_TOLERANCE: f64 = 1e-9;

/// The three snapshots encoded as one graph; `frames[2]` is the scored instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTriple {
    pub frames: [Snapshot; 3],
    /// Positions of the frames in the source scenario.
    pub indices: [usize; 3],
}

/// Picks the final snapshot plus the snapshots nearest to `spacing_s` and
/// `2 * spacing_s` before it. Equidistant candidates resolve to the later one.
pub fn select_frames(s: &Scenario, spacing_s: f64) -> Result<FrameTriple, ScenarioError> {
    let required = 2.0 * spacing_s;
    let duration = s.duration_s();
    if s.snapshots.is_empty() || duration + TIE_TOLERANCE < required {
        return Err(ScenarioError::TooShort { duration, required });
    }
    let last = s.snapshots.len() - 1;
    let t_end = s.snapshots[last].timestamp;
    let nearest = |target: f64| {
        let mut best = 0;
        let mut best_gap = f64::INFINITY;
        for (i, snap) in s.snapshots.iter().enumerate() {
            let gap = (snap.timestamp - target).abs();
            if gap <= best_gap + TIE_TOLERANCE {
                best = i;
                best_gap = best_gap.min(gap);
            }
        }
        best
    };
    let indices = [nearest(t_end - required), nearest(t_end - spacing_s), last];
    Ok(FrameTriple {
        frames: indices.map(|i| s.snapshots[i].clone()),
        indices,
    })
}
