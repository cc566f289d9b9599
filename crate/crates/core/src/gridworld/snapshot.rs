use serde::{Deserialize, Serialize};

use super::{Color, Dir, EnvConfig, EpisodeState, ObjectSpec, PlacedObject, Pos, Pose, Shape};
use crate::error::EnvError;

/// JSON form of a layout: `{width, height, agent:{x,y,dir}, objects:[{x,y,color,shape}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSnapshot {
    pub width: i32,
    pub height: i32,
    pub agent: PoseSnapshot,
    pub objects: Vec<ObjectSnapshot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSnapshot {
    pub x: i32,
    pub y: i32,
    pub dir: Dir,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSnapshot {
    pub x: i32,
    pub y: i32,
    pub color: Color,
    pub shape: Shape,
}

impl From<&EpisodeState> for LayoutSnapshot {
    fn from(s: &EpisodeState) -> Self {
        LayoutSnapshot {
            width: s.width,
            height: s.height,
            agent: PoseSnapshot {
                x: s.agent.pos.x,
                y: s.agent.pos.y,
                dir: s.agent.dir,
            },
            objects: s
                .objects
                .iter()
                .map(|o| ObjectSnapshot {
                    x: o.pos.x,
                    y: o.pos.y,
                    color: o.spec.color,
                    shape: o.spec.shape,
                })
                .collect(),
        }
    }
}

impl LayoutSnapshot {
    /// Fresh (non-terminal) episode state for this layout. Step limit and
    /// penalty come from `config`; the grid size comes from the snapshot.
    pub fn to_state(&self, config: &EnvConfig) -> Result<EpisodeState, EnvError> {
        let state = EpisodeState {
            width: self.width,
            height: self.height,
            agent: Pose {
                pos: Pos::new(self.agent.x, self.agent.y),
                dir: self.agent.dir,
            },
            objects: self
                .objects
                .iter()
                .map(|o| PlacedObject {
                    pos: Pos::new(o.x, o.y),
                    spec: ObjectSpec::new(o.color, o.shape),
                })
                .collect(),
            picked: None,
            steps_elapsed: 0,
            step_limit: config.step_limit,
            step_penalty: config.step_penalty,
        };
        check_layout(&state)?;
        Ok(state)
    }
}

fn check_layout(s: &EpisodeState) -> Result<(), EnvError> {
    if s.width < 1 || s.height < 1 {
        return Err(EnvError::Layout("empty grid".into()));
    }
    for (i, o) in s.objects.iter().enumerate() {
        if !s.in_bounds(o.pos) {
            return Err(EnvError::Layout(format!("object {i} outside the grid")));
        }
        if s.objects[..i].iter().any(|p| p.pos == o.pos) {
            return Err(EnvError::Layout(format!("object {i} shares a cell")));
        }
    }
    if !s.is_free(s.agent.pos) {
        return Err(EnvError::Layout("agent is not on a free cell".into()));
    }
    Ok(())
}
