use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{BackendKind, TabularQ};
use crate::error::WvfError;
use crate::gridworld::{Action, Dir, EnvConfig, LayoutSnapshot, ObjectSpec, Pos, Pose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub backend: BackendKind,
    /// `"max"` or `"min"` for task tables.
    pub task: String,
    /// Attribute name when the table is a basis WVF.
    pub attribute: Option<String>,
    pub seed: u64,
}

/// JSON checkpoint of a tabular WVF. Entries are
/// `[layout, x, y, dir, goal, action, value]`; omitted entries are zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularCheckpoint {
    pub header: CheckpointHeader,
    pub layouts: Vec<LayoutSnapshot>,
    pub entries: Vec<(usize, i32, i32, usize, usize, usize, f64)>,
}

impl TabularCheckpoint {
    pub fn from_table(table: &TabularQ, header: CheckpointHeader) -> Self {
        let mut entries = Vec::new();
        for (li, layout) in table.layouts.iter().enumerate() {
            for i in 0..table.poses {
                let pose = Pose::from_index(i, table.width);
                if !layout.is_free(pose.pos) {
                    continue;
                }
                for g in ObjectSpec::all() {
                    for a in Action::ALL {
                        let v = table.get(li, pose, g, a);
                        if v != 0.0 {
                            entries.push((
                                li,
                                pose.pos.x,
                                pose.pos.y,
                                pose.dir as usize,
                                g.index(),
                                a.index(),
                                v,
                            ));
                        }
                    }
                }
            }
        }
        Self {
            header,
            layouts: table.layouts.iter().map(LayoutSnapshot::from).collect(),
            entries,
        }
    }

    pub fn to_table(&self, config: &EnvConfig) -> Result<TabularQ, WvfError> {
        if self.header.backend != BackendKind::Tabular {
            return Err(WvfError::Checkpoint("not a tabular checkpoint".into()));
        }
        if self.layouts.is_empty() {
            return Err(WvfError::Checkpoint("no layouts".into()));
        }
        let layouts = self
            .layouts
            .iter()
            .map(|l| l.to_state(config))
            .collect::<Result<Vec<_>, _>>()?;
        let mut table = TabularQ::zeros(layouts);
        for &(li, x, y, dir, goal, action, v) in &self.entries {
            let layout = table
                .layouts
                .get(li)
                .ok_or_else(|| WvfError::Checkpoint(format!("layout index {li} out of range")))?;
            let pos = Pos::new(x, y);
            if !layout.is_free(pos) || dir >= 4 || goal >= ObjectSpec::COUNT || action >= 7 {
                return Err(WvfError::Checkpoint(format!(
                    "bad entry ({li}, {x}, {y}, {dir}, {goal}, {action})"
                )));
            }
            let pose = Pose {
                pos,
                dir: Dir::ALL[dir],
            };
            table.set(li, pose, ObjectSpec::from_index(goal), Action::ALL[action], v);
        }
        Ok(table)
    }

    pub fn write<W: Write>(&self, w: W) -> Result<(), WvfError> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self, WvfError> {
        Ok(serde_json::from_reader(r)?)
    }
}
