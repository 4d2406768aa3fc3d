//! Declarative edit scripts: a JSON array of move/remove operations
//! applied to a scene in order.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::edit::{edit_move, edit_remove};
use crate::error::{Error, Result};
use crate::scene::{AABox, RigidTransform, Scene};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl BoxSpec {
    pub fn to_box(&self) -> Result<AABox> {
        AABox::new(
            Vector3::new(self.min[0], self.min[1], self.min[2]),
            Vector3::new(self.max[0], self.max[1], self.max[2]),
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformSpec {
    /// Rotation, row-major.
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
}

impl TransformSpec {
    pub fn to_transform(&self) -> Result<RigidTransform> {
        let m = &self.r;
        RigidTransform::new(
            Matrix3::new(m[0], m[1], m[2], m[3], m[4], m[5], m[6], m[7], m[8]),
            Vector3::new(self.t[0], self.t[1], self.t[2]),
        )
    }

    pub fn identity() -> Self {
        TransformSpec {
            r: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            t: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum EditOp {
    Move {
        #[serde(rename = "box")]
        region: BoxSpec,
        /// Omitting the transform makes the move a no-op; useful for
        /// temporarily disabling a script entry.
        transform: Option<TransformSpec>,
    },
    Remove {
        #[serde(rename = "box")]
        region: BoxSpec,
    },
}

pub fn read_edit_script(path: &Path) -> Result<Vec<EditOp>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::parse(path, format!("expected a JSON array of edit operations: {e}")))
}

/// Reads a single `{R, t}` rigid transform (the stitch alignment file).
pub fn read_transform(path: &Path) -> Result<RigidTransform> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let spec: TransformSpec = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path, format!("expected a JSON object with R and t: {e}")))?;
    spec.to_transform()
        .map_err(|e| Error::parse(path, format!("{e}")))
}

pub fn write_edit_script(path: &Path, ops: &[EditOp]) -> Result<()> {
    let text = serde_json::to_string_pretty(ops)
        .map_err(|e| Error::parse(path, format!("serialization failed: {e}")))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs every operation in order, returning the edited scene. Diagnostics
/// name the position of the operation that failed.
pub fn apply_edit_script(scene: &Scene, ops: &[EditOp]) -> Result<Scene> {
    fn fail(i: usize, e: Error) -> Error {
        Error::validation(format!("edit operation {i}: {e}"))
    }
    let mut current = scene.clone();
    for (i, op) in ops.iter().enumerate() {
        current = match op {
            EditOp::Move { region, transform } => {
                let rt = transform
                    .as_ref()
                    .map(|t| t.to_transform())
                    .unwrap_or_else(|| Ok(RigidTransform::identity()))
                    .map_err(|e| fail(i, e))?;
                let region = region.to_box().map_err(|e| fail(i, e))?;
                edit_move(&current, &region, &rt).map_err(|e| fail(i, e))?
            }
            EditOp::Remove { region } => {
                let region = region.to_box().map_err(|e| fail(i, e))?;
                edit_remove(&current, &region).map_err(|e| fail(i, e))?
            }
        };
    }
    Ok(current)
}
