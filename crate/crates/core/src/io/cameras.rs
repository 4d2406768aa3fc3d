//! Camera lists as JSON: an array of records with intrinsics, frame size,
//! and a world-to-camera pose (row-major R, translation t).

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraRecord {
    pub id: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Rotation, row-major.
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
}

impl CameraRecord {
    pub fn to_camera(&self) -> Result<Camera> {
        let m = &self.r;
        let rotation = Matrix3::new(m[0], m[1], m[2], m[3], m[4], m[5], m[6], m[7], m[8]);
        Camera::new(
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.width,
            self.height,
            rotation,
            Vector3::new(self.t[0], self.t[1], self.t[2]),
        )
    }

    pub fn from_camera(id: u32, cam: &Camera) -> Self {
        let mut r = [0.0; 9];
        for row in 0..3 {
            for col in 0..3 {
                r[row * 3 + col] = cam.rotation[(row, col)];
            }
        }
        CameraRecord {
            id,
            fx: cam.fx,
            fy: cam.fy,
            cx: cam.cx,
            cy: cam.cy,
            width: cam.width,
            height: cam.height,
            r,
            t: [cam.translation.x, cam.translation.y, cam.translation.z],
        }
    }
}

/// Reads every camera record; diagnostics name the offending record by id
/// (or by array position when the id itself is missing).
pub fn read_cameras(path: &Path) -> Result<Vec<(u32, Camera)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: Vec<serde_json::Value> = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path, format!("expected a JSON array of camera records: {e}")))?;
    let mut out = Vec::with_capacity(raw.len());
    let mut seen = std::collections::BTreeSet::new();
    for (index, value) in raw.into_iter().enumerate() {
        let label = value
            .get("id")
            .and_then(|v| v.as_u64())
            .map(|id| format!("record {id}"))
            .unwrap_or_else(|| format!("record at index {index}"));
        let record: CameraRecord = serde_json::from_value(value)
            .map_err(|e| Error::parse(path, format!("{label}: {e}")))?;
        let camera = record
            .to_camera()
            .map_err(|e| Error::parse(path, format!("record {}: {e}", record.id)))?;
        if !seen.insert(record.id) {
            return Err(Error::parse(path, format!("duplicate camera id {}", record.id)));
        }
        out.push((record.id, camera));
    }
    Ok(out)
}

pub fn write_cameras(path: &Path, cameras: &[(u32, Camera)]) -> Result<()> {
    let records: Vec<CameraRecord> = cameras
        .iter()
        .map(|(id, cam)| CameraRecord::from_camera(*id, cam))
        .collect();
    let text = serde_json::to_string_pretty(&records)
        .map_err(|e| Error::parse(path, format!("serialization failed: {e}")))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Picks one camera out of a parsed list, for `file.json:ID` style lookups.
pub fn camera_by_id(cameras: &[(u32, Camera)], id: u32) -> Result<&Camera> {
    cameras
        .iter()
        .find(|(cid, _)| *cid == id)
        .map(|(_, cam)| cam)
        .ok_or_else(|| Error::validation(format!("no camera with id {id} in the list")))
}
