//! Scene editing: moving or deleting point groups, merging scenes, and
//! sweeping panoramas. Every operation preserves descriptor values — edits
//! change point membership and positions only, so an already-trained
//! network keeps decoding the moved content.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::net::{render_scene, OmegaNet};
use crate::scene::{AABox, RigidTransform, Scene};
use crate::tensor::{Shape, Tensor};

/// Applies a rigid motion to every point inside `region`, leaving the rest
/// of the scene (and the full descriptor table) untouched.
pub fn edit_move(scene: &Scene, region: &AABox, rt: &RigidTransform) -> Result<Scene> {
    let indices = scene.select_points(region);
    scene.transform_points(&indices, rt)
}

/// Deletes every point inside `region` together with its descriptor row.
pub fn edit_remove(scene: &Scene, region: &AABox) -> Result<Scene> {
    let indices = scene.select_points(region);
    scene.remove_points(&indices)
}

/// Merges two scenes: `second` is mapped into `first`'s coordinate frame by
/// `align`, then points and descriptor rows are appended after `first`'s.
/// Both scenes must use the same descriptor width; the merged scene renders
/// with whichever network the caller picks (normally one shared by both).
pub fn stitch(first: &Scene, second: &Scene, align: &RigidTransform) -> Result<Scene> {
    if first.descriptors.dim() != second.descriptors.dim() {
        return Err(Error::validation(format!(
            "descriptor widths differ: {} vs {}",
            first.descriptors.dim(),
            second.descriptors.dim()
        )));
    }
    let all: Vec<usize> = (0..second.len()).collect();
    let aligned = second.transform_points(&all, align)?;
    first.concat(&aligned)
}

/// Rotates a world-to-camera pose about the camera's own vertical axis.
/// Positive angles pan the view toward increasing image columns, so a
/// sequence of increasing yaws sweeps left to right.
pub fn yaw_pose(pose: &RigidTransform, degrees: f64) -> Result<RigidTransform> {
    let a = -degrees.to_radians();
    let (s, c) = (a.sin(), a.cos());
    let spin = Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c);
    RigidTransform::new(spin * pose.rotation(), spin * pose.translation())
}

/// The cameras a panorama renders: `k` views sharing `center`'s optical
/// center, yaw-stepped by exactly `hfov_deg` so adjacent frusta abut, each
/// with the focal length that makes one view span `hfov_deg` horizontally.
pub fn panorama_cameras(
    center: &RigidTransform,
    k: usize,
    hfov_deg: f64,
    view_width: usize,
    view_height: usize,
) -> Result<Vec<Camera>> {
    if k == 0 {
        return Err(Error::validation("a panorama needs at least one view"));
    }
    if !hfov_deg.is_finite() || hfov_deg <= 0.0 || hfov_deg >= 180.0 {
        return Err(Error::validation(format!(
            "horizontal field of view must lie in (0, 180) degrees, got {hfov_deg}"
        )));
    }
    if k as f64 * hfov_deg > 360.0 + 1e-9 {
        return Err(Error::validation(format!(
            "{k} views of {hfov_deg} degrees sweep past a full turn"
        )));
    }
    let fx = (view_width as f64 / 2.0) / (hfov_deg.to_radians() / 2.0).tan();
    (0..k)
        .map(|i| {
            let pose = yaw_pose(center, i as f64 * hfov_deg)?;
            Camera::new(
                fx,
                fx,
                view_width as f64 / 2.0,
                view_height as f64 / 2.0,
                view_width,
                view_height,
                *pose.rotation(),
                *pose.translation(),
            )
        })
        .collect()
}

/// Renders a `k`-view sweep from `center` and concatenates the views left
/// to right into one (3, view_height, k·view_width) image. Views render in
/// parallel; the output is identical at any thread count.
pub fn panorama(
    net: &OmegaNet<f32>,
    scene: &Scene,
    center: &RigidTransform,
    k: usize,
    hfov_deg: f64,
    view_width: usize,
    view_height: usize,
) -> Result<Tensor<f32>> {
    let cameras = panorama_cameras(center, k, hfov_deg, view_width, view_height)?;
    let views: Vec<Tensor<f32>> = cameras
        .par_iter()
        .map(|cam| render_scene(net, scene, cam))
        .collect::<Result<_>>()?;

    let (h, w) = (view_height, view_width);
    let total_w = k * w;
    let mut data = vec![0.0f32; 3 * h * total_w];
    for (i, view) in views.iter().enumerate() {
        let src = view.data();
        for c in 0..3 {
            for y in 0..h {
                let from = (c * h + y) * w;
                let to = (c * h + y) * total_w + i * w;
                data[to..to + w].copy_from_slice(&src[from..from + w]);
            }
        }
    }
    Tensor::new(Shape::chw(3, h, total_w), data)
}

/// Pose of a camera orbiting the origin: placed at `eye`, looking at
/// `target`, with +y as the up hint. Convenience for panorama centers.
pub fn look_at_rigid(eye: Vector3<f64>, target: Vector3<f64>) -> Result<RigidTransform> {
    let (rotation, translation) = Camera::look_at_pose(eye, target, Vector3::new(0.0, 1.0, 0.0))?;
    RigidTransform::new(rotation, translation)
}
