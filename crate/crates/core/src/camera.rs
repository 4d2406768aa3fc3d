//! Pinhole camera model and the resolution pyramid it induces.
//!
//! Convention (fixed project-wide): poses are world-to-camera,
//! `x_cam = R * x_world + t`, and projection is `u = fx * x/z + cx`,
//! `v = fy * y/z + cy` with pixel (0, 0) at the top-left corner and a
//! point binning to pixel `(floor(u), floor(v))`.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Number of pyramid levels rendered per view.
pub const LEVELS: usize = 4;

/// Points with camera-space depth at or below this are treated as
/// behind the camera, which keeps the projective division away from
/// the camera center.
pub const Z_NEAR: f64 = 1e-4;

/// Acceptance tolerance for camera rotation orthonormality. Looser
/// than the editing-transform tolerance because camera poses routinely
/// arrive through text files that round their matrix entries.
pub const CAMERA_ROTATION_TOL: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// World-to-camera rotation.
    pub rotation: Matrix3<f64>,
    /// World-to-camera translation.
    pub translation: Vector3<f64>,
}

impl Camera {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        if !(fx.is_finite() && fy.is_finite() && fx > 0.0 && fy > 0.0) {
            return Err(Error::validation(format!(
                "focal lengths must be positive and finite, got fx={fx}, fy={fy}"
            )));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::validation("principal point must be finite"));
        }
        if width == 0 || height == 0 {
            return Err(Error::validation(format!(
                "image size must be at least 1x1, got {width}x{height}"
            )));
        }
        let residual = (rotation.transpose() * rotation - Matrix3::identity())
            .abs()
            .max();
        if !residual.is_finite() || residual > CAMERA_ROTATION_TOL {
            return Err(Error::validation(format!(
                "camera rotation is not orthonormal (max residual {residual:.3e}, tolerance {CAMERA_ROTATION_TOL:.0e})"
            )));
        }
        if !(translation.x.is_finite() && translation.y.is_finite() && translation.z.is_finite()) {
            return Err(Error::validation("camera translation must be finite"));
        }
        Ok(Camera {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation,
            translation,
        })
    }

    /// The virtual camera for pyramid level `t`: intrinsics divided by
    /// `2^t` and image size floor-divided by `2^t`.
    pub fn level(&self, t: usize) -> Result<Camera> {
        if t >= LEVELS {
            return Err(Error::IndexOutOfRange {
                what: "pyramid level".into(),
                index: t,
                len: LEVELS,
            });
        }
        let s = (1usize << t) as f64;
        let width = self.width >> t;
        let height = self.height >> t;
        if width == 0 || height == 0 {
            return Err(Error::validation(format!(
                "image {}x{} is too small for pyramid level {t} (needs at least {}x{})",
                self.width,
                self.height,
                1 << t,
                1 << t,
            )));
        }
        Ok(Camera {
            fx: self.fx / s,
            fy: self.fy / s,
            cx: self.cx / s,
            cy: self.cy / s,
            width,
            height,
            rotation: self.rotation,
            translation: self.translation,
        })
    }

    /// Projects a world point; `None` means the point sits at or behind
    /// the near plane. The returned `(u, v)` are continuous pixel
    /// coordinates and `z` is the camera-space depth in meters.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64, f64)> {
        let cam = self.rotation * p + self.translation;
        if cam.z <= Z_NEAR {
            return None;
        }
        let u = self.fx * cam.x / cam.z + self.cx;
        let v = self.fy * cam.y / cam.z + self.cy;
        Some((u, v, cam.z))
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// World-to-camera pose that puts the camera at `eye` looking at
    /// `target`, with `up` fixing the roll. `eye` and `target` must not
    /// coincide, and `up` must not be parallel to the view direction.
    pub fn look_at_pose(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
    ) -> Result<(Matrix3<f64>, Vector3<f64>)> {
        let forward = target - eye;
        if forward.norm() < 1e-12 {
            return Err(Error::validation("look-at eye and target coincide"));
        }
        let z = forward.normalize();
        let x = up.cross(&z);
        if x.norm() < 1e-9 {
            return Err(Error::validation("look-at up vector is parallel to the view direction"));
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let translation = -(rotation * eye);
        Ok((rotation, translation))
    }
}
