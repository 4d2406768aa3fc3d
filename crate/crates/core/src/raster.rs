//! Z-buffer rasterization of descriptor-carrying points.
//!
//! Every pyramid level is an independent rasterization of the full
//! point set through that level's halved intrinsics — coarse levels are
//! NOT downsampled fine levels. Per pixel, the winning point minimizes
//! the pair `(depth, point index)` lexicographically, which makes the
//! result a pure function of the inputs no matter how the point loop is
//! scheduled. Each point lands on at most one pixel per level (nearest
//! binning, no splatting).

use std::collections::BTreeSet;

use crate::camera::{Camera, LEVELS};
use crate::error::{Error, Result};
use crate::scene::Scene;
use crate::tensor::{Scalar, Shape, Tensor};

/// `point_map` marker for pixels no point covers.
pub const SENTINEL_EMPTY: u32 = u32::MAX;

/// One level of the rasterization pyramid.
#[derive(Clone, Debug)]
pub struct RasterLevel {
    pub width: usize,
    pub height: usize,
    /// Descriptor image, `(d, height, width)`; zero vector at
    /// uncovered pixels.
    pub descriptor_image: Tensor<f32>,
    /// Camera-space depth per pixel; +inf where empty.
    pub depth: Vec<f64>,
    /// Winning point index per pixel, or [`SENTINEL_EMPTY`].
    pub point_map: Vec<u32>,
    /// True where any point won the pixel.
    pub coverage: Vec<bool>,
}

/// All [`LEVELS`] rasterization levels for one scene/camera pair.
#[derive(Clone, Debug)]
pub struct RasterPyramid {
    pub levels: Vec<RasterLevel>,
}

/// Rasterizes one pyramid level through the camera's level-`t`
/// intrinsics.
pub fn rasterize_level(scene: &Scene, cam: &Camera, t: usize) -> Result<RasterLevel> {
    let lvl = cam.level(t)?;
    if scene.len() >= SENTINEL_EMPTY as usize {
        return Err(Error::validation(format!(
            "scene has {} points, which exceeds the {} the point map can index",
            scene.len(),
            SENTINEL_EMPTY - 1
        )));
    }
    let (w, h) = (lvl.width, lvl.height);
    let mut depth = vec![f64::INFINITY; w * h];
    let mut point_map = vec![SENTINEL_EMPTY; w * h];

    for (i, p) in scene.cloud.positions().iter().enumerate() {
        let Some((u, v, z)) = lvl.project(p) else {
            continue;
        };
        // Bounds are checked on the continuous coordinates before any
        // integer cast so huge projections cannot wrap.
        let (uf, vf) = (u.floor(), v.floor());
        if uf < 0.0 || vf < 0.0 || uf >= w as f64 || vf >= h as f64 {
            continue;
        }
        let cell = vf as usize * w + uf as usize;
        let candidate = (z, i as u32);
        if candidate < (depth[cell], point_map[cell]) {
            depth[cell] = z;
            point_map[cell] = i as u32;
        }
    }

    let dim = scene.descriptors.dim();
    let mut desc = vec![0.0f32; dim * h * w];
    let mut coverage = vec![false; w * h];
    for (cell, &winner) in point_map.iter().enumerate() {
        if winner == SENTINEL_EMPTY {
            continue;
        }
        coverage[cell] = true;
        let row = scene.descriptors.row(winner as usize);
        for (ch, &value) in row.iter().enumerate() {
            desc[ch * h * w + cell] = value;
        }
    }

    Ok(RasterLevel {
        width: w,
        height: h,
        descriptor_image: Tensor::new(Shape::chw(dim, h, w), desc)?,
        depth,
        point_map,
        coverage,
    })
}

/// Rasterizes all pyramid levels. The image must be at least
/// `2^(LEVELS-1)` on each side so the coarsest level is non-empty.
pub fn build_pyramid(scene: &Scene, cam: &Camera) -> Result<RasterPyramid> {
    let min_side = 1usize << (LEVELS - 1);
    if cam.width < min_side || cam.height < min_side {
        return Err(Error::validation(format!(
            "image {}x{} is too small for {} pyramid levels (needs at least {min_side}x{min_side})",
            cam.width, cam.height, LEVELS
        )));
    }
    let levels = (0..LEVELS)
        .map(|t| rasterize_level(scene, cam, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(RasterPyramid { levels })
}

impl RasterPyramid {
    /// Indices of all points that won at least one pixel on any level —
    /// exactly the points whose descriptors receive gradients from this
    /// view.
    pub fn visible_point_set(&self) -> BTreeSet<u32> {
        let mut set = BTreeSet::new();
        for level in &self.levels {
            for &p in &level.point_map {
                if p != SENTINEL_EMPTY {
                    set.insert(p);
                }
            }
        }
        set
    }
}

/// Per-point descriptor gradient rows, accumulated from rasterized
/// pixel gradients. Points absent from every level get no entry (their
/// gradient is exactly zero).
pub type SparseDescriptorGrads = std::collections::BTreeMap<u32, Vec<f32>>;

/// Accumulates per-pixel descriptor-image gradients back onto the
/// points that produced those pixels. `level_grads` must mirror the
/// pyramid's level shapes.
pub fn scatter_descriptor_gradients<T: Scalar>(
    level_grads: &[Tensor<T>],
    pyramid: &RasterPyramid,
) -> Result<std::collections::BTreeMap<u32, Vec<T>>> {
    if level_grads.len() != pyramid.levels.len() {
        return Err(Error::shape(
            "descriptor gradient scatter",
            format!("{} level gradients", pyramid.levels.len()),
            format!("{}", level_grads.len()),
        ));
    }
    let mut out = std::collections::BTreeMap::new();
    for (grads, level) in level_grads.iter().zip(&pyramid.levels) {
        if grads.shape() != level.descriptor_image.shape() {
            return Err(Error::shape(
                "descriptor gradient scatter",
                level.descriptor_image.shape().to_string(),
                grads.shape().to_string(),
            ));
        }
        let (dim, h, w) = grads.shape().as_chw().expect("level gradient is an image");
        let data = grads.data();
        for (cell, &winner) in level.point_map.iter().enumerate() {
            if winner == SENTINEL_EMPTY {
                continue;
            }
            let row = out.entry(winner).or_insert_with(|| vec![T::zero(); dim]);
            for (ch, slot) in row.iter_mut().enumerate() {
                *slot += data[ch * h * w + cell];
            }
        }
    }
    Ok(out)
}
