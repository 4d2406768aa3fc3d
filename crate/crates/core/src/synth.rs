//! Built-in synthetic test scene: a sinusoid-textured ground plane with a
//! box resting on it, ringed by inward-looking cameras. Geometry and
//! ground-truth images are pure functions of the configuration, so two
//! generations with the same inputs are bit-identical.

use crate::camera::Camera;
use crate::raster::{rasterize_level, SENTINEL_EMPTY};
use crate::scene::{DescriptorTable, PointCloud, Scene};
use crate::tensor::{Shape, Tensor};
use crate::{Error, Result};
use nalgebra::Vector3;

/// Color written wherever no point wins a pixel.
pub const BACKGROUND: [f32; 3] = [0.35, 0.55, 0.75];

/// Points on the ground plane (70 x 50 grid over a 4 x 4 square).
pub const PLANE_POINTS: usize = 3_500;
/// Points on the box (five 20 x 15 face grids; the hidden bottom face
/// is skipped so no sample coincides with the plane).
pub const CUBE_POINTS: usize = 1_500;

pub struct SynthViews {
    pub scene: Scene,
    /// Per-point albedo in [0,1], same order as the cloud.
    pub colors: Vec<[f32; 3]>,
    pub cameras: Vec<(u32, Camera)>,
    /// Ground-truth image per camera: nearest-point splat over [`BACKGROUND`].
    pub images: Vec<Tensor<f32>>,
}

fn surface_color(p: &Vector3<f64>) -> [f32; 3] {
    let (x, y, z) = (p.x, p.y, p.z);
    [
        0.5 + 0.45 * (3.1 * x + 1.7 * z + 0.5 * y).sin(),
        0.5 + 0.45 * (2.3 * z - 2.9 * x + 4.1 * y).sin(),
        0.5 + 0.45 * (1.9 * x + 1.3 * y - 2.7 * z).sin(),
    ]
    .map(|v| v as f32)
}

fn plane_points() -> Vec<Vector3<f64>> {
    let (nx, nz) = (70, 50);
    let mut pts = Vec::with_capacity(nx * nz);
    for i in 0..nx {
        for j in 0..nz {
            let x = -2.0 + 4.0 * i as f64 / (nx - 1) as f64;
            let z = -2.0 + 4.0 * j as f64 / (nz - 1) as f64;
            pts.push(Vector3::new(x, 0.0, z));
        }
    }
    pts
}

fn cube_points() -> Vec<Vector3<f64>> {
    // Unit box centered at (0, 0.5, 0): top face plus the four sides.
    let (na, nb) = (20, 15);
    let mut pts = Vec::with_capacity(5 * na * nb);
    for face in 0..5 {
        for i in 0..na {
            for j in 0..nb {
                let a = -0.5 + i as f64 / (na - 1) as f64;
                let b = -0.5 + j as f64 / (nb - 1) as f64;
                let p = match face {
                    0 => Vector3::new(a, 1.0, b),       // top
                    1 => Vector3::new(0.5, 0.5 + b, a), // +x
                    2 => Vector3::new(-0.5, 0.5 + b, a),
                    3 => Vector3::new(a, 0.5 + b, 0.5), // +z
                    _ => Vector3::new(a, 0.5 + b, -0.5),
                };
                pts.push(p);
            }
        }
    }
    pts
}

/// Ring of `count` cameras looking down at the box from above. The
/// steep elevation keeps most of every frame on the textured plane; the
/// angular offset keeps viewpoints off the scene's symmetry axes.
pub fn ring_cameras(count: usize, width: usize, height: usize) -> Result<Vec<(u32, Camera)>> {
    if count == 0 {
        return Err(Error::validation("camera ring needs at least one view"));
    }
    let target = Vector3::new(0.0, 0.35, 0.0);
    let focal = 1.1 * width as f64;
    (0..count)
        .map(|i| {
            let th = 0.37 + std::f64::consts::TAU * i as f64 / count as f64;
            let eye = Vector3::new(2.2 * th.cos(), 3.2, 2.2 * th.sin());
            let (rot, t) = Camera::look_at_pose(eye, target, Vector3::new(0.0, 1.0, 0.0))?;
            let cam = Camera::new(
                focal,
                focal,
                width as f64 / 2.0,
                height as f64 / 2.0,
                width,
                height,
                rot,
                t,
            )?;
            Ok((i as u32, cam))
        })
        .collect()
}

/// Nearest-point splat with coarse fill-in: each pixel takes the color
/// of the full-resolution depth-test winner; pixels left uncovered fall
/// back to the winner of their bin at the next coarser level, level by
/// level, mirroring how the renderer's pyramid fills sampling holes.
/// Pixels empty at every level take [`BACKGROUND`].
pub fn splat_image(scene: &Scene, colors: &[[f32; 3]], cam: &Camera) -> Result<Tensor<f32>> {
    if colors.len() != scene.len() {
        return Err(Error::validation(format!(
            "have {} colors for {} points",
            colors.len(),
            scene.len()
        )));
    }
    let levels = (0..crate::camera::LEVELS)
        .map(|t| rasterize_level(scene, cam, t))
        .collect::<Result<Vec<_>>>()?;
    let (w, h) = (levels[0].width, levels[0].height);
    let mut data = vec![0.0f32; 3 * h * w];
    for y in 0..h {
        for x in 0..w {
            let mut rgb = BACKGROUND;
            for (t, level) in levels.iter().enumerate() {
                let bx = (x >> t).min(level.width - 1);
                let by = (y >> t).min(level.height - 1);
                let winner = level.point_map[by * level.width + bx];
                if winner != SENTINEL_EMPTY {
                    rgb = colors[winner as usize];
                    break;
                }
            }
            for (c, v) in rgb.iter().enumerate() {
                data[c * h * w + y * w + x] = *v;
            }
        }
    }
    Tensor::new(Shape::chw(3, h, w), data)
}

/// Builds the full bundle: 5,000-point scene, camera ring, and one
/// ground-truth image per camera. `seed` shapes only the initial
/// descriptors; everything else is fixed.
pub fn tabletop(view_count: usize, width: usize, height: usize, seed: u64) -> Result<SynthViews> {
    let mut positions = plane_points();
    positions.extend(cube_points());
    debug_assert_eq!(positions.len(), PLANE_POINTS + CUBE_POINTS);
    let colors: Vec<[f32; 3]> = positions.iter().map(surface_color).collect();
    let cloud = PointCloud::new(positions)?;
    let descriptors =
        DescriptorTable::init_uniform(cloud.len(), crate::scene::DESCRIPTOR_DIM, seed)?;
    let scene = Scene::new("tabletop", cloud, descriptors)?;
    let cameras = ring_cameras(view_count, width, height)?;
    let images = cameras
        .iter()
        .map(|(_, cam)| splat_image(&scene, &colors, cam))
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthViews { scene, colors, cameras, images })
}
