//! The scene representation: a point cloud paired row-for-row with a
//! table of learnable descriptor vectors, plus the geometric selection
//! and rigid-motion primitives that editing builds on.
//!
//! Scenes are immutable values — every operation returns a new scene —
//! so they can be shared freely across renderer threads. A point's
//! identity is its array index; descriptors, gradients, and edits all
//! refer to points by index, and no operation ever permutes positions
//! relative to descriptor rows.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// World-space positions of the scene's points, in meters.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    positions: Vec<Vector3<f64>>,
}

impl PointCloud {
    pub fn new(positions: Vec<Vector3<f64>>) -> Result<Self> {
        for (i, p) in positions.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::validation(format!(
                    "point {i} has a non-finite coordinate: ({}, {}, {})",
                    p.x, p.y, p.z
                )));
            }
        }
        Ok(PointCloud { positions })
    }

    pub fn empty() -> Self {
        PointCloud { positions: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }
}

/// N x d matrix of per-point descriptor vectors, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorTable {
    dim: usize,
    values: Vec<f32>,
}

/// Default descriptor dimensionality.
pub const DESCRIPTOR_DIM: usize = 8;

/// Half-width of the uniform descriptor initialization range. A small
/// symmetric init keeps early renders near mid-gray and trains stably.
pub const DESCRIPTOR_INIT_RANGE: f32 = 0.05;

impl DescriptorTable {
    pub fn new(dim: usize, values: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::validation("descriptor dimension must be >= 1"));
        }
        if values.len() % dim != 0 {
            return Err(Error::shape(
                "descriptor table",
                format!("a multiple of {dim} values"),
                format!("{} values", values.len()),
            ));
        }
        Ok(DescriptorTable { dim, values })
    }

    pub fn zeros(n: usize, dim: usize) -> Result<Self> {
        Self::new(dim, vec![0.0; n * dim])
    }

    /// Fresh table of `n` rows drawn i.i.d. uniform in
    /// [-DESCRIPTOR_INIT_RANGE, DESCRIPTOR_INIT_RANGE] from a seeded
    /// generator; the same `(n, d, seed)` always yields the same bits.
    pub fn init_uniform(n: usize, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::validation("descriptor dimension must be >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..n * dim)
            .map(|_| rng.random_range(-DESCRIPTOR_INIT_RANGE..=DESCRIPTOR_INIT_RANGE))
            .collect();
        Ok(DescriptorTable { dim, values })
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }
}

/// A point cloud bound to its descriptor table.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub name: String,
    pub cloud: PointCloud,
    pub descriptors: DescriptorTable,
}

impl Scene {
    pub fn new(name: impl Into<String>, cloud: PointCloud, descriptors: DescriptorTable) -> Result<Self> {
        if cloud.len() != descriptors.len() {
            return Err(Error::shape(
                "scene construction",
                format!("{} descriptor rows", cloud.len()),
                format!("{} descriptor rows", descriptors.len()),
            ));
        }
        Ok(Scene {
            name: name.into(),
            cloud,
            descriptors,
        })
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    /// Indices of all points inside the closed box, ascending.
    pub fn select_points(&self, region: &AABox) -> Vec<usize> {
        self.cloud
            .positions()
            .iter()
            .enumerate()
            .filter(|(_, p)| region.contains(p))
            .map(|(i, _)| i)
            .collect()
    }

    /// Applies a rigid motion to the selected points, leaving their
    /// descriptor rows and all other points untouched.
    pub fn transform_points(&self, indices: &[usize], rt: &RigidTransform) -> Result<Scene> {
        self.check_indices(indices)?;
        let mut positions = self.cloud.positions().to_vec();
        for &i in indices {
            positions[i] = rt.apply(&positions[i]);
        }
        Ok(Scene {
            name: self.name.clone(),
            cloud: PointCloud::new(positions)?,
            descriptors: self.descriptors.clone(),
        })
    }

    /// Drops the selected points and their descriptor rows in lockstep;
    /// survivors keep their relative order.
    pub fn remove_points(&self, indices: &[usize]) -> Result<Scene> {
        self.check_indices(indices)?;
        let mut keep = vec![true; self.len()];
        for &i in indices {
            keep[i] = false;
        }
        let dim = self.descriptors.dim();
        let mut positions = Vec::with_capacity(self.len() - indices.len());
        let mut values = Vec::with_capacity((self.len() - indices.len()) * dim);
        for (i, p) in self.cloud.positions().iter().enumerate() {
            if keep[i] {
                positions.push(*p);
                values.extend_from_slice(self.descriptors.row(i));
            }
        }
        Ok(Scene {
            name: self.name.clone(),
            cloud: PointCloud::new(positions)?,
            descriptors: DescriptorTable::new(dim, values)?,
        })
    }

    /// Appends `other`'s points and descriptor rows after this scene's
    /// (row order: self first). Descriptor dimensions must agree.
    pub fn concat(&self, other: &Scene) -> Result<Scene> {
        if self.descriptors.dim() != other.descriptors.dim() {
            return Err(Error::shape(
                "scene concatenation",
                format!("descriptor dim {}", self.descriptors.dim()),
                format!("descriptor dim {}", other.descriptors.dim()),
            ));
        }
        let mut positions = self.cloud.positions().to_vec();
        positions.extend_from_slice(other.cloud.positions());
        let mut values = self.descriptors.values().to_vec();
        values.extend_from_slice(other.descriptors.values());
        Ok(Scene {
            name: self.name.clone(),
            cloud: PointCloud::new(positions)?,
            descriptors: DescriptorTable::new(self.descriptors.dim(), values)?,
        })
    }

    fn check_indices(&self, indices: &[usize]) -> Result<()> {
        for &i in indices {
            if i >= self.len() {
                return Err(Error::IndexOutOfRange {
                    what: "scene points".into(),
                    index: i,
                    len: self.len(),
                });
            }
        }
        Ok(())
    }
}

/// Closed axis-aligned box; points on the boundary count as inside.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AABox {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl AABox {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Result<Self> {
        if !(min.x <= max.x && min.y <= max.y && min.z <= max.z) {
            return Err(Error::validation(format!(
                "box min must be <= max componentwise, got min ({}, {}, {}) max ({}, {}, {})",
                min.x, min.y, min.z, max.x, max.y, max.z
            )));
        }
        Ok(AABox { min, max })
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }
}

/// Tolerance for accepting a matrix as a rotation.
pub const ROTATION_TOL: f64 = 1e-6;

/// Proper rigid motion `p -> R p + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let residual = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if !residual.is_finite() || residual > ROTATION_TOL {
            return Err(Error::validation(format!(
                "rotation is not orthonormal (max residual {residual:.3e}, tolerance {ROTATION_TOL:.0e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::validation(format!(
                "rotation determinant must be +1, got {det}"
            )));
        }
        if !(translation.x.is_finite() && translation.y.is_finite() && translation.z.is_finite()) {
            return Err(Error::validation("translation must be finite"));
        }
        Ok(RigidTransform { rotation, translation })
    }

    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn translation_only(t: Vector3<f64>) -> Result<Self> {
        Self::new(Matrix3::identity(), t)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_scene(n: usize) -> Scene {
        let positions = (0..n)
            .map(|i| {
                let f = i as f64;
                Vector3::new(f.sin(), (f * 0.7).cos(), 2.0 + (f * 0.3).sin())
            })
            .collect();
        Scene::new(
            "test",
            PointCloud::new(positions).unwrap(),
            DescriptorTable::init_uniform(n, 8, 11).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn init_descriptors_empty_case() {
        let t = DescriptorTable::init_uniform(0, 8, 0).unwrap();
        assert_eq!(t.len(), 0);
        assert_eq!(t.dim(), 8);
    }

    #[test]
    fn init_descriptors_deterministic() {
        let a = DescriptorTable::init_uniform(5, 8, 7).unwrap();
        let b = DescriptorTable::init_uniform(5, 8, 7).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn init_descriptors_range_and_mean() {
        let t = DescriptorTable::init_uniform(1000, 8, 3).unwrap();
        let mut sum = 0.0f64;
        for &v in t.values() {
            assert!((-0.05..=0.05).contains(&v), "value {v} out of range");
            sum += v as f64;
        }
        let mean = sum / t.values().len() as f64;
        assert!(mean.abs() < 0.005, "mean {mean} too far from zero");
    }

    #[test]
    fn select_full_cover_box() {
        let scene = cube_scene(50);
        let all = AABox::new(Vector3::new(-10.0, -10.0, -10.0), Vector3::new(10.0, 10.0, 10.0)).unwrap();
        assert_eq!(scene.select_points(&all), (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn select_degenerate_box_hits_exact_point() {
        let scene = cube_scene(10);
        let p = scene.cloud.positions()[3];
        let bx = AABox::new(p, p).unwrap();
        assert_eq!(scene.select_points(&bx), vec![3]);
    }

    #[test]
    fn select_matches_linear_scan_oracle() {
        let scene = cube_scene(200);
        let bx = AABox::new(Vector3::new(-0.5, -0.6, 1.5), Vector3::new(0.7, 0.9, 2.4)).unwrap();
        let got = scene.select_points(&bx);
        let expect: Vec<usize> = scene
            .cloud
            .positions()
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                (-0.5..=0.7).contains(&p.x) && (-0.6..=0.9).contains(&p.y) && (1.5..=2.4).contains(&p.z)
            })
            .map(|(i, _)| i)
            .collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn transform_identity_is_noop() {
        let scene = cube_scene(20);
        let out = scene
            .transform_points(&(0..20).collect::<Vec<_>>(), &RigidTransform::identity())
            .unwrap();
        assert_eq!(out, scene);
    }

    #[test]
    fn transform_pure_translation() {
        let scene = cube_scene(20);
        let rt = RigidTransform::translation_only(Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let out = scene.transform_points(&(0..20).collect::<Vec<_>>(), &rt).unwrap();
        for (a, b) in scene.cloud.positions().iter().zip(out.cloud.positions()) {
            assert_eq!(b.x, a.x + 1.0);
            assert_eq!(b.y, a.y);
            assert_eq!(b.z, a.z);
        }
    }

    #[test]
    fn transform_preserves_pairwise_distances() {
        let scene = cube_scene(40);
        let angle = 0.83f64;
        let (s, c) = angle.sin_cos();
        let rot = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        let rt = RigidTransform::new(rot, Vector3::new(0.3, -0.2, 1.1)).unwrap();
        let subset: Vec<usize> = (0..40).step_by(3).collect();
        let out = scene.transform_points(&subset, &rt).unwrap();
        for (a_idx, &i) in subset.iter().enumerate() {
            for &j in &subset[a_idx + 1..] {
                let before = (scene.cloud.positions()[i] - scene.cloud.positions()[j]).norm();
                let after = (out.cloud.positions()[i] - out.cloud.positions()[j]).norm();
                assert!((before - after).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn transform_rejects_out_of_range() {
        let scene = cube_scene(5);
        let err = scene
            .transform_points(&[7], &RigidTransform::identity())
            .unwrap_err();
        assert!(err.to_string().contains('7'), "{err}");
    }

    #[test]
    fn transform_then_inverse_returns_positions() {
        let scene = cube_scene(30);
        let angle = -0.41f64;
        let (s, c) = angle.sin_cos();
        let rot = Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c);
        let rt = RigidTransform::new(rot, Vector3::new(2.0, -1.0, 0.5)).unwrap();
        let subset: Vec<usize> = (5..25).collect();
        let round = scene
            .transform_points(&subset, &rt)
            .unwrap()
            .transform_points(&subset, &rt.inverse())
            .unwrap();
        for (a, b) in scene.cloud.positions().iter().zip(round.cloud.positions()) {
            assert!((a - b).norm() < 1e-5);
        }
    }

    #[test]
    fn remove_empty_set_is_identity() {
        let scene = cube_scene(20);
        assert_eq!(scene.remove_points(&[]).unwrap(), scene);
    }

    #[test]
    fn remove_all_yields_empty_scene() {
        let scene = cube_scene(20);
        let out = scene.remove_points(&(0..20).collect::<Vec<_>>()).unwrap();
        assert_eq!(out.len(), 0);
        assert!(out.descriptors.is_empty());
    }

    #[test]
    fn remove_keeps_survivor_pairs_intact() {
        let scene = cube_scene(200);
        // A fixed arbitrary 50-element subset.
        let removed: Vec<usize> = (0..200).filter(|i| (i * 7 + 3) % 13 < 4).take(50).collect();
        assert_eq!(removed.len(), 50);
        let out = scene.remove_points(&removed).unwrap();
        let mut kept = 0usize;
        for i in 0..200 {
            if removed.contains(&i) {
                continue;
            }
            assert_eq!(out.cloud.positions()[kept], scene.cloud.positions()[i]);
            assert_eq!(out.descriptors.row(kept), scene.descriptors.row(i));
            kept += 1;
        }
        assert_eq!(kept, out.len());
    }

    #[test]
    fn remove_selected_leaves_box_empty() {
        let scene = cube_scene(200);
        let bx = AABox::new(Vector3::new(-0.4, -0.8, 1.6), Vector3::new(0.8, 0.5, 2.5)).unwrap();
        let out = scene.remove_points(&scene.select_points(&bx)).unwrap();
        assert!(out.select_points(&bx).is_empty());
    }

    #[test]
    fn rigid_transform_rejects_reflection() {
        let reflect = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(RigidTransform::new(reflect, Vector3::zeros()).is_err());
    }

    #[test]
    fn rigid_transform_rejects_non_orthonormal() {
        let skew = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(RigidTransform::new(skew, Vector3::zeros()).is_err());
    }

    #[test]
    fn aabox_rejects_inverted_bounds() {
        assert!(AABox::new(Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 1.0, 1.0)).is_err());
    }
}
