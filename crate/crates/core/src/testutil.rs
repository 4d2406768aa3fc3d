//! Reference implementations and numeric helpers used by the test
//! suites. Everything here is deliberately brute-force and independent
//! of the production code paths it checks.

use crate::camera::Camera;
use crate::scene::Scene;
use crate::tensor::Tensor;

/// Central finite-difference gradient of `f` at `x`.
///
/// Evaluates `f` twice per coordinate with symmetric perturbation
/// `eps`, so the truncation error is O(eps^2).
pub fn finite_difference_gradient<F>(f: F, x: &[f64], eps: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut work = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let orig = work[i];
        work[i] = orig + eps;
        let hi = f(&work);
        work[i] = orig - eps;
        let lo = f(&work);
        work[i] = orig;
        grad[i] = (hi - lo) / (2.0 * eps);
    }
    grad
}

/// Largest relative disagreement between two gradient vectors, where
/// each component is normalized by `max(1, |a|, |b|)` so near-zero
/// entries are compared absolutely.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "gradient length mismatch");
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

/// Deterministic pseudo-random fill in [-1, 1], good enough for
/// gradient-check inputs without dragging an RNG dependency into every
/// test. Splitmix64 underneath.
pub fn pseudo_random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut state = seed.wrapping_add(0x9e3779b97f4a7c15);
    (0..n)
        .map(|_| {
            state = state.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect()
}

/// Brute-force reference rasterization: for every pixel of level `t`,
/// scan all points and keep the one that projects into that pixel with
/// the lexicographically smallest (depth, index). Returns, per pixel,
/// `Some((point_index, depth))` or `None`.
pub fn brute_force_raster(
    scene: &Scene,
    cam: &Camera,
    t: usize,
) -> (usize, usize, Vec<Option<(u32, f64)>>) {
    let lvl = cam.level(t).expect("valid level");
    let (w, h) = (lvl.width, lvl.height);
    let mut cells: Vec<Option<(u32, f64)>> = vec![None; w * h];
    for py in 0..h {
        for px in 0..w {
            let mut best: Option<(f64, u32)> = None;
            for (i, p) in scene.cloud.positions().iter().enumerate() {
                let Some((u, v, z)) = lvl.project(p) else {
                    continue;
                };
                if u.floor() == px as f64 && v.floor() == py as f64 {
                    let cand = (z, i as u32);
                    if best.map_or(true, |b| cand < b) {
                        best = Some(cand);
                    }
                }
            }
            cells[py * w + px] = best.map(|(z, i)| (i, z));
        }
    }
    (w, h, cells)
}

/// Direct sliding-window SSIM oracle: explicit Gaussian-weighted
/// moments per valid 11x11 window, per channel, averaged. Mirrors the
/// published formula with no separable-filter shortcuts.
pub fn ssim_direct(a: &Tensor<f32>, b: &Tensor<f32>) -> f64 {
    let (c, h, w) = a.shape().as_chw().expect("image tensor");
    assert_eq!(a.shape(), b.shape());
    assert!(h >= 11 && w >= 11, "ssim needs at least 11x11 images");

    let window = gaussian_window_11();
    let c1 = (0.01f64).powi(2);
    let c2 = (0.03f64).powi(2);

    let mut total = 0.0;
    let mut count = 0usize;
    for ch in 0..c {
        let pa = &a.data()[ch * h * w..(ch + 1) * h * w];
        let pb = &b.data()[ch * h * w..(ch + 1) * h * w];
        for cy in 5..h - 5 {
            for cx in 5..w - 5 {
                let (mut mx, mut my) = (0.0f64, 0.0f64);
                let (mut xx, mut yy, mut xy) = (0.0f64, 0.0f64, 0.0f64);
                for dy in 0..11 {
                    for dx in 0..11 {
                        let wgt = window[dy * 11 + dx];
                        let x = pa[(cy + dy - 5) * w + (cx + dx - 5)] as f64;
                        let y = pb[(cy + dy - 5) * w + (cx + dx - 5)] as f64;
                        mx += wgt * x;
                        my += wgt * y;
                        xx += wgt * x * x;
                        yy += wgt * y * y;
                        xy += wgt * x * y;
                    }
                }
                let vx = xx - mx * mx;
                let vy = yy - my * my;
                let cov = xy - mx * my;
                total += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
    }
    total / count as f64
}

/// Normalized 11x11 Gaussian window with sigma 1.5.
pub fn gaussian_window_11() -> Vec<f64> {
    let sigma = 1.5f64;
    let mut win = vec![0.0; 121];
    let mut sum = 0.0;
    for y in 0..11 {
        for x in 0..11 {
            let (dy, dx) = (y as f64 - 5.0, x as f64 - 5.0);
            let v = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            win[y * 11 + x] = v;
            sum += v;
        }
    }
    for v in &mut win {
        *v /= sum;
    }
    win
}
