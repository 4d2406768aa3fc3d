//! Training-efficiency strategies: worst-image selection by tracked
//! quality scores, and patch sampling through virtual camera
//! intrinsics so that training never has to rasterize or decode a
//! full frame.

use rand::Rng;

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

/// Largest share of a source frame's area a training patch may cover.
pub const MAX_PATCH_FRACTION: f64 = 0.15;

/// Last observed synthesis quality for one training image. Higher `q`
/// means worse reconstruction, so the image is more urgent to train.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ImageScore {
    pub image_id: u32,
    /// Most recent loss observed for this image; finite, nonnegative.
    pub q: f64,
    /// True until the image has been trained on at least once. Stale
    /// images sort as worst so every image gets a first pass.
    pub stale: bool,
}

impl ImageScore {
    pub fn fresh(image_id: u32) -> Self {
        ImageScore {
            image_id,
            q: 0.0,
            stale: true,
        }
    }
}

/// A sampled training patch: its size, zoom, and the principal-point
/// shift that places it inside the source frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSpec {
    pub width: usize,
    pub height: usize,
    /// Focal zoom factor applied to the source intrinsics.
    pub zoom: f64,
    /// Principal-point shift (xΔ, yΔ) = (−x0, −y0) for a patch whose
    /// top-left corner sits at (x0, y0) on the (zoomed) image plane.
    pub shift: (i64, i64),
    pub source_image_id: u32,
}

impl PatchSpec {
    /// Top-left corner (x0, y0) of the patch on the zoomed plane.
    pub fn corner(&self) -> (i64, i64) {
        (-self.shift.0, -self.shift.1)
    }
}

/// How patches are drawn from source frames.
#[derive(Debug, Clone)]
pub struct PatchOptions {
    pub width: usize,
    pub height: usize,
    /// Inclusive zoom interval the factor is drawn from uniformly.
    pub alpha_range: (f64, f64),
    /// Skips the area-fraction bound. Needed for full-frame "patches"
    /// on small debugging scenes; leave off for real training.
    pub allow_oversize: bool,
}

impl PatchOptions {
    /// Zoom disabled, fraction bound enforced.
    pub fn new(width: usize, height: usize) -> Self {
        PatchOptions {
            width,
            height,
            alpha_range: (1.0, 1.0),
            allow_oversize: false,
        }
    }
}

/// Returns the `ceil(ratio * n)` image ids most in need of training:
/// stale images first, then by `q` descending, ties by id ascending.
pub fn select_training_set(scores: &[ImageScore], ratio: f64) -> Result<Vec<u32>> {
    if scores.is_empty() {
        return Err(Error::validation("cannot select a training set from zero images"));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::validation(format!(
            "selection ratio {ratio} must lie in (0, 1]"
        )));
    }
    for s in scores {
        if !s.q.is_finite() || s.q < 0.0 {
            return Err(Error::validation(format!(
                "image {} has invalid score {}",
                s.image_id, s.q
            )));
        }
    }
    let take = (ratio * scores.len() as f64).ceil() as usize;
    let mut order: Vec<&ImageScore> = scores.iter().collect();
    order.sort_by(|a, b| {
        b.stale
            .cmp(&a.stale)
            .then_with(|| b.q.total_cmp(&a.q))
            .then_with(|| a.image_id.cmp(&b.image_id))
    });
    Ok(order.into_iter().take(take).map(|s| s.image_id).collect())
}

/// Records a freshly measured loss for an image and clears its stale
/// flag. The id must already be in the table.
pub fn update_score(scores: &mut [ImageScore], image_id: u32, q: f64) -> Result<()> {
    if !q.is_finite() || q < 0.0 {
        return Err(Error::validation(format!(
            "score for image {image_id} must be finite and nonnegative, got {q}"
        )));
    }
    let entry = scores
        .iter_mut()
        .find(|s| s.image_id == image_id)
        .ok_or_else(|| Error::validation(format!("unknown image id {image_id} in score table")))?;
    entry.q = q;
    entry.stale = false;
    Ok(())
}

/// Checks the patch-area bound and returns the covered fraction.
pub fn patch_fraction(cam: &Camera, width: usize, height: usize) -> f64 {
    (width * height) as f64 / (cam.width * cam.height) as f64
}

/// Draws one training patch: a zoom factor uniform over the
/// configured interval, then an integer top-left corner uniform over
/// the positions where the patch fits on the zoomed plane. The
/// returned virtual camera has the patch's size, zoomed focal
/// lengths, and the principal point shifted by (−x0, −y0); its pose
/// is the source pose. With zoom 1 the virtual camera's raster is an
/// exact crop of the source raster.
pub fn sample_patch<R: Rng>(
    cam: &Camera,
    opts: &PatchOptions,
    source_image_id: u32,
    rng: &mut R,
) -> Result<(PatchSpec, Camera)> {
    let (w, h) = (opts.width, opts.height);
    if w == 0 || h == 0 || w > cam.width || h > cam.height {
        return Err(Error::validation(format!(
            "patch {w}x{h} does not fit a {}x{} frame",
            cam.width, cam.height
        )));
    }
    let (lo, hi) = opts.alpha_range;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
        return Err(Error::validation(format!(
            "zoom interval [{lo}, {hi}] must be positive and ordered"
        )));
    }
    let fraction = patch_fraction(cam, w, h);
    if fraction > MAX_PATCH_FRACTION && !opts.allow_oversize {
        return Err(Error::validation(format!(
            "patch {w}x{h} covers {:.2}% of the {}x{} frame, above the 15% bound",
            fraction * 100.0,
            cam.width,
            cam.height
        )));
    }

    let alpha = if lo == hi { lo } else { rng.random_range(lo..=hi) };
    // With zoom the image plane effectively scales by alpha; place the
    // corner anywhere the patch still fits on it.
    let plane_w = (alpha * cam.width as f64).floor() as usize;
    let plane_h = (alpha * cam.height as f64).floor() as usize;
    if plane_w < w || plane_h < h {
        return Err(Error::validation(format!(
            "zoom {alpha} shrinks the image plane to {plane_w}x{plane_h}, smaller than the patch"
        )));
    }
    let x0 = rng.random_range(0..=(plane_w - w) as i64);
    let y0 = rng.random_range(0..=(plane_h - h) as i64);

    let virtual_cam = Camera::new(
        alpha * cam.fx,
        alpha * cam.fy,
        cam.cx - x0 as f64,
        cam.cy - y0 as f64,
        w,
        h,
        cam.rotation,
        cam.translation,
    )?;
    let spec = PatchSpec {
        width: w,
        height: h,
        zoom: alpha,
        shift: (-x0, -y0),
        source_image_id,
    };
    Ok((spec, virtual_cam))
}

/// Cuts the ground-truth pixels for a patch out of the source image
/// (channels × height × width). Zoom 1 copies rows bitwise; other
/// zooms resample bilinearly at the patch's pixel centers mapped back
/// through the zoom.
pub fn ground_truth_patch(image: &Tensor<f32>, spec: &PatchSpec) -> Result<Tensor<f32>> {
    let (c, ih, iw) = image.shape().as_chw().ok_or_else(|| {
        Error::shape("ground-truth image", "channels x height x width", format!("{}", image.shape()))
    })?;
    let (x0, y0) = spec.corner();
    let (w, h) = (spec.width, spec.height);
    let mut out = vec![0.0f32; c * h * w];

    if spec.zoom == 1.0 {
        if x0 < 0 || y0 < 0 || x0 as usize + w > iw || y0 as usize + h > ih {
            return Err(Error::validation(format!(
                "patch corner ({x0}, {y0}) size {w}x{h} leaves the {iw}x{ih} image"
            )));
        }
        let (x0, y0) = (x0 as usize, y0 as usize);
        for ch in 0..c {
            for row in 0..h {
                let src = ch * ih * iw + (y0 + row) * iw + x0;
                let dst = ch * h * w + row * w;
                out[dst..dst + w].copy_from_slice(&image.data()[src..src + w]);
            }
        }
    } else {
        // Patch pixel center j+0.5 sits at source plane coordinate
        // (j + 0.5 + x0) / zoom; sample with clamped borders.
        let sample = |data: &[f32], ch: usize, ux: f64, uy: f64| -> f32 {
            let fx = (ux - 0.5).clamp(0.0, (iw - 1) as f64);
            let fy = (uy - 0.5).clamp(0.0, (ih - 1) as f64);
            let (ix0, iy0) = (fx.floor() as usize, fy.floor() as usize);
            let (ix1, iy1) = ((ix0 + 1).min(iw - 1), (iy0 + 1).min(ih - 1));
            let (tx, ty) = ((fx - ix0 as f64) as f32, (fy - iy0 as f64) as f32);
            let at = |y: usize, x: usize| data[ch * ih * iw + y * iw + x];
            let top = at(iy0, ix0) * (1.0 - tx) + at(iy0, ix1) * tx;
            let bot = at(iy1, ix0) * (1.0 - tx) + at(iy1, ix1) * tx;
            top * (1.0 - ty) + bot * ty
        };
        for ch in 0..c {
            for row in 0..h {
                let uy = (row as f64 + 0.5 + y0 as f64) / spec.zoom;
                for col in 0..w {
                    let ux = (col as f64 + 0.5 + x0 as f64) / spec.zoom;
                    out[ch * h * w + row * w + col] = sample(image.data(), ch, ux, uy);
                }
            }
        }
    }
    Tensor::new(Shape::chw(c, h, w), out)
}
