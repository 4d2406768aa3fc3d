//! Joint optimization of the descriptor table and the rendering
//! network from posed RGB views, with worst-image scheduling and
//! patch-based steps.

pub mod feature;
pub mod loss;
pub mod metrics;
pub mod optim;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::net::{forward, OmegaNet};
use crate::raster::{build_pyramid, scatter_descriptor_gradients};
use crate::sampler::{
    ground_truth_patch, sample_patch, select_training_set, update_score, ImageScore, PatchOptions,
    PatchSpec,
};
use crate::scene::Scene;
use crate::tensor::{Tape, Tensor, Var};

pub use feature::FixedFeatureNet;
pub use loss::perceptual_distance;
pub use optim::{OptimState, DEFAULT_LR_DESC, DEFAULT_LR_THETA};

/// Knobs for one training run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Patches drawn per training step.
    pub patches_per_iter: usize,
    pub patch_width: usize,
    pub patch_height: usize,
    /// Fraction of images trained each epoch (worst first).
    pub mc_ratio: f64,
    /// Weight of the fixed-feature perceptual term.
    pub w_perceptual: f32,
    pub w_l1: f32,
    pub w_psnr: f32,
    pub seed: u64,
    /// Zoom interval for patch sampling.
    pub alpha_range: (f64, f64),
    /// Permit patches above the 15% frame-area bound (small scenes).
    pub allow_oversize_patches: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1,
            patches_per_iter: 10,
            patch_width: 256,
            patch_height: 256,
            mc_ratio: 0.8,
            w_perceptual: 1.0,
            w_l1: 0.0,
            w_psnr: 0.0,
            seed: 0,
            alpha_range: (1.0, 1.0),
            allow_oversize_patches: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mc_ratio > 0.0 && self.mc_ratio <= 1.0) {
            return Err(Error::validation(format!(
                "selection ratio {} must lie in (0, 1]",
                self.mc_ratio
            )));
        }
        if self.patches_per_iter == 0 {
            return Err(Error::validation("need at least one patch per step"));
        }
        let weights = [self.w_perceptual, self.w_l1, self.w_psnr];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::validation(format!(
                "loss weights must be finite and nonnegative, got {weights:?}"
            )));
        }
        if weights.iter().all(|&w| w == 0.0) {
            return Err(Error::validation("all loss weights are zero; nothing to optimize"));
        }
        if self.patch_width < 8 || self.patch_height < 8 {
            return Err(Error::validation(format!(
                "patch {}x{} is smaller than the 8x8 pyramid minimum",
                self.patch_width, self.patch_height
            )));
        }
        Ok(())
    }

    fn patch_options(&self) -> PatchOptions {
        PatchOptions {
            width: self.patch_width,
            height: self.patch_height,
            alpha_range: self.alpha_range,
            allow_oversize: self.allow_oversize_patches,
        }
    }
}

/// One training view: a posed camera and its ground-truth image.
#[derive(Debug, Clone)]
pub struct TrainView {
    pub image_id: u32,
    pub camera: Camera,
    pub image: Tensor<f32>,
}

impl TrainView {
    pub fn new(image_id: u32, camera: Camera, image: Tensor<f32>) -> Result<Self> {
        validate_view_image(&camera, &image)?;
        Ok(TrainView {
            image_id,
            camera,
            image,
        })
    }
}

fn validate_view_image(camera: &Camera, image: &Tensor<f32>) -> Result<()> {
    match image.shape().as_chw() {
        Some((3, h, w)) if h == camera.height && w == camera.width => Ok(()),
        _ => Err(Error::shape(
            "training image",
            format!("(3, {}, {})", camera.height, camera.width),
            image.shape().to_string(),
        )),
    }
}

/// Per-patch gradient bundle produced on a worker.
struct PatchGrads {
    loss: f32,
    theta: Vec<Vec<f32>>,
    descriptors: std::collections::BTreeMap<u32, Vec<f32>>,
}

fn patch_pass(
    scene: &Scene,
    net: &OmegaNet<f32>,
    feature_net: &FixedFeatureNet<f32>,
    cfg: &TrainConfig,
    vcam: &Camera,
    gt: &Tensor<f32>,
) -> Result<PatchGrads> {
    let pyramid = build_pyramid(scene, vcam)?;
    let mut tape: Tape<f32> = Tape::new();
    let vars = net.load_onto(&mut tape, true)?;
    let desc: Vec<Var> = pyramid
        .levels
        .iter()
        .map(|l| tape.param(&l.descriptor_image))
        .collect::<Result<Vec<_>>>()?;
    let out = forward(&mut tape, &vars, &desc)?;
    let gt_var = tape.constant(gt)?;

    let mut total: Option<Var> = None;
    let mut add_term = |tape: &mut Tape<f32>, term: Var, weight: f32| -> Result<()> {
        let scaled = tape.scale(term, weight)?;
        total = Some(match total {
            None => scaled,
            Some(t) => tape.add(t, scaled)?,
        });
        Ok(())
    };
    if cfg.w_perceptual > 0.0 {
        let term = loss::perceptual_loss(&mut tape, feature_net, out, gt_var)?;
        add_term(&mut tape, term, cfg.w_perceptual)?;
    }
    if cfg.w_l1 > 0.0 {
        let term = loss::l1_loss(&mut tape, out, gt_var)?;
        add_term(&mut tape, term, cfg.w_l1)?;
    }
    if cfg.w_psnr > 0.0 {
        let term = loss::psnr_loss(&mut tape, out, gt_var)?;
        add_term(&mut tape, term, cfg.w_psnr)?;
    }
    let loss_var = total.expect("validated config has a positive weight");
    let loss = tape.scalar_value(loss_var)?;
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("patch loss is {loss}")));
    }
    tape.backward(loss_var)?;

    let theta = vars
        .var_list()
        .iter()
        .map(|&v| {
            tape.grad(v)
                .map(|g| g.to_vec())
                .unwrap_or_else(|| vec![0.0; tape.shape(v).numel()])
        })
        .collect();
    let level_grads: Vec<Tensor<f32>> = desc
        .iter()
        .map(|&v| {
            let data = tape
                .grad(v)
                .map(|g| g.to_vec())
                .unwrap_or_else(|| vec![0.0; tape.shape(v).numel()]);
            Tensor::new(tape.shape(v), data)
        })
        .collect::<Result<Vec<_>>>()?;
    let descriptors = scatter_descriptor_gradients(&level_grads, &pyramid)?;

    Ok(PatchGrads {
        loss,
        theta,
        descriptors,
    })
}

/// One optimization step on one view: draws patches, accumulates their
/// gradients, and applies an optimizer update to the network and to
/// the descriptor rows of points visible in at least one patch. Rows
/// of unseen points keep their exact bits. Returns the mean patch
/// loss.
pub fn train_step(
    scene: &mut Scene,
    net: &mut OmegaNet<f32>,
    feature_net: &FixedFeatureNet<f32>,
    optim: &mut OptimState,
    cfg: &TrainConfig,
    view: &TrainView,
    rng: &mut ChaCha8Rng,
) -> Result<f32> {
    cfg.validate()?;
    validate_view_image(&view.camera, &view.image)?;
    if cfg.w_perceptual > 0.0 {
        let min_side = feature_net.min_input_side();
        if cfg.patch_width < min_side || cfg.patch_height < min_side {
            return Err(Error::validation(format!(
                "perceptual loss needs patches of at least {min_side}x{min_side}, got {}x{}",
                cfg.patch_width, cfg.patch_height
            )));
        }
    }

    let opts = cfg.patch_options();
    let mut draws: Vec<(PatchSpec, Camera)> = Vec::with_capacity(cfg.patches_per_iter);
    for _ in 0..cfg.patches_per_iter {
        draws.push(sample_patch(&view.camera, &opts, view.image_id, rng)?);
    }
    let gts: Vec<Tensor<f32>> = draws
        .iter()
        .map(|(spec, _)| ground_truth_patch(&view.image, spec))
        .collect::<Result<Vec<_>>>()?;

    let step = optim.step + 1;
    let describe_patches = || -> String {
        draws
            .iter()
            .map(|(s, _)| {
                let (x0, y0) = s.corner();
                format!("image {} @({x0},{y0})", s.source_image_id)
            })
            .collect::<Vec<_>>()
            .join(", ")
    };

    // Patches are independent; workers build private tapes and the
    // results are reduced in draw order, so thread count never changes
    // the outcome.
    let results: Vec<Result<PatchGrads>> = draws
        .par_iter()
        .zip(&gts)
        .map(|((_, vcam), gt)| patch_pass(scene, net, feature_net, cfg, vcam, gt))
        .collect();

    let mut acc: Option<PatchGrads> = None;
    let mut loss_sum = 0.0f64;
    for result in results {
        let grads = result.map_err(|e| match e {
            Error::Numerical(msg) => Error::Numerical(format!(
                "training step {step} ({}): {msg}",
                describe_patches()
            )),
            other => other,
        })?;
        loss_sum += grads.loss as f64;
        match &mut acc {
            None => acc = Some(grads),
            Some(total) => {
                for (t, g) in total.theta.iter_mut().zip(&grads.theta) {
                    for (a, b) in t.iter_mut().zip(g) {
                        *a += b;
                    }
                }
                for (point, row) in grads.descriptors {
                    match total.descriptors.entry(point) {
                        std::collections::btree_map::Entry::Vacant(e) => {
                            e.insert(row);
                        }
                        std::collections::btree_map::Entry::Occupied(mut e) => {
                            for (a, b) in e.get_mut().iter_mut().zip(&row) {
                                *a += b;
                            }
                        }
                    }
                }
            }
        }
    }
    let mut total = acc.expect("at least one patch");
    let scale = 1.0 / cfg.patches_per_iter as f32;
    for tensor in &mut total.theta {
        for g in tensor {
            *g *= scale;
        }
    }
    for row in total.descriptors.values_mut() {
        for g in row {
            *g *= scale;
        }
    }
    let mean_loss = (loss_sum / cfg.patches_per_iter as f64) as f32;
    if !mean_loss.is_finite() {
        return Err(Error::Numerical(format!(
            "training step {step} ({}): mean loss is {mean_loss}",
            describe_patches()
        )));
    }

    optim.apply(net, &mut scene.descriptors, &total.theta, &total.descriptors)?;
    Ok(mean_loss)
}

/// One line of the training log.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainLogRecord {
    pub epoch: usize,
    pub step: u64,
    pub image_id: u32,
    pub loss: f64,
}

/// Trains for `cfg.epochs` epochs. Each epoch selects the worst
/// `mc_ratio` share of views (never-trained views first), visits them
/// in seeded-shuffled order, and refreshes each view's quality score
/// with its fresh mean patch loss. `on_epoch` runs after every epoch
/// (checkpointing hook).
pub fn fit(
    scene: &mut Scene,
    net: &mut OmegaNet<f32>,
    feature_net: &FixedFeatureNet<f32>,
    views: &[TrainView],
    optim: &mut OptimState,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &OmegaNet<f32>, &Scene, &[ImageScore]) -> Result<()>,
) -> Result<Vec<TrainLogRecord>> {
    cfg.validate()?;
    if views.is_empty() {
        return Err(Error::validation("no training views supplied"));
    }
    let mut seen = std::collections::BTreeSet::new();
    for view in views {
        validate_view_image(&view.camera, &view.image)?;
        if !seen.insert(view.image_id) {
            return Err(Error::validation(format!(
                "duplicate image id {} in training views",
                view.image_id
            )));
        }
    }

    let mut scores: Vec<ImageScore> = views.iter().map(|v| ImageScore::fresh(v.image_id)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = Vec::new();

    for epoch in 0..cfg.epochs {
        let mut selected = select_training_set(&scores, cfg.mc_ratio)?;
        selected.shuffle(&mut rng);
        for image_id in selected {
            let view = views
                .iter()
                .find(|v| v.image_id == image_id)
                .expect("selected id comes from the score table");
            let loss = train_step(scene, net, feature_net, optim, cfg, view, &mut rng)?;
            update_score(&mut scores, image_id, loss as f64)?;
            log.push(TrainLogRecord {
                epoch,
                step: optim.step,
                image_id,
                loss: loss as f64,
            });
        }
        on_epoch(epoch, net, scene, &scores)?;
    }
    Ok(log)
}
