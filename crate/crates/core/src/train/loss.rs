//! Differentiable training losses, built on the tape so gradients
//! reach both the rendered image and, through it, the descriptors and
//! network weights.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tape, Tensor, Var};
use crate::train::feature::FixedFeatureNet;

fn check_rgb_pair<T: Scalar>(tape: &Tape<T>, img: Var, gt: Var, what: &str) -> Result<()> {
    let shape = tape.shape(img);
    if shape != tape.shape(gt) {
        return Err(Error::shape(
            what.to_string(),
            shape.to_string(),
            tape.shape(gt).to_string(),
        ));
    }
    match shape.as_chw() {
        Some((3, _, _)) => Ok(()),
        _ => Err(Error::shape(what.to_string(), "(3, h, w) image", shape.to_string())),
    }
}

/// Feature-space distance: the mean absolute difference of each fixed
/// feature layer, summed over layers.
pub fn perceptual_loss<T: Scalar>(
    tape: &mut Tape<T>,
    feature_net: &FixedFeatureNet<T>,
    img: Var,
    gt: Var,
) -> Result<Var> {
    check_rgb_pair(tape, img, gt, "perceptual loss")?;
    let img_feats = feature_net.features(tape, img)?;
    let gt_feats = feature_net.features(tape, gt)?;
    let mut total: Option<Var> = None;
    for (fi, fg) in img_feats.into_iter().zip(gt_feats) {
        let diff = tape.sub(fi, fg)?;
        let diff = tape.abs(diff)?;
        let layer = tape.mean_all(diff)?;
        total = Some(match total {
            None => layer,
            Some(t) => tape.add(t, layer)?,
        });
    }
    total.ok_or_else(|| Error::validation("feature net produced no layers"))
}

/// Forward-only perceptual distance between two stored images.
pub fn perceptual_distance(
    feature_net: &FixedFeatureNet<f32>,
    a: &Tensor<f32>,
    b: &Tensor<f32>,
) -> Result<f64> {
    let mut tape = Tape::<f32>::new();
    let va = tape.constant(a)?;
    let vb = tape.constant(b)?;
    let loss = perceptual_loss(&mut tape, feature_net, va, vb)?;
    Ok(tape.value(loss)[0] as f64)
}

/// Mean absolute pixel difference.
pub fn l1_loss<T: Scalar>(tape: &mut Tape<T>, img: Var, gt: Var) -> Result<Var> {
    check_rgb_pair(tape, img, gt, "l1 loss")?;
    let diff = tape.sub(img, gt)?;
    let diff = tape.abs(diff)?;
    tape.mean_all(diff)
}

/// Log mean-squared error in decibels, shifted to stay nonnegative:
/// `10 * log10(1 + mse / 1e-10)`. Identical images give exactly 0, and
/// for any visible error the gradient matches `10 * log10(mse)`, so
/// driving this down raises PSNR.
pub fn psnr_loss<T: Scalar>(tape: &mut Tape<T>, img: Var, gt: Var) -> Result<Var> {
    check_rgb_pair(tape, img, gt, "psnr loss")?;
    let diff = tape.sub(img, gt)?;
    let sq = tape.mul(diff, diff)?;
    let mse = tape.mean_all(sq)?;
    let scaled = tape.scale(mse, T::from_f64(1e10))?;
    let shifted = tape.add_const(scaled, T::one())?;
    let ln = tape.ln(shifted)?;
    tape.scale(ln, T::from_f64(10.0 / std::f64::consts::LN_10))
}
