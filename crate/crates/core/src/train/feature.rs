//! A fixed, seeded convolutional feature pyramid that stands in for a
//! pretrained perceptual backbone. Its weights are drawn once from a
//! documented generator and never trained, so feature distances are
//! bit-reproducible everywhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::net::Conv;
use crate::tensor::{Scalar, Tape, Var};

/// Channel widths of the four feature stages.
pub const FEATURE_WIDTHS: [usize; 4] = [8, 16, 32, 64];

/// Seed the stage weights are drawn from.
pub const FEATURE_SEED: u64 = 0;

/// Four stages of conv 3x3 -> elu -> 2x2 average pool over an RGB
/// input; stage outputs are the perceptual feature layers.
#[derive(Debug, Clone)]
pub struct FixedFeatureNet<T: Scalar> {
    stages: Vec<Conv<T>>,
}

impl FixedFeatureNet<f32> {
    /// The canonical instance: weights from the documented seed.
    pub fn standard() -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(FEATURE_SEED);
        let mut stages = Vec::with_capacity(FEATURE_WIDTHS.len());
        let mut c_in = 3;
        for &c_out in &FEATURE_WIDTHS {
            stages.push(Conv::init(c_in, c_out, 3, &mut rng));
            c_in = c_out;
        }
        FixedFeatureNet { stages }
    }
}

impl<T: Scalar> FixedFeatureNet<T> {
    pub fn cast<U: Scalar>(&self) -> FixedFeatureNet<U> {
        FixedFeatureNet {
            stages: self.stages.iter().map(|c| c.cast()).collect(),
        }
    }

    /// Number of feature layers produced.
    pub fn layer_count(&self) -> usize {
        self.stages.len()
    }

    /// Smallest image side the stage chain can pool down.
    pub fn min_input_side(&self) -> usize {
        1 << self.stages.len()
    }

    /// Runs the stages over `x` (3, h, w) on the tape, returning one
    /// feature map per stage. Weights enter as non-trainable leaves,
    /// so gradients flow only to `x`.
    pub fn features(&self, tape: &mut Tape<T>, x: Var) -> Result<Vec<Var>> {
        let mut features = Vec::with_capacity(self.stages.len());
        let mut cur = x;
        for conv in &self.stages {
            let w = tape.constant(&conv.weight)?;
            let b = tape.constant(&conv.bias)?;
            let y = tape.conv2d(cur, w, b, conv.c_out, conv.k)?;
            let y = tape.elu(y)?;
            let y = tape.avg_pool2(y)?;
            features.push(y);
            cur = y;
        }
        Ok(features)
    }
}
