//! The rendering network: per-level gate blocks filter raw descriptor
//! images, gated convolutions re-filter fused features, and a
//! coarse-to-fine chain of bilinear upsampling merges the four pyramid
//! scales into one RGB image.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::camera::{Camera, LEVELS};
use crate::error::{Error, Result};
use crate::raster::{build_pyramid, RasterPyramid};
use crate::scene::Scene;
use crate::tensor::{Scalar, Shape, Tape, Tensor, Var};

/// Default channel widths per pyramid level, fine to coarse.
pub const DEFAULT_WIDTHS: [usize; LEVELS] = [16, 32, 64, 128];

/// One convolution's stored weights: `(c_out, c_in, k, k)` flat plus a
/// per-output-channel bias.
#[derive(Debug, Clone)]
pub struct Conv<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
}

impl<T: Scalar> Conv<T> {
    pub(crate) fn zeros(c_in: usize, c_out: usize, k: usize) -> Self {
        Conv {
            weight: Tensor::zeros(Shape::flat(c_out * c_in * k * k)),
            bias: Tensor::zeros(Shape::flat(c_out)),
            c_in,
            c_out,
            k,
        }
    }

    pub(crate) fn init<R: Rng>(c_in: usize, c_out: usize, k: usize, rng: &mut R) -> Self {
        let mut conv = Self::zeros(c_in, c_out, k);
        let fan_in = (c_in * k * k) as f64;
        let limit = (6.0 / fan_in).sqrt();
        for v in conv.weight.data_mut() {
            *v = T::from_f64(rng.random_range(-limit..=limit));
        }
        conv
    }

    fn numel(&self) -> usize {
        self.weight.shape().numel() + self.bias.shape().numel()
    }

    pub(crate) fn cast<U: Scalar>(&self) -> Conv<U> {
        Conv {
            weight: self.weight.cast(),
            bias: self.bias.cast(),
            c_in: self.c_in,
            c_out: self.c_out,
            k: self.k,
        }
    }
}

/// Filters a raw descriptor image: a sigmoid mask screens the feature
/// branch, and a 1x1 refinement mixes the filtered values back with
/// the input.
#[derive(Debug, Clone)]
pub struct GateBlock<T: Scalar> {
    pub feat: Conv<T>,
    pub mask: Conv<T>,
    pub refine: Conv<T>,
}

/// Two parallel 3x3 convolutions: an elu value branch gated by a
/// sigmoid branch.
#[derive(Debug, Clone)]
pub struct GatedConv<T: Scalar> {
    pub value: Conv<T>,
    pub gate: Conv<T>,
}

/// Everything one fine level needs to fuse with the level below it.
#[derive(Debug, Clone)]
pub struct LevelFusion<T: Scalar> {
    /// Re-filters the gate output on the fine grid (the direct path).
    pub gated: GatedConv<T>,
    /// 1x1 projection after average-pooling the fine gate output.
    pub pool_proj: Conv<T>,
    /// 1x1 over the pooled projection concatenated with the coarser
    /// gate output; its upsampled result modulates the direct path.
    pub detail: Conv<T>,
    /// 1x1 projection of the coarser accumulated features before
    /// upsampling onto the fine grid.
    pub up_proj: Conv<T>,
    /// Merges the fused fine features with the upsampled coarse ones.
    pub cross: GatedConv<T>,
}

/// Full parameter set of the rendering network.
#[derive(Debug, Clone)]
pub struct OmegaNet<T: Scalar> {
    pub descriptor_dim: usize,
    pub widths: [usize; LEVELS],
    /// One gate block per pyramid level.
    pub gates: Vec<GateBlock<T>>,
    /// Fusion stacks for levels 0..LEVELS-1 (the coarsest level has none).
    pub fusions: Vec<LevelFusion<T>>,
    /// Linear 1x1 head mapping level-0 features to RGB.
    pub head: Conv<T>,
}

fn validate_arch(descriptor_dim: usize, widths: &[usize; LEVELS]) -> Result<()> {
    if descriptor_dim == 0 {
        return Err(Error::validation("descriptor dimension must be positive"));
    }
    if widths.iter().any(|&w| w == 0) {
        return Err(Error::validation(format!(
            "channel widths must be positive, got {widths:?}"
        )));
    }
    Ok(())
}

impl OmegaNet<f32> {
    /// Fresh network: weights drawn uniform within the fan-in limit
    /// `sqrt(6 / fan_in)`, biases zero. The draw order is the named
    /// tensor order, so a seed pins every weight.
    pub fn init(descriptor_dim: usize, widths: [usize; LEVELS], seed: u64) -> Result<Self> {
        validate_arch(descriptor_dim, &widths)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = descriptor_dim;
        let gates = (0..LEVELS)
            .map(|t| {
                let c = widths[t];
                GateBlock {
                    feat: Conv::init(d, c, 3, &mut rng),
                    mask: Conv::init(d, c, 3, &mut rng),
                    refine: Conv::init(d + c, c, 1, &mut rng),
                }
            })
            .collect();
        let fusions = (0..LEVELS - 1)
            .map(|t| {
                let (c, c_next) = (widths[t], widths[t + 1]);
                LevelFusion {
                    gated: GatedConv {
                        value: Conv::init(c, c, 3, &mut rng),
                        gate: Conv::init(c, c, 3, &mut rng),
                    },
                    pool_proj: Conv::init(c, c, 1, &mut rng),
                    detail: Conv::init(c + c_next, c, 1, &mut rng),
                    up_proj: Conv::init(c_next, c, 1, &mut rng),
                    cross: GatedConv {
                        value: Conv::init(2 * c, c, 3, &mut rng),
                        gate: Conv::init(2 * c, c, 3, &mut rng),
                    },
                }
            })
            .collect();
        let head = Conv::init(widths[0], 3, 1, &mut rng);
        Ok(OmegaNet {
            descriptor_dim,
            widths,
            gates,
            fusions,
            head,
        })
    }

    /// All-zero parameters (useful as a loading target and in tests).
    pub fn zeros(descriptor_dim: usize, widths: [usize; LEVELS]) -> Result<Self> {
        let mut net = Self::init(descriptor_dim, widths, 0)?;
        for (_, tensor) in net.named_tensors_mut() {
            tensor.data_mut().fill(0.0);
        }
        Ok(net)
    }
}

impl<T: Scalar> OmegaNet<T> {
    pub fn cast<U: Scalar>(&self) -> OmegaNet<U> {
        let conv = |c: &Conv<T>| c.cast::<U>();
        OmegaNet {
            descriptor_dim: self.descriptor_dim,
            widths: self.widths,
            gates: self
                .gates
                .iter()
                .map(|g| GateBlock {
                    feat: conv(&g.feat),
                    mask: conv(&g.mask),
                    refine: conv(&g.refine),
                })
                .collect(),
            fusions: self
                .fusions
                .iter()
                .map(|f| LevelFusion {
                    gated: GatedConv {
                        value: conv(&f.gated.value),
                        gate: conv(&f.gated.gate),
                    },
                    pool_proj: conv(&f.pool_proj),
                    detail: conv(&f.detail),
                    up_proj: conv(&f.up_proj),
                    cross: GatedConv {
                        value: conv(&f.cross.value),
                        gate: conv(&f.cross.gate),
                    },
                })
                .collect(),
            head: conv(&self.head),
        }
    }

    pub fn count_parameters(&self) -> usize {
        let gates: usize = self
            .gates
            .iter()
            .map(|g| g.feat.numel() + g.mask.numel() + g.refine.numel())
            .sum();
        let fusions: usize = self
            .fusions
            .iter()
            .map(|f| {
                f.gated.value.numel()
                    + f.gated.gate.numel()
                    + f.pool_proj.numel()
                    + f.detail.numel()
                    + f.up_proj.numel()
                    + f.cross.value.numel()
                    + f.cross.gate.numel()
            })
            .sum();
        gates + fusions + self.head.numel()
    }

    /// Stable `(name, tensor)` listing; the order and names define the
    /// checkpoint layout.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (t, g) in self.gates.iter().enumerate() {
            out.push((format!("gate{t}.feat.weight"), &g.feat.weight));
            out.push((format!("gate{t}.feat.bias"), &g.feat.bias));
            out.push((format!("gate{t}.mask.weight"), &g.mask.weight));
            out.push((format!("gate{t}.mask.bias"), &g.mask.bias));
            out.push((format!("gate{t}.refine.weight"), &g.refine.weight));
            out.push((format!("gate{t}.refine.bias"), &g.refine.bias));
        }
        for (t, f) in self.fusions.iter().enumerate() {
            out.push((format!("fuse{t}.gated.value.weight"), &f.gated.value.weight));
            out.push((format!("fuse{t}.gated.value.bias"), &f.gated.value.bias));
            out.push((format!("fuse{t}.gated.gate.weight"), &f.gated.gate.weight));
            out.push((format!("fuse{t}.gated.gate.bias"), &f.gated.gate.bias));
            out.push((format!("fuse{t}.pool_proj.weight"), &f.pool_proj.weight));
            out.push((format!("fuse{t}.pool_proj.bias"), &f.pool_proj.bias));
            out.push((format!("fuse{t}.detail.weight"), &f.detail.weight));
            out.push((format!("fuse{t}.detail.bias"), &f.detail.bias));
            out.push((format!("fuse{t}.up_proj.weight"), &f.up_proj.weight));
            out.push((format!("fuse{t}.up_proj.bias"), &f.up_proj.bias));
            out.push((format!("fuse{t}.cross.value.weight"), &f.cross.value.weight));
            out.push((format!("fuse{t}.cross.value.bias"), &f.cross.value.bias));
            out.push((format!("fuse{t}.cross.gate.weight"), &f.cross.gate.weight));
            out.push((format!("fuse{t}.cross.gate.bias"), &f.cross.gate.bias));
        }
        out.push(("head.weight".to_string(), &self.head.weight));
        out.push(("head.bias".to_string(), &self.head.bias));
        out
    }

    /// Mutable view in the same order as `named_tensors`.
    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out: Vec<(String, &mut Tensor<T>)> = Vec::new();
        for (t, g) in self.gates.iter_mut().enumerate() {
            out.push((format!("gate{t}.feat.weight"), &mut g.feat.weight));
            out.push((format!("gate{t}.feat.bias"), &mut g.feat.bias));
            out.push((format!("gate{t}.mask.weight"), &mut g.mask.weight));
            out.push((format!("gate{t}.mask.bias"), &mut g.mask.bias));
            out.push((format!("gate{t}.refine.weight"), &mut g.refine.weight));
            out.push((format!("gate{t}.refine.bias"), &mut g.refine.bias));
        }
        for (t, f) in self.fusions.iter_mut().enumerate() {
            out.push((format!("fuse{t}.gated.value.weight"), &mut f.gated.value.weight));
            out.push((format!("fuse{t}.gated.value.bias"), &mut f.gated.value.bias));
            out.push((format!("fuse{t}.gated.gate.weight"), &mut f.gated.gate.weight));
            out.push((format!("fuse{t}.gated.gate.bias"), &mut f.gated.gate.bias));
            out.push((format!("fuse{t}.pool_proj.weight"), &mut f.pool_proj.weight));
            out.push((format!("fuse{t}.pool_proj.bias"), &mut f.pool_proj.bias));
            out.push((format!("fuse{t}.detail.weight"), &mut f.detail.weight));
            out.push((format!("fuse{t}.detail.bias"), &mut f.detail.bias));
            out.push((format!("fuse{t}.up_proj.weight"), &mut f.up_proj.weight));
            out.push((format!("fuse{t}.up_proj.bias"), &mut f.up_proj.bias));
            out.push((format!("fuse{t}.cross.value.weight"), &mut f.cross.value.weight));
            out.push((format!("fuse{t}.cross.value.bias"), &mut f.cross.value.bias));
            out.push((format!("fuse{t}.cross.gate.weight"), &mut f.cross.gate.weight));
            out.push((format!("fuse{t}.cross.gate.bias"), &mut f.cross.gate.bias));
        }
        out.push(("head.weight".to_string(), &mut self.head.weight));
        out.push(("head.bias".to_string(), &mut self.head.bias));
        out
    }

    /// Overwrites one named tensor, validating its shape.
    pub fn assign_named(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        for (n, slot) in self.named_tensors_mut() {
            if n == name {
                if slot.shape().numel() != value.shape().numel() {
                    return Err(Error::shape(
                        format!("tensor {name}"),
                        slot.shape().to_string(),
                        value.shape().to_string(),
                    ));
                }
                *slot = value;
                return Ok(());
            }
        }
        Err(Error::validation(format!(
            "network has no tensor named {name}"
        )))
    }
}

/// Tape handles for one convolution's weights.
#[derive(Debug, Clone, Copy)]
pub struct ConvVars {
    pub weight: Var,
    pub bias: Var,
    pub c_out: usize,
    pub k: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct GateBlockVars {
    pub feat: ConvVars,
    pub mask: ConvVars,
    pub refine: ConvVars,
}

#[derive(Debug, Clone, Copy)]
pub struct GatedConvVars {
    pub value: ConvVars,
    pub gate: ConvVars,
}

#[derive(Debug, Clone, Copy)]
pub struct LevelFusionVars {
    pub gated: GatedConvVars,
    pub pool_proj: ConvVars,
    pub detail: ConvVars,
    pub up_proj: ConvVars,
    pub cross: GatedConvVars,
}

/// The network's parameters placed on a tape, ready for `forward`.
#[derive(Debug, Clone)]
pub struct NetVars {
    pub descriptor_dim: usize,
    pub widths: [usize; LEVELS],
    pub gates: Vec<GateBlockVars>,
    pub fusions: Vec<LevelFusionVars>,
    pub head: ConvVars,
}

impl NetVars {
    /// Tape handles in the same order as `OmegaNet::named_tensors`.
    pub fn var_list(&self) -> Vec<Var> {
        let mut out = Vec::new();
        for g in &self.gates {
            for c in [g.feat, g.mask, g.refine] {
                out.push(c.weight);
                out.push(c.bias);
            }
        }
        for f in &self.fusions {
            for c in [
                f.gated.value,
                f.gated.gate,
                f.pool_proj,
                f.detail,
                f.up_proj,
                f.cross.value,
                f.cross.gate,
            ] {
                out.push(c.weight);
                out.push(c.bias);
            }
        }
        out.push(self.head.weight);
        out.push(self.head.bias);
        out
    }
}

impl<T: Scalar> OmegaNet<T> {
    /// Loads every parameter onto `tape`; `trainable` decides whether
    /// backward will produce gradients for them.
    pub fn load_onto(&self, tape: &mut Tape<T>, trainable: bool) -> Result<NetVars> {
        let mut load = |c: &Conv<T>| -> Result<ConvVars> {
            let weight = tape.leaf(c.weight.shape(), c.weight.data().to_vec(), trainable)?;
            let bias = tape.leaf(c.bias.shape(), c.bias.data().to_vec(), trainable)?;
            Ok(ConvVars {
                weight,
                bias,
                c_out: c.c_out,
                k: c.k,
            })
        };
        let mut gates = Vec::with_capacity(LEVELS);
        for g in &self.gates {
            gates.push(GateBlockVars {
                feat: load(&g.feat)?,
                mask: load(&g.mask)?,
                refine: load(&g.refine)?,
            });
        }
        let mut fusions = Vec::with_capacity(LEVELS - 1);
        for f in &self.fusions {
            fusions.push(LevelFusionVars {
                gated: GatedConvVars {
                    value: load(&f.gated.value)?,
                    gate: load(&f.gated.gate)?,
                },
                pool_proj: load(&f.pool_proj)?,
                detail: load(&f.detail)?,
                up_proj: load(&f.up_proj)?,
                cross: GatedConvVars {
                    value: load(&f.cross.value)?,
                    gate: load(&f.cross.gate)?,
                },
            });
        }
        let head = load(&self.head)?;
        Ok(NetVars {
            descriptor_dim: self.descriptor_dim,
            widths: self.widths,
            gates,
            fusions,
            head,
        })
    }
}

fn conv<T: Scalar>(tape: &mut Tape<T>, c: ConvVars, x: Var) -> Result<Var> {
    tape.conv2d(x, c.weight, c.bias, c.c_out, c.k)
}

/// Gate block: `out = refine(concat(x, elu(feat(x)) * sigmoid(mask(x))))`.
/// Returns `(out, mask)` so callers can inspect the gate values.
pub fn gate_block<T: Scalar>(
    tape: &mut Tape<T>,
    p: &GateBlockVars,
    x: Var,
) -> Result<(Var, Var)> {
    let feat = conv(tape, p.feat, x)?;
    let feat = tape.elu(feat)?;
    let mask = conv(tape, p.mask, x)?;
    let mask = tape.sigmoid(mask)?;
    let filtered = tape.mul(feat, mask)?;
    let cat = tape.concat_channels(&[x, filtered])?;
    let out = conv(tape, p.refine, cat)?;
    Ok((out, mask))
}

/// Gated convolution: `elu(value(x)) * sigmoid(gate(x))`. Returns
/// `(out, gate)`.
pub fn gated_conv<T: Scalar>(
    tape: &mut Tape<T>,
    p: &GatedConvVars,
    x: Var,
) -> Result<(Var, Var)> {
    let value = conv(tape, p.value, x)?;
    let value = tape.elu(value)?;
    let gate = conv(tape, p.gate, x)?;
    let gate = tape.sigmoid(gate)?;
    let out = tape.mul(value, gate)?;
    Ok((out, gate))
}

/// Same-scale fusion: `direct + detail * direct`, elementwise.
pub fn fuse_same_scale<T: Scalar>(tape: &mut Tape<T>, direct: Var, detail: Var) -> Result<Var> {
    let modulated = tape.mul(detail, direct)?;
    tape.add(direct, modulated)
}

/// Runs the network over the four descriptor images (fine to coarse).
/// Output is an unclamped `(3, h0, w0)` map; clamp at emission.
pub fn forward<T: Scalar>(tape: &mut Tape<T>, net: &NetVars, descriptors: &[Var]) -> Result<Var> {
    if descriptors.len() != LEVELS {
        return Err(Error::validation(format!(
            "expected {LEVELS} descriptor levels, got {}",
            descriptors.len()
        )));
    }
    for (t, &d) in descriptors.iter().enumerate() {
        let (c, _, _) = tape.shape(d).as_chw().ok_or_else(|| {
            Error::shape(
                format!("descriptor level {t}"),
                "(d, h, w) image",
                tape.shape(d).to_string(),
            )
        })?;
        if c != net.descriptor_dim {
            return Err(Error::shape(
                format!("descriptor level {t}"),
                format!("{} channels", net.descriptor_dim),
                format!("{c} channels"),
            ));
        }
    }

    let mut gated_levels = Vec::with_capacity(LEVELS);
    for t in 0..LEVELS {
        let (g, _) = gate_block(tape, &net.gates[t], descriptors[t])?;
        gated_levels.push(g);
    }

    // Coarse-to-fine accumulation.
    let mut up = gated_levels[LEVELS - 1];
    for t in (0..LEVELS - 1).rev() {
        let f = &net.fusions[t];
        let g_fine = gated_levels[t];
        let (_, h, w) = tape.shape(g_fine).as_chw().expect("gate output is an image");

        // Direct path on the fine grid.
        let (direct, _) = gated_conv(tape, &f.gated, g_fine)?;

        // Detail path: pool the fine features down one level, project,
        // mix with the coarser gate output, and upsample back.
        let pooled = tape.avg_pool2(g_fine)?;
        let pooled = conv(tape, f.pool_proj, pooled)?;
        let detail_in = tape.concat_channels(&[pooled, gated_levels[t + 1]])?;
        let detail = conv(tape, f.detail, detail_in)?;
        let detail = tape.bilinear_resize(detail, h, w)?;

        let fused = fuse_same_scale(tape, direct, detail)?;

        // Cross-scale path: project the accumulated coarse features and
        // upsample them onto the fine grid.
        let carried = conv(tape, f.up_proj, up)?;
        let carried = tape.bilinear_resize(carried, h, w)?;
        let merged = tape.concat_channels(&[fused, carried])?;
        let (next, _) = gated_conv(tape, &f.cross, merged)?;
        up = next;
    }

    conv(tape, net.head, up)
}

/// Chebyshev radius, in level-0 pixels, beyond which an output pixel
/// cannot depend on a given point's descriptors. Derived by walking the
/// architecture with interval arithmetic in level-0 units:
///
/// * a descriptor lands in one pixel per level — at level t that pixel
///   spans `2^t` level-0 pixels;
/// * each 3x3 convolution at level t widens influence by `2^t`;
/// * average pooling from level t widens by `2^t` (the floor shift);
/// * bilinear resize from level t+1 up to level t doubles positions and
///   adds at most `5 * 2^t` (two-tap interpolation plus the non-exact
///   halving of odd level sizes).
///
/// The dominant chain is gate(3) -> three cross-scale merges, giving
/// 16, 40, 52, 58 at levels 3..0, plus one pixel of footprint slack.
pub fn receptive_radius() -> usize {
    let mut bound = 2 * (1 << (LEVELS - 1)); // gate block at the coarsest level
    for t in (0..LEVELS - 1).rev() {
        let unit = 1usize << t;
        let same_scale = 9 * unit; // pool + detail path after its resize
        let carried = bound + 5 * unit; // up-projection resize
        bound = same_scale.max(carried) + unit; // cross gated conv
    }
    bound + 1
}

/// Rasterizes the scene and decodes the pyramid to an RGB image with
/// values clamped to [0, 1].
pub fn render_scene(net: &OmegaNet<f32>, scene: &Scene, cam: &Camera) -> Result<Tensor<f32>> {
    let pyramid = build_pyramid(scene, cam)?;
    render_pyramid(net, &pyramid)
}

/// Decodes an already-rasterized pyramid. Clamps to [0, 1].
pub fn render_pyramid(net: &OmegaNet<f32>, pyramid: &RasterPyramid) -> Result<Tensor<f32>> {
    if net.descriptor_dim != pyramid.levels[0].descriptor_image.shape().as_chw().map_or(0, |s| s.0)
    {
        return Err(Error::validation(format!(
            "network expects {}-dim descriptors, pyramid holds {}",
            net.descriptor_dim,
            pyramid.levels[0]
                .descriptor_image
                .shape()
                .as_chw()
                .map_or(0, |s| s.0)
        )));
    }
    let mut tape: Tape<f32> = Tape::new();
    let vars = net.load_onto(&mut tape, false)?;
    let desc: Vec<Var> = pyramid
        .levels
        .iter()
        .map(|l| tape.constant(&l.descriptor_image))
        .collect::<Result<Vec<_>>>()?;
    let out = forward(&mut tape, &vars, &desc)?;
    let shape = tape.shape(out);
    let data = tape.value(out).iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Tensor::new(shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_net(seed: u64) -> OmegaNet<f32> {
        OmegaNet::init(8, [4, 4, 4, 4], seed).unwrap()
    }

    fn pyramid_images(d: usize, h: usize, w: usize, seed: u64) -> Vec<Tensor<f32>> {
        (0..LEVELS)
            .map(|t| {
                let (ht, wt) = (h >> t, w >> t);
                let vals = crate::testutil::pseudo_random_vec(d * ht * wt, seed + t as u64);
                Tensor::new(
                    Shape::chw(d, ht, wt),
                    vals.iter().map(|&v| v as f32).collect(),
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn default_width_parameter_count_is_documented_value() {
        let net = OmegaNet::init(8, DEFAULT_WIDTHS, 0).unwrap();
        assert_eq!(net.count_parameters(), 382_355);
        assert_eq!(tiny_net(0).count_parameters(), 5_427);
    }

    #[test]
    fn named_tensor_order_is_stable_and_complete() {
        let net = tiny_net(1);
        let names: Vec<String> = net.named_tensors().iter().map(|(n, _)| n.clone()).collect();
        assert_eq!(names.len(), 4 * 6 + 3 * 14 + 2);
        assert_eq!(names[0], "gate0.feat.weight");
        assert_eq!(names[6], "gate1.feat.weight");
        assert_eq!(names[24], "fuse0.gated.value.weight");
        assert_eq!(names[names.len() - 1], "head.bias");
        let total: usize = net
            .named_tensors()
            .iter()
            .map(|(_, t)| t.shape().numel())
            .sum();
        assert_eq!(total, net.count_parameters());
    }

    #[test]
    fn seeded_init_is_reproducible_and_bounded() {
        let a = tiny_net(9);
        let b = tiny_net(9);
        let c = tiny_net(10);
        let flat = |n: &OmegaNet<f32>| -> Vec<f32> {
            n.named_tensors()
                .iter()
                .flat_map(|(_, t)| t.data().to_vec())
                .collect()
        };
        assert_eq!(flat(&a), flat(&b));
        assert_ne!(flat(&a), flat(&c));
        // Fan-in bound on the first gate conv: sqrt(6 / (8*9)).
        let limit = (6.0f64 / 72.0).sqrt() as f32;
        assert!(a.gates[0].feat.weight.data().iter().all(|v| v.abs() <= limit));
        assert!(a.named_tensors().iter().all(|(n, t)| {
            !n.ends_with(".bias") || t.data().iter().all(|&v| v == 0.0)
        }));
    }

    #[test]
    fn zero_network_emits_zero() {
        let net = OmegaNet::zeros(8, [4, 4, 4, 4]).unwrap();
        let images = pyramid_images(8, 16, 16, 3);
        let mut tape: Tape<f32> = Tape::new();
        let vars = net.load_onto(&mut tape, false).unwrap();
        let desc: Vec<Var> = images.iter().map(|i| tape.constant(i).unwrap()).collect();
        let out = forward(&mut tape, &vars, &desc).unwrap();
        assert!(tape.value(out).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_has_level_zero_size_even_for_odd_frames() {
        let net = tiny_net(2);
        // 22x18 halves to 11x9, 5x4, 2x2 — odd sizes on the way down.
        let sizes = [(22usize, 18usize), (11, 9), (5, 4), (2, 2)];
        let images: Vec<Tensor<f32>> = sizes
            .iter()
            .enumerate()
            .map(|(t, &(h, w))| {
                let vals = crate::testutil::pseudo_random_vec(8 * h * w, 40 + t as u64);
                Tensor::new(Shape::chw(8, h, w), vals.iter().map(|&v| v as f32).collect())
                    .unwrap()
            })
            .collect();
        let mut tape: Tape<f32> = Tape::new();
        let vars = net.load_onto(&mut tape, false).unwrap();
        let desc: Vec<Var> = images.iter().map(|i| tape.constant(i).unwrap()).collect();
        let out = forward(&mut tape, &vars, &desc).unwrap();
        assert_eq!(tape.shape(out), Shape::chw(3, 22, 18));
    }

    #[test]
    fn gate_block_scalar_oracle() {
        // 1x1 image, one descriptor channel, one output channel:
        // feat conv weight a, bias p; mask conv weight m, bias q;
        // refine weights (r0 for input, r1 for filtered), bias s.
        let (a, p, m, q, r0, r1, s) = (0.7f32, 0.1, -0.4, 0.2, 0.5, -0.8, 0.05);
        let x = 0.9f32;
        let mut tape: Tape<f32> = Tape::new();
        let wf = tape
            .leaf(Shape::flat(9), {
                let mut k = vec![0.0; 9];
                k[4] = a;
                k
            }, false)
            .unwrap();
        let bf = tape.leaf(Shape::flat(1), vec![p], false).unwrap();
        let wm = tape
            .leaf(Shape::flat(9), {
                let mut k = vec![0.0; 9];
                k[4] = m;
                k
            }, false)
            .unwrap();
        let bm = tape.leaf(Shape::flat(1), vec![q], false).unwrap();
        let wr = tape.leaf(Shape::flat(2), vec![r0, r1], false).unwrap();
        let br = tape.leaf(Shape::flat(1), vec![s], false).unwrap();
        let p_vars = GateBlockVars {
            feat: ConvVars { weight: wf, bias: bf, c_out: 1, k: 3 },
            mask: ConvVars { weight: wm, bias: bm, c_out: 1, k: 3 },
            refine: ConvVars { weight: wr, bias: br, c_out: 1, k: 1 },
        };
        let xin = tape.leaf(Shape::chw(1, 1, 1), vec![x], false).unwrap();
        let (out, mask) = gate_block(&mut tape, &p_vars, xin).unwrap();

        let elu = |v: f32| if v > 0.0 { v } else { v.exp() - 1.0 };
        let sig = |v: f32| 1.0 / (1.0 + (-v).exp());
        let feat = elu(a * x + p);
        let gate = sig(m * x + q);
        let expect = r0 * x + r1 * (feat * gate) + s;
        assert!((tape.value(out)[0] - expect).abs() < 1e-6);
        assert!((tape.value(mask)[0] - gate).abs() < 1e-6);
    }

    #[test]
    fn gated_conv_scalar_oracle_and_magnitude_bound() {
        let (a, p, m, q) = (1.3f32, -0.2, 0.6, 0.4);
        let x = -0.7f32;
        let mut tape: Tape<f32> = Tape::new();
        let center = |v: f32| {
            let mut k = vec![0.0; 9];
            k[4] = v;
            k
        };
        let wv = tape.leaf(Shape::flat(9), center(a), false).unwrap();
        let bv = tape.leaf(Shape::flat(1), vec![p], false).unwrap();
        let wg = tape.leaf(Shape::flat(9), center(m), false).unwrap();
        let bg = tape.leaf(Shape::flat(1), vec![q], false).unwrap();
        let p_vars = GatedConvVars {
            value: ConvVars { weight: wv, bias: bv, c_out: 1, k: 3 },
            gate: ConvVars { weight: wg, bias: bg, c_out: 1, k: 3 },
        };
        let xin = tape.leaf(Shape::chw(1, 1, 1), vec![x], false).unwrap();
        let (out, _) = gated_conv(&mut tape, &p_vars, xin).unwrap();

        let elu = |v: f32| if v > 0.0 { v } else { v.exp() - 1.0 };
        let sig = |v: f32| 1.0 / (1.0 + (-v).exp());
        let expect = elu(a * x + p) * sig(m * x + q);
        assert!((tape.value(out)[0] - expect).abs() < 1e-6);
        assert!(tape.value(out)[0].abs() <= elu(a * x + p).abs());
    }

    #[test]
    fn masks_stay_strictly_inside_unit_interval() {
        let net = tiny_net(31);
        let images = pyramid_images(8, 16, 16, 8);
        let mut tape: Tape<f32> = Tape::new();
        let vars = net.load_onto(&mut tape, false).unwrap();
        for t in 0..LEVELS {
            let d = tape.constant(&images[t]).unwrap();
            let (_, mask) = gate_block(&mut tape, &vars.gates[t], d).unwrap();
            assert!(tape.value(mask).iter().all(|&v| v > 0.0 && v < 1.0));
        }
        let d0 = tape.constant(&images[0]).unwrap();
        let (g0, _) = gate_block(&mut tape, &vars.gates[0], d0).unwrap();
        let (_, gate) = gated_conv(&mut tape, &vars.fusions[0].gated, g0).unwrap();
        assert!(tape.value(gate).iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn fusion_is_elementwise_formula() {
        let n = 3 * 5 * 4;
        let c_data = crate::testutil::pseudo_random_vec(n, 1);
        let d_data = crate::testutil::pseudo_random_vec(n, 2);
        let mut tape: Tape<f64> = Tape::new();
        let c = tape.leaf(Shape::chw(3, 5, 4), c_data.clone(), false).unwrap();
        let d = tape.leaf(Shape::chw(3, 5, 4), d_data.clone(), false).unwrap();
        let fused = fuse_same_scale(&mut tape, c, d).unwrap();
        for i in 0..n {
            let expect = c_data[i] + d_data[i] * c_data[i];
            assert!((tape.value(fused)[i] - expect).abs() < 1e-10);
        }
        // Zero detail leaves the direct path bit-identical.
        let zero = tape.leaf(Shape::chw(3, 5, 4), vec![0.0; n], false).unwrap();
        let same = fuse_same_scale(&mut tape, c, zero).unwrap();
        assert_eq!(tape.value(same), tape.value(c));
        // Zero direct path annihilates.
        let out = fuse_same_scale(&mut tape, zero, d).unwrap();
        assert!(tape.value(out).iter().all(|&v| v == 0.0));
        // Shape mismatch is rejected.
        let small = tape.leaf(Shape::chw(3, 4, 4), vec![0.0; 48], false).unwrap();
        assert!(fuse_same_scale(&mut tape, c, small).is_err());
    }

    #[test]
    fn forward_rejects_wrong_level_count_and_dim() {
        let net = tiny_net(5);
        let images = pyramid_images(8, 16, 16, 9);
        let mut tape: Tape<f32> = Tape::new();
        let vars = net.load_onto(&mut tape, false).unwrap();
        let desc: Vec<Var> = images.iter().map(|i| tape.constant(i).unwrap()).collect();
        assert!(forward(&mut tape, &vars, &desc[..3]).is_err());

        let bad = Tensor::<f32>::zeros(Shape::chw(5, 16, 16));
        let bad_var = tape.constant(&bad).unwrap();
        let mut desc_bad = desc.clone();
        desc_bad[0] = bad_var;
        assert!(forward(&mut tape, &vars, &desc_bad).is_err());
    }

    #[test]
    fn forward_is_deterministic() {
        let net = tiny_net(17);
        let images = pyramid_images(8, 16, 16, 18);
        let run = || -> Vec<u32> {
            let mut tape: Tape<f32> = Tape::new();
            let vars = net.load_onto(&mut tape, false).unwrap();
            let desc: Vec<Var> = images.iter().map(|i| tape.constant(i).unwrap()).collect();
            let out = forward(&mut tape, &vars, &desc).unwrap();
            tape.value(out).iter().map(|v| v.to_bits()).collect()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn receptive_radius_matches_recurrence() {
        assert_eq!(receptive_radius(), 59);
    }

    #[test]
    fn assign_named_validates_names_and_shapes() {
        let mut net = tiny_net(3);
        let good = Tensor::zeros(Shape::flat(4 * 8 * 9));
        net.assign_named("gate0.feat.weight", good).unwrap();
        assert!(net.gates[0].feat.weight.data().iter().all(|&v| v == 0.0));
        let wrong_shape = Tensor::<f32>::zeros(Shape::flat(7));
        assert!(net.assign_named("gate0.feat.weight", wrong_shape).is_err());
        let t = Tensor::<f32>::zeros(Shape::flat(4));
        assert!(net.assign_named("gate9.feat.weight", t).is_err());
    }
}
