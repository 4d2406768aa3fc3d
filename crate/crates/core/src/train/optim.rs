//! Adaptive-moment gradient descent over the network weights and the
//! descriptor table. Descriptor rows are updated sparsely: only rows
//! that received gradient this step are touched, so occluded points
//! stay bit-identical.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::net::OmegaNet;
use crate::scene::DescriptorTable;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Default step size for network weights.
pub const DEFAULT_LR_THETA: f32 = 3e-3;
/// Default step size for descriptors; each row is touched rarely, so
/// it tolerates much larger steps than the weights.
pub const DEFAULT_LR_DESC: f32 = 1e-1;

/// First/second moment accumulators for every trainable value.
#[derive(Debug, Clone)]
pub struct OptimState {
    pub step: u64,
    pub lr_theta: f32,
    pub lr_desc: f32,
    /// Moments per network tensor, in named-tensor order.
    theta_m: Vec<Vec<f32>>,
    theta_v: Vec<Vec<f32>>,
    /// Dense moments over the descriptor table.
    desc_m: Vec<f32>,
    desc_v: Vec<f32>,
    desc_dim: usize,
}

impl OptimState {
    pub fn new(
        net: &OmegaNet<f32>,
        descriptors: &DescriptorTable,
        lr_theta: f32,
        lr_desc: f32,
    ) -> Self {
        let theta_m = net
            .named_tensors()
            .iter()
            .map(|(_, t)| vec![0.0; t.shape().numel()])
            .collect::<Vec<_>>();
        let theta_v = theta_m.clone();
        OptimState {
            step: 0,
            lr_theta,
            lr_desc,
            theta_m,
            theta_v,
            desc_m: vec![0.0; descriptors.values().len()],
            desc_v: vec![0.0; descriptors.values().len()],
            desc_dim: descriptors.dim(),
        }
    }

    /// One optimizer step. `theta_grads` must be in named-tensor order;
    /// `desc_grads` holds gradient rows for the points that were
    /// visible this step. Rows without gradient keep their exact bits.
    pub fn apply(
        &mut self,
        net: &mut OmegaNet<f32>,
        descriptors: &mut DescriptorTable,
        theta_grads: &[Vec<f32>],
        desc_grads: &BTreeMap<u32, Vec<f32>>,
    ) -> Result<()> {
        let mut tensors = net.named_tensors_mut();
        if theta_grads.len() != tensors.len() {
            return Err(Error::shape(
                "optimizer step",
                format!("{} gradient tensors", tensors.len()),
                format!("{}", theta_grads.len()),
            ));
        }
        self.step += 1;
        let correct1 = 1.0 - BETA1.powi(self.step as i32);
        let correct2 = 1.0 - BETA2.powi(self.step as i32);

        for (i, (name, tensor)) in tensors.iter_mut().enumerate() {
            let grads = &theta_grads[i];
            if grads.len() != tensor.shape().numel() {
                return Err(Error::shape(
                    format!("gradient for {name}"),
                    format!("{} elements", tensor.shape().numel()),
                    format!("{}", grads.len()),
                ));
            }
            update_slice(
                tensor.data_mut(),
                grads,
                &mut self.theta_m[i],
                &mut self.theta_v[i],
                self.lr_theta as f64,
                correct1,
                correct2,
            );
        }

        let n_rows = descriptors.len();
        let dim = self.desc_dim;
        for (&point, row_grad) in desc_grads {
            let idx = point as usize;
            if idx >= n_rows {
                return Err(Error::IndexOutOfRange {
                    what: "descriptor gradient row".into(),
                    index: idx,
                    len: n_rows,
                });
            }
            if row_grad.len() != dim {
                return Err(Error::shape(
                    format!("descriptor gradient for point {point}"),
                    format!("{dim} values"),
                    format!("{}", row_grad.len()),
                ));
            }
            let span = idx * dim..(idx + 1) * dim;
            update_slice(
                &mut descriptors.values_mut()[span.clone()],
                row_grad,
                &mut self.desc_m[span.clone()],
                &mut self.desc_v[span],
                self.lr_desc as f64,
                correct1,
                correct2,
            );
        }
        Ok(())
    }
}

fn update_slice(
    params: &mut [f32],
    grads: &[f32],
    m: &mut [f32],
    v: &mut [f32],
    lr: f64,
    correct1: f64,
    correct2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i] as f64;
        let mi = BETA1 * m[i] as f64 + (1.0 - BETA1) * g;
        let vi = BETA2 * v[i] as f64 + (1.0 - BETA2) * g * g;
        m[i] = mi as f32;
        v[i] = vi as f32;
        let m_hat = mi / correct1;
        let v_hat = vi / correct2;
        let delta = lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        params[i] = (params[i] as f64 - delta) as f32;
    }
}
