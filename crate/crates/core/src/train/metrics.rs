//! Evaluation metrics over rendered images: peak signal-to-noise ratio
//! and structural similarity. Both accumulate in 64-bit regardless of
//! image precision.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// PSNR saturates here once the mean squared error drops below 1e-10.
pub const PSNR_CAP_DB: f64 = 99.0;

fn check_pair(a: &Tensor<f32>, b: &Tensor<f32>, what: &str) -> Result<(usize, usize, usize)> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            what.to_string(),
            a.shape().to_string(),
            b.shape().to_string(),
        ));
    }
    a.shape()
        .as_chw()
        .ok_or_else(|| Error::shape(what.to_string(), "(c, h, w) image", a.shape().to_string()))
}

/// Peak signal-to-noise ratio in dB for unit-range images, capped at
/// 99 dB for (near-)identical inputs.
pub fn psnr(a: &Tensor<f32>, b: &Tensor<f32>) -> Result<f64> {
    check_pair(a, b, "psnr")?;
    let n = a.data().len();
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        / n as f64;
    if mse < 1e-10 {
        return Ok(PSNR_CAP_DB);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// Mean structural similarity over all valid 11x11 windows, computed
/// per channel with a separable Gaussian filter (sigma 1.5) and
/// averaged. Dynamic range is 1; stabilizers K1 = 0.01, K2 = 0.03.
pub fn ssim(a: &Tensor<f32>, b: &Tensor<f32>) -> Result<f64> {
    let (c, h, w) = check_pair(a, b, "ssim")?;
    if h < 11 || w < 11 {
        return Err(Error::validation(format!(
            "ssim needs images at least 11x11, got {w}x{h}"
        )));
    }
    let kernel = gaussian_kernel_11();
    let c1 = 0.01f64 * 0.01;
    let c2 = 0.03f64 * 0.03;

    let mut total = 0.0;
    let mut windows = 0usize;
    for ch in 0..c {
        let pa: Vec<f64> = a.data()[ch * h * w..(ch + 1) * h * w]
            .iter()
            .map(|&v| v as f64)
            .collect();
        let pb: Vec<f64> = b.data()[ch * h * w..(ch + 1) * h * w]
            .iter()
            .map(|&v| v as f64)
            .collect();
        let xx: Vec<f64> = pa.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = pb.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();

        let mx = filter_valid(&pa, h, w, &kernel);
        let my = filter_valid(&pb, h, w, &kernel);
        let mxx = filter_valid(&xx, h, w, &kernel);
        let myy = filter_valid(&yy, h, w, &kernel);
        let mxy = filter_valid(&xy, h, w, &kernel);

        for i in 0..mx.len() {
            let (ux, uy) = (mx[i], my[i]);
            let vx = mxx[i] - ux * ux;
            let vy = myy[i] - uy * uy;
            let cov = mxy[i] - ux * uy;
            total += ((2.0 * ux * uy + c1) * (2.0 * cov + c2))
                / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        }
        windows += mx.len();
    }
    Ok(total / windows as f64)
}

/// Normalized 1-D Gaussian, sigma 1.5, 11 taps.
fn gaussian_kernel_11() -> [f64; 11] {
    let sigma = 1.5f64;
    let mut k = [0.0; 11];
    let mut sum = 0.0;
    for (i, slot) in k.iter_mut().enumerate() {
        let d = i as f64 - 5.0;
        *slot = (-d * d / (2.0 * sigma * sigma)).exp();
        sum += *slot;
    }
    for slot in &mut k {
        *slot /= sum;
    }
    k
}

/// Separable Gaussian filtering, keeping only outputs whose full 11x11
/// support lies inside the image. Returns (h-10) x (w-10) values.
fn filter_valid(img: &[f64], h: usize, w: usize, kernel: &[f64; 11]) -> Vec<f64> {
    // Horizontal pass over all rows, valid columns.
    let wv = w - 10;
    let mut rows = vec![0.0; h * wv];
    for y in 0..h {
        for x in 0..wv {
            let mut acc = 0.0;
            for (i, &kv) in kernel.iter().enumerate() {
                acc += kv * img[y * w + x + i];
            }
            rows[y * wv + x] = acc;
        }
    }
    // Vertical pass over valid rows.
    let hv = h - 10;
    let mut out = vec![0.0; hv * wv];
    for y in 0..hv {
        for x in 0..wv {
            let mut acc = 0.0;
            for (i, &kv) in kernel.iter().enumerate() {
                acc += kv * rows[(y + i) * wv + x];
            }
            out[y * wv + x] = acc;
        }
    }
    out
}
