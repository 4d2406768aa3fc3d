//! Dense array kernels behind the tape ops.
//!
//! Everything here is single-threaded and accumulates strictly in
//! row-major element order, so results are bit-reproducible across runs
//! and independent of how many worker threads the caller uses.

use super::Scalar;

/// 2-D cross-correlation with stride 1 and zero padding of `(k-1)/2`,
/// so the output has the same spatial size as the input.
///
/// `x` is `(c_in, h, w)` row-major, `weight` is `(c_out, c_in, k, k)`,
/// `bias` is `(c_out)`. Returns `(c_out, h, w)`.
pub fn conv2d_forward<T: Scalar>(
    x: &[T],
    weight: &[T],
    bias: &[T],
    c_in: usize,
    c_out: usize,
    h: usize,
    w: usize,
    k: usize,
) -> Vec<T> {
    let pad = ((k - 1) / 2) as isize;
    let plane = h * w;
    let mut out = vec![T::zero(); c_out * plane];
    for oc in 0..c_out {
        let out_plane = &mut out[oc * plane..(oc + 1) * plane];
        out_plane.fill(bias[oc]);
        for ic in 0..c_in {
            let x_plane = &x[ic * plane..(ic + 1) * plane];
            for ky in 0..k {
                for kx in 0..k {
                    let wv = weight[((oc * c_in + ic) * k + ky) * k + kx];
                    let dy = ky as isize - pad;
                    let dx = kx as isize - pad;
                    // out[oy][ox] += wv * x[oy+dy][ox+dx] over in-bounds taps.
                    let oy0 = 0.max(-dy) as usize;
                    let oy1 = (h as isize).min(h as isize - dy) as usize;
                    let ox0 = 0.max(-dx) as usize;
                    let ox1 = (w as isize).min(w as isize - dx) as usize;
                    for oy in oy0..oy1 {
                        let iy = (oy as isize + dy) as usize;
                        let src_off = (iy * w) as isize + dx;
                        let src = &x_plane[(src_off + ox0 as isize) as usize
                            ..(src_off + ox1 as isize) as usize];
                        let dst = &mut out_plane[oy * w + ox0..oy * w + ox1];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wv * *s;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Backward pass for [`conv2d_forward`]. Adds contributions into the
/// provided gradient buffers; any of them may be `None` when the
/// corresponding input does not need a gradient.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward<T: Scalar>(
    grad_out: &[T],
    x: &[T],
    weight: &[T],
    c_in: usize,
    c_out: usize,
    h: usize,
    w: usize,
    k: usize,
    grad_x: Option<&mut [T]>,
    grad_w: Option<&mut [T]>,
    grad_b: Option<&mut [T]>,
) {
    let pad = ((k - 1) / 2) as isize;
    let plane = h * w;

    if let Some(gx) = grad_x {
        // dx[oy+dy][ox+dx] += wv * g[oy][ox]: the transpose of the
        // forward shift pattern, accumulated per input channel.
        for ic in 0..c_in {
            let gx_plane = &mut gx[ic * plane..(ic + 1) * plane];
            for oc in 0..c_out {
                let g_plane = &grad_out[oc * plane..(oc + 1) * plane];
                for ky in 0..k {
                    for kx in 0..k {
                        let wv = weight[((oc * c_in + ic) * k + ky) * k + kx];
                        let dy = ky as isize - pad;
                        let dx = kx as isize - pad;
                        let oy0 = 0.max(-dy) as usize;
                        let oy1 = (h as isize).min(h as isize - dy) as usize;
                        let ox0 = 0.max(-dx) as usize;
                        let ox1 = (w as isize).min(w as isize - dx) as usize;
                        for oy in oy0..oy1 {
                            let iy = (oy as isize + dy) as usize;
                            let dst_off = (iy * w) as isize + dx;
                            let dst = &mut gx_plane[(dst_off + ox0 as isize) as usize
                                ..(dst_off + ox1 as isize) as usize];
                            let src = &g_plane[oy * w + ox0..oy * w + ox1];
                            for (d, s) in dst.iter_mut().zip(src) {
                                *d += wv * *s;
                            }
                        }
                    }
                }
            }
        }
    }

    if let Some(gw) = grad_w {
        for oc in 0..c_out {
            let g_plane = &grad_out[oc * plane..(oc + 1) * plane];
            for ic in 0..c_in {
                let x_plane = &x[ic * plane..(ic + 1) * plane];
                for ky in 0..k {
                    for kx in 0..k {
                        let dy = ky as isize - pad;
                        let dx = kx as isize - pad;
                        let oy0 = 0.max(-dy) as usize;
                        let oy1 = (h as isize).min(h as isize - dy) as usize;
                        let ox0 = 0.max(-dx) as usize;
                        let ox1 = (w as isize).min(w as isize - dx) as usize;
                        let mut acc = T::zero();
                        for oy in oy0..oy1 {
                            let iy = (oy as isize + dy) as usize;
                            let src_off = (iy * w) as isize + dx;
                            let src = &x_plane[(src_off + ox0 as isize) as usize
                                ..(src_off + ox1 as isize) as usize];
                            let g_row = &g_plane[oy * w + ox0..oy * w + ox1];
                            for (g, s) in g_row.iter().zip(src) {
                                acc += *g * *s;
                            }
                        }
                        gw[((oc * c_in + ic) * k + ky) * k + kx] += acc;
                    }
                }
            }
        }
    }

    if let Some(gb) = grad_b {
        for oc in 0..c_out {
            let mut acc = T::zero();
            for g in &grad_out[oc * plane..(oc + 1) * plane] {
                acc += *g;
            }
            gb[oc] += acc;
        }
    }
}

/// 2x2 average pooling with stride 2. Odd trailing rows/columns are
/// dropped, so the output is `(c, h/2, w/2)` with integer division.
pub fn avg_pool2_forward<T: Scalar>(x: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let (ho, wo) = (h / 2, w / 2);
    let quarter = T::from_f64(0.25);
    let mut out = vec![T::zero(); c * ho * wo];
    for ch in 0..c {
        let x_plane = &x[ch * h * w..(ch + 1) * h * w];
        let out_plane = &mut out[ch * ho * wo..(ch + 1) * ho * wo];
        for oy in 0..ho {
            let r0 = &x_plane[2 * oy * w..];
            let r1 = &x_plane[(2 * oy + 1) * w..];
            for ox in 0..wo {
                out_plane[oy * wo + ox] =
                    (r0[2 * ox] + r0[2 * ox + 1] + r1[2 * ox] + r1[2 * ox + 1]) * quarter;
            }
        }
    }
    out
}

pub fn avg_pool2_backward<T: Scalar>(grad_out: &[T], gx: &mut [T], c: usize, h: usize, w: usize) {
    let (ho, wo) = (h / 2, w / 2);
    let quarter = T::from_f64(0.25);
    for ch in 0..c {
        let g_plane = &grad_out[ch * ho * wo..(ch + 1) * ho * wo];
        let gx_plane = &mut gx[ch * h * w..(ch + 1) * h * w];
        for oy in 0..ho {
            for ox in 0..wo {
                let g = g_plane[oy * wo + ox] * quarter;
                gx_plane[2 * oy * w + 2 * ox] += g;
                gx_plane[2 * oy * w + 2 * ox + 1] += g;
                gx_plane[(2 * oy + 1) * w + 2 * ox] += g;
                gx_plane[(2 * oy + 1) * w + 2 * ox + 1] += g;
            }
        }
    }
}

/// Per-axis sampling table for bilinear resizing without corner
/// alignment: output center `o + 0.5` maps to input coordinate
/// `(o + 0.5) * n_in / n_out - 0.5`, and border samples clamp.
fn resize_axis<T: Scalar>(n_in: usize, n_out: usize) -> Vec<(usize, usize, T, T)> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|o| {
            let s = (o as f64 + 0.5) * scale - 0.5;
            let base = s.floor();
            let frac = s - base;
            let i = base as isize;
            let lim = n_in as isize - 1;
            let i0 = i.clamp(0, lim) as usize;
            let i1 = (i + 1).clamp(0, lim) as usize;
            (i0, i1, T::from_f64(1.0 - frac), T::from_f64(frac))
        })
        .collect()
}

pub fn resize_bilinear_forward<T: Scalar>(
    x: &[T],
    c: usize,
    h: usize,
    w: usize,
    ho: usize,
    wo: usize,
) -> Vec<T> {
    let ys = resize_axis::<T>(h, ho);
    let xs = resize_axis::<T>(w, wo);
    let mut out = vec![T::zero(); c * ho * wo];
    for ch in 0..c {
        let x_plane = &x[ch * h * w..(ch + 1) * h * w];
        let out_plane = &mut out[ch * ho * wo..(ch + 1) * ho * wo];
        for (oy, &(y0, y1, wy0, wy1)) in ys.iter().enumerate() {
            let r0 = &x_plane[y0 * w..y0 * w + w];
            let r1 = &x_plane[y1 * w..y1 * w + w];
            for (ox, &(x0, x1, wx0, wx1)) in xs.iter().enumerate() {
                out_plane[oy * wo + ox] = wy0 * (wx0 * r0[x0] + wx1 * r0[x1])
                    + wy1 * (wx0 * r1[x0] + wx1 * r1[x1]);
            }
        }
    }
    out
}

pub fn resize_bilinear_backward<T: Scalar>(
    grad_out: &[T],
    gx: &mut [T],
    c: usize,
    h: usize,
    w: usize,
    ho: usize,
    wo: usize,
) {
    let ys = resize_axis::<T>(h, ho);
    let xs = resize_axis::<T>(w, wo);
    for ch in 0..c {
        let g_plane = &grad_out[ch * ho * wo..(ch + 1) * ho * wo];
        let gx_plane = &mut gx[ch * h * w..(ch + 1) * h * w];
        for (oy, &(y0, y1, wy0, wy1)) in ys.iter().enumerate() {
            for (ox, &(x0, x1, wx0, wx1)) in xs.iter().enumerate() {
                let g = g_plane[oy * wo + ox];
                gx_plane[y0 * w + x0] += wy0 * wx0 * g;
                gx_plane[y0 * w + x1] += wy0 * wx1 * g;
                gx_plane[y1 * w + x0] += wy1 * wx0 * g;
                gx_plane[y1 * w + x1] += wy1 * wx1 * g;
            }
        }
    }
}
