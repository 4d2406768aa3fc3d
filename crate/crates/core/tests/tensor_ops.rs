//! Forward semantics and gradient checks for every tape op, against
//! hand-computed values and central finite differences at 64-bit.

use descry_core::tensor::{Scalar, Shape, Tape, Tensor, Var};
use descry_core::testutil::{finite_difference_gradient, max_relative_error, pseudo_random_vec};

/// Per-op gradient tolerance.
const OP_TOL: f64 = 1e-4;
const FD_EPS: f64 = 1e-5;

/// Checks analytic gradients of `build`'s scalar output against central
/// finite differences over every element of every leaf.
fn grad_check<F>(inputs: &[(Shape, Vec<f64>)], tol: f64, build: F)
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Var,
{
    let mut tape = Tape::new();
    let leaves: Vec<Var> = inputs
        .iter()
        .map(|(shape, data)| tape.leaf(*shape, data.clone(), true).unwrap())
        .collect();
    let loss = build(&mut tape, &leaves);
    tape.backward(loss).unwrap();
    let analytic: Vec<f64> = leaves
        .iter()
        .flat_map(|&v| tape.grad(v).expect("leaf gradient").to_vec())
        .collect();

    let flat: Vec<f64> = inputs.iter().flat_map(|(_, d)| d.clone()).collect();
    let f = |xs: &[f64]| {
        let mut tape = Tape::new();
        let mut offset = 0;
        let leaves: Vec<Var> = inputs
            .iter()
            .map(|(shape, _)| {
                let n = shape.numel();
                let v = tape.leaf(*shape, xs[offset..offset + n].to_vec(), true).unwrap();
                offset += n;
                v
            })
            .collect();
        let loss = build(&mut tape, &leaves);
        tape.scalar_value(loss).unwrap()
    };
    let numeric = finite_difference_gradient(f, &flat, FD_EPS);
    let err = max_relative_error(&analytic, &numeric);
    assert!(err < tol, "gradient mismatch: max relative error {err:.3e} >= {tol:.0e}");
}

/// Loss used across gradient checks: mean of the op output weighted by
/// a fixed pseudo-random cotangent, so every output element matters
/// with a distinct weight.
fn projected_mean(tape: &mut Tape<f64>, y: Var, seed: u64) -> Var {
    let shape = tape.shape(y);
    let r = tape
        .leaf(shape, pseudo_random_vec(shape.numel(), seed), false)
        .unwrap();
    let weighted = tape.mul(y, r).unwrap();
    tape.mean_all(weighted).unwrap()
}

fn rand_input(shape: Shape, seed: u64) -> (Shape, Vec<f64>) {
    (shape, pseudo_random_vec(shape.numel(), seed))
}

#[test]
fn conv1x1_identity_kernel_reproduces_input() {
    // Weights form the 3x3 identity map across channels.
    let mut tape = Tape::<f64>::new();
    let x_data = pseudo_random_vec(3 * 4 * 5, 1);
    let x = tape.leaf(Shape::chw(3, 4, 5), x_data.clone(), false).unwrap();
    let mut w = vec![0.0; 9];
    w[0] = 1.0; // (out 0, in 0)
    w[4] = 1.0; // (out 1, in 1)
    w[8] = 1.0; // (out 2, in 2)
    let w = tape.leaf(Shape::flat(9), w, false).unwrap();
    let b = tape.leaf(Shape::flat(3), vec![0.0; 3], false).unwrap();
    let y = tape.conv2d(x, w, b, 3, 1).unwrap();
    assert_eq!(tape.value(y), x_data.as_slice());
}

#[test]
fn conv3x3_ones_kernel_counts_padded_neighborhood() {
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(Shape::chw(1, 3, 3), vec![1.0; 9], false).unwrap();
    let w = tape.leaf(Shape::flat(9), vec![1.0; 9], false).unwrap();
    let b = tape.leaf(Shape::flat(1), vec![0.0], false).unwrap();
    let y = tape.conv2d(x, w, b, 1, 3).unwrap();
    // Zero padding: corners see a 2x2 live window, edges 2x3, center 3x3.
    assert_eq!(
        tape.value(y),
        &[4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]
    );
}

#[test]
fn conv2d_bias_broadcasts_per_channel() {
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(Shape::chw(1, 2, 2), vec![0.0; 4], false).unwrap();
    let w = tape.leaf(Shape::flat(2), vec![0.0; 2], false).unwrap();
    let b = tape.leaf(Shape::flat(2), vec![3.5, -1.25], false).unwrap();
    let y = tape.conv2d(x, w, b, 2, 1).unwrap();
    assert_eq!(tape.value(y), &[3.5, 3.5, 3.5, 3.5, -1.25, -1.25, -1.25, -1.25]);
}

#[test]
fn conv2d_gradients_match_finite_differences() {
    for (c_in, c_out, k, h, w, seed) in [
        (1usize, 1usize, 1usize, 3usize, 3usize, 10u64),
        (3, 2, 3, 5, 4, 20),
        (8, 4, 3, 16, 16, 30),
        (2, 5, 1, 7, 6, 40),
    ] {
        let inputs = vec![
            rand_input(Shape::chw(c_in, h, w), seed),
            rand_input(Shape::flat(c_out * c_in * k * k), seed + 1),
            rand_input(Shape::flat(c_out), seed + 2),
        ];
        grad_check(&inputs, OP_TOL, |tape, leaves| {
            let y = tape.conv2d(leaves[0], leaves[1], leaves[2], c_out, k).unwrap();
            projected_mean(tape, y, seed + 3)
        });
    }
}

#[test]
fn conv2d_rejects_bad_shapes() {
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(Shape::chw(3, 4, 4), vec![0.0; 48], false).unwrap();
    let w = tape.leaf(Shape::flat(10), vec![0.0; 10], false).unwrap();
    let b = tape.leaf(Shape::flat(2), vec![0.0; 2], false).unwrap();
    // Weight count does not match (c_out, c_in, k, k).
    assert!(tape.conv2d(x, w, b, 2, 1).is_err());
    // Unsupported kernel size.
    let w9 = tape.leaf(Shape::flat(2 * 3 * 25), vec![0.0; 150], false).unwrap();
    assert!(tape.conv2d(x, w9, b, 2, 5).is_err());
    // Flat input is not an image.
    let flat = tape.leaf(Shape::flat(48), vec![0.0; 48], false).unwrap();
    let w1 = tape.leaf(Shape::flat(6), vec![0.0; 6], false).unwrap();
    assert!(tape.conv2d(flat, w1, b, 2, 1).is_err());
}

#[test]
fn elu_and_sigmoid_fixed_points() {
    let mut tape = Tape::<f64>::new();
    let x = tape
        .leaf(Shape::flat(3), vec![0.0, 1.5, -2.0], false)
        .unwrap();
    let e = tape.elu(x).unwrap();
    assert_eq!(tape.value(e)[0], 0.0);
    assert_eq!(tape.value(e)[1], 1.5);
    assert!((tape.value(e)[2] - ((-2.0f64).exp() - 1.0)).abs() < 1e-15);
    let s = tape.sigmoid(x).unwrap();
    assert_eq!(tape.value(s)[0], 0.5);
}

#[test]
fn mul_by_zeros_annihilates() {
    let mut tape = Tape::<f64>::new();
    let x = tape
        .leaf(Shape::chw(2, 3, 3), pseudo_random_vec(18, 5), false)
        .unwrap();
    let z = tape.leaf(Shape::chw(2, 3, 3), vec![0.0; 18], false).unwrap();
    let y = tape.mul(x, z).unwrap();
    assert!(tape.value(y).iter().all(|&v| v == 0.0));
}

#[test]
fn pointwise_ops_match_finite_differences() {
    let shape = Shape::chw(4, 6, 5);
    let x = rand_input(shape, 100);

    grad_check(&[x.clone()], OP_TOL, |tape, l| {
        let y = tape.elu(l[0]).unwrap();
        projected_mean(tape, y, 101)
    });
    grad_check(&[x.clone()], OP_TOL, |tape, l| {
        let y = tape.sigmoid(l[0]).unwrap();
        projected_mean(tape, y, 102)
    });
    grad_check(&[x.clone()], OP_TOL, |tape, l| {
        let y = tape.abs(l[0]).unwrap();
        projected_mean(tape, y, 103)
    });
    grad_check(&[x.clone()], OP_TOL, |tape, l| {
        let y = tape.scale(l[0], -1.75).unwrap();
        projected_mean(tape, y, 104)
    });
    grad_check(&[x.clone()], OP_TOL, |tape, l| {
        let y = tape.add_const(l[0], 0.37).unwrap();
        projected_mean(tape, y, 105)
    });

    // ln needs strictly positive inputs.
    let positive: Vec<f64> = pseudo_random_vec(shape.numel(), 106).iter().map(|v| v.abs() + 0.5).collect();
    grad_check(&[(shape, positive)], OP_TOL, |tape, l| {
        let y = tape.ln(l[0]).unwrap();
        projected_mean(tape, y, 107)
    });

    let y_in = rand_input(shape, 108);
    grad_check(&[x.clone(), y_in.clone()], OP_TOL, |tape, l| {
        let y = tape.add(l[0], l[1]).unwrap();
        projected_mean(tape, y, 109)
    });
    grad_check(&[x.clone(), y_in.clone()], OP_TOL, |tape, l| {
        let y = tape.sub(l[0], l[1]).unwrap();
        projected_mean(tape, y, 110)
    });
    grad_check(&[x, y_in], OP_TOL, |tape, l| {
        let y = tape.mul(l[0], l[1]).unwrap();
        projected_mean(tape, y, 111)
    });
}

#[test]
fn same_input_used_twice_accumulates_both_paths() {
    // loss built from mul(x, x): both argument slots feed the same leaf.
    let x = rand_input(Shape::flat(12), 115);
    grad_check(&[x], OP_TOL, |tape, l| {
        let y = tape.mul(l[0], l[0]).unwrap();
        tape.mean_all(y).unwrap()
    });
}

#[test]
fn concat_of_one_tensor_is_identity() {
    let mut tape = Tape::<f64>::new();
    let data = pseudo_random_vec(2 * 3 * 4, 7);
    let x = tape.leaf(Shape::chw(2, 3, 4), data.clone(), false).unwrap();
    let y = tape.concat_channels(&[x]).unwrap();
    assert_eq!(tape.value(y), data.as_slice());
    assert_eq!(tape.shape(y), Shape::chw(2, 3, 4));
}

#[test]
fn concat_channel_count_is_sum() {
    let mut tape = Tape::<f64>::new();
    let a = tape.leaf(Shape::chw(2, 3, 4), vec![1.0; 24], false).unwrap();
    let b = tape.leaf(Shape::chw(5, 3, 4), vec![2.0; 60], false).unwrap();
    let y = tape.concat_channels(&[a, b]).unwrap();
    assert_eq!(tape.shape(y), Shape::chw(7, 3, 4));
    assert_eq!(&tape.value(y)[..24], &[1.0; 24][..]);
    assert_eq!(&tape.value(y)[24..], &[2.0; 60][..]);
}

#[test]
fn concat_rejects_spatial_mismatch() {
    let mut tape = Tape::<f64>::new();
    let a = tape.leaf(Shape::chw(1, 3, 4), vec![0.0; 12], false).unwrap();
    let b = tape.leaf(Shape::chw(1, 4, 3), vec![0.0; 12], false).unwrap();
    assert!(tape.concat_channels(&[a, b]).is_err());
}

#[test]
fn concat_gradients_split_by_channel_range() {
    let a = rand_input(Shape::chw(2, 4, 4), 120);
    let b = rand_input(Shape::chw(3, 4, 4), 121);
    grad_check(&[a, b], OP_TOL, |tape, l| {
        let y = tape.concat_channels(&[l[0], l[1]]).unwrap();
        projected_mean(tape, y, 122)
    });
}

#[test]
fn avg_pool2_constant_and_block_mean() {
    let mut tape = Tape::<f64>::new();
    let c = tape.leaf(Shape::chw(1, 4, 4), vec![0.75; 16], false).unwrap();
    let y = tape.avg_pool2(c).unwrap();
    assert!(tape.value(y).iter().all(|&v| v == 0.75));

    let blk = tape
        .leaf(Shape::chw(1, 2, 2), vec![1.0, 2.0, 3.0, 4.0], false)
        .unwrap();
    let y = tape.avg_pool2(blk).unwrap();
    assert_eq!(tape.value(y), &[2.5]);
}

#[test]
fn avg_pool2_drops_odd_trailing_row_and_column() {
    let mut tape = Tape::<f64>::new();
    // 5x5: the rightmost column and bottom row never reach the output.
    let mut data = vec![1.0; 25];
    for x in 0..5 {
        data[4 * 5 + x] = 1000.0;
        data[x * 5 + 4] = 1000.0;
    }
    let x = tape.leaf(Shape::chw(1, 5, 5), data, false).unwrap();
    let y = tape.avg_pool2(x).unwrap();
    assert_eq!(tape.shape(y), Shape::chw(1, 2, 2));
    assert!(tape.value(y).iter().all(|&v| v == 1.0));
}

#[test]
fn avg_pool2_gradient_is_quarter_share() {
    let x = rand_input(Shape::chw(3, 6, 8), 130);
    grad_check(&[x], OP_TOL, |tape, l| {
        let y = tape.avg_pool2(l[0]).unwrap();
        projected_mean(tape, y, 131)
    });

    // Analytic shape of the backward: each input cell of a 2x2 block
    // receives exactly 0.25 of its output cell's gradient.
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(Shape::chw(1, 2, 2), vec![1.0, 2.0, 3.0, 4.0], true).unwrap();
    let y = tape.avg_pool2(x).unwrap();
    let loss = tape.mean_all(y).unwrap();
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(x).unwrap(), &[0.25; 4]);
}

#[test]
fn bilinear_up2_reproduces_constants() {
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(Shape::chw(2, 3, 5), vec![0.4; 30], false).unwrap();
    let y = tape.bilinear_up2(x).unwrap();
    assert_eq!(tape.shape(y), Shape::chw(2, 6, 10));
    assert!(tape.value(y).iter().all(|&v| (v - 0.4).abs() < 1e-15));
}

#[test]
fn bilinear_up2_single_pixel_replicates() {
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(Shape::chw(1, 1, 1), vec![5.5], false).unwrap();
    let y = tape.bilinear_up2(x).unwrap();
    assert_eq!(tape.value(y), &[5.5; 4]);
}

#[test]
fn bilinear_up2_matches_closed_form_on_ramp() {
    // A horizontal ramp x[i] = i doubled with half-pixel centers:
    // output o samples input coordinate (o + 0.5)/2 - 0.5, clamped to
    // the border, interpolating linearly.
    let mut tape = Tape::<f64>::new();
    let x = tape
        .leaf(Shape::chw(1, 1, 4), vec![0.0, 1.0, 2.0, 3.0], false)
        .unwrap();
    let y = tape.bilinear_up2(x).unwrap();
    let expect: Vec<f64> = (0..8)
        .map(|o| ((o as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, 3.0))
        .collect();
    for (got, want) in tape.value(y).iter().zip(&expect) {
        assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
    }
}

#[test]
fn bilinear_resize_gradients_match_finite_differences() {
    let x = rand_input(Shape::chw(2, 5, 7), 140);
    // Doubling, arbitrary enlargement, and downscale all go through the
    // same sampling tables.
    for (ho, wo, seed) in [(10usize, 14usize, 141u64), (9, 11, 142), (3, 4, 143)] {
        grad_check(&[x.clone()], OP_TOL, |tape, l| {
            let y = tape.bilinear_resize(l[0], ho, wo).unwrap();
            projected_mean(tape, y, seed)
        });
    }
}

#[test]
fn mean_all_gradient_is_uniform() {
    let mut tape = Tape::<f64>::new();
    let x = tape
        .leaf(Shape::chw(2, 3, 4), pseudo_random_vec(24, 150), true)
        .unwrap();
    let loss = tape.mean_all(x).unwrap();
    tape.backward(loss).unwrap();
    let g = tape.grad(x).unwrap();
    assert!(g.iter().all(|&v| (v - 1.0 / 24.0).abs() < 1e-15));
}

#[test]
fn backward_of_sum_gives_ones() {
    // sum(x) expressed as mean * n.
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(Shape::flat(10), pseudo_random_vec(10, 160), true).unwrap();
    let m = tape.mean_all(x).unwrap();
    let loss = tape.scale(m, 10.0).unwrap();
    tape.backward(loss).unwrap();
    assert!(tape.grad(x).unwrap().iter().all(|&v| (v - 1.0).abs() < 1e-12));
}

#[test]
fn backward_of_sum_of_squares_gives_two_x() {
    let mut tape = Tape::<f64>::new();
    let data = pseudo_random_vec(10, 161);
    let x = tape.leaf(Shape::flat(10), data.clone(), true).unwrap();
    let sq = tape.mul(x, x).unwrap();
    let m = tape.mean_all(sq).unwrap();
    let loss = tape.scale(m, 10.0).unwrap();
    tape.backward(loss).unwrap();
    for (g, v) in tape.grad(x).unwrap().iter().zip(&data) {
        assert!((g - 2.0 * v).abs() < 1e-12);
    }
}

#[test]
fn backward_accumulates_until_reset() {
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(Shape::flat(4), vec![1.0, 2.0, 3.0, 4.0], true).unwrap();
    let loss = tape.mean_all(x).unwrap();
    tape.backward(loss).unwrap();
    tape.backward(loss).unwrap();
    assert!(tape.grad(x).unwrap().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    tape.reset_grads();
    assert!(tape.grad(x).is_none());
    tape.backward(loss).unwrap();
    assert!(tape.grad(x).unwrap().iter().all(|&v| (v - 0.25).abs() < 1e-15));
}

#[test]
fn backward_rejects_non_scalar_loss() {
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(Shape::flat(4), vec![0.0; 4], true).unwrap();
    assert!(tape.backward(x).is_err());
}

#[test]
fn ln_rejects_non_positive_input() {
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(Shape::flat(2), vec![1.0, 0.0], false).unwrap();
    assert!(tape.ln(x).is_err());
}

#[test]
fn linear_ops_satisfy_superposition() {
    // f(a*x + b*y) == a*f(x) + b*f(y) to 1e-10 at 64-bit, for the ops
    // that claim linearity; conv with zero bias.
    let (a, b) = (0.3125f64, -1.5f64);
    let shape = Shape::chw(3, 6, 8);
    let xd = pseudo_random_vec(shape.numel(), 170);
    let yd = pseudo_random_vec(shape.numel(), 171);
    let combo: Vec<f64> = xd.iter().zip(&yd).map(|(x, y)| a * x + b * y).collect();
    let weights = pseudo_random_vec(2 * 3 * 9, 172);

    let apply = |input: &[f64], which: usize| -> Vec<f64> {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(shape, input.to_vec(), false).unwrap();
        let out = match which {
            0 => {
                let w = tape.leaf(Shape::flat(weights.len()), weights.clone(), false).unwrap();
                let zb = tape.leaf(Shape::flat(2), vec![0.0; 2], false).unwrap();
                tape.conv2d(x, w, zb, 2, 3).unwrap()
            }
            1 => tape.avg_pool2(x).unwrap(),
            2 => tape.bilinear_up2(x).unwrap(),
            3 => tape.concat_channels(&[x, x]).unwrap(),
            4 => {
                let y = tape.scale(x, 2.25).unwrap();
                tape.add(x, y).unwrap()
            }
            _ => unreachable!(),
        };
        tape.value(out).to_vec()
    };

    for which in 0..5 {
        let fx = apply(&xd, which);
        let fy = apply(&yd, which);
        let fc = apply(&combo, which);
        for ((fc_v, fx_v), fy_v) in fc.iter().zip(&fx).zip(&fy) {
            assert!(
                (fc_v - (a * fx_v + b * fy_v)).abs() < 1e-10,
                "op {which} violates linearity"
            );
        }
    }
}

#[test]
fn forward_values_are_bit_reproducible() {
    let run = || -> Vec<f64> {
        let mut tape = Tape::<f64>::new();
        let x = tape
            .leaf(Shape::chw(4, 8, 8), pseudo_random_vec(256, 180), true)
            .unwrap();
        let w = tape
            .leaf(Shape::flat(3 * 4 * 9), pseudo_random_vec(108, 181), true)
            .unwrap();
        let b = tape.leaf(Shape::flat(3), pseudo_random_vec(3, 182), true).unwrap();
        let c = tape.conv2d(x, w, b, 3, 3).unwrap();
        let e = tape.elu(c).unwrap();
        let p = tape.avg_pool2(e).unwrap();
        let u = tape.bilinear_up2(p).unwrap();
        let loss = tape.mean_all(u).unwrap();
        tape.backward(loss).unwrap();
        let mut out = tape.value(u).to_vec();
        out.extend_from_slice(tape.grad(x).unwrap());
        out.extend_from_slice(tape.grad(w).unwrap());
        out
    };
    let (a, b) = (run(), run());
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn non_finite_leaf_is_rejected_in_debug_builds() {
    if !cfg!(debug_assertions) {
        return;
    }
    let mut tape = Tape::<f32>::new();
    let err = tape
        .leaf(Shape::flat(3), vec![1.0, f32::NAN, 0.0], false)
        .unwrap_err();
    assert!(matches!(err, descry_core::Error::Numerical(_)));
}

#[test]
fn f32_and_f64_tapes_agree_on_small_graphs() {
    // The same graph evaluated at both precisions should agree to
    // single-precision accuracy; this pins the generic code paths
    // together.
    let xd = pseudo_random_vec(2 * 4 * 4, 190);
    let wd = pseudo_random_vec(2 * 2 * 9, 191);

    fn run<T: Scalar>(xd: &[f64], wd: &[f64]) -> Vec<f64> {
        let mut tape = Tape::<T>::new();
        let x = Tensor::<f64>::new(Shape::chw(2, 4, 4), xd.to_vec()).unwrap().cast::<T>();
        let w = Tensor::<f64>::new(Shape::flat(wd.len()), wd.to_vec()).unwrap().cast::<T>();
        let x = tape.constant(&x).unwrap();
        let w = tape.constant(&w).unwrap();
        let b = tape.leaf(Shape::flat(2), vec![T::zero(); 2], false).unwrap();
        let c = tape.conv2d(x, w, b, 2, 3).unwrap();
        let s = tape.sigmoid(c).unwrap();
        let g = tape.mul(c, s).unwrap();
        tape.value(g).iter().map(|v| v.as_f64()).collect()
    }

    let lo = run::<f32>(&xd, &wd);
    let hi = run::<f64>(&xd, &wd);
    for (a, b) in lo.iter().zip(&hi) {
        assert!((a - b).abs() < 1e-5, "precision drift: {a} vs {b}");
    }
}
