//! Finite-difference checks for every differentiable op, one seed at a time.

use uavnav_tensor::Tensor;

use super::{away_from_zero, grad_check, random_tensor, rng};

/// `(op name, per-input relative errors)` for every op at `seed`.
pub fn op_checks(seed: u64) -> Vec<(&'static str, Vec<f64>)> {
    let mut out = Vec::new();
    let mut r = rng(seed);

    let stride = 1 + (seed % 2) as usize;
    let x = random_tensor(&mut r, &[2, 2, 7, 6], 1.0);
    let k = random_tensor(&mut r, &[3, 2, 3, 3], 0.5);
    let b = random_tensor(&mut r, &[3], 0.5);
    out.push((
        "conv2d",
        grad_check(|t, v| t.conv2d(v[0], v[1], v[2], stride), &[x, k, b], seed, 64),
    ));

    let pad = if stride == 2 { (seed / 2 % 2) as usize } else { 0 };
    let x = random_tensor(&mut r, &[2, 3, 4, 5], 1.0);
    let k = random_tensor(&mut r, &[3, 2, 3, 3], 0.5);
    let b = random_tensor(&mut r, &[2], 0.5);
    out.push((
        "conv2d_transpose",
        grad_check(
            |t, v| t.conv2d_transpose(v[0], v[1], v[2], stride, pad),
            &[x, k, b],
            seed,
            64,
        ),
    ));

    let x = random_tensor(&mut r, &[4, 5], 1.0);
    let w = random_tensor(&mut r, &[5, 3], 1.0);
    let b = random_tensor(&mut r, &[3], 1.0);
    out.push((
        "dense",
        grad_check(|t, v| t.dense(v[0], v[1], v[2]), &[x, w, b], seed, 64),
    ));

    let x = random_tensor(&mut r, &[3, 6], 2.0);
    let g = random_tensor(&mut r, &[6], 1.5);
    let s = random_tensor(&mut r, &[6], 1.0);
    out.push((
        "layer_norm",
        grad_check(|t, v| t.layer_norm(v[0], v[1], v[2]), &[x, g, s], seed, 64),
    ));

    let x = away_from_zero(&mut r, &[3, 4], 0.05);
    out.push((
        "relu",
        grad_check(|t, v| t.relu(v[0]), std::slice::from_ref(&x), seed, 64),
    ));
    out.push((
        "tanh",
        grad_check(|t, v| t.tanh(v[0]), std::slice::from_ref(&x), seed, 64),
    ));
    out.push((
        "exp",
        grad_check(|t, v| t.exp(v[0]), std::slice::from_ref(&x), seed, 64),
    ));

    let y = random_tensor(&mut r, &[3, 4], 1.0);
    out.push((
        "mul",
        grad_check(|t, v| t.mul(v[0], v[1]), &[x.clone(), y.clone()], seed, 64),
    ));
    out.push((
        "add",
        grad_check(|t, v| t.add(v[0], v[1]), &[x.clone(), y.clone()], seed, 64),
    ));
    out.push((
        "sub",
        grad_check(|t, v| t.sub(v[0], v[1]), &[x.clone(), y.clone()], seed, 64),
    ));

    // keep the operands of `minimum` well separated
    let gap = away_from_zero(&mut r, &[3, 4], 0.05);
    let z = Tensor::new(&[3, 4], x.data().iter().zip(gap.data()).map(|(a, g)| a + g).collect()).unwrap();
    out.push((
        "minimum",
        grad_check(|t, v| t.minimum(v[0], v[1]), &[x.clone(), z], seed, 64),
    ));

    out.push((
        "affine",
        grad_check(
            |t, v| t.affine(v[0], &[1.0, -2.0, 0.5, 3.0], &[0.1, 0.2, 0.3, 0.4]),
            std::slice::from_ref(&x),
            seed,
            64,
        ),
    ));
    out.push((
        "slice/concat/row_sum/mean",
        grad_check(
            |t, v| {
                let a = t.slice_cols(v[0], 1, 3)?;
                let c = t.concat_cols(&[v[1], a])?;
                let s = t.row_sum(c)?;
                t.mean(s)
            },
            &[x.clone(), y.clone()],
            seed,
            64,
        ),
    ));
    out.push((
        "reshape/sum/mse",
        grad_check(
            |t, v| {
                let a = t.reshape(v[0], &[2, 6])?;
                let b = t.reshape(v[1], &[2, 6])?;
                let m = t.mse(a, b)?;
                let s = t.sum(a)?;
                t.add(m, s)
            },
            &[x, y],
            seed,
            64,
        ),
    ));

    let u = random_tensor(&mut r, &[4, 3], 1.5);
    let m = random_tensor(&mut r, &[4, 3], 1.0);
    let ls = random_tensor(&mut r, &[4, 3], 1.0);
    out.push((
        "gaussian_logprob",
        grad_check(|t, v| t.gaussian_logprob(v[0], v[1], v[2]), &[u, m, ls], seed, 64),
    ));
    out
}
