mod support;

use support::cases::op_checks;
use support::*;
use uavnav_tensor::Tape;

const SEEDS: u64 = 20;

#[test]
fn every_op_matches_finite_differences() {
    for seed in 0..SEEDS {
        for (op, errs) in op_checks(seed) {
            assert_grads_close(&errs, op, seed);
        }
    }
}

#[test]
fn op_suite_covers_every_differentiable_op() {
    let names: Vec<&str> = op_checks(0).into_iter().map(|(n, _)| n).collect();
    for op in [
        "conv2d",
        "conv2d_transpose",
        "dense",
        "layer_norm",
        "relu",
        "tanh",
        "exp",
        "add",
        "sub",
        "mul",
        "minimum",
        "affine",
        "gaussian_logprob",
    ] {
        assert!(names.contains(&op), "{op} missing");
    }
}

#[test]
fn backward_is_bitwise_deterministic() {
    let run = || {
        let mut r = rng(7);
        let x = random_tensor(&mut r, &[2, 3, 9, 9], 1.0);
        let k = random_tensor(&mut r, &[4, 3, 3, 3], 0.5);
        let b = random_tensor(&mut r, &[4], 0.5);
        let mut tape = Tape::new();
        let (xv, kv, bv) = (tape.param(&x), tape.param(&k), tape.param(&b));
        let y = tape.conv2d(xv, kv, bv, 2).unwrap();
        let y = tape.relu(y).unwrap();
        let y = tape.square(y).unwrap();
        let l = tape.sum(y).unwrap();
        let g = tape.backward(l).unwrap();
        (g.wrt(xv), g.wrt(kv), g.wrt(bv))
    };
    let (a, b) = (run(), run());
    assert_eq!(a.0.data(), b.0.data());
    assert_eq!(a.1.data(), b.1.data());
    assert_eq!(a.2.data(), b.2.data());
}
