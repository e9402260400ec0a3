//! Central finite-difference gradient oracle, independent of `Tape::backward`.

pub mod cases;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uavnav_tensor::{Result, Tape, Tensor, Var};

pub const FD_STEP: f32 = 1e-3;
pub const MAX_REL_ERR: f64 = 1e-3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f32) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
    Tensor::new(shape, data).unwrap()
}

/// Like `random_tensor` but with every entry at least `gap` away from zero.
pub fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize], gap: f32) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.gen_range(gap..1.0);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

/// Evaluate `f` on fresh leaves, returning the output's weighted sum in f64.
fn weighted_output<F>(f: &F, inputs: &[Tensor], weights: &[f64]) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t)).collect();
    let out = f(&mut tape, &vars).unwrap();
    tape.value(out)
        .data()
        .iter()
        .zip(weights)
        .map(|(&o, &w)| o as f64 * w)
        .sum()
}

/// Norm-wise relative error between analytic and central-difference
/// gradients of `Σ wᵢ·f(inputs)ᵢ`, one entry per input tensor.
///
/// At most `max_coords` randomly chosen coordinates per input are probed.
pub fn grad_check<F>(f: F, inputs: &[Tensor], seed: u64, max_coords: usize) -> Vec<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut r = rng(seed ^ 0x9e37_79b9);
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t)).collect();
    let out = f(&mut tape, &vars).unwrap();
    let out_len = tape.value(out).numel();
    let weights: Vec<f64> = (0..out_len).map(|_| r.gen_range(-1.0..1.0)).collect();
    let w_tensor = Tensor::new(tape.value(out).shape(), weights.iter().map(|&w| w as f32).collect()).unwrap();
    let wv = tape.constant(w_tensor);
    let prod = tape.mul(out, wv).unwrap();
    let loss = tape.sum(prod).unwrap();
    let grads = tape.backward(loss).unwrap();

    let mut errors = Vec::new();
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.wrt(vars[k]);
        let n = input.numel();
        let coords: Vec<usize> = if n <= max_coords {
            (0..n).collect()
        } else {
            (0..max_coords).map(|_| r.gen_range(0..n)).collect()
        };
        let (mut diff2, mut a2, mut n2) = (0.0f64, 0.0f64, 0.0f64);
        for &c in &coords {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[c] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[c] -= FD_STEP;
            let h = (plus[k].data()[c] as f64 - minus[k].data()[c] as f64) / 2.0;
            let numeric = (weighted_output(&f, &plus, &weights) - weighted_output(&f, &minus, &weights)) / (2.0 * h);
            let a = analytic.data()[c] as f64;
            diff2 += (a - numeric).powi(2);
            a2 += a * a;
            n2 += numeric * numeric;
        }
        errors.push(relative_error(diff2, a2, n2));
    }
    errors
}

/// `‖a − n‖ / max(‖a‖, ‖n‖)` from accumulated squared norms.
pub fn relative_error(diff2: f64, a2: f64, n2: f64) -> f64 {
    diff2.sqrt() / a2.sqrt().max(n2.sqrt()).max(1e-6)
}

pub fn assert_grads_close(errors: &[f64], what: &str, seed: u64) {
    for (i, e) in errors.iter().enumerate() {
        assert!(
            *e < MAX_REL_ERR,
            "{what}: input {i} relative error {e:.3e} (seed {seed})"
        );
    }
}
