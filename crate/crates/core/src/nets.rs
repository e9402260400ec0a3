//! Encoder, decoder, Gaussian actor and twin Q critic.
//!
//! Parameters live in plain [`Tensor`]s owned by each network. A forward pass
//! first binds the parameters onto a [`Tape`] (see [`bind`]) and then
//! consumes the bound variables in the same order as [`Module::params`].

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use uavnav_tensor::{Tape, Tensor, Var};

use crate::error::{contract, Error, Result};
use crate::observation::STACK_LEN;
use crate::world::{CLIMB_RANGE, FORWARD_RANGE, YAW_RATE_RANGE};

pub const ACTION_DIM: usize = 3;
/// Velocity command plus body-frame goal.
pub const STATE_DIM: usize = 6;
pub const KERNEL: usize = 3;
pub const CONV_LAYERS: usize = 4;

/// `action = tanh(raw) · ACTION_SCALE + ACTION_SHIFT` maps onto the command box.
pub const ACTION_SCALE: [f32; 3] = [
    ((FORWARD_RANGE.1 - FORWARD_RANGE.0) / 2.0) as f32,
    ((CLIMB_RANGE.1 - CLIMB_RANGE.0) / 2.0) as f32,
    ((YAW_RATE_RANGE.1 - YAW_RATE_RANGE.0) / 2.0) as f32,
];
pub const ACTION_SHIFT: [f32; 3] = [
    ((FORWARD_RANGE.1 + FORWARD_RANGE.0) / 2.0) as f32,
    ((CLIMB_RANGE.1 + CLIMB_RANGE.0) / 2.0) as f32,
    ((YAW_RATE_RANGE.1 + YAW_RATE_RANGE.0) / 2.0) as f32,
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub latent_dim: usize,
    pub hidden: usize,
    pub filters: usize,
    pub log_std_min: f32,
    pub log_std_max: f32,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            latent_dim: 50,
            hidden: 256,
            filters: 32,
            log_std_min: -10.0,
            log_std_max: 2.0,
        }
    }
}

impl NetConfig {
    /// Full-size layer widths (1024-unit hidden layers).
    pub fn full_scale() -> Self {
        Self {
            hidden: 1024,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim < 2 || self.hidden == 0 || self.filters == 0 {
            return contract("latent_dim must be at least 2; hidden and filters positive");
        }
        if !(self.log_std_min < self.log_std_max) {
            return contract("log_std_min must be below log_std_max");
        }
        Ok(())
    }
}

/// Spatial sizes after each encoder conv, for an `height × width` input.
pub fn encoder_geometry(height: usize, width: usize) -> Result<[(usize, usize); CONV_LAYERS]> {
    let mut dims = [(0, 0); CONV_LAYERS];
    let (mut h, mut w) = (height, width);
    for (i, d) in dims.iter_mut().enumerate() {
        let stride = if i == 0 { 2 } else { 1 };
        if h < KERNEL || w < KERNEL {
            return contract(format!("{}×{} input is too small for the encoder", height, width));
        }
        h = (h - KERNEL) / stride + 1;
        w = (w - KERNEL) / stride + 1;
        *d = (h, w);
    }
    Ok(dims)
}

/// Named parameters in a fixed order.
pub trait Module {
    fn params(&self) -> Vec<(String, &Tensor)>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.numel()).sum()
    }

    /// Replace every parameter from `(name, tensor)` pairs, checking names and shapes.
    fn load_params(&mut self, loaded: Vec<(String, Tensor)>) -> Result<()> {
        let expected: Vec<(String, Vec<usize>)> = self
            .params()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        if loaded.len() != expected.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                expected.len(),
                loaded.len()
            )));
        }
        for ((name, shape), (lname, t)) in expected.iter().zip(&loaded) {
            if name != lname || shape.as_slice() != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {} {:?} does not match {} {:?}",
                    lname,
                    t.shape(),
                    name,
                    shape
                )));
            }
        }
        for (dst, (_, src)) in self.params_mut().into_iter().zip(loaded) {
            *dst = src;
        }
        Ok(())
    }
}

/// Put every parameter of `module` on the tape, trainable or constant.
pub fn bind<M: Module + ?Sized>(module: &M, tape: &mut Tape, trainable: bool) -> Vec<Var> {
    module
        .params()
        .into_iter()
        .map(|(_, t)| {
            if trainable {
                tape.param(t)
            } else {
                tape.constant(t.clone())
            }
        })
        .collect()
}

/// `target ← (1 − τ)·target + τ·online`, elementwise over matching parameters.
pub fn soft_update<M: Module>(target: &mut M, online: &M, tau: f32) -> Result<()> {
    if !(tau > 0.0 && tau <= 1.0) {
        return contract(format!("soft-update rate must be in (0, 1], got {}", tau));
    }
    let src = online.params();
    for (dst, (_, s)) in target.params_mut().into_iter().zip(src) {
        if dst.shape() != s.shape() {
            return contract("soft update between networks of different shapes");
        }
        for (d, &o) in dst.data_mut().iter_mut().zip(s.data()) {
            *d = (1.0 - tau) * *d + tau * o;
        }
    }
    Ok(())
}

/// Orthogonal `rows × cols` matrix (orthonormal columns or rows, whichever is shorter).
pub fn orthogonal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let g = DMatrix::<f64>::from_fn(tall, short, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // sign fix so the draw is uniform over the orthogonal group
    for j in 0..short {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let m = if rows >= cols { q } else { q.transpose() };
    let data = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .map(|(i, j)| m[(i, j)] as f32)
        .collect();
    Tensor::new(&[rows, cols], data).expect("orthogonal shape")
}

fn uniform(shape: &[usize], bound: f32, rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::new(shape, data).expect("uniform shape")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    fn new(din: usize, dout: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            weight: orthogonal(din, dout, rng),
            bias: Tensor::zeros(&[dout]),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conv {
    pub kernel: Tensor,
    pub bias: Tensor,
    pub stride: usize,
}

impl Conv {
    fn new(in_ch: usize, out_ch: usize, stride: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / ((in_ch * KERNEL * KERNEL) as f32).sqrt();
        Self {
            kernel: uniform(&[out_ch, in_ch, KERNEL, KERNEL], bound, rng),
            bias: uniform(&[out_ch], bound, rng),
            stride,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Deconv {
    pub kernel: Tensor,
    pub bias: Tensor,
    pub stride: usize,
    pub output_padding: usize,
}

impl Deconv {
    fn new(in_ch: usize, out_ch: usize, stride: usize, output_padding: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / ((out_ch * KERNEL * KERNEL) as f32).sqrt();
        Self {
            kernel: uniform(&[in_ch, out_ch, KERNEL, KERNEL], bound, rng),
            bias: uniform(&[out_ch], bound, rng),
            stride,
            output_padding,
        }
    }
}

fn push_named<'a>(out: &mut Vec<(String, &'a Tensor)>, prefix: &str, w: &'a Tensor, b: &'a Tensor) {
    out.push((format!("{prefix}.weight"), w));
    out.push((format!("{prefix}.bias"), b));
}

/// Conv stack → dense → layer norm → tanh.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    pub convs: Vec<Conv>,
    pub fc: Linear,
    pub ln_gain: Tensor,
    pub ln_shift: Tensor,
    pub height: usize,
    pub width: usize,
}

impl Encoder {
    pub fn new(height: usize, width: usize, cfg: &NetConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        let geom = encoder_geometry(height, width)?;
        let (h4, w4) = geom[CONV_LAYERS - 1];
        let mut convs = Vec::with_capacity(CONV_LAYERS);
        for i in 0..CONV_LAYERS {
            let in_ch = if i == 0 { STACK_LEN } else { cfg.filters };
            convs.push(Conv::new(in_ch, cfg.filters, if i == 0 { 2 } else { 1 }, rng));
        }
        Ok(Self {
            convs,
            fc: Linear::new(cfg.filters * h4 * w4, cfg.latent_dim, rng),
            ln_gain: Tensor::ones(&[cfg.latent_dim]),
            ln_shift: Tensor::zeros(&[cfg.latent_dim]),
            height,
            width,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.ln_gain.numel()
    }

    /// `pixels` is `N×3×H×W`; returns the `N×latent` code.
    pub fn forward(&self, tape: &mut Tape, p: &[Var], pixels: Var) -> Result<Var> {
        let mut p = p.iter().copied();
        let mut next = || p.next().expect("encoder parameters bound");
        let mut x = pixels;
        for c in &self.convs {
            let (k, b) = (next(), next());
            x = tape.conv2d(x, k, b, c.stride)?;
            x = tape.relu(x)?;
        }
        let n = tape.value(x).shape()[0];
        let flat = tape.value(x).numel() / n;
        x = tape.reshape(x, &[n, flat])?;
        let (w, b) = (next(), next());
        x = tape.dense(x, w, b)?;
        let (g, s) = (next(), next());
        x = tape.layer_norm(x, g, s)?;
        Ok(tape.tanh(x)?)
    }
}

impl Module for Encoder {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, c) in self.convs.iter().enumerate() {
            push_named(&mut out, &format!("conv{i}"), &c.kernel, &c.bias);
        }
        push_named(&mut out, "fc", &self.fc.weight, &self.fc.bias);
        out.push(("ln.gain".into(), &self.ln_gain));
        out.push(("ln.shift".into(), &self.ln_shift));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for c in &mut self.convs {
            out.push(&mut c.kernel);
            out.push(&mut c.bias);
        }
        out.push(&mut self.fc.weight);
        out.push(&mut self.fc.bias);
        out.push(&mut self.ln_gain);
        out.push(&mut self.ln_shift);
        out
    }
}

/// Dense → three stride-1 deconvs → stride-2 deconv back to the input size.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoder {
    pub fc: Linear,
    pub deconvs: Vec<Deconv>,
    pub filters: usize,
    pub seed_hw: (usize, usize),
}

impl Decoder {
    pub fn new(height: usize, width: usize, cfg: &NetConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        let geom = encoder_geometry(height, width)?;
        let (h4, w4) = geom[CONV_LAYERS - 1];
        if (height - KERNEL) % 2 != (width - KERNEL) % 2 {
            return contract("height and width must have the same parity");
        }
        let fc = Linear::new(cfg.latent_dim, cfg.filters * h4 * w4, rng);
        let mut deconvs = Vec::with_capacity(CONV_LAYERS);
        for _ in 0..CONV_LAYERS - 1 {
            deconvs.push(Deconv::new(cfg.filters, cfg.filters, 1, 0, rng));
        }
        deconvs.push(Deconv::new(cfg.filters, STACK_LEN, 2, (height - KERNEL) % 2, rng));
        Ok(Self {
            fc,
            deconvs,
            filters: cfg.filters,
            seed_hw: (h4, w4),
        })
    }

    /// `latent` is `N×latent`; returns `N×3×H×W`.
    pub fn forward(&self, tape: &mut Tape, p: &[Var], latent: Var) -> Result<Var> {
        let mut p = p.iter().copied();
        let mut next = || p.next().expect("decoder parameters bound");
        let n = tape.value(latent).shape()[0];
        let (w, b) = (next(), next());
        let mut x = tape.dense(latent, w, b)?;
        x = tape.relu(x)?;
        x = tape.reshape(x, &[n, self.filters, self.seed_hw.0, self.seed_hw.1])?;
        let last = self.deconvs.len() - 1;
        for (i, d) in self.deconvs.iter().enumerate() {
            let (k, b) = (next(), next());
            x = tape.conv2d_transpose(x, k, b, d.stride, d.output_padding)?;
            if i < last {
                x = tape.relu(x)?;
            }
        }
        Ok(x)
    }
}

impl Module for Decoder {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        push_named(&mut out, "fc", &self.fc.weight, &self.fc.bias);
        for (i, d) in self.deconvs.iter().enumerate() {
            push_named(&mut out, &format!("deconv{i}"), &d.kernel, &d.bias);
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.fc.weight, &mut self.fc.bias];
        for d in &mut self.deconvs {
            out.push(&mut d.kernel);
            out.push(&mut d.bias);
        }
        out
    }
}

/// Three dense layers with ReLU between them.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: [Linear; 3],
}

impl Mlp {
    pub fn new(din: usize, hidden: usize, dout: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            layers: [
                Linear::new(din, hidden, rng),
                Linear::new(hidden, hidden, rng),
                Linear::new(hidden, dout, rng),
            ],
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &[Var], input: Var) -> Result<Var> {
        let mut x = input;
        for i in 0..3 {
            x = tape.dense(x, p[2 * i], p[2 * i + 1])?;
            if i < 2 {
                x = tape.relu(x)?;
            }
        }
        Ok(x)
    }
}

impl Module for Mlp {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            push_named(&mut out, &format!("l{i}"), &l.weight, &l.bias);
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}

/// Mean and bounded log-std of the pre-squash Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct Actor {
    pub mlp: Mlp,
    pub log_std_min: f32,
    pub log_std_max: f32,
}

/// Tape handles for one policy evaluation.
#[derive(Clone, Copy, Debug)]
pub struct PolicyOutput {
    pub mean: Var,
    pub log_std: Var,
    /// Squashed sample (or squashed mean) in `[-1, 1]`.
    pub squashed: Var,
    /// Log-probability of the squashed sample, `N`; only set when sampling.
    pub log_prob: Option<Var>,
}

impl Actor {
    pub fn new(latent_dim: usize, cfg: &NetConfig, rng: &mut ChaCha8Rng) -> Self {
        Self {
            mlp: Mlp::new(latent_dim + STATE_DIM, cfg.hidden, 2 * ACTION_DIM, rng),
            log_std_min: cfg.log_std_min,
            log_std_max: cfg.log_std_max,
        }
    }

    /// `features` is `N×(latent+6)`. With `noise` (`N×3` standard normal
    /// draws) the output is a reparameterised sample; without it, the mean.
    pub fn forward(&self, tape: &mut Tape, p: &[Var], features: Var, noise: Option<Tensor>) -> Result<PolicyOutput> {
        let out = self.mlp.forward(tape, p, features)?;
        let mean = tape.slice_cols(out, 0, ACTION_DIM)?;
        let raw_ls = tape.slice_cols(out, ACTION_DIM, 2 * ACTION_DIM)?;
        let t = tape.tanh(raw_ls)?;
        let half = 0.5 * (self.log_std_max - self.log_std_min);
        let log_std = tape.affine(t, &[half; ACTION_DIM], &[self.log_std_min + half; ACTION_DIM])?;
        let (pre, log_prob) = match noise {
            Some(eps) => {
                let eps = tape.constant(eps);
                let std = tape.exp(log_std)?;
                let spread = tape.mul(std, eps)?;
                let raw = tape.add(mean, spread)?;
                let lp = tape.gaussian_logprob(raw, mean, log_std)?;
                (raw, Some(lp))
            }
            None => (mean, None),
        };
        let squashed = tape.tanh(pre)?;
        Ok(PolicyOutput {
            mean,
            log_std,
            squashed,
            log_prob,
        })
    }
}

impl Module for Actor {
    fn params(&self) -> Vec<(String, &Tensor)> {
        self.mlp.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.mlp.params_mut()
    }
}

/// Two independent Q heads on `latent ⊕ state ⊕ action`.
#[derive(Clone, Debug, PartialEq)]
pub struct Critic {
    pub q1: Mlp,
    pub q2: Mlp,
}

impl Critic {
    pub fn new(latent_dim: usize, cfg: &NetConfig, rng: &mut ChaCha8Rng) -> Self {
        let din = latent_dim + STATE_DIM + ACTION_DIM;
        Self {
            q1: Mlp::new(din, cfg.hidden, 1, rng),
            q2: Mlp::new(din, cfg.hidden, 1, rng),
        }
    }

    /// `input` is `N×(latent+6+3)`; returns both heads as `N×1`.
    pub fn forward(&self, tape: &mut Tape, p: &[Var], input: Var) -> Result<(Var, Var)> {
        let half = p.len() / 2;
        let a = self.q1.forward(tape, &p[..half], input)?;
        let b = self.q2.forward(tape, &p[half..], input)?;
        Ok((a, b))
    }
}

impl Module for Critic {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = self
            .q1
            .params()
            .into_iter()
            .map(|(n, t)| (format!("q1.{n}"), t))
            .collect();
        out.extend(self.q2.params().into_iter().map(|(n, t)| (format!("q2.{n}"), t)));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.q1.params_mut();
        out.extend(self.q2.params_mut());
        out
    }
}

/// Map a squashed action in `[-1, 1]³` to command units.
pub fn squashed_to_command(squashed: &[f32]) -> [f64; 3] {
    std::array::from_fn(|i| (squashed[i] * ACTION_SCALE[i] + ACTION_SHIFT[i]) as f64)
}

/// Inverse of [`squashed_to_command`].
pub fn command_to_squashed(cmd: [f64; 3]) -> [f32; 3] {
    std::array::from_fn(|i| ((cmd[i] as f32 - ACTION_SHIFT[i]) / ACTION_SCALE[i]).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(3)
    }

    #[test]
    fn geometry_for_desk_resolutions() {
        assert_eq!(encoder_geometry(64, 64).unwrap()[3], (25, 25));
        assert_eq!(encoder_geometry(32, 32).unwrap()[3], (9, 9));
        assert_eq!(encoder_geometry(16, 16).unwrap()[3], (1, 1));
        assert!(encoder_geometry(12, 12).is_err());
    }

    #[test]
    fn orthogonal_columns() {
        let w = orthogonal(40, 6, &mut rng());
        for i in 0..6 {
            for j in 0..6 {
                let dot: f32 = (0..40).map(|r| w.data()[r * 6 + i] * w.data()[r * 6 + j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-5);
            }
        }
        let w = orthogonal(3, 8, &mut rng());
        assert_eq!(w.shape(), &[3, 8]);
        let n0: f32 = w.data()[..8].iter().map(|v| v * v).sum();
        assert!((n0 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn decoder_restores_input_shape() {
        let cfg = NetConfig {
            hidden: 16,
            filters: 4,
            ..NetConfig::default()
        };
        for (h, w) in [(16, 16), (17, 17), (32, 32), (64, 64), (33, 65)] {
            let mut r = rng();
            let enc = Encoder::new(h, w, &cfg, &mut r).unwrap();
            let dec = Decoder::new(h, w, &cfg, &mut r).unwrap();
            let mut tape = Tape::new();
            let x = tape.constant(Tensor::zeros(&[2, 3, h, w]));
            let ep = bind(&enc, &mut tape, false);
            let z = enc.forward(&mut tape, &ep, x).unwrap();
            assert_eq!(tape.value(z).shape(), &[2, 50]);
            let dp = bind(&dec, &mut tape, false);
            let y = dec.forward(&mut tape, &dp, z).unwrap();
            assert_eq!(tape.value(y).shape(), &[2, 3, h, w]);
        }
    }

    #[test]
    fn latent_in_open_unit_interval() {
        let cfg = NetConfig::default();
        let enc = Encoder::new(16, 16, &cfg, &mut rng()).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::full(&[1, 3, 16, 16], 0.7));
        let p = bind(&enc, &mut tape, false);
        let z = enc.forward(&mut tape, &p, x).unwrap();
        assert!(tape.value(z).data().iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn soft_update_examples() {
        let cfg = NetConfig {
            hidden: 4,
            ..NetConfig::default()
        };
        let mut target = Critic::new(2, &cfg, &mut rng());
        let mut online = target.clone();
        for t in target.params_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        for t in online.params_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = 1.0);
        }
        soft_update(&mut target, &online, 0.01).unwrap();
        assert!(target
            .params()
            .iter()
            .all(|(_, t)| t.data().iter().all(|&v| (v - 0.01).abs() < 1e-7)));
        soft_update(&mut target, &online, 1.0).unwrap();
        assert_eq!(target, online);
        assert!(soft_update(&mut target, &online, 0.0).is_err());
    }

    #[test]
    fn action_mapping_midpoints_and_limits() {
        assert_eq!(squashed_to_command(&[0.0, 0.0, 0.0]), [1.0, 0.0, 0.0]);
        assert_eq!(squashed_to_command(&[1.0, 1.0, 1.0]), [2.0, 0.5, 0.5]);
        assert_eq!(squashed_to_command(&[-1.0, -1.0, -1.0]), [0.0, -0.5, -0.5]);
        assert_eq!(command_to_squashed([1.5, -0.25, 0.5]), [0.5, -0.5, 1.0]);
    }

    #[test]
    fn load_params_checks_names() {
        let cfg = NetConfig {
            hidden: 4,
            ..NetConfig::default()
        };
        let mut a = Actor::new(2, &cfg, &mut rng());
        let mut wrong: Vec<(String, Tensor)> = a.params().into_iter().map(|(n, t)| (n, t.clone())).collect();
        wrong[0].0 = "bogus".into();
        assert!(a.load_params(wrong).is_err());
    }
}
