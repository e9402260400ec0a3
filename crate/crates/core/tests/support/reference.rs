//! Plain-loop f64 forward pass of the encoder → twin-Q composite. It shares no
//! code with the tape, so central differences taken on it are free of f32
//! rounding and independent of the kernels under test.

/// Parameter tensors in encoder-then-critic order, widened to f64.
pub struct Params {
    pub data: Vec<Vec<f64>>,
    pub shapes: Vec<Vec<usize>>,
}

pub struct Forward {
    /// Row-major `[n, 2]`: q1 and q2 per sample.
    pub q: Vec<f64>,
    /// Sign of every relu pre-activation, in evaluation order.
    pub pattern: Vec<bool>,
}

const LN_EPS: f64 = 1e-5;

/// Valid cross-correlation; `x` is `[c, h, w]`, kernel `[f, c, k, k]`.
fn conv(
    x: &[f64],
    (c, h, w): (usize, usize, usize),
    k: &[f64],
    kshape: &[usize],
    b: &[f64],
    stride: usize,
) -> (Vec<f64>, (usize, usize, usize)) {
    let (f, kk) = (kshape[0], kshape[2]);
    let (oh, ow) = ((h - kk) / stride + 1, (w - kk) / stride + 1);
    let mut y = vec![0.0; f * oh * ow];
    for o in 0..f {
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = b[o];
                for ci in 0..c {
                    for u in 0..kk {
                        for v in 0..kk {
                            acc +=
                                k[((o * c + ci) * kk + u) * kk + v] * x[(ci * h + i * stride + u) * w + j * stride + v];
                        }
                    }
                }
                y[(o * oh + i) * ow + j] = acc;
            }
        }
    }
    (y, (f, oh, ow))
}

/// `x · W + b` with `W` stored `[in, out]`.
fn dense(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let dout = b.len();
    let mut y = b.to_vec();
    for (i, xi) in x.iter().enumerate() {
        for (o, yo) in y.iter_mut().enumerate() {
            *yo += xi * w[i * dout + o];
        }
    }
    y
}

fn relu(x: &mut [f64], pattern: &mut Vec<bool>) {
    for v in x {
        pattern.push(*v > 0.0);
        *v = v.max(0.0);
    }
}

fn mlp(x: &[f64], p: &[Vec<f64>], pattern: &mut Vec<bool>) -> f64 {
    let mut h = dense(x, &p[0], &p[1]);
    relu(&mut h, pattern);
    let mut h = dense(&h, &p[2], &p[3]);
    relu(&mut h, pattern);
    dense(&h, &p[4], &p[5])[0]
}

/// `pixels` is `[n, c, h, w]`; `state` and `action` are row-major per sample.
pub fn encoder_critic(
    p: &Params,
    strides: &[usize],
    pixels: &[f64],
    dims: [usize; 4],
    state: &[f64],
    action: &[f64],
) -> Forward {
    let [n, c, h, w] = dims;
    let convs = strides.len();
    let (sd, ad) = (state.len() / n, action.len() / n);
    let mut pattern = Vec::new();
    let mut q = Vec::with_capacity(2 * n);
    for s in 0..n {
        let per = c * h * w;
        let mut x = pixels[s * per..(s + 1) * per].to_vec();
        let mut shape = (c, h, w);
        for (l, &stride) in strides.iter().enumerate() {
            let (y, sh) = conv(&x, shape, &p.data[2 * l], &p.shapes[2 * l], &p.data[2 * l + 1], stride);
            x = y;
            shape = sh;
            relu(&mut x, &mut pattern);
        }
        let z = dense(&x, &p.data[2 * convs], &p.data[2 * convs + 1]);
        let (gain, shift) = (&p.data[2 * convs + 2], &p.data[2 * convs + 3]);
        let d = z.len() as f64;
        let mean = z.iter().sum::<f64>() / d;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        let mut input: Vec<f64> = z
            .iter()
            .zip(gain.iter().zip(shift))
            .map(|(v, (g, b))| ((v - mean) * inv * g + b).tanh())
            .collect();
        input.extend_from_slice(&state[s * sd..(s + 1) * sd]);
        input.extend_from_slice(&action[s * ad..(s + 1) * ad]);
        let critic = &p.data[2 * convs + 4..];
        let half = critic.len() / 2;
        let q1 = mlp(&input, &critic[..half], &mut pattern);
        let q2 = mlp(&input, &critic[half..], &mut pattern);
        q.push(q1);
        q.push(q2);
    }
    Forward { q, pattern }
}
