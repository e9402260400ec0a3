use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

pub const DEFAULT_BETA1: f32 = 0.9;
pub const DEFAULT_BETA2: f32 = 0.999;
pub const DEFAULT_EPS: f32 = 1e-8;

/// Adam with bias-corrected moments over a fixed, ordered parameter list.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    step_count: u64,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
}

impl Adam {
    /// Zero moments shaped like `params`.
    pub fn new<'a>(learning_rate: f32, params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let first_moment: Vec<Tensor> = params.into_iter().map(|p| Tensor::zeros(p.shape())).collect();
        let second_moment = first_moment.clone();
        Self {
            learning_rate,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            eps: DEFAULT_EPS,
            step_count: 0,
            first_moment,
            second_moment,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn moments(&self) -> (&[Tensor], &[Tensor]) {
        (&self.first_moment, &self.second_moment)
    }

    /// Restore saved moments and step count; shapes must match the current ones.
    pub fn restore(&mut self, step_count: u64, first: Vec<Tensor>, second: Vec<Tensor>) -> Result<()> {
        let ok = first.len() == self.first_moment.len()
            && second.len() == self.second_moment.len()
            && first
                .iter()
                .zip(&self.first_moment)
                .all(|(a, b)| a.shape() == b.shape())
            && second
                .iter()
                .zip(&self.second_moment)
                .all(|(a, b)| a.shape() == b.shape());
        if !ok {
            return shape_err("Adam::restore", "moment shapes differ from parameters");
        }
        self.step_count = step_count;
        self.first_moment = first;
        self.second_moment = second;
        Ok(())
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return shape_err(
                "Adam::step",
                format!(
                    "{} params, {} grads, {} moment slots",
                    params.len(),
                    grads.len(),
                    self.first_moment.len()
                ),
            );
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first_moment) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return shape_err("Adam::step", format!("param {:?}, grad {:?}", p.shape(), g.shape()));
            }
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - (self.beta1 as f64).powi(t);
        let bc2 = 1.0 - (self.beta2 as f64).powi(t);
        let step_size = (self.learning_rate as f64 / bc1) as f32;
        let bc2_sqrt = bc2.sqrt() as f32;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            let pd = p.data_mut();
            for (((pv, &gv), mv), vv) in pd.iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                *mv = b1 * *mv + (1.0 - b1) * gv;
                *vv = b2 * *vv + (1.0 - b2) * gv * gv;
                *pv -= step_size * *mv / ((*vv).sqrt() / bc2_sqrt + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_against_sign() {
        let mut p = Tensor::new(&[3], vec![1.0, 1.0, 1.0]).unwrap();
        let g = Tensor::new(&[3], vec![0.3, -5.0, 1e-3]).unwrap();
        let mut adam = Adam::new(1e-3, [&p]);
        adam.step(&mut [&mut p], &[g]).unwrap();
        let d: Vec<f32> = p.data().iter().map(|v| v - 1.0).collect();
        assert!((d[0] + 1e-3).abs() < 1e-6);
        assert!((d[1] - 1e-3).abs() < 1e-6);
        assert!((d[2] + 1e-3).abs() < 1e-5);
    }

    #[test]
    fn zero_grad_leaves_params_and_counts_step() {
        let mut p = Tensor::new(&[2], vec![0.5, -0.5]).unwrap();
        let before = p.clone();
        let mut adam = Adam::new(1e-2, [&p]);
        adam.step(&mut [&mut p], &[Tensor::zeros(&[2])]).unwrap();
        assert_eq!(p, before);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn mismatched_grad_shape_errors() {
        let mut p = Tensor::zeros(&[2]);
        let mut adam = Adam::new(1e-2, [&p]);
        assert!(adam.step(&mut [&mut p], &[Tensor::zeros(&[3])]).is_err());
    }
}
