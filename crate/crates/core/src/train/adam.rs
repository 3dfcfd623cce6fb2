//! Adam with bias correction. L2 regularisation is added to the gradient
//! (`g + λθ`) before the moment updates.

use crate::error::{Error, Result};
use crate::seqmodel::Params;
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub l2: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            l2: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    step: u64,
}

impl AdamState {
    pub fn new<'m>(params: impl IntoIterator<Item = &'m Matrix>) -> Self {
        let m: Vec<Matrix> = params
            .into_iter()
            .map(|p| Matrix::zeros(p.rows(), p.cols()))
            .collect();
        AdamState {
            v: m.clone(),
            m,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, i: usize) -> &Matrix {
        &self.m[i]
    }

    pub fn second_moment(&self, i: usize) -> &Matrix {
        &self.v[i]
    }

    fn check(&self, names: &[String], grads: &[Matrix]) -> Result<()> {
        if grads.len() != self.m.len() {
            return Err(Error::Config(format!(
                "{} gradients for {} optimiser slots",
                grads.len(),
                self.m.len()
            )));
        }
        for (i, g) in grads.iter().enumerate() {
            if g.shape() != self.m[i].shape() {
                return Err(Error::shape("adam_step", self.m[i].shape(), g.shape()));
            }
            if !g.is_finite() {
                let name = names.get(i).cloned().unwrap_or_else(|| format!("#{i}"));
                return Err(Error::NonFiniteGradient(name));
            }
        }
        Ok(())
    }

    fn update(&mut self, i: usize, param: &mut Matrix, grad: &Matrix, cfg: &AdamConfig) {
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let (m, v) = (self.m[i].data_mut(), self.v[i].data_mut());
        for (k, theta) in param.data_mut().iter_mut().enumerate() {
            let g = grad.data()[k] + cfg.l2 * *theta;
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            *theta -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }

    /// One update of a flat parameter list. Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, params: &mut [Matrix], grads: &[Matrix], names: &[String], cfg: &AdamConfig) -> Result<()> {
        self.check(names, grads)?;
        if params.len() != grads.len() {
            return Err(Error::Config(format!("{} parameters for {} gradients", params.len(), grads.len())));
        }
        self.step += 1;
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            self.update(i, p, g, cfg);
        }
        Ok(())
    }

    /// One update of model parameters in canonical order.
    pub fn step_params(&mut self, params: &mut Params, grads: &[Matrix], cfg: &AdamConfig) -> Result<()> {
        let mut names = Vec::new();
        params.map(&mut |n, _| names.push(n));
        self.check(&names, grads)?;
        if names.len() != grads.len() {
            return Err(Error::Config(format!("{} parameters for {} gradients", names.len(), grads.len())));
        }
        self.step += 1;
        let mut i = 0;
        params.for_each_mut(&mut |_, p| {
            self.update(i, p, &grads[i], cfg);
            i += 1;
        });
        Ok(())
    }
}
