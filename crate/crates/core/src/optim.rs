//! Adam and the alternating discriminator/generator schedule.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 2e-4,
            beta1: 0.0,
            beta2: 0.9,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for one network. Never share between networks.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    /// Zeroed moments shaped like `params`.
    pub fn new(config: AdamConfig, params: &[&Tensor]) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
        AdamState {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One bias-corrected Adam update. Gradients are validated before any
    /// parameter is touched, so a failed step leaves everything unchanged.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor], names: &[String]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(Error::Contract(format!(
                "adam tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            p.same_shape(g, "adam")?;
            if !g.is_finite() {
                let name = names.get(i).map_or("?", String::as_str);
                return Err(Error::NonFinite(format!("gradient of `{name}`")));
            }
        }

        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let iter = p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
            for ((theta, &grad), (mi, vi)) in iter {
                *mi = beta1 * *mi + (1.0 - beta1) * grad;
                *vi = beta2 * *vi + (1.0 - beta2) * grad * grad;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Discriminator,
    Generator,
}

/// `d_steps_per_g` discriminator micro-steps, then one generator step, repeated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AltSchedule {
    pub d_steps_per_g: usize,
}

impl Default for AltSchedule {
    fn default() -> Self {
        AltSchedule { d_steps_per_g: 5 }
    }
}

impl AltSchedule {
    pub fn role(&self, step: usize) -> Role {
        if step % (self.d_steps_per_g + 1) < self.d_steps_per_g {
            Role::Discriminator
        } else {
            Role::Generator
        }
    }

    /// Micro-steps needed for `g_updates` generator updates.
    pub fn micro_steps(&self, g_updates: usize) -> usize {
        g_updates * (self.d_steps_per_g + 1)
    }
}

/// Role of micro-step `step` under the default 5:1 schedule.
pub fn alt_schedule(step: usize) -> Role {
    AltSchedule::default().role(step)
}
