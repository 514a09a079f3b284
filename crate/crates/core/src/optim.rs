//! Adam over the model's two parameter blocks.

use crate::model::{Gradients, Model};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 0.002, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Moments {
    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    config: AdamConfig,
    t: u64,
    embedding: Moments,
    head: Moments,
}

impl Adam {
    pub fn new(model: &Model, config: AdamConfig) -> Self {
        let grads = Gradients::zeros_like(model);
        Self {
            config,
            t: 0,
            embedding: Moments::new(grads.embedding.len()),
            head: Moments::new(grads.head.len()),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected Adam update.
    pub fn step(&mut self, model: &mut Model, grads: &Gradients) {
        self.t += 1;
        let cfg = self.config;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        let (emb, head) = model.params_mut();
        update(emb, &grads.embedding, &mut self.embedding, &cfg, bc1, bc2);
        update(head, &grads.head, &mut self.head, &cfg, bc1, bc2);
    }
}

fn update(params: &mut [f64], grads: &[f64], mom: &mut Moments, cfg: &AdamConfig, bc1: f64, bc2: f64) {
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut mom.m).zip(&mut mom.v) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        *p -= cfg.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + cfg.eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::Representation;
    use crate::model::HeadKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> Model {
        Model::new(HeadKind::Mirror, Representation::Egocentric, &mut ChaCha8Rng::seed_from_u64(3)).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut m = model();
        let before = m.clone();
        let mut adam = Adam::new(&m, AdamConfig::default());
        let g = Gradients::zeros_like(&m);
        for _ in 0..5 {
            adam.step(&mut m, &g);
        }
        assert_eq!(m.head_weights(), before.head_weights());
        assert_eq!(m.embedding(), before.embedding());
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut m = model();
        let before = m.head_weights().to_vec();
        let mut adam = Adam::new(&m, AdamConfig::default());
        let mut g = Gradients::zeros_like(&m);
        g.head[0] = 3.0;
        g.head[1] = -0.5;
        adam.step(&mut m, &g);
        assert!((before[0] - m.head_weights()[0] - 0.002).abs() < 1e-9);
        assert!((m.head_weights()[1] - before[1] - 0.002).abs() < 1e-9);
        assert_eq!(m.head_weights()[2], before[2]);
    }

    #[test]
    fn clipping_bounds_components() {
        let m = model();
        let mut g = Gradients::zeros_like(&m);
        g.head[0] = 25.0;
        g.head[1] = -31.0;
        g.embedding[0] = 4.0;
        g.clip(20.0);
        assert_eq!(g.head[0], 20.0);
        assert_eq!(g.head[1], -20.0);
        assert_eq!(g.embedding[0], 4.0);
    }
}
