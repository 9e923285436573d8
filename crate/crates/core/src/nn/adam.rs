use super::{f64_of, sc, Parameterized, Scalar};

/// Inverse-time decay, `lr0 / (1 + decay * step)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LrSchedule {
    pub lr0: f64,
    pub decay: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            lr0: 2e-4,
            decay: 1e-5,
        }
    }
}

impl LrSchedule {
    pub fn lr_at(&self, step: u64) -> f64 {
        self.lr0 / (1.0 + self.decay * step as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments per parameter tensor, in visitation order.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub cfg: AdamConfig,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<F: Scalar, M: Parameterized<F> + ?Sized>(model: &M) -> Self {
        Self::with_config(model, AdamConfig::default())
    }

    pub fn with_config<F: Scalar, M: Parameterized<F> + ?Sized>(model: &M, cfg: AdamConfig) -> Self {
        let mut m = Vec::new();
        model.visit_params(&mut |t| m.push(vec![0.0; t.len()]));
        let v = m.clone();
        AdamState { cfg, step: 0, m, v }
    }

    /// One bias-corrected update using the gradients stored in `model`.
    pub fn update<F: Scalar, M: Parameterized<F> + ?Sized>(&mut self, model: &mut M, lr: f64) {
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.cfg;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        let mut k = 0;
        let (ms, vs) = (&mut self.m, &mut self.v);
        model.visit_params_mut(&mut |t| {
            let (m, v) = (&mut ms[k], &mut vs[k]);
            assert_eq!(m.len(), t.len(), "optimizer state does not match {}", t.name);
            for i in 0..t.len() {
                let g = f64_of(t.grad[i]);
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                let p = f64_of(t.data[i]) - lr * mhat / (vhat.sqrt() + eps);
                t.data[i] = sc(p);
            }
            k += 1;
        });
    }
}
