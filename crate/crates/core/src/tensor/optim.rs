//! Adam with decoupled weight decay, and global-norm gradient clipping.

use super::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Optimizer state: first/second moments per parameter and the step count.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl Adam {
    pub fn new(store: &ParamStore, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = store.iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        Self {
            config,
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update using the gradients held in `store`.
    ///
    /// Weight decay is decoupled: `p <- p - lr * wd * p` precedes the Adam
    /// delta. Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, store: &mut ParamStore, lr: f64) -> Result<()> {
        if self.m.len() != store.len() {
            return Err(Error::Contract(format!(
                "optimizer tracks {} parameters, store has {}",
                self.m.len(),
                store.len()
            )));
        }
        for id in store.ids() {
            let t = store.get(id);
            if t.len() != self.m[id.0].len() {
                return Err(Error::Contract(format!(
                    "moment buffer shape mismatch for `{}`",
                    store.name(id)
                )));
            }
            if t.grad().is_some_and(|g| g.iter().any(|v| !v.is_finite())) {
                return Err(Error::NonFiniteGradient(store.name(id).to_string()));
            }
        }
        self.step += 1;
        let AdamConfig {
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for id in store.ids().collect::<Vec<_>>() {
            let t = store.get_mut(id);
            let grad = t
                .grad()
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; t.len()]);
            let (m, v) = (&mut self.m[id.0], &mut self.v[id.0]);
            for (i, p) in t.data_mut().iter_mut().enumerate() {
                let g = grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                if weight_decay != 0.0 {
                    *p -= lr * weight_decay * *p;
                }
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                *p -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Scales all gradients by `max_norm / g` when their global L2 norm `g`
/// exceeds `max_norm`. Returns the norm before clipping.
pub fn clip_gradients(grads: &mut [&mut Vec<f64>], max_norm: Option<f64>) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if let Some(max) = max_norm {
        if norm > max && norm > 0.0 {
            let s = max / norm;
            grads
                .iter_mut()
                .for_each(|g| g.iter_mut().for_each(|v| *v *= s));
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn store_with(values: Vec<f64>, grad: Vec<f64>) -> ParamStore {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::new(vec![values.len()], values).unwrap());
        s.get_mut(id).grad_mut().unwrap().copy_from_slice(&grad);
        s
    }

    #[test]
    fn zero_gradient_no_decay_is_identity() {
        let mut s = store_with(vec![0.3, -1.2], vec![0.0, 0.0]);
        let mut adam = Adam::new(&s, AdamConfig::default());
        for _ in 0..5 {
            adam.step(&mut s, 0.01).unwrap();
        }
        assert_eq!(s.iter().next().unwrap().1.data(), &[0.3, -1.2]);
        assert_eq!(adam.step_count(), 5);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        // m_hat = g, v_hat = g^2 at t = 1, so the delta is -lr * g / (|g| + eps).
        let mut s = store_with(vec![1.0, 1.0], vec![0.5, -2.0]);
        let mut adam = Adam::new(&s, AdamConfig::default());
        adam.step(&mut s, 0.1).unwrap();
        let d = s.iter().next().unwrap().1.data().to_vec();
        let expect = |g: f64| 1.0 - 0.1 * g / (g.abs() + 1e-8);
        assert!((d[0] - expect(0.5)).abs() < 1e-15);
        assert!((d[1] - expect(-2.0)).abs() < 1e-15);
    }

    #[test]
    fn decoupled_decay_shrinks_idle_weight() {
        let mut s = store_with(vec![2.0], vec![0.0]);
        let cfg = AdamConfig {
            weight_decay: 1e-4,
            ..AdamConfig::default()
        };
        let mut adam = Adam::new(&s, cfg);
        adam.step(&mut s, 0.01).unwrap();
        let w = s.iter().next().unwrap().1.data()[0];
        assert!((w - 2.0 * (1.0 - 0.01 * 1e-4)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_is_rejected_by_name() {
        let mut s = store_with(vec![1.0], vec![f64::NAN]);
        let mut adam = Adam::new(&s, AdamConfig::default());
        let err = adam.step(&mut s, 0.1).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient(ref n) if n == "w"));
        assert_eq!(s.iter().next().unwrap().1.data(), &[1.0]);
    }

    #[test]
    fn clipping_cases() {
        let mut a = vec![0.3, 0.4];
        let n = clip_gradients(&mut [&mut a], Some(1.0));
        assert!((n - 0.5).abs() < 1e-15);
        assert_eq!(a, vec![0.3, 0.4]);

        let mut b = vec![3.0, 4.0];
        clip_gradients(&mut [&mut b], Some(1.0));
        assert!((b[0] - 0.6).abs() < 1e-15 && (b[1] - 0.8).abs() < 1e-15);

        let mut c = vec![30.0];
        clip_gradients(&mut [&mut c], None);
        assert_eq!(c, vec![30.0]);
    }
}
