use super::{ParamStore, Result, Tensor, TensorError};

/// Adam with decoupled weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64, weight_decay: f64) -> Self {
        let zeros = || store.iter().map(|(_, _, t)| Tensor::zeros(t.rows(), t.cols())).collect();
        Self {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies `p <- p - lr * wd * p` and then the bias-corrected Adam update.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Tensor]) -> Result<()> {
        if grads.len() != store.len() || self.first.len() != store.len() {
            return Err(TensorError::ShapeMismatch {
                op: "adam_step",
                left: (store.len(), 1),
                right: (grads.len(), 1),
            });
        }
        let ids: Vec<_> = store.ids().collect();
        for (id, g) in ids.iter().zip(grads) {
            let p = store.get(*id);
            if p.shape() != g.shape() || self.first[id.index()].shape() != p.shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "adam_step",
                    left: p.shape(),
                    right: g.shape(),
                });
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let decay = 1.0 - self.lr * self.weight_decay;
        for (id, g) in ids.iter().zip(grads) {
            let m = self.first[id.index()].data_mut();
            let v = self.second[id.index()].data_mut();
            let p = store.get_mut(*id).data_mut();
            for i in 0..p.len() {
                let gi = g.data()[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] = p[i] * decay - self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(w: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("w", Tensor::scalar(w)).unwrap();
        s
    }

    fn value(s: &ParamStore) -> f64 {
        s.iter().next().unwrap().2.get(0, 0)
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut s = single(0.7);
        let mut adam = Adam::new(&s, 0.1, 0.0);
        adam.step(&mut s, &[Tensor::scalar(0.0)]).unwrap();
        assert_eq!(value(&s), 0.7);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // f(w) = w^2 at w = 1: g = 2, m_hat = 2, v_hat = 4, step = lr * 2 / (2 + eps)
        let mut s = single(1.0);
        let mut adam = Adam::new(&s, 0.1, 0.0);
        adam.step(&mut s, &[Tensor::scalar(2.0)]).unwrap();
        let expected = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8);
        assert!((value(&s) - expected).abs() < 1e-15);
        assert!((value(&s) - 0.9).abs() < 1e-8);
    }

    #[test]
    fn decoupled_decay_scales_parameters() {
        let mut s = single(3.0);
        let mut adam = Adam::new(&s, 0.01, 1e-6);
        adam.step(&mut s, &[Tensor::scalar(0.0)]).unwrap();
        assert_eq!(value(&s), 3.0 * (1.0 - 0.01 * 1e-6));
    }

    #[test]
    fn deterministic_and_shape_checked() {
        let run = || {
            let mut s = single(0.3);
            let mut adam = Adam::new(&s, 0.05, 1e-6);
            for k in 0..10 {
                adam.step(&mut s, &[Tensor::scalar(0.1 * k as f64 - 0.4)]).unwrap();
            }
            value(&s)
        };
        assert_eq!(run().to_bits(), run().to_bits());

        let mut s = single(0.3);
        let mut adam = Adam::new(&s, 0.05, 0.0);
        assert!(adam.step(&mut s, &[Tensor::zeros(2, 1)]).is_err());
        assert!(adam.step(&mut s, &[]).is_err());
    }
}
