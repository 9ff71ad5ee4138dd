use crate::autodiff::{ParamStore, Tensor};

/// Adam with step-wise exponential learning-rate decay and global-norm
/// gradient clipping.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Multiplier applied every `decay_steps` steps.
    pub decay: f64,
    pub decay_steps: usize,
    pub clip: Option<f64>,
    step: usize,
    m: Vec<Option<Tensor>>,
    v: Vec<Option<Tensor>>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            decay: 1.0,
            decay_steps: usize::MAX,
            clip: None,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn with_decay(mut self, decay: f64, every: usize) -> Self {
        self.decay = decay;
        self.decay_steps = every.max(1);
        self
    }

    pub fn with_clip(mut self, clip: f64) -> Self {
        self.clip = Some(clip);
        self
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    /// Learning rate used by the next step.
    pub fn current_lr(&self) -> f64 {
        self.lr * self.decay.powi((self.step / self.decay_steps) as i32)
    }

    /// Global L2 norm of the trainable gradients.
    pub fn grad_norm(store: &ParamStore) -> f64 {
        store
            .iter()
            .filter(|(_, p)| p.trainable)
            .map(|(_, p)| p.grad.squared_norm())
            .sum::<f64>()
            .sqrt()
    }

    /// Applies one update from the accumulated gradients. Returns the
    /// gradient norm before clipping.
    pub fn step(&mut self, store: &mut ParamStore) -> f64 {
        let norm = Self::grad_norm(store);
        let scale = match self.clip {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        let lr = self.current_lr();
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        if self.m.len() < store.len() {
            self.m.resize(store.len(), None);
            self.v.resize(store.len(), None);
        }
        for (i, p) in store.iter_mut().enumerate() {
            if !p.trainable {
                continue;
            }
            let m = self.m[i].get_or_insert_with(|| Tensor::zeros(p.value.shape()));
            let v = self.v[i].get_or_insert_with(|| Tensor::zeros(p.value.shape()));
            let grads = p.grad.data();
            let (md, vd) = (m.data_mut(), v.data_mut());
            for (j, w) in p.value.data_mut().iter_mut().enumerate() {
                let gj = grads[j] * scale;
                md[j] = b1 * md[j] + (1.0 - b1) * gj;
                vd[j] = b2 * vd[j] + (1.0 - b2) * gj * gj;
                let mh = md[j] / c1;
                let vh = vd[j] / c2;
                *w -= lr * mh / (vh.sqrt() + self.eps);
            }
        }
        norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::vector(vec![1.0, -1.0]), true);
        store.get_mut(id).grad = Tensor::vector(vec![0.5, -3.0]);
        let mut adam = Adam::new(0.1, 0.9, 0.9, 1e-12);
        adam.step(&mut store);
        let v = store.value(id).data();
        assert!((v[0] - 0.9).abs() < 1e-9);
        assert!((v[1] + 0.9).abs() < 1e-9);
    }

    #[test]
    fn decay_schedule() {
        let mut adam = Adam::new(2e-3, 0.9, 0.9, 1e-12).with_decay(0.75, 2);
        let mut store = ParamStore::new();
        store.add("w", Tensor::scalar(0.0), true);
        let mut lrs = Vec::new();
        for _ in 0..5 {
            lrs.push(adam.current_lr());
            adam.step(&mut store);
        }
        assert_eq!(lrs[0], lrs[1]);
        assert!((lrs[2] - 2e-3 * 0.75).abs() < 1e-15);
        assert!((lrs[4] - 2e-3 * 0.75 * 0.75).abs() < 1e-15);
    }

    #[test]
    fn clipping_bounds_the_update_direction() {
        let mut store = ParamStore::new();
        let a = store.add("a", Tensor::scalar(0.0), true);
        store.get_mut(a).grad = Tensor::scalar(30.0);
        let frozen = store.add("b", Tensor::scalar(0.0), false);
        store.get_mut(frozen).grad = Tensor::scalar(40.0);
        let mut adam = Adam::new(1.0, 0.9, 0.9, 1e-12).with_clip(5.0);
        let norm = adam.step(&mut store);
        assert_eq!(norm, 30.0);
        assert_eq!(store.value(frozen).item(), 0.0);
    }
}
