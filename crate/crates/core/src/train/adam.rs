use crate::models::ModelState;
use crate::neuro::{ComponentTag, Param};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// One Adam optimiser bound to a parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub tag: ComponentTag,
    pub lr: f64,
    pub t: u64,
}

impl Adam {
    pub fn new(tag: ComponentTag, lr: f64) -> Self {
        Self { tag, lr, t: 0 }
    }

    /// Updates the group's parameters from their gradients. Frozen groups are
    /// left untouched and do not advance the step counter.
    pub fn step(&mut self, model: &mut ModelState) {
        if model.is_frozen(self.tag) {
            return;
        }
        self.t += 1;
        let mut group: Vec<&mut Param> = model.params_mut().into_iter().filter(|p| p.tag == self.tag).collect();
        adam_step(&mut group, self.lr, self.t);
    }
}

/// Bias-corrected Adam update at step `t` (1-based).
pub fn adam_step(params: &mut [&mut Param], lr: f64, t: u64) {
    let c1 = 1.0 - BETA1.powi(t as i32);
    let c2 = 1.0 - BETA2.powi(t as i32);
    for p in params.iter_mut() {
        let Param {
            value,
            grad,
            adam_m,
            adam_v,
            ..
        } = &mut **p;
        for (((w, g), m), v) in value
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(adam_m.data_mut())
            .zip(adam_v.data_mut())
        {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
    }
}
