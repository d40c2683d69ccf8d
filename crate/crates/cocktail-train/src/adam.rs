//! Adam optimizer with state vectors aligned to the model's parameter
//! traversal order.

use cocktail_net::{AudioVisualModel, Gradients};
use ndarray::ArrayD;

use crate::config::TrainConfig;

/// First/second-moment state, one slot per parameter tensor in
/// [`AudioVisualModel::visit_params`] order.
#[derive(Debug, Clone)]
pub struct Adam {
    names: Vec<String>,
    m: Vec<ArrayD<f64>>,
    v: Vec<ArrayD<f64>>,
    t: i32,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(model: &AudioVisualModel, tc: &TrainConfig) -> Self {
        let mut names = Vec::new();
        let mut m = Vec::new();
        model.visit_params(&mut |name, p| {
            names.push(name.to_string());
            m.push(ArrayD::zeros(p.raw_dim()));
        });
        let v = m.clone();
        Adam {
            names,
            m,
            v,
            t: 0,
            beta1: tc.adam_beta1,
            beta2: tc.adam_beta2,
            eps: tc.adam_eps,
        }
    }

    /// One update with bias-corrected moments:
    /// `p -= lr · m̂ / (√v̂ + ε)`.
    ///
    /// `grads` must come from [`AudioVisualModel::backward`] on the same
    /// model (same tensor names in the same order).
    pub fn step(&mut self, model: &mut AudioVisualModel, grads: &Gradients, lr: f64) {
        assert_eq!(grads.len(), self.names.len(), "gradient slot count");
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let mut i = 0;
        model.visit_params_mut(&mut |name, mut p| {
            let (gname, g) = &grads[i];
            assert_eq!(gname, name, "gradient order must mirror the traversal");
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            ndarray::Zip::from(&mut *m).and(g).for_each(|m, &g| {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            });
            ndarray::Zip::from(&mut *v).and(g).for_each(|v, &g| {
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            });
            ndarray::Zip::from(&mut p).and(&*m).and(&*v).for_each(|p, &m, &v| {
                *p -= lr * (m / c1) / ((v / c2).sqrt() + self.eps);
            });
            i += 1;
        });
        assert_eq!(i, grads.len());
    }
}
