//! Parameter update rules: plain SGD and bias-corrected Adam.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::params::ParameterSet;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    moments: BTreeMap<String, (Tensor, Tensor)>,
}

impl Optimizer {
    pub fn sgd(learning_rate: f64) -> Self {
        Optimizer {
            kind: OptimizerKind::Sgd,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        Optimizer {
            kind: OptimizerKind::Adam,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        match kind {
            OptimizerKind::Sgd => Self::sgd(learning_rate),
            OptimizerKind::Adam => Self::adam(learning_rate),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update from the accumulated gradients, then clears them.
    pub fn step(&mut self, params: &mut ParameterSet) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(CoreError::config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (_, p) in params.iter_mut() {
                    let lr = self.learning_rate;
                    for (v, g) in p.value.values_mut().iter_mut().zip(p.grad.values()) {
                        *v -= lr * g;
                    }
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as f64;
                let bc1 = 1.0 - self.beta1.powf(t);
                let bc2 = 1.0 - self.beta2.powf(t);
                for (name, p) in params.iter_mut() {
                    let (m, v) = self
                        .moments
                        .entry(name.to_string())
                        .or_insert_with(|| {
                            (
                                Tensor::zeros(p.value.shape().to_vec()),
                                Tensor::zeros(p.value.shape().to_vec()),
                            )
                        });
                    if m.len() != p.value.len() {
                        return Err(CoreError::shape(
                            "adam",
                            format!("moment size {} vs param size {}", m.len(), p.value.len()),
                        ));
                    }
                    for i in 0..p.value.len() {
                        let g = p.grad.values()[i];
                        let mi = self.beta1 * m.values()[i] + (1.0 - self.beta1) * g;
                        let vi = self.beta2 * v.values()[i] + (1.0 - self.beta2) * g * g;
                        m.values_mut()[i] = mi;
                        v.values_mut()[i] = vi;
                        let m_hat = mi / bc1;
                        let v_hat = vi / bc2;
                        p.value.values_mut()[i] -=
                            self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
                    }
                }
            }
        }
        params.zero_grads();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_param(v: f64, g: f64) -> ParameterSet {
        let mut p = ParameterSet::new();
        p.insert("w", Tensor::row(&[v])).unwrap();
        p.accumulate_grad("w", &[g], 1.0).unwrap();
        p
    }

    #[test]
    fn sgd_definition() {
        let mut p = single_param(1.0, 2.0);
        let mut opt = Optimizer::sgd(0.1);
        opt.step(&mut p).unwrap();
        let w = p.get("w").unwrap();
        assert!((w.value.values()[0] - 0.8).abs() < 1e-15);
        assert_eq!(w.grad.values()[0], 0.0, "gradients cleared after step");
    }

    #[test]
    fn adam_first_step_magnitude() {
        // From zero moments the bias-corrected first step is
        // lr * g / (|g| + eps), i.e. about lr in magnitude for any g != 0.
        for &g in &[0.5, -3.0, 10.0] {
            let mut p = single_param(0.0, g);
            let mut opt = Optimizer::adam(0.001);
            opt.step(&mut p).unwrap();
            let got = p.get("w").unwrap().value.values()[0];
            let want = -0.001 * g / (g.abs() + 1e-8);
            assert!((got - want).abs() < 1e-12, "g={g}: {got} vs {want}");
        }
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut p = single_param(1.5, 0.0);
            let mut opt = Optimizer::new(kind, 0.01);
            opt.step(&mut p).unwrap();
            assert_eq!(p.get("w").unwrap().value.values()[0], 1.5);
        }
    }

    #[test]
    fn step_counter_increments_by_one() {
        let mut p = single_param(0.0, 1.0);
        let mut opt = Optimizer::adam(0.001);
        assert_eq!(opt.step_count(), 0);
        opt.step(&mut p).unwrap();
        assert_eq!(opt.step_count(), 1);
        opt.step(&mut p).unwrap();
        assert_eq!(opt.step_count(), 2);
    }
}
