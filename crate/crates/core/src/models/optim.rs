//! First-order optimizers over a list of parameter tensors.
//!
//! Defaults: Adam/Adamax/Nadam use beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
//! Adagrad and RMSprop use eps = 1e-8 (RMSprop decay 0.9); Adadelta uses
//! rho = 0.95, eps = 1e-6 and scales its step by the learning rate. Nadam is
//! the constant-momentum form (no momentum schedule).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptimizerKind {
    Adam,
    Adamax,
    Adagrad,
    Nadam,
    RMSprop,
    Adadelta,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 6] = [
        OptimizerKind::Adam,
        OptimizerKind::Adamax,
        OptimizerKind::Adagrad,
        OptimizerKind::Nadam,
        OptimizerKind::RMSprop,
        OptimizerKind::Adadelta,
    ];
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        OptimizerKind::ALL
            .into_iter()
            .find(|k| k.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::ModelFormat(format!("unknown optimizer {s:?}")))
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;
const RMS_RHO: f64 = 0.9;
const DELTA_RHO: f64 = 0.95;
const DELTA_EPS: f64 = 1e-6;

/// Per-tensor moment buffers, allocated on the first step.
#[derive(Clone, Debug)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    t: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Optimizer {
            kind,
            learning_rate,
            t: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update to every `(params, grads)` tensor pair. Tensors
    /// must be passed in the same order on every call.
    pub fn step<'a, I>(&mut self, tensors: I)
    where
        I: IntoIterator<Item = (&'a mut [f64], &'a [f64])>,
    {
        self.t += 1;
        let t = self.t as f64;
        let lr = self.learning_rate;
        for (idx, (params, grads)) in tensors.into_iter().enumerate() {
            assert_eq!(params.len(), grads.len(), "tensor {idx} shape mismatch");
            if self.first.len() <= idx {
                self.first.push(vec![0.0; params.len()]);
                self.second.push(vec![0.0; params.len()]);
            }
            let m = &mut self.first[idx];
            let v = &mut self.second[idx];
            match self.kind {
                OptimizerKind::Adam => {
                    let c1 = 1.0 - BETA1.powf(t);
                    let c2 = 1.0 - BETA2.powf(t);
                    for i in 0..params.len() {
                        let g = grads[i];
                        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g;
                        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g * g;
                        params[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + EPS);
                    }
                }
                OptimizerKind::Adamax => {
                    let c1 = 1.0 - BETA1.powf(t);
                    for i in 0..params.len() {
                        let g = grads[i];
                        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g;
                        v[i] = (BETA2 * v[i]).max(g.abs());
                        params[i] -= (lr / c1) * m[i] / (v[i] + EPS);
                    }
                }
                OptimizerKind::Adagrad => {
                    for i in 0..params.len() {
                        let g = grads[i];
                        v[i] += g * g;
                        params[i] -= lr * g / (v[i].sqrt() + EPS);
                    }
                }
                OptimizerKind::Nadam => {
                    let c1 = 1.0 - BETA1.powf(t);
                    let c1_next = 1.0 - BETA1.powf(t + 1.0);
                    let c2 = 1.0 - BETA2.powf(t);
                    for i in 0..params.len() {
                        let g = grads[i];
                        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g;
                        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g * g;
                        let m_bar = BETA1 * m[i] / c1_next + (1.0 - BETA1) * g / c1;
                        params[i] -= lr * m_bar / ((v[i] / c2).sqrt() + EPS);
                    }
                }
                OptimizerKind::RMSprop => {
                    for i in 0..params.len() {
                        let g = grads[i];
                        v[i] = RMS_RHO * v[i] + (1.0 - RMS_RHO) * g * g;
                        params[i] -= lr * g / (v[i].sqrt() + EPS);
                    }
                }
                OptimizerKind::Adadelta => {
                    // m: running mean of squared updates, v: of squared grads
                    for i in 0..params.len() {
                        let g = grads[i];
                        v[i] = DELTA_RHO * v[i] + (1.0 - DELTA_RHO) * g * g;
                        let delta = ((m[i] + DELTA_EPS).sqrt() / (v[i] + DELTA_EPS).sqrt()) * g;
                        m[i] = DELTA_RHO * m[i] + (1.0 - DELTA_RHO) * delta * delta;
                        params[i] -= lr * delta;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_step(kind: OptimizerKind, p: f64, g: f64, lr: f64) -> f64 {
        let mut opt = Optimizer::new(kind, lr);
        let mut params = vec![p];
        opt.step([(params.as_mut_slice(), [g].as_slice())]);
        params[0]
    }

    #[test]
    fn adam_first_step_by_hand() {
        // t=1: m = 0.1, v = 0.001, m_hat = 1, v_hat = 1
        let expected = 0.5 - 0.001 * (1.0 / (1.0 + 1e-8));
        let got = one_step(OptimizerKind::Adam, 0.5, 1.0, 0.001);
        assert!((got - expected).abs() < 1e-15);
        assert!((0.5 - got - 0.001).abs() < 1e-10);
    }

    #[test]
    fn zero_gradient_from_fresh_state_is_a_no_op() {
        for kind in OptimizerKind::ALL {
            assert_eq!(one_step(kind, 0.25, 0.0, 0.01), 0.25, "{kind}");
        }
    }

    #[test]
    fn every_rule_descends() {
        for kind in OptimizerKind::ALL {
            assert!(one_step(kind, 1.0, 2.0, 0.01) < 1.0, "{kind}");
            assert!(one_step(kind, 1.0, -2.0, 0.01) > 1.0, "{kind}");
        }
    }

    #[test]
    fn adagrad_steps_shrink() {
        let mut opt = Optimizer::new(OptimizerKind::Adagrad, 0.1);
        let mut p = vec![1.0];
        opt.step([(p.as_mut_slice(), [0.5].as_slice())]);
        let first = 1.0 - p[0];
        let before = p[0];
        opt.step([(p.as_mut_slice(), [0.5].as_slice())]);
        let second = before - p[0];
        assert!(second > 0.0 && second < first, "{first} {second}");
    }

    #[test]
    fn parses_names() {
        assert_eq!("rmsprop".parse::<OptimizerKind>().unwrap(), OptimizerKind::RMSprop);
        assert_eq!("Adam".parse::<OptimizerKind>().unwrap(), OptimizerKind::Adam);
        assert!("sgd".parse::<OptimizerKind>().is_err());
    }
}
