//! Nadam optimizer with a pinned, framework-independent recurrence.
//!
//! Per parameter, with gradient `g` and step counter `t` starting at 1:
//!
//! ```text
//! m <- b1*m + (1-b1)*g
//! v <- b2*v + (1-b2)*g^2
//! vhat = v / (1 - b2^t)
//! theta <- theta - lr * (b1*m/(1 - b1^(t+1)) + (1-b1)*g/(1 - b1^t)) / (sqrt(vhat) + eps)
//! ```
//!
//! This is the constant-momentum Nesterov-Adam form: the lookahead factor
//! `1 - b1^(t+1)` on the first moment replaces any per-step momentum schedule,
//! which keeps trajectories bitwise reproducible across implementations. With
//! `b1 = 0` the update reduces exactly to Adam. `t` increments once per
//! optimizer step, not once per tensor.

use crate::error::{Error, Result};
use crate::network::{Gradients, Layer, LayerGrad, Network};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NadamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for NadamHyper {
    fn default() -> Self {
        NadamHyper {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// First and second moments for one parameter tensor.
#[derive(Debug, Clone)]
struct MomentSlot {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl MomentSlot {
    fn zeros(len: usize) -> Self {
        MomentSlot {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// Optimizer state: zero-initialized moments for every dense and adaptive
/// parameter tensor, in the network's canonical layer order.
#[derive(Debug, Clone)]
pub struct NadamState {
    hyper: NadamHyper,
    t: u64,
    slots: Vec<MomentSlot>,
}

impl NadamState {
    pub fn new(net: &Network) -> Self {
        Self::with_hyper(net, NadamHyper::default())
    }

    pub fn with_hyper(net: &Network, hyper: NadamHyper) -> Self {
        let mut slots = Vec::new();
        for layer in &net.layers {
            match layer {
                Layer::Dense(d) => {
                    slots.push(MomentSlot::zeros(d.weights.data().len()));
                    slots.push(MomentSlot::zeros(d.bias.data().len()));
                }
                Layer::Activation(a) => slots.push(MomentSlot::zeros(a.params.len())),
            }
        }
        NadamState { hyper, t: 1, slots }
    }

    /// Step counter of the next update (starts at 1).
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn hyper(&self) -> NadamHyper {
        self.hyper
    }

    /// Total number of moment entries tracked (equals the parameter count).
    pub fn tracked_params(&self) -> usize {
        self.slots.iter().map(|s| s.m.len()).sum()
    }

    /// Applies one Nadam step to every parameter of `net`. A non-finite
    /// gradient entry is a numeric failure: the step is not applied and the
    /// caller decides how to treat the run.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != net.layers.len() {
            return Err(Error::Config(format!(
                "gradient has {} layers, network has {}",
                grads.layers.len(),
                net.layers.len()
            )));
        }
        if grads.has_non_finite() {
            return Err(Error::Numeric("non-finite gradient".into()));
        }

        let factors = StepFactors::at(self.t, &self.hyper);
        let mut slot_idx = 0;
        for (layer, grad) in net.layers.iter_mut().zip(&grads.layers) {
            match (layer, grad) {
                (Layer::Dense(d), LayerGrad::Dense { dw, db }) => {
                    let slot = &mut self.slots[slot_idx];
                    nadam_update(d.weights.data_mut(), dw.data(), &mut slot.m, &mut slot.v, &factors)?;
                    let slot = &mut self.slots[slot_idx + 1];
                    nadam_update(d.bias.data_mut(), db.data(), &mut slot.m, &mut slot.v, &factors)?;
                    slot_idx += 2;
                }
                (Layer::Activation(a), LayerGrad::Activation { dparams }) => {
                    let slot = &mut self.slots[slot_idx];
                    nadam_update(a.params.values_mut(), dparams, &mut slot.m, &mut slot.v, &factors)?;
                    slot_idx += 1;
                }
                _ => {
                    return Err(Error::Config(
                        "gradient layout does not match network layout".into(),
                    ))
                }
            }
        }
        self.t += 1;
        Ok(())
    }
}

/// Per-step constants of the recurrence; they depend only on `t`.
#[derive(Debug, Clone, Copy)]
pub struct StepFactors {
    hyper: NadamHyper,
    /// `1 - b1^t`
    m_corr: f64,
    /// `1 - b1^(t+1)`
    m_corr_next: f64,
    /// `1 - b2^t`
    v_corr: f64,
}

impl StepFactors {
    pub fn at(t: u64, hyper: &NadamHyper) -> Self {
        StepFactors {
            hyper: *hyper,
            m_corr: 1.0 - hyper.beta1.powi(t as i32),
            m_corr_next: 1.0 - hyper.beta1.powi(t as i32 + 1),
            v_corr: 1.0 - hyper.beta2.powi(t as i32),
        }
    }
}

/// The elementwise recurrence on one parameter slice.
pub fn nadam_update(
    theta: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    factors: &StepFactors,
) -> Result<()> {
    if theta.len() != grad.len() || theta.len() != m.len() || theta.len() != v.len() {
        return Err(Error::Config(format!(
            "nadam slice lengths differ: theta {}, grad {}, m {}, v {}",
            theta.len(),
            grad.len(),
            m.len(),
            v.len()
        )));
    }
    let h = &factors.hyper;
    for i in 0..theta.len() {
        let g = grad[i];
        m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
        v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
        let v_hat = v[i] / factors.v_corr;
        let lookahead = h.beta1 * m[i] / factors.m_corr_next + (1.0 - h.beta1) * g / factors.m_corr;
        theta[i] -= h.learning_rate * lookahead / (v_hat.sqrt() + h.epsilon);
    }
    Ok(())
}
