//! Activation functions and their exact analytic gradients.
//!
//! Three families are supported: plain RELU, swish with a fixed or trainable
//! `beta`, and the adaptive cubic-enhanced family ("NEAF"). A NEAF layer
//! applies ramp gating to a learned argument built from a linear term plus a
//! cubic-order basis term:
//!
//! - without bias: `u = c0*x + gamma*c1*s(x)`, `y = max(u, 0)`
//! - with bias:    `u = c0 + c1*x + gamma*c2*s(x)`, `y = max(u, 0)`
//!
//! The `c` coefficients are per-layer trainable scalars shared by every unit
//! of the layer; `gamma` is a fixed user-chosen constant. The ramp gate is
//! strict: the derivative contribution at `u == 0` is zero.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Upper bound (exclusive) for the uniform initialization of NEAF scalars.
pub const ADAPTIVE_INIT_MAX: f64 = 1e-2;

/// The cubic-order basis `s(x)` used inside a NEAF argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearBasis {
    /// `s(x) = x*|x|` (odd), `s'(x) = 2|x|`.
    XAbsX,
    /// `s(x) = |x|^3` (even), `s'(x) = 3x|x|`.
    AbsXCubed,
    /// `s(x) = x^3` (odd), `s'(x) = 3x^2`.
    XCubed,
}

impl NonlinearBasis {
    /// Evaluates `(s(x), s'(x))`.
    pub fn eval(self, x: f64) -> (f64, f64) {
        match self {
            NonlinearBasis::XAbsX => (x * x.abs(), 2.0 * x.abs()),
            NonlinearBasis::AbsXCubed => {
                let a = x.abs();
                (a * a * a, 3.0 * x * a)
            }
            NonlinearBasis::XCubed => (x * x * x, 3.0 * x * x),
        }
    }

    /// True for the basis whose `s` is an even function of `x`.
    pub fn is_even(self) -> bool {
        matches!(self, NonlinearBasis::AbsXCubed)
    }
}

/// Which activation a layer applies, together with its fixed hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind {
    Relu,
    Swish { beta: f64, trainable: bool },
    Neaf {
        gamma: f64,
        basis: NonlinearBasis,
        with_bias: bool,
    },
}

impl ActivationKind {
    /// Number of trainable scalars this kind carries per layer.
    pub fn param_count(&self) -> usize {
        match self {
            ActivationKind::Relu => 0,
            ActivationKind::Swish { trainable, .. } => usize::from(*trainable),
            ActivationKind::Neaf { with_bias, .. } => {
                if *with_bias {
                    3
                } else {
                    2
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ActivationKind::Relu => Ok(()),
            ActivationKind::Swish { beta, .. } => {
                if beta.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config("swish beta must be finite".into()))
                }
            }
            ActivationKind::Neaf { gamma, .. } => {
                if gamma.is_finite() && *gamma > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "neaf gamma must be finite and > 0, got {gamma}"
                    )))
                }
            }
        }
    }
}

/// Per-layer trainable activation scalars (empty for RELU).
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveParams {
    values: Vec<f64>,
}

impl AdaptiveParams {
    pub fn new(values: Vec<f64>) -> Self {
        AdaptiveParams { values }
    }

    pub fn empty() -> Self {
        AdaptiveParams { values: Vec::new() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_params(kind: ActivationKind, params: &AdaptiveParams) -> Result<()> {
    if params.len() != kind.param_count() {
        return Err(Error::Config(format!(
            "{:?} expects {} adaptive scalars, got {}",
            kind,
            kind.param_count(),
            params.len()
        )));
    }
    Ok(())
}

/// Draws fresh trainable scalars for `kind`: NEAF coefficients are uniform in
/// `[0, 1e-2)`, a trainable swish starts from its configured `beta`, RELU has
/// none.
pub fn adaptive_init<R: Rng + ?Sized>(kind: ActivationKind, rng: &mut R) -> AdaptiveParams {
    match kind {
        ActivationKind::Relu => AdaptiveParams::empty(),
        ActivationKind::Swish { beta, trainable } => {
            if trainable {
                AdaptiveParams::new(vec![beta])
            } else {
                AdaptiveParams::empty()
            }
        }
        ActivationKind::Neaf { .. } => {
            let n = kind.param_count();
            let values = (0..n)
                .map(|_| rng.gen_range(0.0..ADAPTIVE_INIT_MAX))
                .collect();
            AdaptiveParams::new(values)
        }
    }
}

fn ramp(u: f64) -> f64 {
    if u > 0.0 {
        u
    } else {
        0.0
    }
}

fn swish_beta(kind: ActivationKind, params: &AdaptiveParams) -> f64 {
    match kind {
        ActivationKind::Swish { beta, trainable } => {
            if trainable {
                params.values()[0]
            } else {
                beta
            }
        }
        _ => unreachable!(),
    }
}

/// Forward pass. Returns the activated output `y` and the pre-gating argument
/// `u` needed by [`act_backward`]. For RELU and swish `u` is the input itself.
pub fn act_forward(
    kind: ActivationKind,
    params: &AdaptiveParams,
    x: &Matrix,
) -> Result<(Matrix, Matrix)> {
    check_params(kind, params)?;
    match kind {
        ActivationKind::Relu => Ok((x.map(ramp), x.clone())),
        ActivationKind::Swish { .. } => {
            let beta = swish_beta(kind, params);
            let y = x.map(|v| v / (1.0 + (-beta * v).exp()));
            Ok((y, x.clone()))
        }
        ActivationKind::Neaf {
            gamma,
            basis,
            with_bias,
        } => {
            let c = params.values();
            let u = if with_bias {
                x.map(|v| c[0] + c[1] * v + gamma * c[2] * basis.eval(v).0)
            } else {
                x.map(|v| c[0] * v + gamma * c[1] * basis.eval(v).0)
            };
            let y = u.map(ramp);
            Ok((y, u))
        }
    }
}

/// Backward pass: gradient w.r.t. the input and w.r.t. each trainable scalar.
///
/// `x` and `u` are the matrices produced by the matching [`act_forward`] call;
/// `upstream` is the loss gradient w.r.t. `y`. Scalar gradients are summed
/// over the whole batch and all units in ascending flat-index order.
pub fn act_backward(
    kind: ActivationKind,
    params: &AdaptiveParams,
    x: &Matrix,
    u: &Matrix,
    upstream: &Matrix,
) -> Result<(Matrix, Vec<f64>)> {
    check_params(kind, params)?;
    let same = |m: &Matrix| m.rows() == x.rows() && m.cols() == x.cols();
    if !same(u) || !same(upstream) {
        return Err(Error::shape(
            "act_backward",
            format!(
                "x {}x{}, u {}x{}, upstream {}x{}",
                x.rows(),
                x.cols(),
                u.rows(),
                u.cols(),
                upstream.rows(),
                upstream.cols()
            ),
        ));
    }
    match kind {
        ActivationKind::Relu => {
            let dx = x.zip_map(upstream, |xv, up| if xv > 0.0 { up } else { 0.0 })?;
            Ok((dx, Vec::new()))
        }
        ActivationKind::Swish { trainable, .. } => {
            let beta = swish_beta(kind, params);
            let dx = x.zip_map(upstream, |xv, up| {
                let s = 1.0 / (1.0 + (-beta * xv).exp());
                up * (s + beta * xv * s * (1.0 - s))
            })?;
            let mut dparams = Vec::new();
            if trainable {
                let mut dbeta = 0.0;
                for (xv, up) in x.data().iter().zip(upstream.data()) {
                    let s = 1.0 / (1.0 + (-beta * xv).exp());
                    dbeta += up * xv * xv * s * (1.0 - s);
                }
                dparams.push(dbeta);
            }
            Ok((dx, dparams))
        }
        ActivationKind::Neaf {
            gamma,
            basis,
            with_bias,
        } => {
            let c = params.values();
            let mut dx = Matrix::zeros(x.rows(), x.cols());
            if with_bias {
                let (mut dc0, mut dc1, mut dc2) = (0.0, 0.0, 0.0);
                for (i, ((&xv, &uv), &up)) in x
                    .data()
                    .iter()
                    .zip(u.data())
                    .zip(upstream.data())
                    .enumerate()
                {
                    if uv > 0.0 {
                        let (s, ds) = basis.eval(xv);
                        dx.data_mut()[i] = up * (c[1] + gamma * c[2] * ds);
                        dc0 += up;
                        dc1 += up * xv;
                        dc2 += up * gamma * s;
                    }
                }
                Ok((dx, vec![dc0, dc1, dc2]))
            } else {
                let (mut dc0, mut dc1) = (0.0, 0.0);
                for (i, ((&xv, &uv), &up)) in x
                    .data()
                    .iter()
                    .zip(u.data())
                    .zip(upstream.data())
                    .enumerate()
                {
                    if uv > 0.0 {
                        let (s, ds) = basis.eval(xv);
                        dx.data_mut()[i] = up * (c[0] + gamma * c[1] * ds);
                        dc0 += up * xv;
                        dc1 += up * gamma * s;
                    }
                }
                Ok((dx, vec![dc0, dc1]))
            }
        }
    }
}
