//! Finite-difference verification of the analytic activation gradients.
//!
//! The probes only ever call the forward path, so they stay independent of
//! the backward code they are checking. Each probe draws a scalar input and
//! random parameters, rejecting points whose pre-gating argument sits within
//! [`MIN_ABS_PRE`] of the ramp kink, then compares the analytic gradients
//! against central differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::activations::{act_backward, act_forward, ActivationKind, AdaptiveParams, NonlinearBasis};
use crate::error::Result;
use crate::tensor::Matrix;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-6;
/// Maximum allowed relative error between analytic and numeric gradients.
pub const REL_TOL: f64 = 1e-5;
/// Probes must satisfy `|u| > MIN_ABS_PRE` to stay off the ramp kink.
pub const MIN_ABS_PRE: f64 = 1e-3;

/// Worst-case relative errors observed for one activation kind.
#[derive(Debug, Clone)]
pub struct KindReport {
    pub label: String,
    pub probes: usize,
    pub max_rel_err: f64,
}

impl KindReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < REL_TOL
    }
}

/// Every activation variant the crate supports, with a stable label.
pub fn all_kinds() -> Vec<(String, ActivationKind)> {
    let mut kinds = vec![
        ("relu".to_string(), ActivationKind::Relu),
        (
            "swish_fixed".to_string(),
            ActivationKind::Swish { beta: 1.0, trainable: false },
        ),
        (
            "swish_trainable".to_string(),
            ActivationKind::Swish { beta: 1.0, trainable: true },
        ),
    ];
    for (name, basis) in [
        ("xabsx", NonlinearBasis::XAbsX),
        ("absx3", NonlinearBasis::AbsXCubed),
        ("x3", NonlinearBasis::XCubed),
    ] {
        for with_bias in [false, true] {
            let suffix = if with_bias { "_bias" } else { "" };
            kinds.push((
                format!("neaf_{name}{suffix}"),
                ActivationKind::Neaf { gamma: 5.0, basis, with_bias },
            ));
        }
    }
    kinds
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// `upstream * y` for a scalar input; the objective whose derivatives the
/// probes difference.
fn objective(kind: ActivationKind, params: &AdaptiveParams, x: f64, upstream: f64) -> Result<f64> {
    let input = Matrix::from_vec(1, 1, vec![x])?;
    let (y, _) = act_forward(kind, params, &input)?;
    Ok(upstream * y.data()[0])
}

fn draw_params(kind: ActivationKind, rng: &mut ChaCha8Rng) -> AdaptiveParams {
    match kind {
        ActivationKind::Relu => AdaptiveParams::empty(),
        ActivationKind::Swish { trainable, .. } => {
            if trainable {
                AdaptiveParams::new(vec![rng.gen_range(0.5..2.0)])
            } else {
                AdaptiveParams::empty()
            }
        }
        ActivationKind::Neaf { .. } => AdaptiveParams::new(
            (0..kind.param_count())
                .map(|_| rng.gen_range(0.05..1.0))
                .collect(),
        ),
    }
}

/// Runs `probes` finite-difference comparisons against one activation kind.
pub fn probe_kind(
    label: &str,
    kind: ActivationKind,
    probes: usize,
    seed: u64,
) -> Result<KindReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel_err = 0.0f64;

    for _ in 0..probes {
        // rejection-sample a probe point away from the gate kink
        let (x, params, u) = loop {
            let x: f64 = rng.gen_range(-3.0..3.0);
            let params = draw_params(kind, &mut rng);
            let input = Matrix::from_vec(1, 1, vec![x])?;
            let (_, u) = act_forward(kind, &params, &input)?;
            if u.data()[0].abs() > MIN_ABS_PRE {
                break (x, params, u);
            }
        };
        let upstream_value: f64 = rng.gen_range(-2.0..2.0);
        let input = Matrix::from_vec(1, 1, vec![x])?;
        let upstream = Matrix::from_vec(1, 1, vec![upstream_value])?;
        let (dx, dparams) = act_backward(kind, &params, &input, &u, &upstream)?;

        let numeric_dx = (objective(kind, &params, x + FD_STEP, upstream_value)?
            - objective(kind, &params, x - FD_STEP, upstream_value)?)
            / (2.0 * FD_STEP);
        max_rel_err = max_rel_err.max(rel_err(dx.data()[0], numeric_dx));

        for i in 0..params.len() {
            let mut plus = params.clone();
            plus.values_mut()[i] += FD_STEP;
            let mut minus = params.clone();
            minus.values_mut()[i] -= FD_STEP;
            let numeric = (objective(kind, &plus, x, upstream_value)?
                - objective(kind, &minus, x, upstream_value)?)
                / (2.0 * FD_STEP);
            max_rel_err = max_rel_err.max(rel_err(dparams[i], numeric));
        }
    }

    Ok(KindReport {
        label: label.to_string(),
        probes,
        max_rel_err,
    })
}

/// Probes every activation kind; the per-kind seed is offset so kinds see
/// distinct but reproducible streams.
pub fn run_suite(probes: usize, seed: u64) -> Result<Vec<KindReport>> {
    all_kinds()
        .into_iter()
        .enumerate()
        .map(|(i, (label, kind))| probe_kind(&label, kind, probes, seed.wrapping_add(i as u64)))
        .collect()
}
