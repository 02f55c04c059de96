//! Dense feedforward networks: linear layers interleaved with activation
//! layers, a softmax output, categorical cross-entropy, and full manual
//! backpropagation.
//!
//! A network built from a [`NetworkSpec`] has the layer sequence
//! `Dense -> Activation -> Dense -> Activation -> ... -> Dense`, with softmax
//! applied to the final logits. Keeping the activation as its own layer means
//! runs with different activation kinds differ in nothing else.

use rand::Rng;

use crate::activations::{act_backward, act_forward, adaptive_init, ActivationKind, AdaptiveParams};
use crate::error::{Error, Result};
use crate::tensor::{Axis, Matrix};

/// Upper bound (exclusive) for the uniform dense weight initialization.
pub const DENSE_INIT_MAX: f64 = 0.1;

/// Architecture description: sizes plus the hidden activation kind.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub input_size: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
    pub activation: ActivationKind,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.classes == 0 || self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config("all layer sizes must be >= 1".into()));
        }
        self.activation.validate()
    }
}

/// A linear layer `z = x W + b` with `W: in x out`, `b: 1 x out`.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Matrix,
}

/// An activation layer holding its kind and per-layer trainable scalars.
#[derive(Debug, Clone)]
pub struct ActivationLayer {
    pub kind: ActivationKind,
    pub params: AdaptiveParams,
}

#[derive(Debug, Clone)]
pub enum Layer {
    Dense(DenseLayer),
    Activation(ActivationLayer),
}

#[derive(Debug, Clone)]
pub struct Network {
    pub input_size: usize,
    pub layers: Vec<Layer>,
}

/// Per-layer gradients, mirroring the network's parameter layout.
#[derive(Debug, Clone)]
pub enum LayerGrad {
    Dense { dw: Matrix, db: Matrix },
    Activation { dparams: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn has_non_finite(&self) -> bool {
        self.layers.iter().any(|g| match g {
            LayerGrad::Dense { dw, db } => dw.has_non_finite() || db.has_non_finite(),
            LayerGrad::Activation { dparams } => dparams.iter().any(|v| !v.is_finite()),
        })
    }

    /// Gradients flattened in the canonical parameter order (see
    /// [`Network::param_values`]).
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            match g {
                LayerGrad::Dense { dw, db } => {
                    out.extend_from_slice(dw.data());
                    out.extend_from_slice(db.data());
                }
                LayerGrad::Activation { dparams } => out.extend_from_slice(dparams),
            }
        }
        out
    }
}

/// Caches captured during the forward pass for use by backpropagation.
pub struct ForwardCaches {
    caches: Vec<LayerCache>,
    logits: Matrix,
}

enum LayerCache {
    Dense { input: Matrix },
    Activation { input: Matrix, pre: Matrix },
}

/// Row-wise softmax: subtract the row max, exponentiate, normalize.
pub fn softmax_rows(z: &Matrix) -> Matrix {
    let mut out = z.clone();
    for i in 0..z.rows() {
        let row = &mut out.data_mut()[i * z.cols()..(i + 1) * z.cols()];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

impl Network {
    /// Builds a freshly initialized network. Dense weights are drawn uniform
    /// in `[0, 0.1)` row by row, biases start at zero, and the adaptive
    /// scalars of each activation layer are drawn immediately after the dense
    /// layer that precedes it. The draw order is fixed so a seed pins the
    /// whole network.
    pub fn init<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut layers = Vec::new();
        let mut fan_in = spec.input_size;
        for &h in &spec.hidden {
            layers.push(Layer::Dense(init_dense(fan_in, h, rng)));
            layers.push(Layer::Activation(ActivationLayer {
                kind: spec.activation,
                params: adaptive_init(spec.activation, rng),
            }));
            fan_in = h;
        }
        layers.push(Layer::Dense(init_dense(fan_in, spec.classes, rng)));
        Ok(Network {
            input_size: spec.input_size,
            layers,
        })
    }

    /// Output class count (columns of the last dense layer).
    pub fn classes(&self) -> usize {
        match self.layers.last() {
            Some(Layer::Dense(d)) => d.weights.cols(),
            _ => 0,
        }
    }

    /// `(dense parameter count, adaptive scalar count)`.
    pub fn count_params(&self) -> (usize, usize) {
        let mut dense = 0;
        let mut adaptive = 0;
        for layer in &self.layers {
            match layer {
                Layer::Dense(d) => dense += d.weights.data().len() + d.bias.data().len(),
                Layer::Activation(a) => adaptive += a.params.len(),
            }
        }
        (dense, adaptive)
    }

    fn run_layers(&self, x: &Matrix, want_cache: bool) -> Result<(Matrix, Vec<LayerCache>)> {
        if x.cols() != self.input_size {
            return Err(Error::shape(
                "forward",
                format!("input has {} columns, network expects {}", x.cols(), self.input_size),
            ));
        }
        let mut caches = Vec::new();
        let mut cur = x.clone();
        for layer in &self.layers {
            match layer {
                Layer::Dense(d) => {
                    let z = cur.matmul(&d.weights)?.add_row_vector(&d.bias)?;
                    if want_cache {
                        caches.push(LayerCache::Dense { input: cur });
                    }
                    cur = z;
                }
                Layer::Activation(a) => {
                    let (y, u) = act_forward(a.kind, &a.params, &cur)?;
                    if want_cache {
                        caches.push(LayerCache::Activation { input: cur, pre: u });
                    }
                    cur = y;
                }
            }
        }
        Ok((cur, caches))
    }

    /// Forward pass. Returns row-stochastic class probabilities and the caches
    /// needed for backpropagation.
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardCaches)> {
        let (logits, caches) = self.run_layers(x, true)?;
        let probs = softmax_rows(&logits);
        Ok((probs, ForwardCaches { caches, logits }))
    }

    /// Mean categorical cross-entropy via fused log-softmax; no probability
    /// clamping is needed. Forward-only: used by finite-difference checks.
    pub fn loss(&self, x: &Matrix, labels: &[usize]) -> Result<f64> {
        let (logits, _) = self.run_layers(x, false)?;
        mean_cross_entropy(&logits, labels, self.classes())
    }

    /// Loss plus gradients for every dense and adaptive parameter.
    ///
    /// The output-layer gradient is `(probs - one_hot) / batch`. A non-finite
    /// loss is reported as [`Error::Numeric`] rather than propagated silently.
    pub fn loss_and_grads(&self, x: &Matrix, labels: &[usize]) -> Result<(f64, Gradients)> {
        let classes = self.classes();
        check_labels(labels, classes, x.rows())?;
        let (logits, caches) = self.run_layers(x, true)?;
        let loss = mean_cross_entropy(&logits, labels, classes)?;

        let batch = x.rows() as f64;
        let probs = softmax_rows(&logits);
        let mut upstream = probs;
        for (i, &label) in labels.iter().enumerate() {
            let v = upstream.get(i, label) - 1.0;
            upstream.set(i, label, v);
        }
        upstream = upstream.map(|v| v / batch);

        let mut grads_rev = Vec::with_capacity(self.layers.len());
        for (layer, cache) in self.layers.iter().zip(caches.iter()).rev() {
            match (layer, cache) {
                (Layer::Dense(d), LayerCache::Dense { input }) => {
                    let dw = input.transpose().matmul(&upstream)?;
                    let db = upstream.reduce(Axis::Cols);
                    upstream = upstream.matmul(&d.weights.transpose())?;
                    grads_rev.push(LayerGrad::Dense { dw, db });
                }
                (Layer::Activation(a), LayerCache::Activation { input, pre }) => {
                    let (dx, dparams) = act_backward(a.kind, &a.params, input, pre, &upstream)?;
                    upstream = dx;
                    grads_rev.push(LayerGrad::Activation { dparams });
                }
                _ => unreachable!("cache kind always matches layer kind"),
            }
        }
        grads_rev.reverse();
        Ok((loss, Gradients { layers: grads_rev }))
    }

    /// Fraction of rows whose argmax probability matches the label.
    /// Evaluating an empty set is an error, not zero.
    pub fn evaluate(&self, images: &Matrix, labels: &[usize]) -> Result<f64> {
        if images.rows() == 0 {
            return Err(Error::Config("evaluate called on an empty dataset".into()));
        }
        if images.rows() != labels.len() {
            return Err(Error::shape(
                "evaluate",
                format!("{} images vs {} labels", images.rows(), labels.len()),
            ));
        }
        const CHUNK: usize = 2048;
        let mut correct = 0usize;
        let mut start = 0;
        while start < images.rows() {
            let end = (start + CHUNK).min(images.rows());
            let block = images.slice_rows(start, end);
            let (logits, _) = self.run_layers(&block, false)?;
            let probs = softmax_rows(&logits);
            for (pred, &label) in probs.argmax_rows().iter().zip(&labels[start..end]) {
                if *pred == label {
                    correct += 1;
                }
            }
            start = end;
        }
        Ok(correct as f64 / images.rows() as f64)
    }

    /// All parameters flattened in canonical order: for each layer in order,
    /// dense weights row-major, then bias, then adaptive scalars.
    pub fn param_values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Dense(d) => {
                    out.extend_from_slice(d.weights.data());
                    out.extend_from_slice(d.bias.data());
                }
                Layer::Activation(a) => out.extend_from_slice(a.params.values()),
            }
        }
        out
    }

    /// Overwrites all parameters from a canonical-order flat slice.
    pub fn set_param_values(&mut self, values: &[f64]) -> Result<()> {
        let (dense, adaptive) = self.count_params();
        if values.len() != dense + adaptive {
            return Err(Error::Config(format!(
                "expected {} parameter values, got {}",
                dense + adaptive,
                values.len()
            )));
        }
        let mut pos = 0;
        for layer in &mut self.layers {
            match layer {
                Layer::Dense(d) => {
                    for dst in [d.weights.data_mut(), d.bias.data_mut()] {
                        dst.copy_from_slice(&values[pos..pos + dst.len()]);
                        pos += dst.len();
                    }
                }
                Layer::Activation(a) => {
                    let dst = a.params.values_mut();
                    dst.copy_from_slice(&values[pos..pos + dst.len()]);
                    pos += dst.len();
                }
            }
        }
        Ok(())
    }
}

impl ForwardCaches {
    pub fn logits(&self) -> &Matrix {
        &self.logits
    }

    /// Minimum `|u|` over every cached activation pre-argument; used by
    /// gradient checks to confirm probes sit away from the ramp kink.
    pub fn min_abs_pre_activation(&self) -> f64 {
        self.caches
            .iter()
            .filter_map(|c| match c {
                LayerCache::Activation { pre, .. } => Some(pre),
                _ => None,
            })
            .flat_map(|m| m.data().iter().map(|v| v.abs()))
            .fold(f64::INFINITY, f64::min)
    }
}

fn init_dense<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> DenseLayer {
    let mut weights = Matrix::zeros(fan_in, fan_out);
    for w in weights.data_mut() {
        *w = rng.gen_range(0.0..DENSE_INIT_MAX);
    }
    DenseLayer {
        weights,
        bias: Matrix::zeros(1, fan_out),
    }
}

fn check_labels(labels: &[usize], classes: usize, rows: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::shape(
            "loss",
            format!("{} labels for {} rows", labels.len(), rows),
        ));
    }
    if rows == 0 {
        return Err(Error::Config("loss of an empty batch is undefined".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Config(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    Ok(())
}

/// Mean of `logsumexp(row) - row[label]`, accumulated in row order.
fn mean_cross_entropy(logits: &Matrix, labels: &[usize], classes: usize) -> Result<f64> {
    check_labels(labels, classes, logits.rows())?;
    let mut total = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for &v in row {
            sum += (v - max).exp();
        }
        total += max + sum.ln() - row[label];
    }
    let loss = total / logits.rows() as f64;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("loss is {loss}")));
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::NonlinearBasis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn relu_spec(input: usize, hidden: Vec<usize>, classes: usize) -> NetworkSpec {
        NetworkSpec {
            input_size: input,
            hidden,
            classes,
            activation: ActivationKind::Relu,
        }
    }

    fn mnist_neaf_spec() -> NetworkSpec {
        NetworkSpec {
            input_size: 784,
            hidden: vec![512, 50],
            classes: 10,
            activation: ActivationKind::Neaf {
                gamma: 5.0,
                basis: NonlinearBasis::AbsXCubed,
                with_bias: false,
            },
        }
    }

    #[test]
    fn init_produces_expected_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Network::init(&mnist_neaf_spec(), &mut rng).unwrap();
        let dense_shapes: Vec<(usize, usize)> = net
            .layers
            .iter()
            .filter_map(|l| match l {
                Layer::Dense(d) => Some((d.weights.rows(), d.weights.cols())),
                _ => None,
            })
            .collect();
        assert_eq!(dense_shapes, vec![(784, 512), (512, 50), (50, 10)]);
    }

    #[test]
    fn init_is_seed_deterministic_with_bounded_draws() {
        let spec = relu_spec(6, vec![4, 3], 2);
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        let n1 = Network::init(&spec, &mut a).unwrap();
        let n2 = Network::init(&spec, &mut b).unwrap();
        assert_eq!(n1.param_values(), n2.param_values());

        for layer in &n1.layers {
            if let Layer::Dense(d) = layer {
                assert!(d.weights.data().iter().all(|&w| (0.0..DENSE_INIT_MAX).contains(&w)));
                assert!(d.bias.data().iter().all(|&b| b == 0.0));
            }
        }
    }

    #[test]
    fn count_params_mnist_example() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Network::init(&mnist_neaf_spec(), &mut rng).unwrap();
        let (dense, adaptive) = net.count_params();
        assert_eq!(dense, 428_080);
        assert_eq!(adaptive, 4);

        let relu = Network::init(&relu_spec(784, vec![512, 50], 10), &mut rng).unwrap();
        assert_eq!(relu.count_params().1, 0);
    }

    #[test]
    fn softmax_examples() {
        let z = Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert_eq!(softmax_rows(&z).data(), &[0.5, 0.5]);

        let z = Matrix::from_rows(&[vec![2.0f64.ln(), 0.0]]).unwrap();
        let p = softmax_rows(&z);
        assert!((p.data()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.data()[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_shift_invariance() {
        // dyadic entries stay exact when shifted by 100, so the outputs must
        // agree bitwise
        let z = Matrix::from_rows(&[vec![0.5, -1.25, 2.0], vec![-3.75, 0.0, 1.5]]).unwrap();
        let shifted = z.map(|v| v + 100.0);
        let a = softmax_rows(&z);
        let b = softmax_rows(&shifted);
        assert_eq!(
            a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn forward_rows_are_probability_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Network::init(&relu_spec(5, vec![4], 3), &mut rng).unwrap();
        let x = Matrix::from_vec(4, 5, (0..20).map(|i| (i as f64) / 7.0).collect()).unwrap();
        let (probs, _) = net.forward(&x).unwrap();
        for i in 0..probs.rows() {
            let s: f64 = probs.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(probs.row(i).iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn zero_network_predicts_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Network::init(&relu_spec(8, vec![4], 10), &mut rng).unwrap();
        let zeros = vec![0.0; net.param_values().len()];
        net.set_param_values(&zeros).unwrap();
        let x = Matrix::from_vec(2, 8, vec![0.3; 16]).unwrap();
        let (probs, _) = net.forward(&x).unwrap();
        for &p in probs.data() {
            assert!((p - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_rows_are_batch_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Network::init(&relu_spec(6, vec![5, 4], 3), &mut rng).unwrap();
        let x1 = Matrix::from_vec(1, 6, vec![0.1, -0.4, 0.9, 0.0, 0.7, -0.2]).unwrap();
        let x2 = Matrix::from_vec(1, 6, vec![0.5, 0.5, -0.1, 0.8, -0.9, 0.3]).unwrap();
        let stacked = Matrix::from_vec(2, 6, [x1.data(), x2.data()].concat()).unwrap();

        let (p_single, _) = net.forward(&x1).unwrap();
        let (p_stacked, _) = net.forward(&stacked).unwrap();
        let single_bits: Vec<u64> = p_single.row(0).iter().map(|v| v.to_bits()).collect();
        let stacked_bits: Vec<u64> = p_stacked.row(0).iter().map(|v| v.to_bits()).collect();
        assert_eq!(single_bits, stacked_bits);
    }

    #[test]
    fn forward_is_side_effect_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Network::init(&relu_spec(4, vec![3], 2), &mut rng).unwrap();
        let x = Matrix::from_vec(3, 4, (0..12).map(|i| i as f64 * 0.1).collect()).unwrap();
        let (a, _) = net.forward(&x).unwrap();
        let (b, _) = net.forward(&x).unwrap();
        assert_eq!(
            a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn uniform_probabilities_give_ln_10_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Network::init(&relu_spec(8, vec![4], 10), &mut rng).unwrap();
        let zeros = vec![0.0; net.param_values().len()];
        net.set_param_values(&zeros).unwrap();
        let x = Matrix::from_vec(3, 8, vec![0.4; 24]).unwrap();
        let loss = net.loss(&x, &[0, 5, 9]).unwrap();
        assert!((loss - 10.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn duplicating_the_batch_keeps_the_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Network::init(&relu_spec(5, vec![4], 3), &mut rng).unwrap();
        let x = Matrix::from_vec(2, 5, (0..10).map(|i| (i as f64).sin()).collect()).unwrap();
        let labels = [1usize, 2];
        let doubled = Matrix::from_vec(4, 5, [x.data(), x.data()].concat()).unwrap();
        let l1 = net.loss(&x, &labels).unwrap();
        let l2 = net.loss(&doubled, &[1, 2, 1, 2]).unwrap();
        assert!((l1 - l2).abs() < 1e-12 * l1.abs().max(1.0));
    }

    #[test]
    fn nan_parameters_surface_as_numeric_failure() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = Network::init(&relu_spec(3, vec![2], 2), &mut rng).unwrap();
        if let Layer::Dense(d) = &mut net.layers[0] {
            d.weights.set(0, 0, f64::NAN);
        }
        let x = Matrix::from_vec(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            net.loss_and_grads(&x, &[0]),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn evaluate_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Network::init(&relu_spec(4, vec![3], 10), &mut rng).unwrap();
        let zeros = vec![0.0; net.param_values().len()];
        net.set_param_values(&zeros).unwrap();

        // zero network: every row ties, argmax picks class 0; balanced labels
        // give exactly chance level
        let n = 40;
        let images = Matrix::from_vec(n, 4, vec![0.5; n * 4]).unwrap();
        let labels: Vec<usize> = (0..n).map(|i| i % 10).collect();
        let acc = net.evaluate(&images, &labels).unwrap();
        assert!((acc - 0.1).abs() < 1e-15);

        let empty = Matrix::zeros(0, 4);
        assert!(net.evaluate(&empty, &[]).is_err());
    }

    #[test]
    fn label_out_of_range_is_config_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Network::init(&relu_spec(3, vec![2], 2), &mut rng).unwrap();
        let x = Matrix::from_vec(1, 3, vec![0.1, 0.2, 0.3]).unwrap();
        assert!(matches!(net.loss(&x, &[2]), Err(Error::Config(_))));
    }
}
