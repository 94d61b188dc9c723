//! Minimal differentiable MLP: per-sample losses, exact per-sample gradients
//! and the parameter arithmetic needed for one-step lookahead.
//!
//! Hidden layers use rectified-linear activation, the output is a sigmoid
//! confidence. All gradients are computed by hand-rolled backpropagation so
//! they are exact and cheap for the small batch sizes used by the trainer.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Floor applied inside log terms of the cross-entropy so a saturated
/// confidence never produces -inf.
pub const LOG_FLOOR: f64 = 1e-12;

/// Parameters of a small feed-forward binary classifier.
///
/// Weights for layer `l` are stored row-major as `dims[l+1] x dims[l]`,
/// followed by a bias vector of length `dims[l+1]`. The flattened layout
/// (weights then biases, layer by layer) is shared with [`GradVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Flat gradient aligned with the [`ClassifierParams`] layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GradVector(pub Vec<f64>);

impl GradVector {
    pub fn zeros(len: usize) -> Self {
        GradVector(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &GradVector) -> f64 {
        debug_assert_eq!(self.0.len(), other.0.len());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// self += scale * other, sequential summation order.
    pub fn add_scaled(&mut self, other: &GradVector, scale: f64) {
        for (dst, src) in self.0.iter_mut().zip(&other.0) {
            *dst += scale * src;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.0 {
            *v *= s;
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Forward-pass cache: post-activation values per layer (h[0] is the input)
/// plus the final confidence.
struct ForwardCache {
    activations: Vec<Vec<f64>>,
    confidence: f64,
}

impl ClassifierParams {
    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn feature_dim(&self) -> usize {
        self.layer_dims[0]
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.layer_dims
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Flatten weights and biases into a single vector.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in 0..self.weights.len() {
            out.extend_from_slice(&self.weights[l]);
            out.extend_from_slice(&self.biases[l]);
        }
        out
    }

    /// Rebuild parameters from a flat vector with the same layer dims.
    pub fn from_flat(layer_dims: &[usize], flat: &[f64]) -> Result<Self> {
        let mut params = init_classifier(layer_dims, 0)?;
        if flat.len() != params.param_count() {
            return Err(Error::Shape(format!(
                "flat vector length {} does not match parameter count {}",
                flat.len(),
                params.param_count()
            )));
        }
        let mut offset = 0;
        for l in 0..params.weights.len() {
            let wlen = params.weights[l].len();
            params.weights[l].copy_from_slice(&flat[offset..offset + wlen]);
            offset += wlen;
            let blen = params.biases[l].len();
            params.biases[l].copy_from_slice(&flat[offset..offset + blen]);
            offset += blen;
        }
        Ok(params)
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.biases[layer]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.weights[layer]
    }

    fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache> {
        if x.len() != self.layer_dims[0] {
            return Err(Error::Shape(format!(
                "input length {} does not match feature dimension {}",
                x.len(),
                self.layer_dims[0]
            )));
        }
        let n_layers = self.weights.len();
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(x.to_vec());
        for l in 0..n_layers {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let prev = &activations[l];
            let mut z = self.biases[l].clone();
            for j in 0..n_out {
                let row = &self.weights[l][j * n_in..(j + 1) * n_in];
                let mut acc = 0.0;
                for i in 0..n_in {
                    acc += row[i] * prev[i];
                }
                z[j] += acc;
            }
            if l + 1 < n_layers {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            }
            activations.push(z);
        }
        let logit = activations[n_layers][0];
        Ok(ForwardCache {
            activations,
            confidence: sigmoid(logit),
        })
    }

    /// Backpropagate `dloss_dlogit` (derivative of the scalar objective with
    /// respect to the final pre-sigmoid logit) into a flat parameter gradient.
    fn backward(&self, cache: &ForwardCache, dloss_dlogit: f64) -> GradVector {
        let n_layers = self.weights.len();
        let mut grad = vec![0.0; self.param_count()];
        // layer offsets in the flat layout
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in 0..n_layers {
            offsets.push(off);
            off += self.weights[l].len() + self.biases[l].len();
        }

        let mut delta = vec![dloss_dlogit];
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let h_in = &cache.activations[l];
            let base = offsets[l];
            for j in 0..n_out {
                let d = delta[j];
                let row = base + j * n_in;
                for i in 0..n_in {
                    grad[row + i] = d * h_in[i];
                }
                grad[base + n_out * n_in + j] = d;
            }
            if l > 0 {
                // propagate through the ReLU of the layer below
                let mut next = vec![0.0; n_in];
                for i in 0..n_in {
                    if cache.activations[l][i] > 0.0 {
                        let mut acc = 0.0;
                        for j in 0..n_out {
                            acc += delta[j] * self.weights[l][j * n_in + i];
                        }
                        next[i] = acc;
                    }
                }
                delta = next;
            }
        }
        GradVector(grad)
    }

    /// Gradient of the confidence (post-sigmoid output) for one input.
    pub fn confidence_grad(&self, x: &[f64]) -> Result<(f64, GradVector)> {
        let cache = self.forward_cached(x)?;
        let p = cache.confidence;
        let grad = self.backward(&cache, p * (1.0 - p));
        Ok((p, grad))
    }
}

/// Seeded initializer: weights uniform in (-1/sqrt(fan_in), 1/sqrt(fan_in)),
/// biases zero. Identical seeds give bit-identical parameters.
pub fn init_classifier(layer_dims: &[usize], seed: u64) -> Result<ClassifierParams> {
    if layer_dims.len() < 2 {
        return Err(Error::Config(format!(
            "layer_dims needs at least 2 entries, got {}",
            layer_dims.len()
        )));
    }
    if layer_dims.iter().any(|&d| d == 0) {
        return Err(Error::Config("layer_dims entries must be positive".into()));
    }
    if *layer_dims.last().unwrap() != 1 {
        return Err(Error::Config(format!(
            "final layer dimension must be 1, got {}",
            layer_dims.last().unwrap()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for w in layer_dims.windows(2) {
        let (n_in, n_out) = (w[0], w[1]);
        let bound = 1.0 / (n_in as f64).sqrt();
        let layer: Vec<f64> = (0..n_in * n_out)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        weights.push(layer);
        biases.push(vec![0.0; n_out]);
    }
    Ok(ClassifierParams {
        layer_dims: layer_dims.to_vec(),
        weights,
        biases,
    })
}

/// Confidence in (0,1) for one feature vector.
pub fn forward(params: &ClassifierParams, x: &[f64]) -> Result<f64> {
    Ok(params.forward_cached(x)?.confidence)
}

/// Binary cross-entropy loss and its exact parameter gradient for every
/// sample in the batch.
pub fn per_sample_loss_and_grad(
    params: &ClassifierParams,
    batch: &[(&[f64], u8)],
) -> Result<Vec<(f64, GradVector)>> {
    if batch.is_empty() {
        return Err(Error::Data("empty batch".into()));
    }
    let mut out = Vec::with_capacity(batch.len());
    for (x, y) in batch {
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::Data("NaN in input features".into()));
        }
        let cache = params.forward_cached(x)?;
        let p = cache.confidence;
        let yf = f64::from(*y);
        let loss = -(yf * p.max(LOG_FLOOR).ln() + (1.0 - yf) * (1.0 - p).max(LOG_FLOOR).ln());
        // d(bce)/d(logit) = p - y
        let grad = params.backward(&cache, p - yf);
        out.push((loss, grad));
    }
    Ok(out)
}

fn weighted_step(
    params: &ClassifierParams,
    grads: &[GradVector],
    weights: &[f64],
    alpha: f64,
) -> Result<ClassifierParams> {
    if grads.len() != weights.len() {
        return Err(Error::Shape(format!(
            "{} gradients but {} weights",
            grads.len(),
            weights.len()
        )));
    }
    if alpha <= 0.0 {
        return Err(Error::Config(format!("step size must be positive, got {alpha}")));
    }
    let count = params.param_count();
    let mut step = GradVector::zeros(count);
    for (g, &w) in grads.iter().zip(weights) {
        if g.len() != count {
            return Err(Error::Shape(format!(
                "gradient length {} does not match parameter count {}",
                g.len(),
                count
            )));
        }
        step.add_scaled(g, w);
    }
    let mut flat = params.flatten();
    for (p, s) in flat.iter_mut().zip(&step.0) {
        *p -= alpha * s;
    }
    ClassifierParams::from_flat(&params.layer_dims, &flat)
}

/// Tentative one-step update: theta' = theta - alpha * sum_i rho_i * g_i.
/// The input parameters are left untouched.
pub fn lookahead(
    params: &ClassifierParams,
    grads: &[GradVector],
    weights: &[f64],
    alpha: f64,
) -> Result<ClassifierParams> {
    weighted_step(params, grads, weights, alpha)
}

/// Committed update. Same arithmetic as [`lookahead`]; kept separate so the
/// trainer distinguishes the tentative step from the committed one.
pub fn sgd_step(
    params: &ClassifierParams,
    grads: &[GradVector],
    weights: &[f64],
    alpha: f64,
) -> Result<ClassifierParams> {
    weighted_step(params, grads, weights, alpha)
}
