//! Minimal differentiable function approximation: a fully-connected
//! tanh network with exact reverse-mode gradients, a softmax policy head,
//! and a central-finite-difference gradient checker.
//!
//! Parameters live in a flat array packed layer by layer, weights
//! (row-major, `out x in`) before biases. All gradients are with respect
//! to that flat layout.

use rand::Rng;
use thiserror::Error;

/// Architecture of a fully-connected network; hidden layers use tanh, the
/// output layer is affine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Self {
        assert!(input_dim >= 1 && output_dim >= 1);
        assert!(hidden_dims.iter().all(|&d| d >= 1));
        Self {
            input_dim,
            hidden_dims,
            output_dim,
        }
    }

    /// Per-layer `(fan_in, fan_out)` pairs.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output_dim));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| o * (i + 1)).sum()
    }

    /// Seeded uniform initialization in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init_params<R: Rng>(&self, rng: &mut R) -> ParamVector {
        let mut data = Vec::with_capacity(self.param_count());
        for (fan_in, fan_out) in self.layer_dims() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..fan_out * (fan_in + 1) {
                data.push(rng.gen_range(-bound..=bound));
            }
        }
        ParamVector { data }
    }

    /// Dash-joined dimension list, e.g. `16-64-64-4`.
    pub fn descriptor(&self) -> String {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden_dims);
        dims.push(self.output_dim);
        dims.iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join("-")
    }

    pub fn from_descriptor(text: &str) -> Result<Self, CheckpointError> {
        let dims: Vec<usize> = text
            .split('-')
            .map(|p| {
                p.parse()
                    .map_err(|_| CheckpointError::BadDescriptor(text.into()))
            })
            .collect::<Result<_, _>>()?;
        if dims.len() < 2 || dims.contains(&0) {
            return Err(CheckpointError::BadDescriptor(text.into()));
        }
        Ok(Self {
            input_dim: dims[0],
            hidden_dims: dims[1..dims.len() - 1].to_vec(),
            output_dim: dims[dims.len() - 1],
        })
    }
}

/// Flat parameter array for an [`MlpSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    pub data: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(spec: &MlpSpec) -> Self {
        Self {
            data: vec![0.0; spec.param_count()],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Flat gradient array matching a [`ParamVector`] layout.
#[derive(Clone, Debug, PartialEq)]
pub struct GradVector {
    pub data: Vec<f64>,
}

impl GradVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            data: vec![0.0; len],
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add_scaled(&mut self, other: &GradVector, scale: f64) {
        assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.data {
            *g *= factor;
        }
    }
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad checkpoint header: {0}")]
    BadHeader(String),
    #[error("bad network descriptor: {0}")]
    BadDescriptor(String),
    #[error("parameter count {found} does not match header {expected}")]
    CountMismatch { expected: usize, found: usize },
    #[error("unparsable parameter on line {0}")]
    BadValue(usize),
}

/// Activations cached during a forward pass, one vector per layer output
/// (hidden activations post-tanh, final layer pre-activation).
struct ForwardCache {
    layer_outputs: Vec<Vec<f64>>,
}

fn forward_cached(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> ForwardCache {
    assert_eq!(input.len(), spec.input_dim, "input dimension mismatch");
    assert_eq!(params.len(), spec.param_count(), "parameter count mismatch");

    let dims = spec.layer_dims();
    let n_layers = dims.len();
    let mut layer_outputs = Vec::with_capacity(n_layers);
    let mut offset = 0;
    let mut current: &[f64] = input;

    for (layer, &(fan_in, fan_out)) in dims.iter().enumerate() {
        let weights = &params.data[offset..offset + fan_out * fan_in];
        let biases = &params.data[offset + fan_out * fan_in..offset + fan_out * (fan_in + 1)];
        offset += fan_out * (fan_in + 1);

        let mut out = Vec::with_capacity(fan_out);
        for o in 0..fan_out {
            let mut acc = biases[o];
            let row = &weights[o * fan_in..(o + 1) * fan_in];
            for (w, x) in row.iter().zip(current) {
                acc += w * x;
            }
            if layer + 1 < n_layers {
                acc = acc.tanh();
            }
            out.push(acc);
        }
        layer_outputs.push(out);
        current = layer_outputs.last().unwrap();
    }

    ForwardCache { layer_outputs }
}

/// Deterministic affine-tanh-...-affine evaluation.
pub fn forward(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Vec<f64> {
    forward_cached(spec, params, input)
        .layer_outputs
        .pop()
        .expect("network has at least one layer")
}

/// Exact reverse-mode gradient of `<output, output_grad>` with respect to
/// the parameters.
pub fn backward(
    spec: &MlpSpec,
    params: &ParamVector,
    input: &[f64],
    output_grad: &[f64],
) -> GradVector {
    assert_eq!(
        output_grad.len(),
        spec.output_dim,
        "output grad dimension mismatch"
    );
    let cache = forward_cached(spec, params, input);
    let mut grad = GradVector::zeros(params.len());
    accumulate_backward(spec, params, input, &cache, output_grad, &mut grad, 1.0);
    grad
}

/// Backward pass accumulating `scale * grad` into `grad_out`. Shares the
/// cache so composite losses can reuse one forward evaluation.
fn accumulate_backward(
    spec: &MlpSpec,
    params: &ParamVector,
    input: &[f64],
    cache: &ForwardCache,
    output_grad: &[f64],
    grad_out: &mut GradVector,
    scale: f64,
) {
    let dims = spec.layer_dims();
    let n_layers = dims.len();

    // Parameter offsets per layer.
    let mut offsets = Vec::with_capacity(n_layers);
    let mut offset = 0;
    for &(fan_in, fan_out) in &dims {
        offsets.push(offset);
        offset += fan_out * (fan_in + 1);
    }

    // delta = d loss / d (pre-activation of current layer).
    let mut delta: Vec<f64> = output_grad.iter().map(|g| g * scale).collect();

    for layer in (0..n_layers).rev() {
        let (fan_in, fan_out) = dims[layer];
        let base = offsets[layer];
        let inputs: &[f64] = if layer == 0 {
            input
        } else {
            &cache.layer_outputs[layer - 1]
        };

        let weight_grads = &mut grad_out.data[base..base + fan_out * fan_in];
        for o in 0..fan_out {
            let d = delta[o];
            if d == 0.0 {
                continue;
            }
            let row = &mut weight_grads[o * fan_in..(o + 1) * fan_in];
            for (g, x) in row.iter_mut().zip(inputs) {
                *g += d * x;
            }
        }
        let bias_grads = &mut grad_out.data[base + fan_out * fan_in..base + fan_out * (fan_in + 1)];
        for (g, d) in bias_grads.iter_mut().zip(&delta) {
            *g += d;
        }

        if layer == 0 {
            break;
        }

        // Propagate through the weights, then the previous layer's tanh.
        let weights = &params.data[base..base + fan_out * fan_in];
        let mut prev_delta = vec![0.0; fan_in];
        for o in 0..fan_out {
            let d = delta[o];
            if d == 0.0 {
                continue;
            }
            let row = &weights[o * fan_in..(o + 1) * fan_in];
            for (p, w) in prev_delta.iter_mut().zip(row) {
                *p += d * w;
            }
        }
        let activations = &cache.layer_outputs[layer - 1];
        for (p, a) in prev_delta.iter_mut().zip(activations) {
            *p *= 1.0 - a * a;
        }
        delta = prev_delta;
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

fn log_softmax_at(logits: &[f64], index: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits[index] - max - log_sum
}

/// Action distribution of the policy network at `state_features`.
pub fn softmax_policy(spec: &MlpSpec, params: &ParamVector, state_features: &[f64]) -> Vec<f64> {
    softmax(&forward(spec, params, state_features))
}

/// `log pi(a | s)` and its exact parameter gradient.
pub fn logprob_and_grad(
    spec: &MlpSpec,
    params: &ParamVector,
    state_features: &[f64],
    action: usize,
) -> (f64, GradVector) {
    assert!(action < spec.output_dim, "action out of range");
    let cache = forward_cached(spec, params, state_features);
    let logits = cache.layer_outputs.last().unwrap().clone();
    let probs = softmax(&logits);
    let log_prob = log_softmax_at(&logits, action);

    // d log pi(a) / d logits = onehot(a) - probs.
    let mut logit_grad: Vec<f64> = probs.iter().map(|p| -p).collect();
    logit_grad[action] += 1.0;

    let mut grad = GradVector::zeros(params.len());
    accumulate_backward(
        spec,
        params,
        state_features,
        &cache,
        &logit_grad,
        &mut grad,
        1.0,
    );
    (log_prob, grad)
}

/// Policy entropy `H = -sum_a pi(a|s) ln pi(a|s)` and its parameter
/// gradient.
pub fn entropy_and_grad(
    spec: &MlpSpec,
    params: &ParamVector,
    state_features: &[f64],
) -> (f64, GradVector) {
    let cache = forward_cached(spec, params, state_features);
    let logits = cache.layer_outputs.last().unwrap().clone();
    let probs = softmax(&logits);
    let entropy = entropy_of(&probs);

    // dH / d logit_j = -p_j (ln p_j + H).
    let logit_grad: Vec<f64> = probs.iter().map(|&p| -p * (p.ln() + entropy)).collect();

    let mut grad = GradVector::zeros(params.len());
    accumulate_backward(
        spec,
        params,
        state_features,
        &cache,
        &logit_grad,
        &mut grad,
        1.0,
    );
    (entropy, grad)
}

/// Entropy of a probability vector (natural log).
pub fn entropy_of(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Largest relative error between `analytic` and central finite
/// differences of `f` (step `1e-5`), with denominator
/// `max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_diff_check<F>(params: &ParamVector, f: F, analytic: &GradVector) -> f64
where
    F: Fn(&ParamVector) -> f64,
{
    assert_eq!(params.len(), analytic.data.len());
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut probe = params.clone();
    for i in 0..params.len() {
        let original = probe.data[i];
        probe.data[i] = original + h;
        let up = f(&probe);
        probe.data[i] = original - h;
        let down = f(&probe);
        probe.data[i] = original;
        let numeric = (up - down) / (2.0 * h);
        let denom = analytic.data[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic.data[i] - numeric).abs() / denom);
    }
    worst
}

/// One plain gradient step: `theta - lr * g`, or `theta + lr * g` when
/// maximizing.
pub fn sgd_step(params: &ParamVector, grad: &GradVector, lr: f64, maximize: bool) -> ParamVector {
    assert!(lr > 0.0, "learning rate must be positive");
    assert_eq!(params.len(), grad.data.len());
    let sign = if maximize { 1.0 } else { -1.0 };
    ParamVector {
        data: params
            .data
            .iter()
            .zip(&grad.data)
            .map(|(p, g)| p + sign * lr * g)
            .collect(),
    }
}

/// Adaptive-moment optimizer state. Optional plumbing; the plain gradient
/// step above is the canonical update.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(
        &mut self,
        params: &ParamVector,
        grad: &GradVector,
        lr: f64,
        maximize: bool,
    ) -> ParamVector {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(params.len(), grad.data.len());
        self.t += 1;
        let bias1 = 1.0 - self.beta1.powi(self.t as i32);
        let bias2 = 1.0 - self.beta2.powi(self.t as i32);
        let sign = if maximize { 1.0 } else { -1.0 };
        let mut data = Vec::with_capacity(params.len());
        for i in 0..params.len() {
            let g = grad.data[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            data.push(params.data[i] + sign * lr * m_hat / (v_hat.sqrt() + self.eps));
        }
        ParamVector { data }
    }
}

/// Serializes `CKPT v1 <descriptor> <count>` followed by one parameter per
/// line. `f64` display uses the shortest round-trip representation, so
/// write-then-read is exact.
pub fn write_checkpoint(spec: &MlpSpec, params: &ParamVector) -> String {
    assert_eq!(params.len(), spec.param_count());
    let mut out = format!("CKPT v1 {} {}\n", spec.descriptor(), params.len());
    for p in &params.data {
        out.push_str(&format!("{p}\n"));
    }
    out
}

pub fn read_checkpoint(text: &str) -> Result<(MlpSpec, ParamVector), CheckpointError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "CKPT" || fields[1] != "v1" {
        return Err(CheckpointError::BadHeader(header.into()));
    }
    let spec = MlpSpec::from_descriptor(fields[2])?;
    let expected: usize = fields[3]
        .parse()
        .map_err(|_| CheckpointError::BadHeader(header.into()))?;
    if expected != spec.param_count() {
        return Err(CheckpointError::CountMismatch {
            expected: spec.param_count(),
            found: expected,
        });
    }

    let mut data = Vec::with_capacity(expected);
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        data.push(
            line.trim()
                .parse::<f64>()
                .map_err(|_| CheckpointError::BadValue(i + 2))?,
        );
    }
    if data.len() != expected {
        return Err(CheckpointError::CountMismatch {
            expected,
            found: data.len(),
        });
    }
    Ok((spec, ParamVector { data }))
}
