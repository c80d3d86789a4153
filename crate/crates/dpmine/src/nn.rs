//! Dense feed-forward networks with exact reverse-mode gradients.
//!
//! The engine is deliberately small: affine layers, a fixed activation set,
//! parameter gradients, input gradients, and double backpropagation for the
//! gradient-penalty term of Lipschitz-constrained critics. Parameters live in
//! one flat `Vec<f64>` (per layer: weights row-major `[out][in]`, then
//! biases), which keeps the Adam optimizer and checkpointing trivial.

use crate::error::{Error, Result};
use crate::rng::Stream;
use rand::Rng;

/// Per-layer activation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu(s) => {
                if z > 0.0 {
                    z
                } else {
                    s * z
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// First derivative as a function of the pre-activation.
    /// relu/leaky use the `z <= 0` branch at the kink.
    fn d1(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(s) => {
                if z > 0.0 {
                    1.0
                } else {
                    s
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }

    /// Second derivative; zero almost everywhere for the piecewise-linear set.
    fn d2(self, z: f64) -> f64 {
        match self {
            Activation::Relu | Activation::LeakyRelu(_) | Activation::Identity => 0.0,
            Activation::Tanh => {
                let t = z.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
        }
    }
}

/// A multilayer perceptron with a flat parameter vector.
#[derive(Debug, Clone)]
pub struct MlpNetwork {
    layer_dims: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<f64>,
}

/// Offsets of one layer's weight block and bias block inside `params`.
#[derive(Debug, Clone, Copy)]
struct LayerSpan {
    w: usize,
    b: usize,
    rows: usize,
    cols: usize,
}

impl MlpNetwork {
    /// Zero-initialized network. `layer_dims` runs input → hidden… → output;
    /// `activations` has one entry per affine layer.
    pub fn new(layer_dims: &[usize], activations: &[Activation]) -> Result<Self> {
        if layer_dims.len() < 2 || activations.len() != layer_dims.len() - 1 {
            return Err(Error::DimensionMismatch {
                expected: layer_dims.len().saturating_sub(1),
                got: activations.len(),
            });
        }
        if layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::EmptyDataset);
        }
        let n_params: usize = (0..layer_dims.len() - 1)
            .map(|l| layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1])
            .sum();
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            activations: activations.to_vec(),
            params: vec![0.0; n_params],
        })
    }

    /// Glorot-uniform weight initialization, zero biases.
    pub fn init_glorot(layer_dims: &[usize], activations: &[Activation], rng: &mut Stream) -> Result<Self> {
        let mut net = Self::new(layer_dims, activations)?;
        for l in 0..net.n_layers() {
            let span = net.span(l);
            let limit = (6.0 / (span.cols + span.rows) as f64).sqrt();
            for i in 0..span.rows * span.cols {
                net.params[span.w + i] = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn span(&self, layer: usize) -> LayerSpan {
        let mut offset = 0;
        for l in 0..layer {
            offset += self.layer_dims[l] * self.layer_dims[l + 1] + self.layer_dims[l + 1];
        }
        let rows = self.layer_dims[layer + 1];
        let cols = self.layer_dims[layer];
        LayerSpan {
            w: offset,
            b: offset + rows * cols,
            rows,
            cols,
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        Ok(())
    }

    /// Evaluate the network on one input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut a = input.to_vec();
        for l in 0..self.n_layers() {
            let span = self.span(l);
            let act = self.activations[l];
            let mut next = vec![0.0; span.rows];
            for r in 0..span.rows {
                let row = &self.params[span.w + r * span.cols..span.w + (r + 1) * span.cols];
                let mut z = self.params[span.b + r];
                for (c, &x) in a.iter().enumerate() {
                    z += row[c] * x;
                }
                next[r] = act.apply(z);
            }
            a = next;
        }
        Ok(a)
    }

    /// Scalar convenience for critic-style networks.
    pub fn forward_scalar(&self, input: &[f64]) -> Result<f64> {
        if self.output_dim() != 1 {
            return Err(Error::NonScalarOutput(self.output_dim()));
        }
        Ok(self.forward(input)?[0])
    }

    /// Forward pass retaining per-layer pre-activations and activations,
    /// for the backward passes below.
    pub fn forward_trace(&self, input: &[f64]) -> Result<ForwardTrace> {
        self.check_input(input)?;
        let mut pre = Vec::with_capacity(self.n_layers());
        let mut act = Vec::with_capacity(self.n_layers() + 1);
        act.push(input.to_vec());
        for l in 0..self.n_layers() {
            let span = self.span(l);
            let f = self.activations[l];
            let prev = &act[l];
            let mut z = vec![0.0; span.rows];
            for r in 0..span.rows {
                let row = &self.params[span.w + r * span.cols..span.w + (r + 1) * span.cols];
                let mut s = self.params[span.b + r];
                for (c, &x) in prev.iter().enumerate() {
                    s += row[c] * x;
                }
                z[r] = s;
            }
            let a: Vec<f64> = z.iter().map(|&v| f.apply(v)).collect();
            pre.push(z);
            act.push(a);
        }
        Ok(ForwardTrace { pre, act })
    }

    /// Accumulate into `grad` the parameter gradient of the scalar
    /// `upstream · output` for one traced sample. Returns the gradient with
    /// respect to the input as well (callers may discard it).
    pub fn backward_into(&self, trace: &ForwardTrace, upstream: &[f64], grad: &mut [f64]) -> Result<Vec<f64>> {
        if upstream.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        if grad.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: grad.len(),
            });
        }
        let mut delta = upstream.to_vec();
        for l in (0..self.n_layers()).rev() {
            let span = self.span(l);
            let f = self.activations[l];
            // dz = delta ⊙ f'(z)
            for (r, d) in delta.iter_mut().enumerate() {
                *d *= f.d1(trace.pre[l][r]);
            }
            let a_prev = &trace.act[l];
            for r in 0..span.rows {
                let dz = delta[r];
                grad[span.b + r] += dz;
                let wrow = span.w + r * span.cols;
                for c in 0..span.cols {
                    grad[wrow + c] += dz * a_prev[c];
                }
            }
            if l > 0 {
                let mut prev = vec![0.0; span.cols];
                for r in 0..span.rows {
                    let dz = delta[r];
                    let row = &self.params[span.w + r * span.cols..span.w + (r + 1) * span.cols];
                    for c in 0..span.cols {
                        prev[c] += row[c] * dz;
                    }
                }
                delta = prev;
            } else {
                let mut input_grad = vec![0.0; span.cols];
                for r in 0..span.rows {
                    let dz = delta[r];
                    let row = &self.params[span.w + r * span.cols..span.w + (r + 1) * span.cols];
                    for c in 0..span.cols {
                        input_grad[c] += row[c] * dz;
                    }
                }
                return Ok(input_grad);
            }
        }
        unreachable!("network has at least one layer");
    }

    /// Parameter gradient of `Σ_i upstream_i · output(input_i)` over a batch.
    pub fn backward_batch(&self, inputs: &[Vec<f64>], upstreams: &[Vec<f64>]) -> Result<Vec<f64>> {
        if inputs.len() != upstreams.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                got: upstreams.len(),
            });
        }
        let mut grad = vec![0.0; self.params.len()];
        for (x, u) in inputs.iter().zip(upstreams) {
            let trace = self.forward_trace(x)?;
            self.backward_into(&trace, u, &mut grad)?;
        }
        Ok(grad)
    }

    /// Gradient of the scalar output with respect to the input coordinates.
    pub fn input_gradient(&self, input: &[f64]) -> Result<Vec<f64>> {
        if self.output_dim() != 1 {
            return Err(Error::NonScalarOutput(self.output_dim()));
        }
        let trace = self.forward_trace(input)?;
        let mut scratch = vec![0.0; self.params.len()];
        self.backward_into(&trace, &[1.0], &mut scratch)
    }
}

/// Cached per-layer state from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Pre-activations per layer.
    pub pre: Vec<Vec<f64>>,
    /// Activations; `act[0]` is the input, `act[L]` the output.
    pub act: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.act.last().unwrap()
    }
}

/// Norm floor for the non-differentiable point of ‖∇D‖ at zero gradient.
pub const GRAD_NORM_FLOOR: f64 = 1e-12;

/// Gradient penalty `(1/N) Σ (‖∇_x D(x_i)‖₂ − 1)²` and its exact parameter
/// gradient, computed by differentiating through the input-gradient norm
/// (double backpropagation).
pub fn grad_penalty_value_and_grad(net: &MlpNetwork, points: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    if net.output_dim() != 1 {
        return Err(Error::NonScalarOutput(net.output_dim()));
    }
    if points.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = points.len() as f64;
    let mut penalty = 0.0;
    let mut grad = vec![0.0; net.n_params()];
    for x in points {
        let trace = net.forward_trace(x)?;
        let g = input_gradient_from_trace(net, &trace);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(GRAD_NORM_FLOOR);
        penalty += (norm - 1.0) * (norm - 1.0) / n;
        // d penalty / d g, treated as a constant tangent for the second pass
        let coeff = 2.0 * (norm - 1.0) / (norm * n);
        let tangent: Vec<f64> = g.iter().map(|v| v * coeff).collect();
        accumulate_jvp_param_grad(net, &trace, &tangent, &mut grad);
    }
    Ok((penalty, grad))
}

/// Input gradient reusing an existing trace (scalar-output networks).
fn input_gradient_from_trace(net: &MlpNetwork, trace: &ForwardTrace) -> Vec<f64> {
    let mut delta = vec![1.0];
    for l in (0..net.n_layers()).rev() {
        let span = net.span(l);
        let f = net.activations[l];
        for (r, d) in delta.iter_mut().enumerate() {
            *d *= f.d1(trace.pre[l][r]);
        }
        let mut prev = vec![0.0; span.cols];
        for r in 0..span.rows {
            let dz = delta[r];
            let row = &net.params[span.w + r * span.cols..span.w + (r + 1) * span.cols];
            for c in 0..span.cols {
                prev[c] += row[c] * dz;
            }
        }
        delta = prev;
    }
    delta
}

/// Reverse pass over the directional-derivative (JVP) computation.
///
/// For a fixed tangent w, the scalar s = w·∇_x D(x) equals the forward-mode
/// derivative of D along w. Its parameter gradient is exactly the
/// gradient-penalty contribution when w = ∂penalty/∂g. The augmented forward
/// carries (a, ȧ) per layer; the reverse pass propagates adjoints of both.
fn accumulate_jvp_param_grad(net: &MlpNetwork, trace: &ForwardTrace, tangent: &[f64], grad: &mut [f64]) {
    let layers = net.n_layers();
    // Forward tangent sweep: ż_l = W_l ȧ_{l-1}, ȧ_l = f'(z_l) ⊙ ż_l.
    let mut zdot: Vec<Vec<f64>> = Vec::with_capacity(layers);
    let mut adot: Vec<Vec<f64>> = Vec::with_capacity(layers + 1);
    adot.push(tangent.to_vec());
    for l in 0..layers {
        let span = net.span(l);
        let f = net.activations[l];
        let prev = &adot[l];
        let mut zd = vec![0.0; span.rows];
        for r in 0..span.rows {
            let row = &net.params[span.w + r * span.cols..span.w + (r + 1) * span.cols];
            let mut s = 0.0;
            for c in 0..span.cols {
                s += row[c] * prev[c];
            }
            zd[r] = s;
        }
        let ad: Vec<f64> = zd
            .iter()
            .enumerate()
            .map(|(r, &v)| f.d1(trace.pre[l][r]) * v)
            .collect();
        zdot.push(zd);
        adot.push(ad);
    }
    // Reverse sweep: adjoints of (a_l, ȧ_l); seed is s = ȧ_L (scalar output).
    let mut abar = vec![0.0; net.output_dim()];
    let mut adotbar = vec![1.0; net.output_dim()];
    for l in (0..layers).rev() {
        let span = net.span(l);
        let f = net.activations[l];
        let mut zbar = vec![0.0; span.rows];
        let mut zdotbar = vec![0.0; span.rows];
        for r in 0..span.rows {
            let d1 = f.d1(trace.pre[l][r]);
            let d2 = f.d2(trace.pre[l][r]);
            zbar[r] = abar[r] * d1 + adotbar[r] * d2 * zdot[l][r];
            zdotbar[r] = adotbar[r] * d1;
        }
        let a_prev = &trace.act[l];
        let adot_prev = &adot[l];
        for r in 0..span.rows {
            grad[span.b + r] += zbar[r];
            let wrow = span.w + r * span.cols;
            for c in 0..span.cols {
                grad[wrow + c] += zbar[r] * a_prev[c] + zdotbar[r] * adot_prev[c];
            }
        }
        if l > 0 {
            let mut abar_prev = vec![0.0; span.cols];
            let mut adotbar_prev = vec![0.0; span.cols];
            for r in 0..span.rows {
                let row = &net.params[span.w + r * span.cols..span.w + (r + 1) * span.cols];
                for c in 0..span.cols {
                    abar_prev[c] += row[c] * zbar[r];
                    adotbar_prev[c] += row[c] * zdotbar[r];
                }
            }
            abar = abar_prev;
            adotbar = adotbar_prev;
        }
    }
}

/// Gradient-penalty parameter gradient by central finite differences.
/// Validation fallback for the double-backward path; not used in training.
pub fn grad_penalty_grad_fd(net: &MlpNetwork, points: &[Vec<f64>], h: f64) -> Result<Vec<f64>> {
    let mut probe = net.clone();
    let mut grad = vec![0.0; net.n_params()];
    for i in 0..net.n_params() {
        let orig = probe.params[i];
        let step = h * orig.abs().max(1.0);
        probe.params[i] = orig + step;
        let up = penalty_only(&probe, points)?;
        probe.params[i] = orig - step;
        let down = penalty_only(&probe, points)?;
        probe.params[i] = orig;
        grad[i] = (up - down) / (2.0 * step);
    }
    Ok(grad)
}

fn penalty_only(net: &MlpNetwork, points: &[Vec<f64>]) -> Result<f64> {
    let n = points.len() as f64;
    let mut p = 0.0;
    for x in points {
        let g = net.input_gradient(x)?;
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(GRAD_NORM_FLOOR);
        p += (norm - 1.0) * (norm - 1.0) / n;
    }
    Ok(p)
}

/// Adam optimizer state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState {
    step_count: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
}

impl AdamState {
    /// Defaults used by every training loop in this crate.
    pub fn new(n_params: usize) -> Self {
        Self::with_learning_rate(n_params, 0.0002)
    }

    pub fn with_learning_rate(n_params: usize, learning_rate: f64) -> Self {
        Self {
            step_count: 0,
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps_hat: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One Adam descent step in place. Gradients must be finite.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.first_moment.len(),
                got: grads.len(),
            });
        }
        if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index });
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.first_moment[i] = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g;
            self.second_moment[i] = self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.first_moment[i] / bc1;
            let v_hat = self.second_moment[i] / bc2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps_hat);
        }
        Ok(())
    }
}

/// Checkpoint blob layout: magic `MLPB`, version u32, layer count u32,
/// layer dims u32…, per-layer activation tag u8 + f64 slope, then params
/// as little-endian f64.
const BLOB_MAGIC: &[u8; 4] = b"MLPB";
const BLOB_VERSION: u32 = 1;

fn activation_tag(a: Activation) -> (u8, f64) {
    match a {
        Activation::Relu => (0, 0.0),
        Activation::LeakyRelu(s) => (1, s),
        Activation::Tanh => (2, 0.0),
        Activation::Sigmoid => (3, 0.0),
        Activation::Identity => (4, 0.0),
    }
}

fn activation_from_tag(tag: u8, slope: f64) -> Result<Activation> {
    Ok(match tag {
        0 => Activation::Relu,
        1 => Activation::LeakyRelu(slope),
        2 => Activation::Tanh,
        3 => Activation::Sigmoid,
        4 => Activation::Identity,
        other => return Err(Error::MalformedBlob(format!("unknown activation tag {other}"))),
    })
}

impl MlpNetwork {
    /// Serialize to the flat little-endian checkpoint blob.
    pub fn to_blob(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.params.len() * 8);
        out.extend_from_slice(BLOB_MAGIC);
        out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.layer_dims.len() as u32).to_le_bytes());
        for &d in &self.layer_dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &a in &self.activations {
            let (tag, slope) = activation_tag(a);
            out.push(tag);
            out.extend_from_slice(&slope.to_le_bytes());
        }
        for &p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    /// Reconstruct a network from a checkpoint blob.
    pub fn from_blob(bytes: &[u8]) -> Result<Self> {
        let mut cursor = 0usize;
        let take = |cursor: &mut usize, n: usize| -> Result<&[u8]> {
            if *cursor + n > bytes.len() {
                return Err(Error::MalformedBlob("truncated blob".into()));
            }
            let s = &bytes[*cursor..*cursor + n];
            *cursor += n;
            Ok(s)
        };
        let magic = take(&mut cursor, 4)?;
        if magic != BLOB_MAGIC {
            return Err(Error::MalformedBlob("bad magic".into()));
        }
        let version = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap());
        if version != BLOB_VERSION {
            return Err(Error::MalformedBlob(format!("unsupported version {version}")));
        }
        let n_dims = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
        if n_dims < 2 {
            return Err(Error::MalformedBlob("fewer than two layer dims".into()));
        }
        let mut layer_dims = Vec::with_capacity(n_dims);
        for _ in 0..n_dims {
            layer_dims.push(u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize);
        }
        let mut activations = Vec::with_capacity(n_dims - 1);
        for _ in 0..n_dims - 1 {
            let tag = take(&mut cursor, 1)?[0];
            let slope = f64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap());
            activations.push(activation_from_tag(tag, slope)?);
        }
        let mut net = Self::new(&layer_dims, &activations)?;
        for p in net.params.iter_mut() {
            *p = f64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap());
        }
        if cursor != bytes.len() {
            return Err(Error::MalformedBlob("trailing bytes".into()));
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{purpose, stream};

    fn scalar_net(dims: &[usize], acts: &[Activation], seed: u64) -> MlpNetwork {
        let mut rng = stream(seed, purpose::INIT, 0);
        MlpNetwork::init_glorot(dims, acts, &mut rng).unwrap()
    }

    /// Straight-line recomputation of the affine/activation chain,
    /// independent of the layered forward implementation.
    fn forward_oracle(net: &MlpNetwork, input: &[f64]) -> Vec<f64> {
        let dims = net.layer_dims();
        let mut offset = 0usize;
        let mut a = input.to_vec();
        for l in 0..dims.len() - 1 {
            let (rows, cols) = (dims[l + 1], dims[l]);
            let w = &net.params()[offset..offset + rows * cols];
            let b = &net.params()[offset + rows * cols..offset + rows * cols + rows];
            offset += rows * cols + rows;
            let mut next = vec![0.0; rows];
            for r in 0..rows {
                let mut z = b[r];
                for c in 0..cols {
                    z += w[r * cols + c] * a[c];
                }
                next[r] = net.activations()[l].apply(z);
            }
            a = next;
        }
        a
    }

    #[test]
    fn identity_layer_is_identity_map() {
        let mut net = MlpNetwork::new(&[2, 2], &[Activation::Identity]).unwrap();
        // weights = I, bias = 0
        net.params_mut()[0] = 1.0;
        net.params_mut()[3] = 1.0;
        assert_eq!(net.forward(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = MlpNetwork::new(&[3, 8, 1], &[Activation::Relu, Activation::Identity]).unwrap();
        for input in [[0.5, -2.0, 3.0], [0.0, 0.0, 0.0], [9.0, 9.0, 9.0]] {
            assert_eq!(net.forward_scalar(&input).unwrap(), 0.0);
        }
    }

    #[test]
    fn forward_matches_independent_oracle() {
        let net = scalar_net(&[2, 16, 1], &[Activation::Relu, Activation::Identity], 42);
        let input = [0.3, -0.7];
        let got = net.forward(&input).unwrap();
        let want = forward_oracle(&net, &input);
        assert!((got[0] - want[0]).abs() < 1e-14, "{got:?} vs {want:?}");
    }

    #[test]
    fn forward_rejects_wrong_dim() {
        let net = scalar_net(&[3, 4, 1], &[Activation::Tanh, Activation::Identity], 1);
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn zero_net_backward_gradients() {
        // loss = output; final bias gradient 1, everything else 0.
        let net = MlpNetwork::new(&[2, 4, 1], &[Activation::Relu, Activation::Identity]).unwrap();
        let trace = net.forward_trace(&[0.4, -0.2]).unwrap();
        let mut grad = vec![0.0; net.n_params()];
        net.backward_into(&trace, &[1.0], &mut grad).unwrap();
        let final_bias = net.n_params() - 1;
        for (i, g) in grad.iter().enumerate() {
            if i == final_bias {
                assert_eq!(*g, 1.0);
            } else {
                assert_eq!(*g, 0.0, "param {i}");
            }
        }
    }

    #[test]
    fn backward_is_linear_in_upstream() {
        let net = scalar_net(&[3, 5, 1], &[Activation::Tanh, Activation::Identity], 3);
        let x = vec![0.1, 0.2, -0.3];
        let g1 = net.backward_batch(&[x.clone()], &[vec![1.0]]).unwrap();
        let g2 = net.backward_batch(&[x], &[vec![2.0]]).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    fn fd_param_grad(net: &MlpNetwork, input: &[f64], h: f64) -> Vec<f64> {
        let mut probe = net.clone();
        let mut out = vec![0.0; net.n_params()];
        for i in 0..net.n_params() {
            let orig = probe.params()[i];
            let step = h * orig.abs().max(1.0);
            probe.params_mut()[i] = orig + step;
            let up = probe.forward_scalar(input).unwrap();
            probe.params_mut()[i] = orig - step;
            let down = probe.forward_scalar(input).unwrap();
            probe.params_mut()[i] = orig;
            out[i] = (up - down) / (2.0 * step);
        }
        out
    }

    fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
            .fold(0.0, f64::max)
    }

    #[test]
    fn backward_matches_finite_differences() {
        for seed in 0..20u64 {
            let net = scalar_net(
                &[3, 6, 5, 1],
                &[Activation::Tanh, Activation::Relu, Activation::Identity],
                seed,
            );
            let mut rng = stream(seed, purpose::DATA, 0);
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let trace = net.forward_trace(&x).unwrap();
            let mut grad = vec![0.0; net.n_params()];
            net.backward_into(&trace, &[1.0], &mut grad).unwrap();
            let fd = fd_param_grad(&net, &x, 1e-5);
            assert!(max_rel_err(&grad, &fd) < 1e-4, "seed {seed}");
        }
    }

    #[test]
    fn input_gradient_of_linear_net_is_weight_row() {
        let mut net = MlpNetwork::new(&[3, 1], &[Activation::Identity]).unwrap();
        net.params_mut()[..3].copy_from_slice(&[1.5, -2.0, 0.25]);
        net.params_mut()[3] = 7.0;
        let g = net.input_gradient(&[0.3, 0.4, 0.5]).unwrap();
        assert_eq!(g, vec![1.5, -2.0, 0.25]);
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        for seed in 0..20u64 {
            let net = scalar_net(
                &[4, 8, 1],
                &[Activation::Sigmoid, Activation::Identity],
                seed + 100,
            );
            let mut rng = stream(seed, purpose::DATA, 1);
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = net.input_gradient(&x).unwrap();
            let h = 1e-5;
            for i in 0..4 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (net.forward_scalar(&xp).unwrap() - net.forward_scalar(&xm).unwrap()) / (2.0 * h);
                let rel = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1e-6);
                assert!(rel < 1e-4, "seed {seed} coord {i}: {} vs {}", g[i], fd);
            }
        }
    }

    #[test]
    fn constant_network_has_zero_input_gradient() {
        let net = MlpNetwork::new(&[3, 4, 1], &[Activation::Relu, Activation::Identity]).unwrap();
        let g = net.input_gradient(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn unit_norm_affine_net_has_zero_penalty() {
        let mut net = MlpNetwork::new(&[2, 1], &[Activation::Identity]).unwrap();
        let w = [0.6, 0.8]; // norm 1
        net.params_mut()[..2].copy_from_slice(&w);
        net.params_mut()[2] = -3.0;
        let (p, g) = grad_penalty_value_and_grad(&net, &[vec![0.1, 0.2], vec![-1.0, 1.0]]).unwrap();
        assert!(p.abs() < 1e-15);
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn penalty_on_scaled_linear_net() {
        // w = (2, 0): ‖∇D‖ = 2 everywhere, penalty (2-1)² = 1.
        let mut net = MlpNetwork::new(&[2, 1], &[Activation::Identity]).unwrap();
        net.params_mut()[0] = 2.0;
        let (p, _) = grad_penalty_value_and_grad(&net, &[vec![0.0, 0.0]]).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn penalty_gradient_matches_finite_differences() {
        for seed in 0..10u64 {
            let net = scalar_net(
                &[3, 6, 1],
                &[Activation::Tanh, Activation::Identity],
                seed + 500,
            );
            let mut rng = stream(seed, purpose::DATA, 2);
            let points: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let (_, g) = grad_penalty_value_and_grad(&net, &points).unwrap();
            let fd = grad_penalty_grad_fd(&net, &points, 1e-5).unwrap();
            assert!(max_rel_err(&g, &fd) < 1e-3, "seed {seed}");
        }
    }

    #[test]
    fn penalty_gradient_matches_fd_with_relu_hidden() {
        for seed in [0u64, 2, 5, 9] {
            let net = scalar_net(
                &[2, 8, 1],
                &[Activation::Relu, Activation::Identity],
                seed + 900,
            );
            let mut rng = stream(seed, purpose::DATA, 3);
            let points: Vec<Vec<f64>> = (0..5)
                .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let (_, g) = grad_penalty_value_and_grad(&net, &points).unwrap();
            let fd = grad_penalty_grad_fd(&net, &points, 1e-6).unwrap();
            assert!(max_rel_err(&g, &fd) < 1e-3, "seed {seed}");
        }
    }

    #[test]
    fn adam_zero_gradient_is_identity() {
        let mut params = vec![1.0, -2.0, 3.0];
        let mut st = AdamState::new(3);
        for _ in 0..25 {
            st.step(&mut params, &[0.0, 0.0, 0.0]).unwrap();
        }
        assert_eq!(params, vec![1.0, -2.0, 3.0]);
        assert_eq!(st.step_count(), 25);
    }

    #[test]
    fn adam_first_step_closed_form() {
        let g = 0.37;
        let mut params = vec![0.0];
        let mut st = AdamState::new(1);
        st.step(&mut params, &[g]).unwrap();
        // m̂ = g, v̂ = g² on the first step, so Δ = −lr·g/(|g| + ε).
        let expect = -0.0002 * g / (g.abs() + 1e-8);
        assert!((params[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn adam_rejects_nonfinite_gradient() {
        let mut params = vec![0.0, 0.0];
        let mut st = AdamState::new(2);
        let err = st.step(&mut params, &[0.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { index: 1 }));
    }

    #[test]
    fn adam_trajectories_are_deterministic() {
        let run = || {
            let mut net = scalar_net(&[2, 4, 1], &[Activation::Relu, Activation::Identity], 11);
            let mut st = AdamState::new(net.n_params());
            for i in 0..50 {
                let x = [0.1 * i as f64, -0.05 * i as f64];
                let trace = net.forward_trace(&x).unwrap();
                let mut grad = vec![0.0; net.n_params()];
                net.backward_into(&trace, &[1.0], &mut grad).unwrap();
                let mut p = net.params().to_vec();
                st.step(&mut p, &grad).unwrap();
                net.params_mut().copy_from_slice(&p);
            }
            net.params().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn blob_roundtrip() {
        let net = scalar_net(
            &[3, 5, 1],
            &[Activation::LeakyRelu(0.2), Activation::Identity],
            77,
        );
        let blob = net.to_blob();
        let back = MlpNetwork::from_blob(&blob).unwrap();
        assert_eq!(back.layer_dims(), net.layer_dims());
        assert_eq!(back.activations(), net.activations());
        assert_eq!(back.params(), net.params());
    }

    #[test]
    fn blob_rejects_corruption() {
        let net = scalar_net(&[2, 3, 1], &[Activation::Relu, Activation::Identity], 5);
        let mut blob = net.to_blob();
        blob[0] = b'X';
        assert!(MlpNetwork::from_blob(&blob).is_err());
        let blob2 = net.to_blob();
        assert!(MlpNetwork::from_blob(&blob2[..blob2.len() - 3]).is_err());
    }
}
