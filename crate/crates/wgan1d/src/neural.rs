//! Dense feed-forward networks with hand-derived forward and backward
//! passes: affine layers, optional batch normalization, leaky-ReLU / tanh /
//! linear activations. No autodiff graph; the layer menu is fixed and each
//! backward rule is written out explicitly.
//!
//! All trainable parameters of a net live in one flat `Vec<f64>` in layer
//! order `[W, b, (γ, β)]`, so an optimizer step is a single slice update
//! and parameter snapshots are plain vectors. Batch-norm running statistics
//! are state, not parameters, and are stored separately.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Added to batch variance before the inverse square root. Small enough to
/// keep normalized activations at unit variance to well below 1e-6 for
/// any data with spread above ~1e-4.
pub const BN_EPSILON: f64 = 1e-8;
/// Negative slope of the leaky ReLU.
pub const LEAKY_SLOPE: f64 = 0.2;
/// Running-statistics momentum: `r ← 0.9·r + 0.1·batch`.
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    LeakyRelu,
    Tanh,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Shape and wiring of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub batch_norm: bool,
    pub activation: Activation,
}

#[derive(Debug, Clone, Copy)]
struct Offsets {
    w: usize,
    b: usize,
    gamma: usize,
    beta: usize,
}

#[derive(Debug, Clone)]
struct RunningStats {
    mean: Vec<f64>,
    var: Vec<f64>,
}

/// A dense feed-forward network.
#[derive(Debug, Clone)]
pub struct DenseNet {
    specs: Vec<LayerSpec>,
    offsets: Vec<Offsets>,
    params: Vec<f64>,
    running: Vec<Option<RunningStats>>,
}

/// Intermediates recorded by a forward pass, consumed by `backward`.
#[derive(Debug)]
pub struct ForwardCache {
    train: bool,
    specs: Vec<LayerSpec>,
    /// `a_0 (input), a_1, …, a_L`.
    activations: Vec<Array2<f64>>,
    /// Pre-activation (after batch norm where present), per layer.
    preacts: Vec<Array2<f64>>,
    /// Normalized activations `(z − μ)/√(σ² + ε)`, batch-norm layers only.
    xhats: Vec<Option<Array2<f64>>>,
    /// `1/√(σ² + ε)` per feature, batch-norm layers only.
    ivars: Vec<Option<Array1<f64>>>,
}

impl DenseNet {
    /// Build a net from layer specs with Glorot-uniform weights, zero
    /// biases, and identity batch-norm parameters.
    pub fn new<R: Rng>(specs: &[LayerSpec], rng: &mut R) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::invalid("a net needs at least one layer"));
        }
        for (spec, next) in specs.iter().zip(&specs[1..]) {
            if spec.out_dim != next.in_dim {
                return Err(Error::invalid(format!(
                    "layer dims do not chain: {} -> {}",
                    spec.out_dim, next.in_dim
                )));
            }
        }
        if specs.iter().any(|s| s.in_dim == 0 || s.out_dim == 0) {
            return Err(Error::invalid("layer dims must be positive"));
        }
        let mut offsets = Vec::with_capacity(specs.len());
        let mut cursor = 0usize;
        for spec in specs {
            let w = cursor;
            cursor += spec.in_dim * spec.out_dim;
            let b = cursor;
            cursor += spec.out_dim;
            let (gamma, beta) = if spec.batch_norm {
                let g = cursor;
                cursor += spec.out_dim;
                let bt = cursor;
                cursor += spec.out_dim;
                (g, bt)
            } else {
                (usize::MAX, usize::MAX)
            };
            offsets.push(Offsets { w, b, gamma, beta });
        }
        let mut params = vec![0.0; cursor];
        for (spec, off) in specs.iter().zip(&offsets) {
            let limit = (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt();
            for w in params[off.w..off.w + spec.in_dim * spec.out_dim].iter_mut() {
                *w = rng.gen_range(-limit..limit);
            }
            if spec.batch_norm {
                params[off.gamma..off.gamma + spec.out_dim].fill(1.0);
            }
        }
        let running = specs
            .iter()
            .map(|s| {
                s.batch_norm.then(|| RunningStats {
                    mean: vec![0.0; s.out_dim],
                    var: vec![1.0; s.out_dim],
                })
            })
            .collect();
        Ok(DenseNet {
            specs: specs.to_vec(),
            offsets,
            params,
            running,
        })
    }

    /// The generator shape: batch-normalized leaky-ReLU hidden layers and
    /// a single tanh output unit.
    pub fn generator<R: Rng>(noise_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut specs = Vec::new();
        let mut prev = noise_dim;
        for &width in hidden {
            specs.push(LayerSpec {
                in_dim: prev,
                out_dim: width,
                batch_norm: true,
                activation: Activation::LeakyRelu,
            });
            prev = width;
        }
        specs.push(LayerSpec {
            in_dim: prev,
            out_dim: 1,
            batch_norm: false,
            activation: Activation::Tanh,
        });
        Self::new(&specs, rng)
    }

    /// A plain scalar-output MLP (no batch norm, linear head).
    pub fn scalar_mlp<R: Rng>(input_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut specs = Vec::new();
        let mut prev = input_dim;
        for &width in hidden {
            specs.push(LayerSpec {
                in_dim: prev,
                out_dim: width,
                batch_norm: false,
                activation: Activation::LeakyRelu,
            });
            prev = width;
        }
        specs.push(LayerSpec {
            in_dim: prev,
            out_dim: 1,
            batch_norm: false,
            activation: Activation::Linear,
        });
        Self::new(&specs, rng)
    }

    pub fn input_dim(&self) -> usize {
        self.specs[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.specs[self.specs.len() - 1].out_dim
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn has_batch_norm(&self) -> bool {
        self.specs.iter().any(|s| s.batch_norm)
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn params_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
            && self.running.iter().flatten().all(|r| {
                r.mean.iter().all(|v| v.is_finite()) && r.var.iter().all(|v| v.is_finite())
            })
    }

    pub(crate) fn weight(&self, layer: usize) -> ArrayView2<'_, f64> {
        let spec = self.specs[layer];
        let off = self.offsets[layer];
        ArrayView2::from_shape((spec.in_dim, spec.out_dim), &self.params[off.w..off.w + spec.in_dim * spec.out_dim])
            .expect("weight shape")
    }

    /// Range of `layer`'s weight block inside the flat parameter vector.
    pub(crate) fn weight_range(&self, layer: usize) -> std::ops::Range<usize> {
        let spec = self.specs[layer];
        let off = self.offsets[layer];
        off.w..off.w + spec.in_dim * spec.out_dim
    }

    /// Run the net on a `[batch × input_dim]` matrix.
    ///
    /// Train mode normalizes with batch statistics and folds them into the
    /// running statistics; eval mode reads the running statistics and
    /// leaves the net untouched.
    pub fn forward(&mut self, batch: &Array2<f64>, mode: Mode) -> Result<(Array2<f64>, ForwardCache)> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "batch has {} columns, net expects {}",
                batch.ncols(),
                self.input_dim()
            )));
        }
        let rows = batch.nrows();
        if rows == 0 {
            return Err(Error::invalid("empty batch"));
        }
        let train = mode == Mode::Train;
        if train && rows < 2 && self.has_batch_norm() {
            return Err(Error::invalid(
                "batch norm in train mode needs a batch of at least 2",
            ));
        }
        let layer_count = self.specs.len();
        let mut cache = ForwardCache {
            train,
            specs: self.specs.clone(),
            activations: Vec::with_capacity(layer_count + 1),
            preacts: Vec::with_capacity(layer_count),
            xhats: Vec::with_capacity(layer_count),
            ivars: Vec::with_capacity(layer_count),
        };
        cache.activations.push(batch.clone());
        for layer in 0..layer_count {
            let spec = self.specs[layer];
            let off = self.offsets[layer];
            let input = &cache.activations[layer];
            let mut z = input.dot(&self.weight(layer));
            {
                let bias = &self.params[off.b..off.b + spec.out_dim];
                for mut row in z.rows_mut() {
                    row.iter_mut().zip(bias).for_each(|(v, b)| *v += b);
                }
            }
            let (preact, xhat, ivar) = if spec.batch_norm {
                let gamma = self.params[off.gamma..off.gamma + spec.out_dim].to_vec();
                let beta = self.params[off.beta..off.beta + spec.out_dim].to_vec();
                let (mean, var) = if train {
                    let mean = z.mean_axis(Axis(0)).expect("nonempty batch");
                    let mut var = Array1::zeros(spec.out_dim);
                    for row in z.rows() {
                        for (v, (x, m)) in var.iter_mut().zip(row.iter().zip(mean.iter())) {
                            let d = x - m;
                            *v += d * d;
                        }
                    }
                    var.mapv_inplace(|v| v / rows as f64);
                    let stats = self.running[layer].as_mut().expect("bn stats");
                    for ((rm, rv), (m, v)) in stats
                        .mean
                        .iter_mut()
                        .zip(stats.var.iter_mut())
                        .zip(mean.iter().zip(var.iter()))
                    {
                        *rm = BN_MOMENTUM * *rm + (1.0 - BN_MOMENTUM) * m;
                        *rv = BN_MOMENTUM * *rv + (1.0 - BN_MOMENTUM) * v;
                    }
                    (mean, var)
                } else {
                    let stats = self.running[layer].as_ref().expect("bn stats");
                    (
                        Array1::from_vec(stats.mean.clone()),
                        Array1::from_vec(stats.var.clone()),
                    )
                };
                let ivar = var.mapv(|v| 1.0 / (v + BN_EPSILON).sqrt());
                let mut xhat = z;
                for mut row in xhat.rows_mut() {
                    for ((x, m), iv) in row.iter_mut().zip(mean.iter()).zip(ivar.iter()) {
                        *x = (*x - m) * iv;
                    }
                }
                let mut preact = xhat.clone();
                for mut row in preact.rows_mut() {
                    for ((p, g), bt) in row.iter_mut().zip(&gamma).zip(&beta) {
                        *p = *p * g + bt;
                    }
                }
                (preact, Some(xhat), Some(ivar))
            } else {
                (z, None, None)
            };
            let output = match spec.activation {
                Activation::LeakyRelu => preact.mapv(|v| if v > 0.0 { v } else { LEAKY_SLOPE * v }),
                Activation::Tanh => preact.mapv(f64::tanh),
                Activation::Linear => preact.clone(),
            };
            cache.preacts.push(preact);
            cache.xhats.push(xhat);
            cache.ivars.push(ivar);
            cache.activations.push(output);
        }
        let out = cache.activations[layer_count].clone();
        Ok((out, cache))
    }

    /// Gradients of a scalar loss with output gradient `grad_output`,
    /// with respect to every parameter (flat, aligned with `params`) and
    /// to the input batch.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_output: &Array2<f64>,
    ) -> Result<(Vec<f64>, Array2<f64>)> {
        if !cache.train {
            return Err(Error::invalid("backward needs a train-mode forward cache"));
        }
        if cache.specs != self.specs {
            return Err(Error::invalid("forward cache does not match this net"));
        }
        let rows = cache.activations[0].nrows();
        if grad_output.nrows() != rows || grad_output.ncols() != self.output_dim() {
            return Err(Error::invalid(format!(
                "grad_output is {}x{}, expected {}x{}",
                grad_output.nrows(),
                grad_output.ncols(),
                rows,
                self.output_dim()
            )));
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut d = grad_output.clone();
        for layer in (0..self.specs.len()).rev() {
            let spec = self.specs[layer];
            let off = self.offsets[layer];
            match spec.activation {
                Activation::LeakyRelu => {
                    let pre = &cache.preacts[layer];
                    d.zip_mut_with(pre, |g, &p| {
                        if p <= 0.0 {
                            *g *= LEAKY_SLOPE;
                        }
                    });
                }
                Activation::Tanh => {
                    let out = &cache.activations[layer + 1];
                    d.zip_mut_with(out, |g, &a| *g *= 1.0 - a * a);
                }
                Activation::Linear => {}
            }
            if spec.batch_norm {
                let xhat = cache.xhats[layer].as_ref().expect("bn cache");
                let ivar = cache.ivars[layer].as_ref().expect("bn cache");
                let gamma = &self.params[off.gamma..off.gamma + spec.out_dim];
                let mut sum_d = vec![0.0; spec.out_dim];
                let mut sum_dx = vec![0.0; spec.out_dim];
                for (drow, xrow) in d.rows().into_iter().zip(xhat.rows()) {
                    for (f, (dv, xv)) in drow.iter().zip(xrow.iter()).enumerate() {
                        sum_d[f] += dv;
                        sum_dx[f] += dv * xv;
                    }
                }
                grads[off.gamma..off.gamma + spec.out_dim].copy_from_slice(&sum_dx);
                grads[off.beta..off.beta + spec.out_dim].copy_from_slice(&sum_d);
                let inv_rows = 1.0 / rows as f64;
                // d/dz of γ·(z−μ)/√(σ²+ε) with batch statistics:
                // dz = ivar/B · (B·dxhat − Σdxhat − xhat·Σ(dxhat·xhat))
                for (mut drow, xrow) in d.rows_mut().into_iter().zip(xhat.rows()) {
                    for (f, (dv, xv)) in drow.iter_mut().zip(xrow.iter()).enumerate() {
                        let dxh = *dv * gamma[f];
                        let gsum = sum_d[f] * gamma[f];
                        let gxsum = sum_dx[f] * gamma[f];
                        *dv = ivar[f] * inv_rows * (rows as f64 * dxh - gsum - xv * gxsum);
                    }
                }
            }
            let input = &cache.activations[layer];
            {
                let dw = &mut grads[off.w..off.w + spec.in_dim * spec.out_dim];
                let mut dw_view =
                    ArrayViewMut2::from_shape((spec.in_dim, spec.out_dim), dw).expect("dw shape");
                general_mat_mul(1.0, &input.t(), &d, 0.0, &mut dw_view);
            }
            {
                let db = &mut grads[off.b..off.b + spec.out_dim];
                for row in d.rows() {
                    for (slot, v) in db.iter_mut().zip(row.iter()) {
                        *slot += v;
                    }
                }
            }
            d = d.dot(&self.weight(layer).t());
        }
        Ok((grads, d))
    }
}

impl ForwardCache {
    pub(crate) fn preact(&self, layer: usize) -> &Array2<f64> {
        &self.preacts[layer]
    }
}

/// Draw `count` generator samples: standard-normal noise through the net,
/// flattened from the single tanh output column.
pub fn sample_generator<R: Rng>(
    net: &mut DenseNet,
    count: usize,
    rng: &mut R,
    mode: Mode,
) -> Result<Vec<f64>> {
    if net.output_dim() != 1 {
        return Err(Error::invalid("generator must have a single output"));
    }
    if count < 2 {
        return Err(Error::invalid("generator sampling needs count >= 2"));
    }
    let (out, _) = sample_generator_with_cache(net, count, rng, mode)?;
    Ok(out)
}

/// As [`sample_generator`], returning the forward cache and noise batch so
/// a training step can backpropagate through the same draw.
pub fn sample_generator_with_cache<R: Rng>(
    net: &mut DenseNet,
    count: usize,
    rng: &mut R,
    mode: Mode,
) -> Result<(Vec<f64>, ForwardCache)> {
    let noise_dim = net.input_dim();
    let mut noise = Array2::zeros((count, noise_dim));
    for v in noise.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    let (out, cache) = net.forward(&noise, mode)?;
    Ok((out.column(0).to_vec(), cache))
}
