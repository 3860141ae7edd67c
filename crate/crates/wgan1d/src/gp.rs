//! Gradient-penalty baseline critic.
//!
//! A scalar-output MLP (no batch norm, so per-sample input gradients are
//! well defined) trained to maximize the mean critic gap, with the usual
//! one-sided interpolate penalty `λ·mean(|f'(x̂)| − 1)²`. Parameter
//! gradients of the penalty require differentiating the input-gradient
//! computation itself; for the leaky-ReLU/linear layer menu the activation
//! derivative is piecewise constant, so the second-order pass reduces to
//! replaying the adjoint chain with fixed masks. That replay is written
//! out by hand below and checked against finite differences in the tests.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayViewMut2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::neural::{Activation, DenseNet, Mode, LEAKY_SLOPE};
use crate::optim::{AdamHyper, AdamState};

/// Loss breakdown for one baseline critic update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpReport {
    /// `mean f(real) − mean f(fake)`.
    pub wasserstein_gap: f64,
    /// `mean (|f'(x̂)| − 1)²` over the interpolates.
    pub penalty: f64,
    /// `−wasserstein_gap + λ·penalty`.
    pub total_loss: f64,
}

/// The baseline critic: fixed 1 → 100 → 100 → 1 leaky-ReLU MLP.
#[derive(Debug, Clone)]
pub struct GpCritic {
    net: DenseNet,
    adam: AdamState,
}

impl GpCritic {
    pub fn new<R: Rng>(rng: &mut R, hyper: AdamHyper) -> Result<Self> {
        let net = DenseNet::scalar_mlp(1, &[100, 100], rng)?;
        let adam = AdamState::new(net.param_count(), hyper);
        Ok(GpCritic { net, adam })
    }

    /// Wrap an arbitrary batch-norm-free scalar MLP (used by tests to
    /// exercise analytic cases like `f(x) = x`).
    pub fn from_net(net: DenseNet, hyper: AdamHyper) -> Result<Self> {
        validate_gp_net(&net)?;
        let adam = AdamState::new(net.param_count(), hyper);
        Ok(GpCritic { net, adam })
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNet {
        &mut self.net
    }

    /// Critic values for a flat batch.
    pub fn values(&mut self, xs: &[f64]) -> Result<Vec<f64>> {
        let batch = column(xs);
        let (out, _) = self.net.forward(&batch, Mode::Eval)?;
        Ok(out.column(0).to_vec())
    }

    /// Per-sample `df/dx`.
    pub fn input_gradient(&mut self, xs: &[f64]) -> Result<Vec<f64>> {
        let batch = column(xs);
        let pass = input_gradient_pass(&mut self.net, &batch)?;
        Ok(pass.grad.column(0).to_vec())
    }

    /// Loss and flat parameter gradients for one update, drawing one
    /// interpolation coefficient per real/fake pair from `rng`.
    pub fn loss_and_grads<R: Rng>(
        &mut self,
        real: &[f64],
        fake: &[f64],
        lambda: f64,
        rng: &mut R,
    ) -> Result<(GpReport, Vec<f64>)> {
        let pairs = real.len().min(fake.len());
        if pairs == 0 {
            return Err(Error::invalid("gradient-penalty update needs nonempty batches"));
        }
        let eps: Vec<f64> = (0..pairs).map(|_| rng.gen::<f64>()).collect();
        self.loss_and_grads_with_eps(real, fake, lambda, &eps)
    }

    /// Deterministic variant with caller-supplied interpolation draws;
    /// the finite-difference tests freeze `eps` through this entry point.
    pub fn loss_and_grads_with_eps(
        &mut self,
        real: &[f64],
        fake: &[f64],
        lambda: f64,
        eps: &[f64],
    ) -> Result<(GpReport, Vec<f64>)> {
        let pairs = real.len().min(fake.len());
        if pairs == 0 {
            return Err(Error::invalid("gradient-penalty update needs nonempty batches"));
        }
        if eps.len() != pairs {
            return Err(Error::invalid("one interpolation draw per pair required"));
        }
        if lambda < 0.0 {
            return Err(Error::invalid("penalty weight must be nonnegative"));
        }
        let real = &real[..pairs];
        let fake = &fake[..pairs];
        let inv_b = 1.0 / pairs as f64;

        // Wasserstein term: −(mean f(real) − mean f(fake))
        let real_batch = column(real);
        let fake_batch = column(fake);
        let (real_out, real_cache) = self.net.forward(&real_batch, Mode::Train)?;
        let (fake_out, fake_cache) = self.net.forward(&fake_batch, Mode::Train)?;
        let gap = (real_out.sum() - fake_out.sum()) * inv_b;
        let (mut grads, _) = self
            .net
            .backward(&real_cache, &Array2::from_elem((pairs, 1), -inv_b))?;
        let (fake_grads, _) = self
            .net
            .backward(&fake_cache, &Array2::from_elem((pairs, 1), inv_b))?;
        for (g, fg) in grads.iter_mut().zip(&fake_grads) {
            *g += fg;
        }

        // Penalty term on the interpolates.
        let mut interp = Array2::zeros((pairs, 1));
        for (i, ((r, f), e)) in real.iter().zip(fake).zip(eps).enumerate() {
            interp[[i, 0]] = e * r + (1.0 - e) * f;
        }
        let pass = input_gradient_pass(&mut self.net, &interp)?;
        let mut penalty = 0.0;
        // ∂P/∂g for P = mean (|g| − 1)²
        let mut gbar = Array2::zeros((pairs, 1));
        for (slot, &g) in gbar.iter_mut().zip(pass.grad.iter()) {
            let a = g.abs();
            penalty += (a - 1.0) * (a - 1.0) * inv_b;
            *slot = 2.0 * inv_b * (a - 1.0) * sign(g);
        }
        accumulate_penalty_grads(&self.net, &pass, &gbar, lambda, &mut grads);

        let report = GpReport {
            wasserstein_gap: gap,
            penalty,
            total_loss: -gap + lambda * penalty,
        };
        Ok((report, grads))
    }

    /// Evaluate the loss only (shared by the finite-difference oracle).
    pub fn loss_with_eps(
        &mut self,
        real: &[f64],
        fake: &[f64],
        lambda: f64,
        eps: &[f64],
    ) -> Result<GpReport> {
        let pairs = real.len().min(fake.len());
        if pairs == 0 || eps.len() != pairs {
            return Err(Error::invalid("bad batch/eps lengths"));
        }
        let real = &real[..pairs];
        let fake = &fake[..pairs];
        let inv_b = 1.0 / pairs as f64;
        let (real_out, _) = self.net.forward(&column(real), Mode::Train)?;
        let (fake_out, _) = self.net.forward(&column(fake), Mode::Train)?;
        let gap = (real_out.sum() - fake_out.sum()) * inv_b;
        let mut interp = Array2::zeros((pairs, 1));
        for (i, ((r, f), e)) in real.iter().zip(fake).zip(eps).enumerate() {
            interp[[i, 0]] = e * r + (1.0 - e) * f;
        }
        let pass = input_gradient_pass(&mut self.net, &interp)?;
        let penalty = pass
            .grad
            .iter()
            .map(|g| {
                let a = g.abs();
                (a - 1.0) * (a - 1.0)
            })
            .sum::<f64>()
            * inv_b;
        Ok(GpReport {
            wasserstein_gap: gap,
            penalty,
            total_loss: -gap + lambda * penalty,
        })
    }

    /// One Adam step on the critic parameters.
    pub fn adam_step(&mut self, grads: &[f64]) -> Result<()> {
        self.adam.apply(self.net.params_mut(), grads)
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn column(xs: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((xs.len(), 1), xs.to_vec()).expect("column shape")
}

fn validate_gp_net(net: &DenseNet) -> Result<()> {
    if net.output_dim() != 1 || net.input_dim() != 1 {
        return Err(Error::invalid("gradient-penalty critic must map 1 -> 1"));
    }
    if net.has_batch_norm() {
        return Err(Error::invalid(
            "gradient-penalty critic cannot use batch norm: per-sample input gradients would couple",
        ));
    }
    if net
        .specs()
        .iter()
        .any(|s| s.activation == Activation::Tanh)
    {
        return Err(Error::invalid(
            "input-gradient replay supports only leaky-ReLU and linear activations",
        ));
    }
    Ok(())
}

/// Adjoint intermediates of one input-gradient computation.
struct GradientPass {
    /// Activation-derivative masks per layer.
    masks: Vec<Array2<f64>>,
    /// `s_i = (upstream input-grad) ⊙ mask_i` per layer.
    s: Vec<Array2<f64>>,
    /// `df/dx` per sample.
    grad: Array2<f64>,
}

/// Forward plus backward-to-input with `grad_output = 1`, keeping the
/// adjoint intermediates needed by the penalty's parameter gradients.
fn input_gradient_pass(net: &mut DenseNet, batch: &Array2<f64>) -> Result<GradientPass> {
    validate_gp_net(net)?;
    let (_, cache) = net.forward(batch, Mode::Train)?;
    let layers = net.specs().len();
    let mut masks = vec![Array2::zeros((0, 0)); layers];
    let mut s = vec![Array2::zeros((0, 0)); layers];
    let mut d = Array2::ones((batch.nrows(), 1));
    for layer in (0..layers).rev() {
        let spec = net.specs()[layer];
        let mask = match spec.activation {
            // at an exact-zero pre-activation, take the negative-slope branch
            Activation::LeakyRelu => cache
                .preact(layer)
                .mapv(|p| if p > 0.0 { 1.0 } else { LEAKY_SLOPE }),
            Activation::Linear => Array2::ones(cache.preact(layer).dim()),
            Activation::Tanh => unreachable!("validated above"),
        };
        let si = &d * &mask;
        d = si.dot(&net.weight(layer).t());
        masks[layer] = mask;
        s[layer] = si;
    }
    Ok(GradientPass { masks, s, grad: d })
}

/// Differentiate the penalty `P(g)` through the adjoint chain. The chain
/// computed `d_{i−1} = (d_i ⊙ m_i) W_iᵀ` top-down with constant masks
/// `m_i`; reversing it propagates `u := ∂P/∂d_{i−1}` bottom-up and
/// deposits `∂P/∂W_i = uᵀ s_i` along the way. Biases never enter the
/// chain and the masks are flat almost everywhere, so neither picks up a
/// penalty gradient.
fn accumulate_penalty_grads(
    net: &DenseNet,
    pass: &GradientPass,
    gbar: &Array2<f64>,
    lambda: f64,
    grads: &mut [f64],
) {
    let layers = net.specs().len();
    let mut u = gbar.clone();
    for layer in 0..layers {
        let spec = net.specs()[layer];
        {
            let dw = &mut grads[net.weight_range(layer)];
            let mut dw_view = ArrayViewMut2::from_shape((spec.in_dim, spec.out_dim), dw)
                .expect("dw shape");
            general_mat_mul(lambda, &u.t(), &pass.s[layer], 1.0, &mut dw_view);
        }
        if layer + 1 < layers {
            let v = u.dot(&net.weight(layer));
            u = &v * &pass.masks[layer];
        }
    }
}
