//! The series-reparameterized critic.
//!
//! The critic is `f_A(x) = Σ_k A_k ξ_k(x)` over a [`SeriesBasis`]. Its
//! derivative magnitude is bounded everywhere by the weighted ℓ1 norm
//! `L(A) = Σ_k |A_k| b_k`, so `L(A) ≤ 1` is a convex surrogate for the
//! 1-Lipschitz constraint. The training objective in the coefficients is
//! linear, which makes every local maximum global; the exact supremum over
//! the surrogate ball has the closed form implemented in
//! [`optimal_critic_closed_form`], and [`ascend_fixed_objective`] is the
//! matching gradient-ascent route used to cross-check it.

use crate::basis::SeriesBasis;
use crate::error::{Error, Result};
use crate::optim::{AdamHyper, AdamState};

/// Coefficient vector over a series basis, plus its optimizer state.
#[derive(Debug, Clone)]
pub struct SummableCritic {
    basis: SeriesBasis,
    coeffs: Vec<f64>,
    adam: AdamState,
}

/// Loss breakdown for one critic update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticObjectiveReport {
    /// Minibatch estimate of `Σ_k A_k (E_real[ξ_k] − E_fake[ξ_k])`.
    pub objective: f64,
    /// Weighted ℓ1 surrogate `L(A)`.
    pub surrogate: f64,
    /// `λ·max(0, L(A) − 1)²`.
    pub penalty: f64,
    /// `−objective + penalty`; the quantity gradient descent minimizes.
    pub total_loss: f64,
}

impl SummableCritic {
    /// Fresh critic with all-zero coefficients (feasible: `L(0) = 0`).
    pub fn new(basis: SeriesBasis, hyper: AdamHyper) -> Self {
        let len = basis.len();
        SummableCritic {
            basis,
            coeffs: vec![0.0; len],
            adam: AdamState::new(len, hyper),
        }
    }

    pub fn basis(&self) -> &SeriesBasis {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn set_coeffs(&mut self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.basis.len() {
            return Err(Error::invalid(format!(
                "expected {} coefficients, got {}",
                self.basis.len(),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("coefficients must be finite"));
        }
        self.coeffs.copy_from_slice(coeffs);
        Ok(())
    }

    /// `f_A(x)`: dot product of coefficients with the features at `x`.
    pub fn value(&self, x: f64) -> Result<f64> {
        let feats = self.basis.eval_features(x)?;
        Ok(dot(&self.coeffs, &feats))
    }

    /// `f'_A(x)` from the analytic feature derivatives.
    pub fn value_derivative(&self, x: f64) -> Result<f64> {
        if !(-1.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain(x));
        }
        Ok(self.basis.derivative_dot(&self.coeffs, x))
    }

    /// The Lipschitz surrogate `L(A) = Σ_k |A_k| b_k`.
    pub fn lipschitz_surrogate(&self) -> f64 {
        surrogate(&self.coeffs, &self.basis.derivative_bounds())
    }

    /// Loss report and coefficient gradient for one minibatch pair.
    pub fn loss_and_grad(
        &self,
        real_batch: &[f64],
        fake_batch: &[f64],
        lambda: f64,
    ) -> Result<(CriticObjectiveReport, Vec<f64>)> {
        if lambda < 0.0 {
            return Err(Error::invalid("penalty weight must be nonnegative"));
        }
        let c = feature_mean_diff(&self.basis, real_batch, fake_batch)?;
        Ok(self.loss_and_grad_for_diff(&c, lambda))
    }

    /// Same as [`Self::loss_and_grad`] for a precomputed feature-mean
    /// difference vector.
    pub fn loss_and_grad_for_diff(
        &self,
        c: &[f64],
        lambda: f64,
    ) -> (CriticObjectiveReport, Vec<f64>) {
        let bounds = self.basis.derivative_bounds();
        let objective = dot(&self.coeffs, c);
        let l = surrogate(&self.coeffs, &bounds);
        let hinge = (l - 1.0).max(0.0);
        let penalty = lambda * hinge * hinge;
        let grad: Vec<f64> = self
            .coeffs
            .iter()
            .zip(c.iter().zip(&bounds))
            .map(|(a, (ck, bk))| -ck + 2.0 * lambda * hinge * bk * sign(*a))
            .collect();
        let report = CriticObjectiveReport {
            objective,
            surrogate: l,
            penalty,
            total_loss: -objective + penalty,
        };
        (report, grad)
    }

    /// One Adam step on the coefficients.
    pub fn adam_step(&mut self, grads: &[f64]) -> Result<()> {
        self.adam.apply(&mut self.coeffs, grads)
    }

    pub fn adam_hyper_mut(&mut self) -> &mut AdamHyper {
        &mut self.adam.hyper
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn surrogate(coeffs: &[f64], bounds: &[f64]) -> f64 {
    coeffs.iter().zip(bounds).map(|(a, b)| a.abs() * b).sum()
}

fn sign(a: f64) -> f64 {
    if a > 0.0 {
        1.0
    } else if a < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Per-feature difference of batch means: `c_k = mean_real ξ_k − mean_fake ξ_k`.
///
/// For the Taylor basis these are sample moment differences.
pub fn feature_mean_diff(
    basis: &SeriesBasis,
    real_batch: &[f64],
    fake_batch: &[f64],
) -> Result<Vec<f64>> {
    if real_batch.is_empty() || fake_batch.is_empty() {
        return Err(Error::invalid("feature mean difference needs nonempty batches"));
    }
    let mut real_mean = vec![0.0; basis.len()];
    for &x in real_batch {
        if !(-1.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain(x));
        }
        basis.accumulate_features(x, &mut real_mean);
    }
    let mut fake_mean = vec![0.0; basis.len()];
    for &x in fake_batch {
        if !(-1.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain(x));
        }
        basis.accumulate_features(x, &mut fake_mean);
    }
    let nr = real_batch.len() as f64;
    let nf = fake_batch.len() as f64;
    Ok(real_mean
        .iter()
        .zip(&fake_mean)
        .map(|(r, f)| r / nr - f / nf)
        .collect())
}

/// Exact supremum of `Σ_k A_k c_k` subject to `Σ_k b_k |A_k| ≤ 1`.
///
/// Substituting `u_k = b_k A_k` turns the program into a plain ℓ1-ball
/// linear maximization, whose optimum sits on the vertex with the largest
/// `|c_k|/b_k`. Ties break toward the lowest index.
pub fn optimal_critic_closed_form(c: &[f64], b: &[f64]) -> Result<(Vec<f64>, f64)> {
    if c.len() != b.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} objective terms vs {} bounds",
            c.len(),
            b.len()
        )));
    }
    if b.iter().any(|&bk| bk <= 0.0 || !bk.is_finite()) {
        return Err(Error::invalid("derivative bounds must be positive and finite"));
    }
    let mut best_k = 0usize;
    let mut best_ratio = 0.0;
    for (k, (ck, bk)) in c.iter().zip(b).enumerate() {
        let ratio = ck.abs() / bk;
        if ratio > best_ratio {
            best_ratio = ratio;
            best_k = k;
        }
    }
    let mut a_star = vec![0.0; c.len()];
    a_star[best_k] = sign(c[best_k]) / b[best_k];
    Ok((a_star, best_ratio))
}

/// Step-size schedule for [`ascend_fixed_objective`]: constant for the
/// first 30%, then exponential decay down to base/1000.
///
/// The decay matters: with `sign(0) = 0` every sub-threshold coefficient
/// oscillates around zero at the step-size amplitude, so a fixed rate
/// leaves a surrogate floor of roughly `lr·Σb_k/2` that starves the
/// dominant coefficient of budget. A slow exponential decay frees that
/// budget gradually enough for the dominant coefficient to claim it.
fn ascent_rate(base: f64, step: usize, total: usize) -> f64 {
    let warm = total * 3 / 10;
    if step < warm || total < 2 {
        base
    } else {
        let u = (step - warm) as f64 / (total - warm) as f64;
        base * 1e-3f64.powf(u)
    }
}

/// Penalized Adam ascent on a fixed linear objective `c`.
///
/// The ascent runs on the budget-scaled coefficients `u_k = b_k A_k` (the
/// same substitution that yields the closed form), where the surrogate is
/// the plain ℓ1 norm. This keeps the per-step surrogate overshoot at
/// `rate·K` instead of `rate·Σb_k`; in the raw coordinates the chatter of
/// the 2N sub-threshold coefficients under Adam's normalized steps drowns
/// the dominant one at any workable rate.
///
/// Each iterate is rescaled onto the surrogate ball (a feasible point, so
/// its objective can never exceed the true supremum) and the best such
/// feasible value along the trajectory is returned together with the
/// coefficients that achieved it. The closed-form route above is the
/// reference this is compared against.
pub fn ascend_fixed_objective(
    c: &[f64],
    b: &[f64],
    lambda: f64,
    steps: usize,
    hyper: AdamHyper,
) -> Result<(Vec<f64>, f64)> {
    if c.len() != b.len() {
        return Err(Error::invalid("objective/bounds length mismatch"));
    }
    if b.iter().any(|&bk| bk <= 0.0) {
        return Err(Error::invalid("derivative bounds must be positive"));
    }
    let scaled_c: Vec<f64> = c.iter().zip(b).map(|(ck, bk)| ck / bk).collect();
    let mut u = vec![0.0; c.len()];
    let mut adam = AdamState::new(c.len(), hyper);
    let mut grad = vec![0.0; c.len()];
    let mut best = vec![0.0; c.len()];
    let mut best_value = 0.0;
    for step in 0..steps {
        adam.hyper.learning_rate = ascent_rate(hyper.learning_rate, step, steps);
        let l: f64 = u.iter().map(|v: &f64| v.abs()).sum();
        let hinge = (l - 1.0).max(0.0);
        for (g, (uv, ck)) in grad.iter_mut().zip(u.iter().zip(&scaled_c)) {
            *g = -ck + 2.0 * lambda * hinge * sign(*uv);
        }
        adam.apply(&mut u, &grad)?;
        let l: f64 = u.iter().map(|v: &f64| v.abs()).sum();
        let scale = 1.0 / l.max(1.0);
        let value: f64 = u.iter().zip(&scaled_c).map(|(uv, ck)| uv * scale * ck).sum();
        if value > best_value {
            best_value = value;
            best.clear();
            best.extend(u.iter().zip(b).map(|(uv, bk)| uv * scale / bk));
        }
    }
    Ok((best, best_value))
}

/// Default step count for the ascent-vs-closed-form cross-check; at the
/// annealed 5e-3 rate the worst relative gap over hundreds of random
/// instances sits near 0.3%, comfortably under the 1% check.
pub const ASCENT_ORACLE_STEPS: usize = 30_000;

/// Default Adam hyperparameters for the ascent oracle.
pub fn ascent_oracle_hyper() -> AdamHyper {
    AdamHyper::with_learning_rate(5e-3)
}
