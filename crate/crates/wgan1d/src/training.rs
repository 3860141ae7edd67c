//! Alternating optimization for the series-critic GAN and the
//! gradient-penalty baseline, with periodic EMD evaluation and
//! best-over-training reporting. The KDE baseline rides the same run
//! plumbing with a single evaluation.

use std::fmt;
use std::time::Instant;

use ndarray::Array2;
use rand::Rng;

use crate::basis::SeriesBasis;
use crate::critic::SummableCritic;
use crate::data::{DataKind, DataSource};
use crate::error::{Error, Result};
use crate::gp::GpCritic;
use crate::metrics::{emd_1d, kde_fit, kde_sample, Histogram};
use crate::neural::{sample_generator_with_cache, DenseNet, Mode};
use crate::optim::{AdamHyper, AdamState};
use crate::rng::{stream_rng, streams};

/// Samples drawn per EMD evaluation.
pub const EVAL_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    TaylorCritic,
    FourierCritic,
    WganGp,
    Kde,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ModelKind::TaylorCritic => "taylor-critic",
            ModelKind::FourierCritic => "fourier-critic",
            ModelKind::WganGp => "wgan-gp",
            ModelKind::Kde => "kde",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "taylor-critic" | "taylor" => Ok(ModelKind::TaylorCritic),
            "fourier-critic" | "fourier" => Ok(ModelKind::FourierCritic),
            "wgan-gp" | "gp" => Ok(ModelKind::WganGp),
            "kde" => Ok(ModelKind::Kde),
            other => Err(Error::invalid(format!("unknown model '{other}'"))),
        }
    }
}

/// Everything a single run needs. `desk` is the default preset; the
/// full-size configuration sits behind [`TrainConfig::full_scale`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub data: DataKind,
    pub seed: u64,
    /// Series truncation order.
    pub n_terms: usize,
    pub gen_widths: Vec<usize>,
    pub noise_dim: usize,
    pub batch_size: usize,
    pub critic_steps: usize,
    pub lambda: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub iterations: u64,
    pub eval_every: u64,
    pub bins: usize,
}

impl TrainConfig {
    /// Desk-scale preset: 3×64 generator, 20k iterations.
    pub fn desk(model: ModelKind, data: DataKind, seed: u64) -> Self {
        TrainConfig {
            model,
            data,
            seed,
            n_terms: 20,
            gen_widths: vec![64, 64, 64],
            noise_dim: 10,
            batch_size: 256,
            critic_steps: 5,
            lambda: 10.0,
            learning_rate: 1e-4,
            beta1: 0.0,
            beta2: 0.9,
            iterations: 20_000,
            eval_every: 1_000,
            bins: 100,
        }
    }

    /// Full-size preset: 3×500 generator, 100k iterations.
    pub fn full_scale(model: ModelKind, data: DataKind, seed: u64) -> Self {
        TrainConfig {
            gen_widths: vec![500, 500, 500],
            iterations: 100_000,
            ..Self::desk(model, data, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_terms == 0
            || self.gen_widths.is_empty()
            || self.gen_widths.iter().any(|&w| w == 0)
            || self.noise_dim == 0
            || self.batch_size < 2
            || self.critic_steps == 0
            || self.eval_every == 0
            || self.bins == 0
        {
            return Err(Error::invalid("all size fields must be positive (batch >= 2)"));
        }
        if self.lambda < 0.0 || self.learning_rate <= 0.0 {
            return Err(Error::invalid("lambda must be >= 0 and learning rate > 0"));
        }
        Ok(())
    }

    pub fn adam_hyper(&self) -> AdamHyper {
        AdamHyper {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: 1e-8,
        }
    }

    fn basis(&self) -> Result<SeriesBasis> {
        match self.model {
            ModelKind::TaylorCritic => SeriesBasis::taylor(self.n_terms),
            ModelKind::FourierCritic => SeriesBasis::fourier(self.n_terms),
            other => Err(Error::invalid(format!("{other} has no series basis"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    /// A non-finite loss or parameter appeared; the run stopped here.
    Diverged { iteration: u64 },
}

impl RunStatus {
    pub fn failed(&self) -> bool {
        matches!(self, RunStatus::Diverged { .. })
    }
}

/// Everything a finished (or aborted) run reports.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: TrainConfig,
    pub status: RunStatus,
    /// `(iteration, EMD)` at every evaluation checkpoint.
    pub trajectory: Vec<(u64, f64)>,
    /// `(iteration, L(A))` at the same checkpoints; series critics only.
    pub surrogates: Vec<(u64, f64)>,
    pub best_emd: f64,
    pub best_iteration: u64,
    /// Generator histogram at the best checkpoint.
    pub best_hist: Histogram,
    pub wall_clock_seconds: f64,
    pub gen_params: Vec<f64>,
    pub critic_params: Vec<f64>,
}

enum CriticState {
    Series(SummableCritic),
    Gp(GpCritic),
}

/// Train one model on one data source. Failed (diverged) runs come back as
/// `Ok` results carrying [`RunStatus::Diverged`], so a grid of runs can
/// record the failure instead of tearing everything down.
pub fn train(config: &TrainConfig, data: &DataSource) -> Result<RunResult> {
    config.validate()?;
    if data.kind != config.data {
        return Err(Error::invalid(format!(
            "config expects {} data, got {}",
            config.data, data.kind
        )));
    }
    if data.samples.iter().any(|x| !(-1.0..=1.0).contains(x)) {
        return Err(Error::invalid("training data must lie in [-1, 1]"));
    }
    let data_hist = Histogram::build(&data.samples, config.bins, -1.0, 1.0)?;
    if config.model == ModelKind::Kde {
        return kde_run(config, data, &data_hist);
    }

    let started = Instant::now();
    let hyper = config.adam_hyper();
    let mut gen = DenseNet::generator(
        config.noise_dim,
        &config.gen_widths,
        &mut stream_rng(config.seed, streams::GEN_INIT),
    )?;
    let mut gen_adam = AdamState::new(gen.param_count(), hyper);
    let mut critic = match config.model {
        ModelKind::TaylorCritic | ModelKind::FourierCritic => {
            CriticState::Series(SummableCritic::new(config.basis()?, hyper))
        }
        ModelKind::WganGp => CriticState::Gp(GpCritic::new(
            &mut stream_rng(config.seed, streams::CRITIC_INIT),
            hyper,
        )?),
        ModelKind::Kde => unreachable!("handled above"),
    };

    let mut noise_rng = stream_rng(config.seed, streams::TRAIN_NOISE);
    let mut batch_rng = stream_rng(config.seed, streams::REAL_BATCH);
    let mut eps_rng = stream_rng(config.seed, streams::GP_EPS);
    let mut eval_rng = stream_rng(config.seed, streams::EVAL);

    let mut trajectory = Vec::new();
    let mut surrogates = Vec::new();
    let mut best_emd = f64::INFINITY;
    let mut best_iteration = 0u64;
    let mut best_hist = data_hist.clone();
    let mut status = RunStatus::Completed;

    let record_eval = |iteration: u64,
                           gen: &mut DenseNet,
                           critic: &CriticState,
                           eval_rng: &mut rand_chacha::ChaCha8Rng,
                           trajectory: &mut Vec<(u64, f64)>,
                           surrogates: &mut Vec<(u64, f64)>,
                           best_emd: &mut f64,
                           best_iteration: &mut u64,
                           best_hist: &mut Histogram|
     -> Result<bool> {
        let (emd, hist) = evaluate_generator(gen, &data_hist, eval_rng)?;
        trajectory.push((iteration, emd));
        if let CriticState::Series(critic) = critic {
            surrogates.push((iteration, critic.lipschitz_surrogate()));
        }
        if emd < *best_emd {
            *best_emd = emd;
            *best_iteration = iteration;
            *best_hist = hist;
        }
        Ok(emd.is_finite() && gen.params_finite())
    };

    record_eval(
        0,
        &mut gen,
        &critic,
        &mut eval_rng,
        &mut trajectory,
        &mut surrogates,
        &mut best_emd,
        &mut best_iteration,
        &mut best_hist,
    )?;

    let mut real_batch = vec![0.0; config.batch_size];
    'outer: for iteration in 1..=config.iterations {
        for _ in 0..config.critic_steps {
            for slot in real_batch.iter_mut() {
                *slot = data.samples[batch_rng.gen_range(0..data.samples.len())];
            }
            let (fake, _) =
                sample_generator_with_cache(&mut gen, config.batch_size, &mut noise_rng, Mode::Train)?;
            let loss = match &mut critic {
                CriticState::Series(critic) => {
                    let (report, grads) =
                        critic.loss_and_grad(&real_batch, &fake, config.lambda)?;
                    critic.adam_step(&grads)?;
                    report.total_loss
                }
                CriticState::Gp(critic) => {
                    let (report, grads) =
                        critic.loss_and_grads(&real_batch, &fake, config.lambda, &mut eps_rng)?;
                    critic.adam_step(&grads)?;
                    report.total_loss
                }
            };
            if !loss.is_finite() {
                status = RunStatus::Diverged { iteration };
                break 'outer;
            }
        }

        // Generator step: minimize −mean f(G(z)) by feeding the critic's
        // input derivative back through the generator.
        let (fake, cache) =
            sample_generator_with_cache(&mut gen, config.batch_size, &mut noise_rng, Mode::Train)?;
        let inv_b = 1.0 / config.batch_size as f64;
        let mut grad_out = Array2::zeros((config.batch_size, 1));
        match &mut critic {
            CriticState::Series(critic) => {
                for (slot, &x) in grad_out.iter_mut().zip(&fake) {
                    *slot = -critic.value_derivative(x)? * inv_b;
                }
            }
            CriticState::Gp(critic) => {
                let d = critic.input_gradient(&fake)?;
                for (slot, d) in grad_out.iter_mut().zip(d) {
                    *slot = -d * inv_b;
                }
            }
        }
        let (grads, _) = gen.backward(&cache, &grad_out)?;
        gen_adam.apply(gen.params_mut(), &grads)?;

        if iteration % config.eval_every == 0 {
            let healthy = record_eval(
                iteration,
                &mut gen,
                &critic,
                &mut eval_rng,
                &mut trajectory,
                &mut surrogates,
                &mut best_emd,
                &mut best_iteration,
                &mut best_hist,
            )?;
            if !healthy {
                status = RunStatus::Diverged { iteration };
                break;
            }
        }
    }

    let critic_params = match &critic {
        CriticState::Series(critic) => critic.coeffs().to_vec(),
        CriticState::Gp(critic) => critic.net().params().to_vec(),
    };
    Ok(RunResult {
        config: config.clone(),
        status,
        best_emd,
        best_iteration,
        best_hist,
        trajectory,
        surrogates,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        gen_params: gen.params().to_vec(),
        critic_params,
    })
}

/// Draw 10,000 eval-mode generator samples, clamp, and score them against
/// the training-data histogram.
pub fn evaluate_generator(
    gen: &mut DenseNet,
    data_hist: &Histogram,
    rng: &mut impl Rng,
) -> Result<(f64, Histogram)> {
    let (samples, _) = sample_generator_with_cache(gen, EVAL_SAMPLES, rng, Mode::Eval)?;
    let clamped: Vec<f64> = samples.iter().map(|x| x.clamp(-1.0, 1.0)).collect();
    let (lo, hi) = data_hist.range();
    let hist = Histogram::build(&clamped, data_hist.bin_count(), lo, hi)?;
    let emd = emd_1d(&hist, data_hist)?;
    Ok((emd, hist))
}

fn kde_run(config: &TrainConfig, data: &DataSource, data_hist: &Histogram) -> Result<RunResult> {
    let started = Instant::now();
    let model = kde_fit(&data.samples)?;
    let mut rng = stream_rng(config.seed, streams::KDE);
    let draws = kde_sample(&model, EVAL_SAMPLES, &mut rng);
    let (lo, hi) = data_hist.range();
    let hist = Histogram::build(&draws, data_hist.bin_count(), lo, hi)?;
    let emd = emd_1d(&hist, data_hist)?;
    Ok(RunResult {
        config: config.clone(),
        status: RunStatus::Completed,
        trajectory: vec![(0, emd)],
        surrogates: Vec::new(),
        best_emd: emd,
        best_iteration: 0,
        best_hist: hist,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        gen_params: Vec::new(),
        critic_params: vec![model.bandwidth()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critic::{feature_mean_diff, optimal_critic_closed_form};
    use crate::neural::sample_generator;

    fn tiny_config(model: ModelKind, data: DataKind, seed: u64) -> TrainConfig {
        TrainConfig {
            gen_widths: vec![8, 8],
            noise_dim: 4,
            batch_size: 16,
            n_terms: 4,
            iterations: 30,
            eval_every: 10,
            ..TrainConfig::desk(model, data, seed)
        }
    }

    #[test]
    fn zero_iterations_yield_single_initial_evaluation() {
        let mut config = tiny_config(ModelKind::FourierCritic, DataKind::Mixture, 1);
        config.iterations = 0;
        let data = DataSource::synthetic(DataKind::Mixture, 1).unwrap();
        let result = train(&config, &data).unwrap();
        assert_eq!(result.trajectory.len(), 1);
        assert_eq!(result.trajectory[0].0, 0);
        assert_eq!(result.best_emd, result.trajectory[0].1);
        assert_eq!(result.best_iteration, 0);
        assert!(!result.status.failed());
    }

    #[test]
    fn reruns_are_bitwise_identical() {
        for model in [ModelKind::TaylorCritic, ModelKind::FourierCritic, ModelKind::WganGp] {
            let config = tiny_config(model, DataKind::Sawtooth, 5);
            let data = DataSource::synthetic(DataKind::Sawtooth, 5).unwrap();
            let a = train(&config, &data).unwrap();
            let b = train(&config, &data).unwrap();
            let bits = |t: &[(u64, f64)]| -> Vec<(u64, u64)> {
                t.iter().map(|&(i, e)| (i, e.to_bits())).collect()
            };
            assert_eq!(bits(&a.trajectory), bits(&b.trajectory), "{model}");
            assert_eq!(a.gen_params, b.gen_params, "{model}");
            assert_eq!(a.critic_params, b.critic_params, "{model}");
        }
    }

    #[test]
    fn best_emd_is_trajectory_minimum() {
        let config = tiny_config(ModelKind::TaylorCritic, DataKind::Discrete, 2);
        let data = DataSource::synthetic(DataKind::Discrete, 2).unwrap();
        let result = train(&config, &data).unwrap();
        let min = result
            .trajectory
            .iter()
            .map(|&(_, e)| e)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(result.best_emd, min);
    }

    #[test]
    fn zero_weight_generator_scores_half_against_mixture() {
        let data = DataSource::synthetic(DataKind::Mixture, 3).unwrap();
        let data_hist = Histogram::build(&data.samples, 100, -1.0, 1.0).unwrap();
        let mut gen = DenseNet::generator(4, &[8], &mut stream_rng(3, streams::GEN_INIT)).unwrap();
        gen.params_mut().iter_mut().for_each(|p| *p = 0.0);
        let (emd, _) = evaluate_generator(&mut gen, &data_hist, &mut stream_rng(3, streams::EVAL)).unwrap();
        // all generator mass sits at 0; the transport cost is mean |x| ≈ 0.5
        assert!((emd - 0.5).abs() < 0.02, "EMD {emd}");
    }

    #[test]
    fn evaluation_is_deterministic_per_seed() {
        let data = DataSource::synthetic(DataKind::Sawtooth, 4).unwrap();
        let data_hist = Histogram::build(&data.samples, 100, -1.0, 1.0).unwrap();
        let mut gen = DenseNet::generator(4, &[8], &mut stream_rng(4, streams::GEN_INIT)).unwrap();
        let (a, _) = evaluate_generator(&mut gen, &data_hist, &mut stream_rng(9, streams::EVAL)).unwrap();
        let (b, _) = evaluate_generator(&mut gen, &data_hist, &mut stream_rng(9, streams::EVAL)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn kde_run_reports_single_checkpoint() {
        let config = TrainConfig::desk(ModelKind::Kde, DataKind::Mixture, 6);
        let data = DataSource::synthetic(DataKind::Mixture, 6).unwrap();
        let result = train(&config, &data).unwrap();
        assert_eq!(result.trajectory.len(), 1);
        assert!(result.best_emd < 0.06, "KDE EMD {}", result.best_emd);
        assert_eq!(result.critic_params.len(), 1);
        assert!(result.critic_params[0] > 0.0);
    }

    #[test]
    fn config_validation_rejects_degenerate_fields() {
        let mut config = TrainConfig::desk(ModelKind::TaylorCritic, DataKind::Mixture, 1);
        config.batch_size = 1;
        assert!(config.validate().is_err());
        let mut config = TrainConfig::desk(ModelKind::TaylorCritic, DataKind::Mixture, 1);
        config.lambda = -1.0;
        assert!(config.validate().is_err());
        let config = TrainConfig::desk(ModelKind::TaylorCritic, DataKind::Mixture, 1);
        let data = DataSource::synthetic(DataKind::Sawtooth, 1).unwrap();
        assert!(train(&config, &data).is_err());
    }

    /// With the generator frozen the critic faces a fixed linear objective;
    /// gradient ascent must reach the closed-form supremum. The learning
    /// rate is raised to 2e-3 so 2,000 steps cover the coefficient scale,
    /// and each iterate is scored after rescaling onto the surrogate ball
    /// (feasible, so it can never beat the supremum).
    #[test]
    fn frozen_generator_critic_reaches_closed_form_objective() {
        let data = DataSource::synthetic(DataKind::Mixture, 11).unwrap();
        let mut gen = DenseNet::generator(10, &[32, 32], &mut stream_rng(11, streams::GEN_INIT)).unwrap();
        let fake = sample_generator(
            &mut gen,
            data.samples.len(),
            &mut stream_rng(11, streams::TRAIN_NOISE),
            Mode::Eval,
        )
        .unwrap();
        for kind in [ModelKind::TaylorCritic, ModelKind::FourierCritic] {
            let basis = match kind {
                ModelKind::TaylorCritic => SeriesBasis::taylor(20).unwrap(),
                _ => SeriesBasis::fourier(20).unwrap(),
            };
            let c = feature_mean_diff(&basis, &data.samples, &fake).unwrap();
            let bounds = basis.derivative_bounds();
            let (_, v_star) = optimal_critic_closed_form(&c, &bounds).unwrap();
            let (coeffs, achieved) = crate::critic::ascend_fixed_objective(
                &c,
                &bounds,
                10.0,
                2000,
                crate::critic::ascent_oracle_hyper(),
            )
            .unwrap();
            eprintln!("{kind}: achieved {achieved} vs {v_star} (gap {:.4})", (v_star - achieved) / v_star);
            assert!(achieved <= v_star + 1e-12, "{kind}: feasible value beat the supremum");
            assert!(
                (achieved - v_star).abs() <= 0.02 * v_star.abs(),
                "{kind}: achieved {achieved} vs {v_star}"
            );
            // the winning coefficients load onto the critic unchanged
            let mut critic = SummableCritic::new(basis, AdamHyper::default());
            critic.set_coeffs(&coeffs).unwrap();
            assert!(critic.lipschitz_surrogate() <= 1.0 + 1e-9);
        }
    }
}
