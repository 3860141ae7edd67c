//! One-dimensional Wasserstein GAN lab.
//!
//! Critics come in two families: series-reparameterized critics (Taylor or
//! Fourier features under a convex weighted-ℓ1 Lipschitz surrogate) and a
//! gradient-penalty MLP baseline. Generators are small batch-normalized
//! dense nets with hand-derived backward passes. Every model is scored by
//! the sample Earth-Mover's distance between 100-bin histograms, and a
//! KDE provides the nonparametric reference point.

pub mod artifact;
pub mod basis;
pub mod critic;
pub mod data;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod metrics;
pub mod neural;
pub mod optim;
pub mod rng;
pub mod training;

pub use basis::{BasisKind, SeriesBasis};
pub use critic::{feature_mean_diff, optimal_critic_closed_form, SummableCritic};
pub use data::{DataKind, DataSource};
pub use error::{Error, Result};
pub use gp::GpCritic;
pub use metrics::{emd_1d, emd_lp_oracle, kde_fit, kde_sample, Histogram, KdeModel};
pub use neural::{Activation, DenseNet, LayerSpec, Mode};
pub use optim::{AdamHyper, AdamState};
pub use training::{train, ModelKind, RunResult, RunStatus, TrainConfig};
