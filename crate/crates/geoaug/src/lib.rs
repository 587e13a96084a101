//! Geostatistical data augmentation toolkit.
//!
//! Interpolates a geo-referenced target variable (plot cover, 0-100) at new
//! sites using Gaussian-process regression (with compositional kernel search
//! scored by BIC) and kriging (simple, ordinary, and regression kriging over
//! four variogram models), then measures how augmentation changes downstream
//! regression accuracy and the spatial density of the target.
//!
//! Module map:
//!
//! * [`numcore`] - dense symmetric linear algebra (Cholesky with jitter
//!   escalation, triangular solves, a pivoted Gaussian-elimination solver).
//! * [`kernels`] - kernel expression trees, Gram matrices with analytic
//!   gradients, grammar expansion and greedy BIC search.
//! * [`gp`] - GP regression: marginal-likelihood optimization and posterior
//!   prediction.
//! * [`variogram`] - empirical semivariograms and the linear / exponential /
//!   gaussian / spherical parametric models with grid-search fitting.
//! * [`kriging`] - simple, ordinary, and regression kriging.
//! * [`geodata`] - data model, CSV ingestion, splitting, zones, and a
//!   synthetic ground-truth generator used as the testing oracle.
//! * [`regressors`] - downstream LR / Ridge / KNN / MLP regressors.
//! * [`augment`] - candidate-site sampling, auxiliary-variable providers, and
//!   the augmentation pipeline.
//! * [`evaluate`] - MSE matrices, added-point sweeps, density maps, and
//!   zone-overlap reports.
//!
//! The math modules are generic over [`Scalar`] (`f32` or `f64`); the data
//! pipeline instantiates everything at `f64` via the aliases below.

pub mod augment;
pub mod evaluate;
pub mod geodata;
pub mod gp;
pub mod kernels;
pub mod kriging;
pub mod numcore;
pub mod regressors;
pub mod scalar;
pub mod variogram;

pub use scalar::Scalar;

// concrete aliases restored as modules land
/// `f64` dense matrix.
pub type Matrix64 = numcore::Matrix<f64>;
