//! Clean-state estimators `p(x_0 | x_t, t, I)`.
//!
//! [`Denoiser`] is what the solver consumes. It is implemented by the trained
//! network ([`DenoiserParams`], [`Checkpoint`]) and by [`OracleDenoiser`], a
//! perfect estimator built from a known optimal tour.

mod checkpoint;
mod network;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, FORMAT_VERSION, MAGIC};
pub use network::{
    denoise, loss_and_grad, time_embedding, Architecture, DenoiserParams, LossWeighting, Sample,
    MAX_HIDDEN,
};
pub use train::{train, train_observed, Checkpoint, Redraw, TargetMode, TrainingConfig, TrainingMeta};

use crate::error::{Error, Result};
use crate::field::EdgeField;
use crate::scalar::Scalar;
use crate::tsp::{tour_to_adjacency, Instance, Tour};

pub const ORACLE_EPS: f64 = 1e-6;

pub trait Denoiser<T: Scalar>: Sync {
    fn denoise(&self, instance: &Instance<T>, x_t: &EdgeField<T>, t: usize) -> Result<EdgeField<T>>;

    /// Horizon the estimator was trained for, if it depends on one.
    fn horizon(&self) -> Option<usize> {
        None
    }
}

impl<T: Scalar> Denoiser<T> for DenoiserParams<T> {
    fn denoise(&self, instance: &Instance<T>, x_t: &EdgeField<T>, t: usize) -> Result<EdgeField<T>> {
        network::denoise(self, instance, x_t, t)
    }

    fn horizon(&self) -> Option<usize> {
        Some(self.architecture().horizon)
    }
}

impl<T: Scalar> Denoiser<T> for Checkpoint<T> {
    fn denoise(&self, instance: &Instance<T>, x_t: &EdgeField<T>, t: usize) -> Result<EdgeField<T>> {
        network::denoise(&self.params, instance, x_t, t)
    }

    fn horizon(&self) -> Option<usize> {
        Some(self.params.architecture().horizon)
    }
}

/// Adjacency of `known_optimal` softened to `{eps, 1 - eps}`, whatever the
/// noisy state and timestep.
pub fn oracle_denoise<T: Scalar>(
    instance: &Instance<T>,
    _x_t: &EdgeField<T>,
    _t: usize,
    known_optimal: &Tour,
) -> Result<EdgeField<T>> {
    if known_optimal.n() != instance.n() {
        return Err(Error::Dimension {
            expected: instance.n(),
            found: known_optimal.n(),
        });
    }
    Ok(tour_to_adjacency::<T>(known_optimal).soften(T::of(ORACLE_EPS)))
}

#[derive(Debug, Clone)]
pub struct OracleDenoiser {
    tour: Tour,
}

impl OracleDenoiser {
    pub fn new(known_optimal: Tour) -> Self {
        Self {
            tour: known_optimal,
        }
    }

    pub fn tour(&self) -> &Tour {
        &self.tour
    }
}

impl<T: Scalar> Denoiser<T> for OracleDenoiser {
    fn denoise(&self, instance: &Instance<T>, x_t: &EdgeField<T>, t: usize) -> Result<EdgeField<T>> {
        oracle_denoise(instance, x_t, t, &self.tour)
    }
}
