use std::time::Instant;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{loss_and_grad, Architecture, DenoiserParams, LossWeighting, Sample};
use crate::diffusion::{forward_sample, ScheduleConfig};
use crate::error::{Error, Result};
use crate::field::EdgeField;
use crate::local_search::sample_equivalence_target;
use crate::scalar::Scalar;
use crate::tsp::{tour_to_adjacency, Instance, Tour};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TargetMode {
    /// Regress toward the optimal tour itself.
    #[default]
    Dirac,
    /// Regress toward a tour two random 2-changes away from the optimum.
    EquivalenceClass,
}

/// How often equivalence-class targets are redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Redraw {
    #[default]
    PerEpoch,
    PerStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub target_mode: TargetMode,
    #[serde(default)]
    pub redraw: Redraw,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub n: usize,
    /// Expected dataset length; 0 accepts any.
    pub dataset_size: usize,
    pub hidden: usize,
    pub time_freqs: usize,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub weighting: LossWeighting,
    /// Rescale the batch gradient to at most this L2 norm.
    pub grad_clip: Option<f64>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            target_mode: TargetMode::Dirac,
            redraw: Redraw::PerEpoch,
            learning_rate: 0.05,
            momentum: 0.9,
            epochs: 50,
            batch_size: 16,
            seed: 0,
            n: 20,
            dataset_size: 0,
            hidden: 32,
            time_freqs: 4,
            schedule: ScheduleConfig::default(),
            weighting: LossWeighting::Balanced,
            grad_clip: Some(5.0),
        }
    }
}

impl TrainingConfig {
    pub fn architecture(&self) -> Architecture {
        Architecture {
            hidden: self.hidden,
            time_freqs: self.time_freqs,
            horizon: self.schedule.horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.architecture().validate()?;
        if self.target_mode == TargetMode::EquivalenceClass && self.n < 5 {
            return Err(Error::Config(format!(
                "equivalence-class targets need n >= 5, got {}",
                self.n
            )));
        }
        if self.n < 3 {
            return Err(Error::Config(format!("n must be at least 3, got {}", self.n)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("bad learning rate {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if let Some(c) = self.grad_clip {
            if c.is_nan() || c <= 0.0 {
                return Err(Error::Config(format!("bad gradient clip {c}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainingMeta {
    /// Mean training loss per epoch.
    pub loss_curve: Vec<f64>,
    pub wall_seconds: f64,
    /// Epochs run by ancestors this checkpoint was initialized from.
    #[serde(default)]
    pub prior_epochs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub params: DenoiserParams<T>,
    pub config: TrainingConfig,
    pub meta: TrainingMeta,
}

/// Trains the denoiser. See [`train_observed`].
pub fn train<T: Scalar>(
    config: &TrainingConfig,
    dataset: &[(Instance<T>, Tour)],
    init: Option<&Checkpoint<T>>,
) -> Result<Checkpoint<T>> {
    train_observed(config, dataset, init, |_, _, _| {})
}

/// Trains the denoiser, calling `observe(epoch, index, target)` every time a
/// training target is drawn.
///
/// Each sample draws `t` uniformly from `1..=T`, noises its target adjacency
/// with `q(x_t | x_0)` and regresses the network output toward the target.
/// All randomness comes from `config.seed`.
pub fn train_observed<T: Scalar>(
    config: &TrainingConfig,
    dataset: &[(Instance<T>, Tour)],
    init: Option<&Checkpoint<T>>,
    mut observe: impl FnMut(usize, usize, &Tour),
) -> Result<Checkpoint<T>> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("empty training dataset".into()));
    }
    if config.dataset_size != 0 && config.dataset_size != dataset.len() {
        return Err(Error::Config(format!(
            "dataset has {} instances, config expects {}",
            dataset.len(),
            config.dataset_size
        )));
    }
    for (k, (inst, tour)) in dataset.iter().enumerate() {
        if inst.n() != config.n {
            return Err(Error::Data(format!(
                "instance {k} has {} cities, config expects {}",
                inst.n(),
                config.n
            )));
        }
        if tour.n() != inst.n() || !tour_to_adjacency::<T>(tour).is_hamiltonian_cycle() {
            return Err(Error::Data(format!("label {k} is not a Hamiltonian tour")));
        }
    }
    let schedule = config.schedule.build::<T>()?;
    let arch = config.architecture();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (mut params, prior_epochs) = match init {
        Some(ck) => {
            if ck.params.architecture() != arch {
                return Err(Error::Config(format!(
                    "initial checkpoint architecture {:?} differs from {:?}",
                    ck.params.architecture(),
                    arch
                )));
            }
            (ck.params.clone(), ck.meta.prior_epochs + ck.meta.loss_curve.len())
        }
        None => (DenoiserParams::random(arch, rng.random())?, 0),
    };
    let mut velocity = DenoiserParams::zeros(arch)?;
    let lr = T::of(config.learning_rate);
    let mu = T::of(config.momentum);
    let started = Instant::now();

    let optimal: Vec<EdgeField<T>> = dataset.iter().map(|(_, t)| tour_to_adjacency(t)).collect();
    let mut loss_curve = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..dataset.len()).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let epoch_targets: Vec<EdgeField<T>> = match config.target_mode {
            TargetMode::EquivalenceClass if config.redraw == Redraw::PerEpoch => {
                let mut out = Vec::with_capacity(dataset.len());
                for (k, (_, tour)) in dataset.iter().enumerate() {
                    let target = sample_equivalence_target(tour, &mut rng)?;
                    observe(epoch, k, &target);
                    out.push(tour_to_adjacency(&target));
                }
                out
            }
            _ => Vec::new(),
        };

        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let mut items = Vec::with_capacity(chunk.len());
            for &k in chunk {
                let target = match config.target_mode {
                    TargetMode::Dirac => {
                        observe(epoch, k, &dataset[k].1);
                        optimal[k].clone()
                    }
                    TargetMode::EquivalenceClass => match config.redraw {
                        Redraw::PerEpoch => epoch_targets[k].clone(),
                        Redraw::PerStep => {
                            let tour = sample_equivalence_target(&dataset[k].1, &mut rng)?;
                            observe(epoch, k, &tour);
                            tour_to_adjacency(&tour)
                        }
                    },
                };
                let t = rng.random_range(1..=schedule.horizon());
                let x_t = forward_sample(&target, t, &schedule, &mut rng)?;
                items.push((k, x_t, t, target));
            }
            let batch: Vec<Sample<'_, T>> = items
                .iter()
                .map(|(k, x_t, t, target)| Sample {
                    instance: &dataset[*k].0,
                    x_t,
                    t: *t,
                    target,
                })
                .collect();
            let (loss, mut grad) = loss_and_grad(&params, &batch, config.weighting)?;
            if let Some(clip) = config.grad_clip {
                let norm = grad.norm();
                let clip = T::of(clip);
                if norm > clip {
                    for g in grad.values_mut() {
                        *g *= clip / norm;
                    }
                }
            }
            for (v, &g) in velocity.values_mut().iter_mut().zip(grad.values()) {
                *v = mu * *v - lr * g;
            }
            params.axpy(T::one(), &velocity);
            if !params.is_finite() {
                return Err(Error::Data(format!(
                    "training diverged in epoch {epoch}; lower the learning rate"
                )));
            }
            epoch_loss += loss.as_f64() * chunk.len() as f64;
            seen += chunk.len();
        }
        let mean = epoch_loss / seen as f64;
        debug!("epoch {epoch}: loss {mean:.6}");
        loss_curve.push(mean);
    }

    info!(
        "trained {} epochs on {} instances; final loss {:.6}",
        config.epochs,
        dataset.len(),
        loss_curve.last().copied().unwrap_or(f64::NAN)
    );
    let mut config = config.clone();
    config.dataset_size = dataset.len();
    Ok(Checkpoint {
        params,
        config,
        meta: TrainingMeta {
            loss_curve,
            wall_seconds: started.elapsed().as_secs_f64(),
            prior_epochs,
        },
    })
}
