//! Two-state categorical diffusion over undirected edge variables.
//!
//! Every edge flips toward the uniform distribution over `{0, 1}`. The step
//! kernel is `Q_t = (1 - beta_t) I + beta_t U` with `U` the 2x2 matrix of
//! halves, so the cumulative kernel keeps the closed form
//! `Qbar_t = abar_t I + (1 - abar_t) U` where `abar_t = prod_{s<=t} (1 - beta_s)`.
//! The stationary law is `Cat(1/2)`, which is where sampling starts.
//!
//! Timesteps are 1-based: `t` ranges over `1..=horizon`, and `abar_0 = 1`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{EdgeField, FieldKind};
use crate::scalar::Scalar;

pub type Kernel<T> = [[T; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    #[default]
    Linear,
    Cosine,
}

/// Serializable description of a schedule; [`ScheduleConfig::build`] turns it
/// into a [`DiffusionSchedule`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub horizon: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub inference_steps: usize,
    #[serde(default)]
    pub kind: ScheduleKind,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            horizon: 1000,
            beta_min: 1e-4,
            beta_max: 0.02,
            inference_steps: 20,
            kind: ScheduleKind::Linear,
        }
    }
}

impl ScheduleConfig {
    pub fn build<T: Scalar>(&self) -> Result<DiffusionSchedule<T>> {
        match self.kind {
            ScheduleKind::Linear => make_schedule(
                self.horizon,
                T::of(self.beta_min),
                T::of(self.beta_max),
                self.inference_steps,
            ),
            ScheduleKind::Cosine => {
                make_cosine_schedule(self.horizon, T::of(self.beta_max), self.inference_steps)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule<T> {
    betas: Vec<T>,
    /// `alpha_bar[t]` for `t in 0..=horizon`, with `alpha_bar[0] = 1`.
    alpha_bar: Vec<T>,
    inference_steps: Vec<usize>,
}

fn check_inference(horizon: usize, n_inference: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::Config("schedule horizon must be at least 1".into()));
    }
    if n_inference == 0 || n_inference > horizon {
        return Err(Error::Config(format!(
            "inference step count {n_inference} must lie in 1..={horizon}"
        )));
    }
    Ok(())
}

/// `m` timesteps evenly spaced from `horizon` down to 1.
fn spaced_steps(horizon: usize, m: usize) -> Vec<usize> {
    if m == 1 {
        return vec![horizon];
    }
    let span = (horizon - 1) as f64;
    (0..m)
        .map(|k| horizon - (k as f64 * span / (m - 1) as f64).round() as usize)
        .collect()
}

impl<T: Scalar> DiffusionSchedule<T> {
    /// Schedule from explicit per-step betas.
    pub fn from_betas(betas: Vec<T>, n_inference: usize) -> Result<Self> {
        let horizon = betas.len();
        check_inference(horizon, n_inference)?;
        if let Some(b) = betas.iter().find(|&&b| !(b > T::zero() && b < T::one())) {
            return Err(Error::Config(format!("beta {b} outside (0, 1)")));
        }
        let mut alpha_bar = Vec::with_capacity(horizon + 1);
        alpha_bar.push(T::one());
        let mut acc = T::one();
        for &b in &betas {
            acc *= T::one() - b;
            alpha_bar.push(acc);
        }
        Ok(Self {
            betas,
            alpha_bar,
            inference_steps: spaced_steps(horizon, n_inference),
        })
    }

    pub fn horizon(&self) -> usize {
        self.betas.len()
    }

    pub fn beta(&self, t: usize) -> T {
        self.betas[t - 1]
    }

    pub fn betas(&self) -> &[T] {
        &self.betas
    }

    /// `alpha_bar(0) == 1`.
    pub fn alpha_bar(&self, t: usize) -> T {
        self.alpha_bar[t]
    }

    /// Strictly decreasing timesteps, first is the horizon, last is at least 1.
    pub fn inference_steps(&self) -> &[usize] {
        &self.inference_steps
    }

    pub fn check_timestep(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.horizon() {
            Err(Error::Timestep {
                t,
                horizon: self.horizon(),
            })
        } else {
            Ok(())
        }
    }

    /// One-step kernel `Q_t` as a row-stochastic matrix.
    pub fn q_step(&self, t: usize) -> Kernel<T> {
        uniform_kernel(T::one() - self.beta(t))
    }

    /// Cumulative kernel `Qbar_t`; `Qbar_0` is the identity.
    pub fn q_bar(&self, t: usize) -> Kernel<T> {
        uniform_kernel(self.alpha_bar(t))
    }

    /// Probability that an edge keeps its clean state after `t` steps.
    pub fn keep_prob(&self, t: usize) -> T {
        let half = T::of(0.5);
        half + half * self.alpha_bar(t)
    }
}

/// `a I + (1 - a) U`.
fn uniform_kernel<T: Scalar>(a: T) -> Kernel<T> {
    let half = T::of(0.5);
    let stay = half + half * a;
    let flip = half - half * a;
    [[stay, flip], [flip, stay]]
}

/// Linear betas from `beta_min` (at `t = 1`) to `beta_max` (at `t = horizon`)
/// and `n_inference` evenly spaced inference timesteps.
pub fn make_schedule<T: Scalar>(
    horizon: usize,
    beta_min: T,
    beta_max: T,
    n_inference: usize,
) -> Result<DiffusionSchedule<T>> {
    check_inference(horizon, n_inference)?;
    if !(beta_min > T::zero() && beta_min <= beta_max && beta_max < T::one()) {
        return Err(Error::Config(format!(
            "need 0 < beta_min <= beta_max < 1, got {beta_min}, {beta_max}"
        )));
    }
    let betas = (0..horizon)
        .map(|k| {
            if horizon == 1 {
                beta_min
            } else {
                beta_min + (beta_max - beta_min) * T::of_usize(k) / T::of_usize(horizon - 1)
            }
        })
        .collect();
    DiffusionSchedule::from_betas(betas, n_inference)
}

/// Cosine `alpha_bar` profile; betas are clipped to `beta_cap`.
pub fn make_cosine_schedule<T: Scalar>(
    horizon: usize,
    beta_cap: T,
    n_inference: usize,
) -> Result<DiffusionSchedule<T>> {
    check_inference(horizon, n_inference)?;
    if !(beta_cap > T::zero() && beta_cap < T::one()) {
        return Err(Error::Config(format!("beta cap {beta_cap} outside (0, 1)")));
    }
    let s = T::of(0.008);
    let f = |t: usize| {
        let x = (T::of_usize(t) / T::of_usize(horizon) + s) / (T::one() + s) * T::FRAC_PI_2();
        x.cos().powi(2)
    };
    let floor = T::of(1e-8);
    let betas = (1..=horizon)
        .map(|t| (T::one() - f(t) / f(t - 1)).max(floor).min(beta_cap))
        .collect();
    DiffusionSchedule::from_betas(betas, n_inference)
}

fn require_binary<T: Scalar>(field: &EdgeField<T>, what: &str) -> Result<()> {
    if field.kind() != FieldKind::Binary {
        return Err(Error::Domain(format!("{what} must be a binary field")));
    }
    Ok(())
}

fn require_same_n<T: Scalar>(a: &EdgeField<T>, b: &EdgeField<T>) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::Dimension {
            expected: a.n(),
            found: b.n(),
        });
    }
    Ok(())
}

/// Samples each undirected edge once: state 1 with probability `p(i, j)`.
fn bernoulli_field<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
    mut p: impl FnMut(usize, usize) -> T,
) -> EdgeField<T> {
    EdgeField::from_pairs(n, FieldKind::Binary, |i, j| {
        let u: f64 = rng.random();
        if T::of(u) < p(i, j) {
            T::one()
        } else {
            T::zero()
        }
    })
}

/// Draws `x_t ~ q(x_t | x_0)`: each edge keeps its state with probability
/// `(1 + abar_t) / 2`.
pub fn forward_sample<T: Scalar, R: Rng + ?Sized>(
    x0: &EdgeField<T>,
    t: usize,
    schedule: &DiffusionSchedule<T>,
    rng: &mut R,
) -> Result<EdgeField<T>> {
    require_binary(x0, "x0")?;
    schedule.check_timestep(t)?;
    let keep = schedule.keep_prob(t);
    let flip = T::one() - keep;
    Ok(bernoulli_field(x0.n(), rng, |i, j| {
        if x0.get(i, j) == T::one() {
            keep
        } else {
            flip
        }
    }))
}

/// One forward transition `x_t ~ q(x_t | x_{t-1})`.
pub fn forward_step<T: Scalar, R: Rng + ?Sized>(
    x_prev: &EdgeField<T>,
    t: usize,
    schedule: &DiffusionSchedule<T>,
    rng: &mut R,
) -> Result<EdgeField<T>> {
    require_binary(x_prev, "x_prev")?;
    schedule.check_timestep(t)?;
    let [[stay, flip], _] = schedule.q_step(t);
    Ok(bernoulli_field(x_prev.n(), rng, |i, j| {
        if x_prev.get(i, j) == T::one() {
            stay
        } else {
            flip
        }
    }))
}

/// `P(x_s = 1 | x_t = state, x_0 = p0)` for one edge, `s < t`.
///
/// `p0` is read as the row vector `[1 - p0, p0]`, so a binary clean state
/// reproduces the textbook posterior and a soft one mixes it linearly.
pub fn edge_posterior<T: Scalar>(
    state: T,
    p0: T,
    t: usize,
    s: usize,
    schedule: &DiffusionSchedule<T>,
) -> T {
    let half = T::of(0.5);
    // Transition from s to t has keep ratio abar_t / abar_s.
    let ratio = schedule.alpha_bar(t) / schedule.alpha_bar(s);
    let step = uniform_kernel(ratio);
    let qs = schedule.q_bar(s);
    let qt = schedule.q_bar(t);
    let xt = if state > half { 1 } else { 0 };
    let x0 = [T::one() - p0, p0];

    // numerator_k = Q_{s->t}[k, x_t] * (x0 Qbar_s)[k]
    let prior = |k: usize| x0[0] * qs[0][k] + x0[1] * qs[1][k];
    let num1 = step[1][xt] * prior(1);
    let den = x0[0] * qt[0][xt] + x0[1] * qt[1][xt];
    num1 / den
}

/// Per-edge `q(x_{t-1} = 1 | x_t, x_0)` for `t in 1..=horizon`.
pub fn posterior_probs<T: Scalar>(
    x_t: &EdgeField<T>,
    x0_hat: &EdgeField<T>,
    t: usize,
    schedule: &DiffusionSchedule<T>,
) -> Result<EdgeField<T>> {
    schedule.check_timestep(t)?;
    posterior_probs_between(x_t, x0_hat, t, t - 1, schedule)
}

/// Posterior for a jump from `t` down to any earlier `s`, as used by strided
/// inference schedules.
pub fn posterior_probs_between<T: Scalar>(
    x_t: &EdgeField<T>,
    x0_hat: &EdgeField<T>,
    t: usize,
    s: usize,
    schedule: &DiffusionSchedule<T>,
) -> Result<EdgeField<T>> {
    require_binary(x_t, "x_t")?;
    require_same_n(x_t, x0_hat)?;
    schedule.check_timestep(t)?;
    if s >= t {
        return Err(Error::Timestep {
            t: s,
            horizon: t - 1,
        });
    }
    let zero = T::zero();
    let one = T::one();
    let probs = EdgeField::from_pairs(x_t.n(), FieldKind::Soft, |i, j| {
        edge_posterior(x_t.get(i, j), x0_hat.get(i, j), t, s, schedule)
            .max(zero)
            .min(one)
    });
    Ok(probs)
}

/// Independent Bernoulli draw per unordered pair.
pub fn posterior_sample<T: Scalar, R: Rng + ?Sized>(
    posterior: &EdgeField<T>,
    rng: &mut R,
) -> EdgeField<T> {
    bernoulli_field(posterior.n(), rng, |i, j| posterior.get(i, j))
}

/// `x_T ~ Cat(1/2)` on every edge.
pub fn init_noise<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<EdgeField<T>> {
    if n < 3 {
        return Err(Error::InvalidSize {
            n,
            reason: "noise fields need at least 3 cities",
        });
    }
    let half = T::of(0.5);
    Ok(bernoulli_field(n, rng, |_, _| half))
}
