//! Inference: Hamiltonian reconstruction, the projected backward process and
//! partial re-noise/denoise refinement.

use std::cmp::Ordering;
use std::time::Instant;

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::denoiser::Denoiser;
use crate::diffusion::{
    forward_sample, init_noise, posterior_probs_between, posterior_sample, DiffusionSchedule,
    ScheduleConfig,
};
use crate::error::{Error, Result};
use crate::field::EdgeField;
use crate::local_search::two_opt;
use crate::scalar::Scalar;
use crate::tsp::{cycle_length, tour_to_adjacency, walk_cycle, Instance, Tour};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionMode {
    /// Decode with `H`, then 2-opt, at every step.
    #[default]
    Ideq,
    /// Decode with `H` only.
    DecodeOnly,
    /// Threshold the raw field at 0.5; no Hamiltonian guarantee.
    None,
}

impl ProjectionMode {
    pub fn name(self) -> &'static str {
        match self {
            ProjectionMode::Ideq => "ideq",
            ProjectionMode::DecodeOnly => "decode-only",
            ProjectionMode::None => "none",
        }
    }
}

impl std::str::FromStr for ProjectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideq" => Ok(ProjectionMode::Ideq),
            "decode-only" => Ok(ProjectionMode::DecodeOnly),
            "none" => Ok(ProjectionMode::None),
            other => Err(Error::Config(format!("unknown projection mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub schedule: ScheduleConfig,
    pub refinement_rounds: usize,
    /// Refinement re-noises to `round(alpha * T)`.
    pub renoise_fraction: f64,
    pub samples: usize,
    pub projection: ProjectionMode,
    /// Apply 2-opt to the final candidate even outside IDEQ mode.
    pub final_two_opt: bool,
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            schedule: ScheduleConfig::default(),
            refinement_rounds: 3,
            renoise_fraction: 0.15,
            samples: 1,
            projection: ProjectionMode::Ideq,
            final_two_opt: false,
            seed: 0,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        if !(self.renoise_fraction > 0.0 && self.renoise_fraction < 1.0) {
            return Err(Error::Config(format!(
                "renoise fraction {} outside (0, 1)",
                self.renoise_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<T> {
    pub tour: Tour,
    pub length: T,
    /// Best length after the initial pass, then after each refinement round.
    pub round_lengths: Vec<T>,
    pub seconds: f64,
    pub seed: u64,
    /// Replica that produced the returned tour.
    pub replica: usize,
}

/// Greedy edge insertion.
///
/// Pairs are scanned by score descending, then distance ascending, then
/// `(i, j)` ascending. An edge is taken when both endpoints still have degree
/// below 2 and it joins two different fragments, or when it closes the final
/// Hamiltonian path. On a complete graph the scan always leaves a single path,
/// which is closed afterwards if needed.
pub fn reconstruct_hamiltonian<T: Scalar>(
    instance: &Instance<T>,
    heatmap: &EdgeField<T>,
) -> Result<Tour> {
    let n = instance.n();
    if heatmap.n() != n {
        return Err(Error::Dimension {
            expected: n,
            found: heatmap.n(),
        });
    }
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    pairs.sort_by(|&(a, b), &(c, d)| {
        let (sa, sc) = (heatmap.get(a, b), heatmap.get(c, d));
        sc.partial_cmp(&sa)
            .unwrap_or(Ordering::Equal)
            .then_with(|| {
                instance
                    .dist(a, b)
                    .partial_cmp(&instance.dist(c, d))
                    .unwrap_or(Ordering::Equal)
            })
            .then_with(|| (a, b).cmp(&(c, d)))
    });

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut degree = vec![0u8; n];
    let mut nbrs = vec![Vec::with_capacity(2); n];
    let mut edges = 0;
    for (i, j) in pairs {
        if edges == n {
            break;
        }
        if degree[i] >= 2 || degree[j] >= 2 {
            continue;
        }
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri == rj && edges != n - 1 {
            continue;
        }
        parent[ri] = rj;
        degree[i] += 1;
        degree[j] += 1;
        nbrs[i].push(j);
        nbrs[j].push(i);
        edges += 1;
    }
    if edges == n - 1 {
        let ends: Vec<usize> = (0..n).filter(|&v| degree[v] < 2).collect();
        debug_assert_eq!(ends.len(), 2);
        nbrs[ends[0]].push(ends[1]);
        nbrs[ends[1]].push(ends[0]);
    }
    Tour::new(walk_cycle(&nbrs)).map(|t| t.canonical())
}

/// Projected clean-state estimate: IDEQ decodes and applies 2-opt,
/// DecodeOnly only decodes, None thresholds at 0.5.
pub fn project_x0<T: Scalar>(
    instance: &Instance<T>,
    soft_x0: &EdgeField<T>,
    mode: ProjectionMode,
) -> Result<EdgeField<T>> {
    match mode {
        ProjectionMode::None => {
            if soft_x0.n() != instance.n() {
                return Err(Error::Dimension {
                    expected: instance.n(),
                    found: soft_x0.n(),
                });
            }
            Ok(soft_x0.threshold(T::of(0.5)))
        }
        _ => Ok(tour_to_adjacency(&project_tour(instance, soft_x0, mode, false)?)),
    }
}

fn project_tour<T: Scalar>(
    instance: &Instance<T>,
    soft_x0: &EdgeField<T>,
    mode: ProjectionMode,
    force_two_opt: bool,
) -> Result<Tour> {
    let tour = reconstruct_hamiltonian(instance, soft_x0)?;
    if mode == ProjectionMode::Ideq || force_two_opt {
        Ok(two_opt(instance, &tour).canonical())
    } else {
        Ok(tour)
    }
}

struct Run<'a, T, D: ?Sized> {
    instance: &'a Instance<T>,
    denoiser: &'a D,
    schedule: &'a DiffusionSchedule<T>,
    config: &'a SolveConfig,
}

impl<T: Scalar, D: Denoiser<T> + ?Sized> Run<'_, T, D> {
    /// Denoises `x` down `steps` and returns the projected final candidate.
    fn descend(&self, mut x: EdgeField<T>, steps: &[usize], rng: &mut ChaCha8Rng) -> Result<Tour> {
        let mode = self.config.projection;
        for (k, &t) in steps.iter().enumerate() {
            let soft = self.denoiser.denoise(self.instance, &x, t)?;
            match steps.get(k + 1) {
                Some(&s) => {
                    let x0_hat = project_x0(self.instance, &soft, mode)?;
                    let post = posterior_probs_between(&x, &x0_hat, t, s, self.schedule)?;
                    x = posterior_sample(&post, rng);
                }
                None => {
                    return project_tour(self.instance, &soft, mode, self.config.final_two_opt)
                }
            }
        }
        Err(Error::Config("empty inference schedule".into()))
    }

    fn replica(&self, seed: u64) -> Result<(Tour, T, Vec<T>)> {
        let n = self.instance.n();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x_t = init_noise(n, &mut rng)?;
        let mut best = self.descend(x_t, self.schedule.inference_steps(), &mut rng)?;
        let mut best_len = cycle_length(self.instance, best.order());
        let mut rounds = vec![best_len];

        let horizon = self.schedule.horizon();
        let t_r = ((self.config.renoise_fraction * horizon as f64).round() as usize).clamp(1, horizon);
        let mut steps = vec![t_r];
        steps.extend(self.schedule.inference_steps().iter().filter(|&&s| s < t_r));
        for round in 0..self.config.refinement_rounds {
            let x = forward_sample(&tour_to_adjacency(&best), t_r, self.schedule, &mut rng)?;
            let cand = self.descend(x, &steps, &mut rng)?;
            let len = cycle_length(self.instance, cand.order());
            if len < best_len {
                debug!("refinement round {round}: {best_len} -> {len}");
                best = cand;
                best_len = len;
            }
            rounds.push(best_len);
        }
        Ok((best, best_len, rounds))
    }
}

/// Runs the projected backward process from pure noise, then the refinement
/// rounds. With `samples > 1`, replica `r` uses seed `seed + r` and the
/// shortest tour wins (lowest replica on ties).
pub fn solve<T: Scalar, D: Denoiser<T> + ?Sized>(
    instance: &Instance<T>,
    denoiser: &D,
    config: &SolveConfig,
) -> Result<SolveResult<T>> {
    let started = Instant::now();
    let n = instance.n();
    if n < 5 {
        return Err(Error::InvalidSize {
            n,
            reason: "solve needs at least 5 cities",
        });
    }
    config.validate()?;
    let schedule = config.schedule.build::<T>()?;
    if let Some(h) = denoiser.horizon() {
        if h != schedule.horizon() {
            return Err(Error::Config(format!(
                "denoiser trained for horizon {h}, schedule has {}",
                schedule.horizon()
            )));
        }
    }
    let run = Run {
        instance,
        denoiser,
        schedule: &schedule,
        config,
    };
    let seeds: Vec<u64> = (0..config.samples as u64)
        .map(|r| config.seed.wrapping_add(r))
        .collect();
    let results: Vec<(Tour, T, Vec<T>)> = if seeds.len() == 1 {
        vec![run.replica(seeds[0])?]
    } else {
        seeds
            .par_iter()
            .map(|&s| run.replica(s))
            .collect::<Result<_>>()?
    };
    let mut best = 0;
    for (r, res) in results.iter().enumerate() {
        if res.1 < results[best].1 {
            best = r;
        }
    }
    let (tour, length, round_lengths) = results.into_iter().nth(best).expect("at least one replica");
    Ok(SolveResult {
        tour,
        length,
        round_lengths,
        seconds: started.elapsed().as_secs_f64(),
        seed: config.seed,
        replica: best,
    })
}
