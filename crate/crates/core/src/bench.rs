//! Benchmark harness: methods crossed with instances and repetitions,
//! variance statistics, the checkpoint/inference ablation grid and reference
//! lengths.
//!
//! All randomness comes from one base seed. Cell `(instance k, repetition r)`
//! uses [`derive_seed`]`(seed, k, r)` for every method, so methods are compared
//! on common random numbers.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::denoiser::{Checkpoint, Denoiser};
use crate::error::{Error, Result};
use crate::io::report::{mean, sample_std, BenchRow};
use crate::local_search::two_opt;
use crate::oracle::{held_karp, HELD_KARP_LIMIT};
use crate::scalar::Scalar;
use crate::solver::{solve, ProjectionMode, SolveConfig};
use crate::tsp::{cycle_length, Instance, Tour};

pub const THREADS_ENV: &str = "IDEQ_THREADS";

/// Sizes the global rayon pool from `IDEQ_THREADS` (default: all cores).
/// Calling it after the pool exists has no effect.
pub fn init_thread_pool() {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0);
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of cell `(instance_index, repetition)`.
pub fn derive_seed(base: u64, instance_index: usize, repetition: usize) -> u64 {
    let a = splitmix64(base);
    let b = splitmix64(a ^ instance_index as u64);
    splitmix64(b ^ (repetition as u64).rotate_left(32))
}

/// Shortest tour over `restarts` independent random starts, each improved
/// by 2-opt. Restart `k` draws its start from `derive_seed(seed, 0, k)`.
pub fn best_of_two_opt<T: Scalar>(
    instance: &Instance<T>,
    restarts: usize,
    seed: u64,
) -> Result<(Tour, T)> {
    if restarts == 0 {
        return Err(Error::Config("need at least one restart".into()));
    }
    let results: Vec<(Tour, T)> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, k));
            let start = Tour::random(instance.n(), &mut rng)?;
            let tour = two_opt(instance, &start).canonical();
            let len = cycle_length(instance, tour.order());
            Ok((tour, len))
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (k, r) in results.iter().enumerate() {
        if r.1 < results[best].1 {
            best = k;
        }
    }
    Ok(results.into_iter().nth(best).expect("non-empty"))
}

/// Exact optimum when Held-Karp applies, best-of-restarts 2-opt otherwise.
pub fn reference_tour<T: Scalar>(
    instance: &Instance<T>,
    restarts: usize,
    seed: u64,
) -> Result<(Tour, T)> {
    if instance.n() <= HELD_KARP_LIMIT {
        let r = held_karp(instance)?;
        Ok((r.tour, r.length))
    } else {
        best_of_two_opt(instance, restarts, seed)
    }
}

/// Training labels for a dataset, exact where possible.
pub fn label_instances<T: Scalar>(
    instances: Vec<Instance<T>>,
    restarts: usize,
    seed: u64,
) -> Result<Vec<(Instance<T>, Tour)>> {
    instances
        .into_iter()
        .enumerate()
        .map(|(k, inst)| {
            let (tour, _) = reference_tour(&inst, restarts, derive_seed(seed, k, usize::MAX))?;
            Ok((inst, tour))
        })
        .collect()
}

#[derive(Clone)]
pub enum MethodKind<T> {
    /// Uniformly random tour followed by 2-opt.
    TwoOptFromRandom,
    Solver {
        denoiser: Arc<dyn Denoiser<T> + Send + Sync>,
        config: SolveConfig,
    },
}

#[derive(Clone)]
pub struct Method<T> {
    pub name: String,
    pub kind: MethodKind<T>,
}

impl<T: Scalar> Method<T> {
    pub fn two_opt_from_random() -> Self {
        Self {
            name: "two-opt-random".into(),
            kind: MethodKind::TwoOptFromRandom,
        }
    }

    pub fn solver(
        name: impl Into<String>,
        denoiser: Arc<dyn Denoiser<T> + Send + Sync>,
        config: SolveConfig,
    ) -> Self {
        Self {
            name: name.into(),
            kind: MethodKind::Solver { denoiser, config },
        }
    }

    /// Runs the method once and returns the tour length.
    pub fn run(&self, instance: &Instance<T>, seed: u64) -> Result<T> {
        match &self.kind {
            MethodKind::TwoOptFromRandom => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let start = Tour::random(instance.n(), &mut rng)?;
                let tour = two_opt(instance, &start).canonical();
                Ok(cycle_length(instance, tour.order()))
            }
            MethodKind::Solver { denoiser, config } => {
                let config = SolveConfig {
                    seed,
                    ..config.clone()
                };
                Ok(solve(instance, denoiser.as_ref(), &config)?.length)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchInstance<T> {
    pub instance: Instance<T>,
    pub reference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceEntry {
    pub method: String,
    pub instance: String,
    pub repetitions: usize,
    pub mean_gap_pct: f64,
    pub std_gap_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct VarianceReport {
    pub entries: Vec<VarianceEntry>,
    /// Per method: mean over instances of the per-instance std dev.
    pub pooled_std_gap_pct: BTreeMap<String, f64>,
}

impl VarianceReport {
    /// Groups rows by (method, instance); rows without a gap are skipped.
    pub fn from_rows(rows: &[BenchRow]) -> Self {
        let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
        for r in rows {
            if let Some(g) = r.gap_pct() {
                groups
                    .entry((r.method.clone(), r.instance.clone()))
                    .or_default()
                    .push(g);
            }
        }
        let entries: Vec<VarianceEntry> = groups
            .into_iter()
            .map(|((method, instance), gaps)| VarianceEntry {
                method,
                instance,
                repetitions: gaps.len(),
                mean_gap_pct: mean(&gaps).unwrap_or(0.0),
                std_gap_pct: sample_std(&gaps).unwrap_or(0.0),
            })
            .collect();
        let mut per_method: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for e in &entries {
            per_method.entry(e.method.clone()).or_default().push(e.std_gap_pct);
        }
        let pooled_std_gap_pct = per_method
            .into_iter()
            .map(|(m, s)| (m, mean(&s).unwrap_or(0.0)))
            .collect();
        Self {
            entries,
            pooled_std_gap_pct,
        }
    }

    /// Per-instance std devs of one method, keyed by instance.
    pub fn stds(&self, method: &str) -> BTreeMap<&str, f64> {
        self.entries
            .iter()
            .filter(|e| e.method == method)
            .map(|e| (e.instance.as_str(), e.std_gap_pct))
            .collect()
    }
}

/// Runs every method on every instance `repetitions` times.
///
/// Cells run in parallel; rows come back in (instance, method, repetition)
/// order regardless of completion order. `timings` controls whether wall
/// time is recorded, since it is the one non-reproducible column.
pub fn run_benchmark<T: Scalar>(
    instances: &[BenchInstance<T>],
    methods: &[Method<T>],
    repetitions: usize,
    seed: u64,
    timings: bool,
) -> Result<(Vec<BenchRow>, VarianceReport)> {
    if repetitions == 0 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    if methods.is_empty() {
        return Err(Error::Config("no methods to benchmark".into()));
    }
    for b in instances.iter().filter(|b| b.reference.is_none()) {
        warn!("no reference length for {}; its gaps stay empty", b.instance.id());
    }
    let cells: Vec<(usize, usize, usize)> = (0..instances.len())
        .flat_map(|k| {
            (0..methods.len()).flat_map(move |m| (0..repetitions).map(move |r| (k, m, r)))
        })
        .collect();
    info!(
        "benchmark: {} instances x {} methods x {} repetitions",
        instances.len(),
        methods.len(),
        repetitions
    );
    let rows: Vec<BenchRow> = cells
        .par_iter()
        .map(|&(k, m, r)| {
            let b = &instances[k];
            let seed = derive_seed(seed, k, r);
            let started = Instant::now();
            let length = methods[m].run(&b.instance, seed)?;
            let seconds = timings.then(|| started.elapsed().as_secs_f64());
            Ok(BenchRow::new(
                b.instance.id(),
                b.instance.n(),
                methods[m].name.clone(),
                length.as_f64(),
                b.reference,
                seconds,
                seed,
            ))
        })
        .collect::<Result<_>>()?;
    let report = VarianceReport::from_rows(&rows);
    Ok((rows, report))
}

pub const ABLATION_PRIMARY: [&str; 4] = ["dirac+ideq", "dirac+t2tco", "equiv+ideq", "equiv+t2tco"];
pub const ABLATION_EXTRA: [&str; 2] = ["dirac+difusco", "equiv+difusco"];

/// The ablation methods: {Dirac, equivalence-class} checkpoint crossed with
/// {IDEQ projection, DecodeOnly with a final 2-opt}, plus thresholded
/// (None-mode) rows for both checkpoints.
pub fn ablation_methods<T: Scalar>(
    dirac: Option<Arc<Checkpoint<T>>>,
    equivalence: Option<Arc<Checkpoint<T>>>,
    base: &SolveConfig,
) -> Result<Vec<Method<T>>> {
    let dirac = dirac.ok_or_else(|| Error::Config("ablation needs a Dirac checkpoint".into()))?;
    let equiv = equivalence
        .ok_or_else(|| Error::Config("ablation needs an equivalence-class checkpoint".into()))?;
    let ideq = SolveConfig {
        projection: ProjectionMode::Ideq,
        ..base.clone()
    };
    let t2tco = SolveConfig {
        projection: ProjectionMode::DecodeOnly,
        final_two_opt: true,
        ..base.clone()
    };
    let difusco = SolveConfig {
        projection: ProjectionMode::None,
        final_two_opt: false,
        ..base.clone()
    };
    let mut out = Vec::new();
    for (tag, ck) in [("dirac", &dirac), ("equiv", &equiv)] {
        let d: Arc<dyn Denoiser<T> + Send + Sync> = ck.clone();
        out.push(Method::solver(format!("{tag}+ideq"), d.clone(), ideq.clone()));
        out.push(Method::solver(format!("{tag}+t2tco"), d, t2tco.clone()));
    }
    for (tag, ck) in [("dirac", &dirac), ("equiv", &equiv)] {
        let d: Arc<dyn Denoiser<T> + Send + Sync> = ck.clone();
        out.push(Method::solver(format!("{tag}+difusco"), d, difusco.clone()));
    }
    Ok(out)
}

pub fn run_ablation<T: Scalar>(
    instances: &[BenchInstance<T>],
    dirac: Option<Arc<Checkpoint<T>>>,
    equivalence: Option<Arc<Checkpoint<T>>>,
    base: &SolveConfig,
    repetitions: usize,
    seed: u64,
    timings: bool,
) -> Result<(Vec<BenchRow>, VarianceReport)> {
    let methods = ablation_methods(dirac, equivalence, base)?;
    run_benchmark(instances, &methods, repetitions, seed, timings)
}

/// One-sided sign test of "candidate beats baseline".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// `P(X >= wins)` for `X ~ Binomial(wins + losses, 1/2)`.
    pub p_value: f64,
}

/// Compares paired values where smaller is better; ties (within `tol`) are
/// dropped.
pub fn sign_test(candidate: &[f64], baseline: &[f64], tol: f64) -> Result<SignTest> {
    if candidate.len() != baseline.len() {
        return Err(Error::Dimension {
            expected: baseline.len(),
            found: candidate.len(),
        });
    }
    let (mut wins, mut losses, mut ties) = (0, 0, 0);
    for (&c, &b) in candidate.iter().zip(baseline) {
        if (c - b).abs() <= tol {
            ties += 1;
        } else if c < b {
            wins += 1;
        } else {
            losses += 1;
        }
    }
    Ok(SignTest {
        wins,
        losses,
        ties,
        p_value: binomial_upper_tail(wins + losses, wins),
    })
}

/// `P(X >= k)` for `X ~ Binomial(n, 1/2)`, summed in log space.
pub fn binomial_upper_tail(n: usize, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let ln_half_n = -(n as f64) * std::f64::consts::LN_2;
    let mut ln_choose = 0.0f64; // ln C(n, 0)
    let mut total = 0.0;
    for i in 0..=n {
        if i >= k {
            total += (ln_choose + ln_half_n).exp();
        }
        ln_choose += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    total.min(1.0)
}
