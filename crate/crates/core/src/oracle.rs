//! Exact solvers for small instances. They are the ground truth that every
//! heuristic in the crate is measured against.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tsp::{cycle_length, Instance, Tour};

pub const BRUTE_FORCE_LIMIT: usize = 11;
pub const HELD_KARP_LIMIT: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactMethod {
    BruteForce,
    HeldKarp,
}

impl ExactMethod {
    pub fn name(self) -> &'static str {
        match self {
            ExactMethod::BruteForce => "brute-force",
            ExactMethod::HeldKarp => "held-karp",
        }
    }
}

/// An optimal tour in canonical form together with its length.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactResult<T> {
    pub tour: Tour,
    pub length: T,
    pub method: ExactMethod,
}

/// Enumerates all `(n-1)!/2` distinct cycles.
///
/// City 0 is fixed first and reflections are skipped by requiring the second
/// city to be smaller than the last. Candidates are visited in lexicographic
/// order and only a strictly shorter cycle replaces the incumbent, so ties go
/// to the lexicographically smallest canonical order.
pub fn brute_force<T: Scalar>(instance: &Instance<T>) -> Result<ExactResult<T>> {
    let n = instance.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeLimit {
            what: "brute_force",
            limit: BRUTE_FORCE_LIMIT,
            n,
        });
    }

    struct Search<'a, T> {
        inst: &'a Instance<T>,
        path: Vec<usize>,
        used: Vec<bool>,
        best: T,
        best_path: Vec<usize>,
    }

    impl<T: Scalar> Search<'_, T> {
        fn extend(&mut self, partial: T) {
            let n = self.inst.n();
            let last = *self.path.last().unwrap();
            if self.path.len() == n {
                let total = partial + self.inst.dist(last, 0);
                if total < self.best {
                    self.best = total;
                    self.best_path.clone_from(&self.path);
                }
                return;
            }
            for c in 1..n {
                if self.used[c] {
                    continue;
                }
                // Orientation filter: the final city must exceed the second.
                if self.path.len() == n - 1 && c < self.path[1] {
                    continue;
                }
                let next = partial + self.inst.dist(last, c);
                if next > self.best {
                    continue;
                }
                self.used[c] = true;
                self.path.push(c);
                self.extend(next);
                self.path.pop();
                self.used[c] = false;
            }
        }
    }

    let mut search = Search {
        inst: instance,
        path: Vec::with_capacity(n),
        used: vec![false; n],
        best: T::infinity(),
        best_path: Vec::new(),
    };
    search.used[0] = true;
    search.path.push(0);
    search.extend(T::zero());

    let tour = Tour::from_order_unchecked(search.best_path);
    Ok(ExactResult {
        length: cycle_length(instance, tour.order()),
        tour,
        method: ExactMethod::BruteForce,
    })
}

/// Held-Karp subset dynamic program with city 0 as the fixed start.
///
/// `cost[mask][k]` is the shortest path leaving city 0, visiting exactly the
/// cities of `mask` (bit `b` is city `b + 1`) and ending at city `k + 1`.
pub fn held_karp<T: Scalar>(instance: &Instance<T>) -> Result<ExactResult<T>> {
    let n = instance.n();
    if n > HELD_KARP_LIMIT {
        return Err(Error::SizeLimit {
            what: "held_karp",
            limit: HELD_KARP_LIMIT,
            n,
        });
    }
    let m = n - 1;
    let full = (1usize << m) - 1;
    let mut cost = vec![T::infinity(); (full + 1) * m];
    let mut parent = vec![u8::MAX; (full + 1) * m];

    for k in 0..m {
        cost[(1 << k) * m + k] = instance.dist(0, k + 1);
    }
    for mask in 1..=full {
        for k in 0..m {
            if mask & (1 << k) == 0 {
                continue;
            }
            let rest = mask ^ (1 << k);
            if rest == 0 {
                continue;
            }
            let mut best = T::infinity();
            let mut arg = u8::MAX;
            for p in 0..m {
                if rest & (1 << p) == 0 {
                    continue;
                }
                let c = cost[rest * m + p] + instance.dist(p + 1, k + 1);
                if c < best {
                    best = c;
                    arg = p as u8;
                }
            }
            cost[mask * m + k] = best;
            parent[mask * m + k] = arg;
        }
    }

    let mut best = T::infinity();
    let mut end = 0usize;
    for k in 0..m {
        let c = cost[full * m + k] + instance.dist(k + 1, 0);
        if c < best {
            best = c;
            end = k;
        }
    }

    let mut rev = Vec::with_capacity(n);
    let (mut mask, mut k) = (full, end);
    loop {
        rev.push(k + 1);
        let p = parent[mask * m + k];
        mask ^= 1 << k;
        if p == u8::MAX {
            break;
        }
        k = p as usize;
    }
    rev.push(0);
    rev.reverse();

    let tour = Tour::from_order_unchecked(rev).canonical();
    Ok(ExactResult {
        length: cycle_length(instance, tour.order()),
        tour,
        method: ExactMethod::HeldKarp,
    })
}

/// Exact optimum for any size the oracles support.
pub fn solve_exact<T: Scalar>(instance: &Instance<T>) -> Result<ExactResult<T>> {
    held_karp(instance)
}
