//! The 2-change move, best-improvement 2-opt and the two-move sampler used to
//! draw training targets from a tour's 2-opt equivalence class.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tsp::{Instance, Tour};

/// Removes edges `(order[i], order[i+1])` and `(order[j], order[j+1 mod n])`
/// and reconnects by reversing `order[i+1..=j]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TwoChangeMove {
    i: usize,
    j: usize,
}

impl TwoChangeMove {
    /// The removed edges must be distinct and non-adjacent.
    pub fn new(i: usize, j: usize, n: usize) -> Result<Self> {
        if i < j && j < n && j >= i + 2 && !(i == 0 && j == n - 1) {
            Ok(Self { i, j })
        } else {
            Err(Error::InvalidMove { i, j, n })
        }
    }

    pub fn i(&self) -> usize {
        self.i
    }

    pub fn j(&self) -> usize {
        self.j
    }

    /// Number of valid moves on an `n`-city tour: `n(n-3)/2`.
    pub fn count(n: usize) -> usize {
        if n < 4 {
            0
        } else {
            n * (n - 3) / 2
        }
    }

    /// All valid moves in `(i, j)` lexicographic order.
    pub fn all(n: usize) -> impl Iterator<Item = TwoChangeMove> {
        (0..n).flat_map(move |i| {
            let hi = if i == 0 { n.saturating_sub(1) } else { n };
            ((i + 2)..hi).map(move |j| TwoChangeMove { i, j })
        })
    }

    /// The `k`-th move of [`TwoChangeMove::all`].
    pub fn nth(n: usize, mut k: usize) -> Option<TwoChangeMove> {
        for i in 0..n {
            let hi = if i == 0 { n.saturating_sub(1) } else { n };
            let row = hi.saturating_sub(i + 2);
            if k < row {
                return Some(TwoChangeMove { i, j: i + 2 + k });
            }
            k -= row;
        }
        None
    }

    /// Length change the move would cause on `tour`.
    #[inline]
    pub fn delta<T: Scalar>(&self, instance: &Instance<T>, tour: &Tour) -> T {
        delta(instance, tour.order(), self.i, self.j)
    }
}

#[inline]
fn delta<T: Scalar>(instance: &Instance<T>, order: &[usize], i: usize, j: usize) -> T {
    let n = order.len();
    let (a, b) = (order[i], order[i + 1]);
    let (c, d) = (order[j], order[(j + 1) % n]);
    instance.dist(a, c) + instance.dist(b, d) - instance.dist(a, b) - instance.dist(c, d)
}

pub fn apply_two_change(tour: &Tour, mv: TwoChangeMove) -> Result<Tour> {
    let n = tour.n();
    // Re-validate: a move built for a different tour size is not valid here.
    let mv = TwoChangeMove::new(mv.i, mv.j, n)?;
    let mut order = tour.order().to_vec();
    order[mv.i + 1..=mv.j].reverse();
    Ok(Tour::from_order_unchecked(order))
}

/// Best-improving valid move, ties to the smallest `(i, j)`. `None` when no
/// move shortens the tour by more than the improvement tolerance.
fn best_move<T: Scalar>(instance: &Instance<T>, order: &[usize]) -> Option<(usize, usize)> {
    let n = order.len();
    let mut best = -T::IMPROVEMENT_TOL;
    let mut arg = None;
    for i in 0..n.saturating_sub(2) {
        let hi = if i == 0 { n - 1 } else { n };
        for j in (i + 2)..hi {
            let d = delta(instance, order, i, j);
            if d < best {
                best = d;
                arg = Some((i, j));
            }
        }
    }
    arg
}

/// Iterated best-improvement 2-opt. Also returns the number of moves applied.
pub fn two_opt_counted<T: Scalar>(instance: &Instance<T>, tour: &Tour) -> (Tour, usize) {
    let mut order = tour.order().to_vec();
    let mut steps = 0;
    while let Some((i, j)) = best_move(instance, &order) {
        order[i + 1..=j].reverse();
        steps += 1;
    }
    (Tour::from_order_unchecked(order), steps)
}

/// The 2-opt operator: repeatedly applies the 2-change that most decreases
/// the tour length until none does. The result is a fixed point.
pub fn two_opt<T: Scalar>(instance: &Instance<T>, tour: &Tour) -> Tour {
    two_opt_counted(instance, tour).0
}

pub fn is_two_opt_fixed_point<T: Scalar>(instance: &Instance<T>, tour: &Tour) -> bool {
    best_move(instance, tour.order()).is_none()
}

/// Uniformly random valid move for an `n`-city tour.
pub fn random_move<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<TwoChangeMove> {
    let count = TwoChangeMove::count(n);
    if count == 0 {
        return Err(Error::InvalidSize {
            n,
            reason: "a 2-change needs at least 4 cities",
        });
    }
    Ok(TwoChangeMove::nth(n, rng.random_range(0..count)).expect("index below move count"))
}

/// Applies two independent uniformly random 2-changes in sequence and returns
/// the resulting tour with the moves, in application order.
pub fn sample_equivalence_target_with_moves<R: Rng + ?Sized>(
    tour: &Tour,
    rng: &mut R,
) -> Result<(Tour, [TwoChangeMove; 2])> {
    let n = tour.n();
    if n < 5 {
        return Err(Error::InvalidSize {
            n,
            reason: "equivalence-class sampling needs at least 5 cities",
        });
    }
    let first = random_move(n, rng)?;
    let mid = apply_two_change(tour, first)?;
    let second = random_move(n, rng)?;
    Ok((apply_two_change(&mid, second)?, [first, second]))
}

/// A random member of the tour's equivalence class, drawn with two random
/// 2-changes.
pub fn sample_equivalence_target<R: Rng + ?Sized>(tour: &Tour, rng: &mut R) -> Result<Tour> {
    sample_equivalence_target_with_moves(tour, rng).map(|(t, _)| t)
}

fn orient<T: Scalar>(p: [T; 2], q: [T; 2], r: [T; 2]) -> T {
    (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
}

/// Segments `pq` and `rs` cross at a single interior point.
pub fn segments_cross<T: Scalar>(p: [T; 2], q: [T; 2], r: [T; 2], s: [T; 2]) -> bool {
    let d1 = orient(p, q, r);
    let d2 = orient(p, q, s);
    let d3 = orient(r, s, p);
    let d4 = orient(r, s, q);
    let z = T::zero();
    ((d1 > z && d2 < z) || (d1 < z && d2 > z)) && ((d3 > z && d4 < z) || (d3 < z && d4 > z))
}

/// Pairs of tour positions whose edges properly cross.
pub fn crossing_edges<T: Scalar>(instance: &Instance<T>, tour: &Tour) -> Vec<(usize, usize)> {
    let n = tour.n();
    let o = tour.order();
    let c = instance.coords();
    let mut out = Vec::new();
    for a in 0..n {
        for b in (a + 2)..n {
            if a == 0 && b == n - 1 {
                continue;
            }
            if segments_cross(c[o[a]], c[o[a + 1]], c[o[b]], c[o[(b + 1) % n]]) {
                out.push((a, b));
            }
        }
    }
    out
}
