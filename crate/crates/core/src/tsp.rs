//! Euclidean TSP instances, tours, tour lengths and optimality gaps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{EdgeField, FieldKind};
use crate::scalar::Scalar;

/// A planar Euclidean instance with its dense distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance<T> {
    id: String,
    coords: Vec<[T; 2]>,
    dist: Vec<T>,
}

impl<T: Scalar> Instance<T> {
    pub fn new(id: impl Into<String>, coords: Vec<[T; 2]>) -> Result<Self> {
        let n = coords.len();
        if n < 3 {
            return Err(Error::InvalidSize {
                n,
                reason: "an instance needs at least 3 cities",
            });
        }
        let mut dist = vec![T::zero(); n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (coords[i][0] - coords[j][0]).hypot(coords[i][1] - coords[j][1]);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Ok(Self {
            id: id.into(),
            coords,
            dist,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[[T; 2]] {
        &self.coords
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> T {
        self.dist[i * self.n() + j]
    }

    /// Row-major distance matrix.
    pub fn dist_matrix(&self) -> &[T] {
        &self.dist
    }

    /// Same cities under a relabeling: new city `k` is old city `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n())?;
        Self::new(self.id.clone(), perm.iter().map(|&p| self.coords[p]).collect())
    }
}

/// `n` cities drawn i.i.d. uniformly from the unit square.
///
/// Points come from a ChaCha8 stream seeded with `seed`, so a given
/// `(n, seed)` always yields the same instance on every platform.
pub fn generate_random_instance<T: Scalar>(n: usize, seed: u64) -> Result<Instance<T>> {
    if n < 3 {
        return Err(Error::InvalidSize {
            n,
            reason: "an instance needs at least 3 cities",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = (0..n)
        .map(|_| {
            let x: f64 = rng.random();
            let y: f64 = rng.random();
            [T::of(x), T::of(y)]
        })
        .collect();
    Instance::new(format!("rand{n}-{seed}"), coords)
}

/// A Hamiltonian cycle given as a visiting order. The edge from the last city
/// back to the first is implicit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Tour {
    order: Vec<usize>,
}

fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: order.len(),
        });
    }
    let mut seen = vec![false; n];
    for &c in order {
        if c >= n || std::mem::replace(&mut seen[c], true) {
            return Err(Error::NotHamiltonian(format!(
                "city {c} is out of range or repeated"
            )));
        }
    }
    Ok(())
}

impl Tour {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        if order.len() < 3 {
            return Err(Error::InvalidSize {
                n: order.len(),
                reason: "a tour needs at least 3 cities",
            });
        }
        check_permutation(&order, order.len())?;
        Ok(Self { order })
    }

    pub(crate) fn from_order_unchecked(order: Vec<usize>) -> Self {
        debug_assert!(check_permutation(&order, order.len()).is_ok());
        Self { order }
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new((0..n).collect())
    }

    /// Uniformly random permutation.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        use rand::seq::SliceRandom;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        Self::new(order)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn into_order(self) -> Vec<usize> {
        self.order
    }

    /// Rotation and orientation normal form: starts at city 0 and visits the
    /// smaller of its two neighbours second.
    pub fn canonical(&self) -> Tour {
        let n = self.n();
        let start = self.order.iter().position(|&c| c == 0).unwrap_or(0);
        let mut order: Vec<usize> = (0..n).map(|k| self.order[(start + k) % n]).collect();
        if order[1] > order[n - 1] {
            order[1..].reverse();
        }
        Tour { order }
    }

    /// Undirected edges `(min, max)`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut e: Vec<_> = (0..n)
            .map(|k| {
                let (a, b) = (self.order[k], self.order[(k + 1) % n]);
                (a.min(b), a.max(b))
            })
            .collect();
        e.sort_unstable();
        e
    }

    /// Equal as cycles, ignoring rotation and direction.
    pub fn same_cycle(&self, other: &Tour) -> bool {
        self.n() == other.n() && self.canonical() == other.canonical()
    }
}

/// Sum of consecutive distances including the closing edge.
pub fn tour_length<T: Scalar>(instance: &Instance<T>, tour: &Tour) -> Result<T> {
    if tour.n() != instance.n() {
        return Err(Error::Dimension {
            expected: instance.n(),
            found: tour.n(),
        });
    }
    Ok(cycle_length(instance, tour.order()))
}

pub(crate) fn cycle_length<T: Scalar>(instance: &Instance<T>, order: &[usize]) -> T {
    let n = order.len();
    let mut total = T::zero();
    for k in 0..n {
        total += instance.dist(order[k], order[(k + 1) % n]);
    }
    total
}

/// Relative excess of a found length over a reference length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport<T> {
    pub found_length: T,
    pub reference_length: T,
    /// `(found - reference) / reference`; negative when the reference is beaten.
    pub gap: T,
}

impl<T: Scalar> GapReport<T> {
    pub fn gap_pct(&self) -> T {
        self.gap * T::of(100.0)
    }
}

pub fn optimality_gap<T: Scalar>(found_length: T, reference_length: T) -> Result<GapReport<T>> {
    if reference_length <= T::zero() || !reference_length.is_finite() {
        return Err(Error::Domain(format!(
            "reference length must be positive and finite, got {reference_length}"
        )));
    }
    Ok(GapReport {
        found_length,
        reference_length,
        gap: (found_length - reference_length) / reference_length,
    })
}

/// Binary adjacency matrix of the tour's edge set.
pub fn tour_to_adjacency<T: Scalar>(tour: &Tour) -> EdgeField<T> {
    let n = tour.n();
    let mut field = EdgeField::zeros(n, FieldKind::Binary);
    for k in 0..n {
        field.set(tour.order[k], tour.order[(k + 1) % n], T::one());
    }
    field
}

/// Inverse of [`tour_to_adjacency`]; fails unless the field is a single
/// Hamiltonian cycle. The result is in canonical form.
pub fn adjacency_to_tour<T: Scalar>(field: &EdgeField<T>) -> Result<Tour> {
    if !field.is_hamiltonian_cycle() {
        return Err(Error::NotHamiltonian(
            "field is not a single degree-2 cycle".into(),
        ));
    }
    let n = field.n();
    let mut nbrs = vec![Vec::with_capacity(2); n];
    for (i, j, v) in field.pairs() {
        if v == T::one() {
            nbrs[i].push(j);
            nbrs[j].push(i);
        }
    }
    Ok(Tour::from_order_unchecked(walk_cycle(&nbrs)).canonical())
}

/// Walks a 2-regular connected neighbour list starting at city 0.
pub(crate) fn walk_cycle(nbrs: &[Vec<usize>]) -> Vec<usize> {
    let n = nbrs.len();
    let mut order = Vec::with_capacity(n);
    let (mut prev, mut cur) = (usize::MAX, 0usize);
    for _ in 0..n {
        order.push(cur);
        let next = if nbrs[cur][0] != prev { nbrs[cur][0] } else { nbrs[cur][1] };
        prev = cur;
        cur = next;
    }
    order
}
