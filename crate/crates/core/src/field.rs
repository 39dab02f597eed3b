//! Symmetric per-edge fields: tour adjacencies, diffusion states and heatmaps.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How the values of an [`EdgeField`] are to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Every off-diagonal entry is exactly 0 or 1.
    Binary,
    /// Entries are probabilities in `[0, 1]`.
    Soft,
}

/// A symmetric `n x n` matrix with zero diagonal, one value per undirected
/// edge. Entry `(i, j)` is the probability that edge `{i, j}` is in state 1.
///
/// Writes always go through [`EdgeField::set`], which mirrors the value, so
/// symmetry holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeField<T> {
    n: usize,
    kind: FieldKind,
    probs: Vec<T>,
}

impl<T: Scalar> EdgeField<T> {
    pub fn zeros(n: usize, kind: FieldKind) -> Self {
        Self {
            n,
            kind,
            probs: vec![T::zero(); n * n],
        }
    }

    /// Builds a field by evaluating `f(i, j)` once per unordered pair `i < j`,
    /// in row-major order.
    pub fn from_pairs(n: usize, kind: FieldKind, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut field = Self::zeros(n, kind);
        for i in 0..n {
            for j in (i + 1)..n {
                field.set(i, j, f(i, j));
            }
        }
        field
    }

    /// Checks a dense row-major matrix for symmetry, a zero diagonal and the
    /// value range implied by `kind`.
    pub fn from_dense(n: usize, kind: FieldKind, probs: Vec<T>) -> Result<Self> {
        if probs.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                found: probs.len(),
            });
        }
        for i in 0..n {
            if probs[i * n + i] != T::zero() {
                return Err(Error::Domain(format!("non-zero diagonal at {i}")));
            }
            for j in (i + 1)..n {
                let v = probs[i * n + j];
                if v != probs[j * n + i] {
                    return Err(Error::Domain(format!("asymmetric entry ({i}, {j})")));
                }
                let ok = match kind {
                    FieldKind::Binary => v == T::zero() || v == T::one(),
                    FieldKind::Soft => v >= T::zero() && v <= T::one(),
                };
                if !ok {
                    return Err(Error::Domain(format!("entry ({i}, {j}) = {v} out of range")));
                }
            }
        }
        Ok(Self { n, kind, probs })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.probs[i * self.n + j]
    }

    /// Sets edge `{i, j}` in both triangles. Diagonal writes are ignored.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        if i != j {
            self.probs[i * self.n + j] = v;
            self.probs[j * self.n + i] = v;
        }
    }

    /// Row-major dense view.
    pub fn as_slice(&self) -> &[T] {
        &self.probs
    }

    /// Number of unordered pairs.
    pub fn pair_count(&self) -> usize {
        self.n * self.n.saturating_sub(1) / 2
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n).flat_map(move |i| ((i + 1)..self.n).map(move |j| (i, j, self.get(i, j))))
    }

    pub fn row_sum(&self, i: usize) -> T {
        self.probs[i * self.n..(i + 1) * self.n].iter().copied().sum()
    }

    /// Elementwise threshold at `cut` (values strictly above become 1).
    pub fn threshold(&self, cut: T) -> Self {
        let probs = self
            .probs
            .iter()
            .map(|&v| if v > cut { T::one() } else { T::zero() })
            .collect();
        Self {
            n: self.n,
            kind: FieldKind::Binary,
            probs,
        }
    }

    /// Moves every value into `[eps, 1 - eps]`, keeping the diagonal at zero.
    pub fn soften(&self, eps: T) -> Self {
        let hi = T::one() - eps;
        Self::from_pairs(self.n, FieldKind::Soft, |i, j| {
            self.get(i, j).max(eps).min(hi)
        })
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            self.get(i, i) == T::zero() && ((i + 1)..self.n).all(|j| self.get(i, j) == self.get(j, i))
        })
    }

    /// Degree 2 everywhere and a single connected cycle through all nodes.
    pub fn is_hamiltonian_cycle(&self) -> bool {
        if self.n < 3 {
            return false;
        }
        let one = T::one();
        let mut nbrs = vec![Vec::with_capacity(2); self.n];
        for (i, j, v) in self.pairs() {
            if v == one {
                nbrs[i].push(j);
                nbrs[j].push(i);
            } else if v != T::zero() {
                return false;
            }
        }
        if nbrs.iter().any(|nb| nb.len() != 2) {
            return false;
        }
        let (mut prev, mut cur, mut steps) = (0usize, nbrs[0][0], 1usize);
        while cur != 0 {
            let next = if nbrs[cur][0] == prev { nbrs[cur][1] } else { nbrs[cur][0] };
            prev = cur;
            cur = next;
            steps += 1;
            if steps > self.n {
                return false;
            }
        }
        steps == self.n
    }
}
