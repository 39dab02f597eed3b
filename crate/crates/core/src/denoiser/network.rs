//! Edge-scoring message-passing network with hand-written backpropagation.
//!
//! Per unordered edge `e = {i, j}`:
//!
//! ```text
//! f_e  = [dist_ij / mean_nn, x_t(i, j), sin(w_k tau), cos(w_k tau) ...]
//! h_e  = silu(W f_e + b)
//! m_i  = mean_{e ∋ i} h_e
//! g_e  = silu(U1 h_e + V1 (m_i + m_j) + c1)
//! m'_i = mean_{e ∋ i} g_e
//! k_e  = silu(U2 g_e + V2 (m'_i + m'_j) + c2)
//! s_e  = w · k_e + b_out,      p_e = sigmoid(s_e)
//! ```
//!
//! Node aggregates are plain means and the edge update sees `m_i + m_j`, so
//! the output is symmetric and equivariant under relabeling of the cities.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{EdgeField, FieldKind};
use crate::scalar::Scalar;
use crate::tsp::Instance;

pub const MAX_HIDDEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub hidden: usize,
    /// Number of sinusoidal frequencies in the timestep embedding.
    pub time_freqs: usize,
    /// Diffusion horizon used to normalize timesteps.
    pub horizon: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden: 32,
            time_freqs: 4,
            horizon: 1000,
        }
    }
}

/// Offsets of each tensor inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    h: usize,
    f: usize,
    embed_w: usize,
    embed_b: usize,
    u1: usize,
    v1: usize,
    c1: usize,
    u2: usize,
    v2: usize,
    c2: usize,
    head_w: usize,
    head_b: usize,
    len: usize,
}

impl Architecture {
    pub fn features(&self) -> usize {
        2 + 2 * self.time_freqs
    }

    fn layout(&self) -> Layout {
        let h = self.hidden;
        let f = self.features();
        let mut at = 0;
        let mut take = |k: usize| {
            let o = at;
            at += k;
            o
        };
        let embed_w = take(h * f);
        let embed_b = take(h);
        let u1 = take(h * h);
        let v1 = take(h * h);
        let c1 = take(h);
        let u2 = take(h * h);
        let v2 = take(h * h);
        let c2 = take(h);
        let head_w = take(h);
        let head_b = take(1);
        Layout {
            h,
            f,
            embed_w,
            embed_b,
            u1,
            v1,
            c1,
            u2,
            v2,
            c2,
            head_w,
            head_b,
            len: at,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().len
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.hidden > MAX_HIDDEN {
            return Err(Error::Config(format!(
                "hidden width {} outside 1..={MAX_HIDDEN}",
                self.hidden
            )));
        }
        if self.horizon == 0 {
            return Err(Error::Config("architecture horizon must be positive".into()));
        }
        Ok(())
    }

    /// Tensor names in storage order with their lengths.
    pub fn tensor_names(&self) -> Vec<(&'static str, usize)> {
        let (h, f) = (self.hidden, self.features());
        vec![
            ("embed.weight", h * f),
            ("embed.bias", h),
            ("round1.self", h * h),
            ("round1.neighbor", h * h),
            ("round1.bias", h),
            ("round2.self", h * h),
            ("round2.neighbor", h * h),
            ("round2.bias", h),
            ("head.weight", h),
            ("head.bias", 1),
        ]
    }
}

/// Weights of the denoiser, stored flat in [`Architecture::tensor_names`]
/// order. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams<T> {
    arch: Architecture,
    values: Vec<T>,
}

impl<T: Scalar> DenoiserParams<T> {
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        Ok(Self {
            arch,
            values: vec![T::zero(); arch.param_count()],
        })
    }

    pub fn from_values(arch: Architecture, values: Vec<T>) -> Result<Self> {
        arch.validate()?;
        if values.len() != arch.param_count() {
            return Err(Error::Dimension {
                expected: arch.param_count(),
                found: values.len(),
            });
        }
        Ok(Self { arch, values })
    }

    /// Scaled Gaussian initialization; biases start at zero.
    pub fn random(arch: Architecture, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(arch)?;
        let l = arch.layout();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |vals: &mut [T], fan_in: usize, gain: f64| {
            let normal = Normal::new(0.0, gain / (fan_in as f64).sqrt()).expect("positive std");
            for v in vals {
                *v = T::of(normal.sample(&mut rng));
            }
        };
        let (h, f) = (l.h, l.f);
        fill(&mut p.values[l.embed_w..l.embed_w + h * f], f, 1.0);
        fill(&mut p.values[l.u1..l.u1 + h * h], h, 1.0);
        fill(&mut p.values[l.v1..l.v1 + h * h], h, 0.5);
        fill(&mut p.values[l.u2..l.u2 + h * h], h, 1.0);
        fill(&mut p.values[l.v2..l.v2 + h * h], h, 0.5);
        fill(&mut p.values[l.head_w..l.head_w + h], h, 0.5);
        Ok(p)
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> T {
        self.values.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// `self += scale * other`.
    pub fn axpy(&mut self, scale: T, other: &Self) {
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }
}

#[inline]
fn silu<T: Scalar>(a: T) -> T {
    a * a.sigmoid()
}

#[inline]
fn silu_grad<T: Scalar>(a: T) -> T {
    let s = a.sigmoid();
    s * (T::one() + a * (T::one() - s))
}

/// `out = W x + b` for a row-major `rows x cols` matrix.
#[inline]
fn affine<T: Scalar>(w: &[T], b: &[T], x: &[T], out: &mut [T]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = b[r];
        for (&wi, &xi) in row.iter().zip(x) {
            acc += wi * xi;
        }
        *o = acc;
    }
}

/// `out += W x`.
#[inline]
fn matvec_add<T: Scalar>(w: &[T], x: &[T], out: &mut [T]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = T::zero();
        for (&wi, &xi) in row.iter().zip(x) {
            acc += wi * xi;
        }
        *o += acc;
    }
}

/// `out += W^T y`.
#[inline]
fn matvec_t_add<T: Scalar>(w: &[T], y: &[T], out: &mut [T]) {
    let cols = out.len();
    for (r, &yr) in y.iter().enumerate() {
        if yr == T::zero() {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (o, &wi) in out.iter_mut().zip(row) {
            *o += wi * yr;
        }
    }
}

/// `G += y x^T`.
#[inline]
fn outer_add<T: Scalar>(g: &mut [T], y: &[T], x: &[T]) {
    let cols = x.len();
    for (r, &yr) in y.iter().enumerate() {
        if yr == T::zero() {
            continue;
        }
        let row = &mut g[r * cols..(r + 1) * cols];
        for (gi, &xi) in row.iter_mut().zip(x) {
            *gi += yr * xi;
        }
    }
}

/// Fixed sinusoidal embedding of `t / horizon`.
pub fn time_embedding<T: Scalar>(t: usize, horizon: usize, freqs: usize) -> Vec<T> {
    let tau = T::of_usize(t) / T::of_usize(horizon);
    let mut out = Vec::with_capacity(2 * freqs);
    for k in 0..freqs {
        let w = T::of((1u64 << k) as f64) * T::FRAC_PI_2();
        out.push((w * tau).sin());
        out.push((w * tau).cos());
    }
    out
}

/// Distance scale: mean over cities of the nearest-neighbour distance.
fn distance_scale<T: Scalar>(instance: &Instance<T>) -> T {
    let n = instance.n();
    let total: T = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| instance.dist(i, j))
                .fold(T::infinity(), T::min)
        })
        .sum();
    let scale = total / T::of_usize(n);
    if scale > T::zero() {
        scale
    } else {
        T::one()
    }
}

/// Activations kept from the forward pass for backpropagation.
struct Forward<T> {
    n: usize,
    pairs: Vec<(usize, usize)>,
    feats: Vec<T>,
    a1: Vec<T>,
    h: Vec<T>,
    m1: Vec<T>,
    a2: Vec<T>,
    g: Vec<T>,
    m2: Vec<T>,
    a3: Vec<T>,
    k: Vec<T>,
    logits: Vec<T>,
}

fn check_inputs<T: Scalar>(
    arch: &Architecture,
    instance: &Instance<T>,
    x_t: &EdgeField<T>,
    t: usize,
) -> Result<()> {
    if x_t.n() != instance.n() {
        return Err(Error::Dimension {
            expected: instance.n(),
            found: x_t.n(),
        });
    }
    if t == 0 || t > arch.horizon {
        return Err(Error::Timestep {
            t,
            horizon: arch.horizon,
        });
    }
    Ok(())
}

fn forward<T: Scalar>(
    params: &DenoiserParams<T>,
    instance: &Instance<T>,
    x_t: &EdgeField<T>,
    t: usize,
) -> Forward<T> {
    let l = params.arch.layout();
    let (h, f) = (l.h, l.f);
    let p = &params.values;
    let n = instance.n();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let ne = pairs.len();
    let inv_deg = T::one() / T::of_usize(n - 1);

    let temb = time_embedding::<T>(t, params.arch.horizon, params.arch.time_freqs);
    let scale = distance_scale(instance);
    let mut feats = vec![T::zero(); ne * f];
    for (e, &(i, j)) in pairs.iter().enumerate() {
        let fe = &mut feats[e * f..(e + 1) * f];
        fe[0] = instance.dist(i, j) / scale;
        fe[1] = x_t.get(i, j);
        fe[2..].copy_from_slice(&temb);
    }

    let w_embed = &p[l.embed_w..l.embed_w + h * f];
    let b_embed = &p[l.embed_b..l.embed_b + h];
    let mut a1 = vec![T::zero(); ne * h];
    for e in 0..ne {
        affine(w_embed, b_embed, &feats[e * f..(e + 1) * f], &mut a1[e * h..(e + 1) * h]);
    }
    let hid: Vec<T> = a1.iter().map(|&a| silu(a)).collect();

    let round = |input: &[T], self_w: usize, neigh_w: usize, bias: usize| {
        let mut m = vec![T::zero(); n * h];
        for (e, &(i, j)) in pairs.iter().enumerate() {
            for c in 0..h {
                let v = input[e * h + c] * inv_deg;
                m[i * h + c] += v;
                m[j * h + c] += v;
            }
        }
        let vw = &p[neigh_w..neigh_w + h * h];
        let mut proj = vec![T::zero(); n * h];
        for i in 0..n {
            matvec_add(vw, &m[i * h..(i + 1) * h], &mut proj[i * h..(i + 1) * h]);
        }
        let uw = &p[self_w..self_w + h * h];
        let bias = &p[bias..bias + h];
        let mut a = vec![T::zero(); ne * h];
        for (e, &(i, j)) in pairs.iter().enumerate() {
            let ae = &mut a[e * h..(e + 1) * h];
            affine(uw, bias, &input[e * h..(e + 1) * h], ae);
            for c in 0..h {
                ae[c] += proj[i * h + c] + proj[j * h + c];
            }
        }
        let out: Vec<T> = a.iter().map(|&v| silu(v)).collect();
        (m, a, out)
    };

    let (m1, a2, g) = round(&hid, l.u1, l.v1, l.c1);
    let (m2, a3, k) = round(&g, l.u2, l.v2, l.c2);

    let head = &p[l.head_w..l.head_w + h];
    let logits = (0..ne)
        .map(|e| {
            k[e * h..(e + 1) * h]
                .iter()
                .zip(head)
                .fold(p[l.head_b], |acc, (&x, &w)| acc + x * w)
        })
        .collect();

    Forward {
        n,
        pairs,
        feats,
        a1,
        h: hid,
        m1,
        a2,
        g,
        m2,
        a3,
        k,
        logits,
    }
}

/// Edge probabilities in `(0, 1)`; symmetric, zero diagonal.
pub fn denoise<T: Scalar>(
    params: &DenoiserParams<T>,
    instance: &Instance<T>,
    x_t: &EdgeField<T>,
    t: usize,
) -> Result<EdgeField<T>> {
    check_inputs(&params.arch, instance, x_t, t)?;
    let fwd = forward(params, instance, x_t, t);
    let (lo, hi) = (T::epsilon(), T::one() - T::epsilon());
    let mut out = EdgeField::zeros(fwd.n, FieldKind::Soft);
    for (e, &(i, j)) in fwd.pairs.iter().enumerate() {
        out.set(i, j, fwd.logits[e].sigmoid().max(lo).min(hi));
    }
    Ok(out)
}

/// Weight given to positive (tour) edges in the cross-entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LossWeighting {
    /// Positives weighted by `(n - 2) / 2`, balancing the two classes.
    #[default]
    Balanced,
    Uniform,
}

impl LossWeighting {
    pub fn positive_weight<T: Scalar>(self, n: usize) -> T {
        match self {
            LossWeighting::Balanced => T::of_usize(n.saturating_sub(2)) / T::of(2.0),
            LossWeighting::Uniform => T::one(),
        }
    }
}

/// One supervised example: the network sees `(instance, x_t, t)` and is
/// scored against `target`.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a, T> {
    pub instance: &'a Instance<T>,
    pub x_t: &'a EdgeField<T>,
    pub t: usize,
    pub target: &'a EdgeField<T>,
}

/// Weighted per-edge cross-entropy of one sample and its parameter gradient
/// scaled by `scale`.
fn sample_loss_and_grad<T: Scalar>(
    params: &DenoiserParams<T>,
    sample: &Sample<'_, T>,
    weighting: LossWeighting,
    scale: T,
) -> (T, Vec<T>) {
    let l = params.arch.layout();
    let (h, f) = (l.h, l.f);
    let p = &params.values;
    let fwd = forward(params, sample.instance, sample.x_t, sample.t);
    let n = fwd.n;
    let ne = fwd.pairs.len();
    let inv_deg = T::one() / T::of_usize(n - 1);
    let pos_w = weighting.positive_weight::<T>(n);

    let mut total_w = T::zero();
    let mut loss = T::zero();
    let mut weights = Vec::with_capacity(ne);
    for (e, &(i, j)) in fwd.pairs.iter().enumerate() {
        let y = sample.target.get(i, j);
        let w = T::one() + (pos_w - T::one()) * y;
        let s = fwd.logits[e];
        loss += w * (s.softplus() - y * s);
        total_w += w;
        weights.push(w);
    }
    loss /= total_w;

    let mut grad = vec![T::zero(); l.len];
    let ds: Vec<T> = fwd
        .pairs
        .iter()
        .enumerate()
        .map(|(e, &(i, j))| {
            let y = sample.target.get(i, j);
            scale * weights[e] / total_w * (fwd.logits[e].sigmoid() - y)
        })
        .collect();

    // Head.
    let head = &p[l.head_w..l.head_w + h];
    let mut dk = vec![T::zero(); ne * h];
    for e in 0..ne {
        grad[l.head_b] += ds[e];
        for c in 0..h {
            grad[l.head_w + c] += ds[e] * fwd.k[e * h + c];
            dk[e * h + c] = ds[e] * head[c];
        }
    }

    // One message-passing round in reverse. Returns the gradient with respect
    // to the round's edge input.
    let back_round = |grad: &mut Vec<T>,
                      d_out: &[T],
                      pre: &[T],
                      input: &[T],
                      m: &[T],
                      self_w: usize,
                      neigh_w: usize,
                      bias: usize|
     -> Vec<T> {
        let da: Vec<T> = d_out
            .iter()
            .zip(pre)
            .map(|(&d, &a)| d * silu_grad(a))
            .collect();
        // Node sums of da: the neighbour term enters both endpoints.
        let mut da_node = vec![T::zero(); n * h];
        for (e, &(i, j)) in fwd.pairs.iter().enumerate() {
            for c in 0..h {
                da_node[i * h + c] += da[e * h + c];
                da_node[j * h + c] += da[e * h + c];
            }
        }
        let uw = &p[self_w..self_w + h * h];
        let vw = &p[neigh_w..neigh_w + h * h];
        let mut d_in = vec![T::zero(); ne * h];
        for e in 0..ne {
            let dae = &da[e * h..(e + 1) * h];
            outer_add(&mut grad[self_w..self_w + h * h], dae, &input[e * h..(e + 1) * h]);
            for c in 0..h {
                grad[bias + c] += dae[c];
            }
            matvec_t_add(uw, dae, &mut d_in[e * h..(e + 1) * h]);
        }
        let mut dm = vec![T::zero(); n * h];
        for i in 0..n {
            let dn = &da_node[i * h..(i + 1) * h];
            outer_add(&mut grad[neigh_w..neigh_w + h * h], dn, &m[i * h..(i + 1) * h]);
            matvec_t_add(vw, dn, &mut dm[i * h..(i + 1) * h]);
        }
        for (e, &(i, j)) in fwd.pairs.iter().enumerate() {
            for c in 0..h {
                d_in[e * h + c] += inv_deg * (dm[i * h + c] + dm[j * h + c]);
            }
        }
        d_in
    };

    let dg = back_round(&mut grad, &dk, &fwd.a3, &fwd.g, &fwd.m2, l.u2, l.v2, l.c2);
    let dh = back_round(&mut grad, &dg, &fwd.a2, &fwd.h, &fwd.m1, l.u1, l.v1, l.c1);

    for e in 0..ne {
        let da1: Vec<T> = (0..h)
            .map(|c| dh[e * h + c] * silu_grad(fwd.a1[e * h + c]))
            .collect();
        outer_add(
            &mut grad[l.embed_w..l.embed_w + h * f],
            &da1,
            &fwd.feats[e * f..(e + 1) * f],
        );
        for c in 0..h {
            grad[l.embed_b + c] += da1[c];
        }
    }

    (loss, grad)
}

/// Mean weighted binary cross-entropy over a batch and its exact gradient.
///
/// Per-sample gradients are computed in parallel and summed in batch order,
/// so the result does not depend on thread scheduling.
pub fn loss_and_grad<T: Scalar>(
    params: &DenoiserParams<T>,
    batch: &[Sample<'_, T>],
    weighting: LossWeighting,
) -> Result<(T, DenoiserParams<T>)> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    for s in batch {
        check_inputs(&params.arch, s.instance, s.x_t, s.t)?;
        if s.target.n() != s.instance.n() {
            return Err(Error::Dimension {
                expected: s.instance.n(),
                found: s.target.n(),
            });
        }
    }
    let scale = T::one() / T::of_usize(batch.len());
    let parts: Vec<(T, Vec<T>)> = batch
        .par_iter()
        .map(|s| sample_loss_and_grad(params, s, weighting, scale))
        .collect();
    let mut grad = DenoiserParams::zeros(params.arch)?;
    let mut loss = T::zero();
    for (l, g) in parts {
        loss += l * scale;
        for (a, b) in grad.values.iter_mut().zip(g) {
            *a += b;
        }
    }
    Ok((loss, grad))
}
