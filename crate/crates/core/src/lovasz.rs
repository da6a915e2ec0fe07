//! The Lovász extension of an L-natural convex function, pieced together
//! cube by cube over `[1, N]^d`, with chain subgradients, the separation
//! oracle sample count and rounding back to the grid.

use num_traits::Float;

use crate::error::{invalid, Result};
use crate::oracle::{Estimate, Guarantee, SampleStats, Sampler};

/// Slack allowed when a fractional point sits a rounding error outside the box.
const BOX_SLACK: f64 = 1e-9;

/// Chain `S^0, ..., S^d` of grid points spanning the simplex that contains `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborChain<T = f64> {
    /// Lower corner of the unit cube holding `x`.
    pub base: Vec<i64>,
    /// Consistent permutation, 0-based coordinate indices.
    pub perm: Vec<usize>,
    pub points: Vec<Vec<i64>>,
    /// `x - base`, componentwise in `[0, 1]`.
    pub frac: Vec<T>,
}

impl<T: Float> NeighborChain<T> {
    pub fn dim(&self) -> usize {
        self.base.len()
    }

    /// Convex weights `lambda_0..lambda_d` with `x = sum lambda_i S^i`.
    pub fn weights(&self) -> Vec<T> {
        let d = self.dim();
        let at = |i: usize| self.frac[self.perm[i]];
        let mut w = Vec::with_capacity(d + 1);
        if d == 0 {
            w.push(T::one());
            return w;
        }
        w.push(T::one() - at(0));
        for i in 1..d {
            w.push(at(i - 1) - at(i));
        }
        w.push(at(d - 1));
        w
    }
}

/// Coordinate order by nonincreasing value, ties by ascending index.
pub fn consistent_permutation<T: Float>(frac: &[T]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..frac.len()).collect();
    // Stable sort keeps ascending index order among ties.
    perm.sort_by(|&i, &j| {
        frac[j]
            .partial_cmp(&frac[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    perm
}

/// Chain of the cube holding `x`; coordinates at the upper face `N_i` use the
/// lower-adjacent cube.
pub fn neighbor_chain<T: Float>(x: &[T], dims: &[i64]) -> Result<NeighborChain<T>> {
    if x.len() != dims.len() {
        return invalid("point and domain differ in dimension");
    }
    let slack = T::from(BOX_SLACK).unwrap();
    let mut base = Vec::with_capacity(x.len());
    let mut frac = Vec::with_capacity(x.len());
    for (&xi, &n) in x.iter().zip(dims) {
        if n < 2 {
            return invalid("every coordinate range needs at least two points");
        }
        let nf = T::from(n).unwrap();
        if !(xi >= T::one() - slack && xi <= nf + slack) {
            return invalid("fractional point lies outside the box");
        }
        let xi = xi.max(T::one()).min(nf);
        let b = xi.floor().to_i64().unwrap_or(1).clamp(1, n - 1);
        base.push(b);
        frac.push((xi - T::from(b).unwrap()).max(T::zero()).min(T::one()));
    }
    let perm = consistent_permutation(&frac);
    let mut points = Vec::with_capacity(x.len() + 1);
    let mut cur = base.clone();
    points.push(cur.clone());
    for &k in &perm {
        cur[k] += 1;
        points.push(cur.clone());
    }
    Ok(NeighborChain {
        base,
        perm,
        points,
        frac,
    })
}

/// `sum_i lambda_i f(S^i)`, equal to `f(S^0) + sum_i (f(S^i) - f(S^{i-1})) * frac_{perm(i)}`.
/// The convex-combination form is exact at integral points, where the weights are 0 or 1.
pub fn lovasz_value<T: Float>(f_on_chain: &[T], chain: &NeighborChain<T>) -> T {
    chain
        .weights()
        .into_iter()
        .zip(f_on_chain)
        .fold(T::zero(), |acc, (w, &f)| acc + w * f)
}

/// `g_{perm(i)} = f(S^i) - f(S^{i-1})`.
pub fn subgradient<T: Float>(f_on_chain: &[T], chain: &NeighborChain<T>) -> Vec<T> {
    let mut g = vec![T::zero(); chain.dim()];
    for (i, &k) in chain.perm.iter().enumerate() {
        g[k] = f_on_chain[i + 1] - f_on_chain[i];
    }
    g
}

/// Exact values of `f` along the chain.
pub fn chain_values<T: Float>(chain: &NeighborChain<T>, f: impl Fn(&[i64]) -> T) -> Vec<T> {
    chain.points.iter().map(|p| f(p)).collect()
}

/// Exact Lovász extension of `f` at `x`.
pub fn extension<T: Float>(x: &[T], dims: &[i64], f: impl Fn(&[i64]) -> T) -> Result<T> {
    let chain = neighbor_chain(x, dims)?;
    Ok(lovasz_value(&chain_values(&chain, f), &chain))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientEstimate {
    pub g: Vec<f64>,
    pub samples_per_point: u64,
    /// Empirical means at the chain points.
    pub chain_means: Vec<f64>,
    /// Extension value assembled from the chain means.
    pub value: f64,
}

/// Averaged chain subgradient: every chain point gets `n` fresh samples and
/// each component differences two adjacent means.
pub fn stochastic_subgradient(
    sampler: &mut Sampler<'_>,
    x: &[f64],
    n: u64,
) -> Result<SubgradientEstimate> {
    let dims = sampler.oracle().domain().to_vec();
    let chain = neighbor_chain(x, &dims)?;
    let mut means = Vec::with_capacity(chain.points.len());
    for p in &chain.points {
        means.push(sampler.sample_mean(p, n)?);
    }
    Ok(SubgradientEstimate {
        g: subgradient(&means, &chain),
        samples_per_point: n,
        value: lovasz_value(&means, &chain),
        chain_means: means,
    })
}

/// Per-chain-point sample count `ceil(4 d N^2 sigma^2 / epsilon^2 * ln(2 / delta))`
/// making the averaged subgradient an `(epsilon, delta)` separation oracle.
pub fn so_sample_count<T: Float>(d: usize, n: i64, sigma: T, epsilon: T, delta: T) -> Result<u64> {
    if d == 0 || n < 1 {
        return invalid("so_sample_count needs d >= 1 and N >= 1");
    }
    if !(epsilon > T::zero()) || !(delta > T::zero() && delta < T::one()) || !(sigma >= T::zero()) {
        return invalid("so_sample_count needs epsilon > 0, delta in (0, 1), sigma >= 0");
    }
    let two = T::one() + T::one();
    let four = two + two;
    let nf = T::from(n).unwrap();
    let raw = four * T::from(d).unwrap() * nf * nf * sigma * sigma / (epsilon * epsilon)
        * (two / delta).ln();
    let limit = T::from(u64::MAX / 4).unwrap();
    if !(raw < limit) {
        return Ok(u64::MAX);
    }
    Ok(raw.ceil().to_u64().unwrap_or(1).max(1))
}

/// A grid point chosen by rounding, with its final estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Rounded {
    pub point: Vec<i64>,
    pub estimate: Estimate,
}

/// Rounds a near-optimal fractional point to the grid: every chain point
/// carrying positive weight is sampled to width `epsilon / 4` and the
/// empirical argmin is returned.
pub fn round_to_integer(
    sampler: &mut Sampler<'_>,
    x_bar: &[f64],
    guarantee: Guarantee,
) -> Result<Rounded> {
    let epsilon = guarantee.pgs_epsilon();
    let delta = guarantee.delta();
    let dims = sampler.oracle().domain().to_vec();
    let chain = neighbor_chain(x_bar, &dims)?;
    let support: Vec<&Vec<i64>> = chain
        .points
        .iter()
        .zip(chain.weights())
        .filter(|(_, w)| *w > 0.0)
        .map(|(p, _)| p)
        .collect();
    let alpha = delta / (4.0 * support.len() as f64);
    let sigma = sampler.sigma();
    let mut best: Option<Rounded> = None;
    for p in support {
        let mut stats = SampleStats::new(alpha);
        sampler.sample_to_width(p, &mut stats, epsilon / 4.0)?;
        let est = stats.estimate(sigma);
        if best.as_ref().is_none_or(|b| est.mean < b.estimate.mean) {
            best = Some(Rounded {
                point: p.clone(),
                estimate: est,
            });
        }
    }
    Ok(best.expect("chain weights sum to one"))
}
