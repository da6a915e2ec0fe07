//! Recursive enhanced adaptive sampling. A solver that estimates the optimal
//! value of a `(k-1)`-dimensional problem turns the marginal
//! `f^{k-1}(x) = min_y f(y, x)` into a noisy one-dimensional objective, which
//! the enhanced adaptive sampling loop then minimizes over `x`.
//!
//! Every solver works on a face of the grid: the leading `dim()` coordinates
//! are free and the remaining ones are fixed to a suffix.

use std::collections::HashMap;

use crate::error::{invalid, Result};
use crate::onedim::{enhanced_adaptive_sampling, shrink, ActiveSet, EasStep, Line};
use crate::oracle::{grid_size, Estimate, Guarantee, SampleStats, Sampler};

/// Witness point on the full grid and an estimate of the face's optimal value.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSolve {
    pub point: Vec<i64>,
    pub value: Estimate,
}

/// A solver whose value estimate is within `epsilon` of the optimum with
/// probability at least `1 - delta`.
pub trait SubGaussianSolver: Send + Sync {
    /// Number of free leading coordinates.
    fn dim(&self) -> usize;

    fn solve(
        &self,
        sampler: &mut Sampler<'_>,
        suffix: &[i64],
        epsilon: f64,
        delta: f64,
    ) -> Result<ValueSolve>;
}

/// Empirical mean at a point, sampled to half-width `epsilon / 4` at level `delta / 4`.
pub fn value_certificate(
    sampler: &mut Sampler<'_>,
    point: &[i64],
    epsilon: f64,
    delta: f64,
) -> Result<Estimate> {
    if !(delta > 0.0 && delta < 1.0) {
        return invalid("delta must lie in (0, 1)");
    }
    let mut stats = SampleStats::new(delta / 4.0);
    extend_certificate(sampler, point, &mut stats, epsilon)
}

/// Tops up existing tallies until their half-width is at most `epsilon / 4`.
pub fn extend_certificate(
    sampler: &mut Sampler<'_>,
    point: &[i64],
    stats: &mut SampleStats,
    epsilon: f64,
) -> Result<Estimate> {
    sampler.sample_to_width(point, stats, epsilon / 4.0)?;
    Ok(stats.estimate(sampler.sigma()))
}

fn full_point(free: &[i64], suffix: &[i64]) -> Vec<i64> {
    free.iter().chain(suffix).copied().collect()
}

/// Dimension zero: the face is one point, sampled to width `epsilon`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DirectSampling;

impl SubGaussianSolver for DirectSampling {
    fn dim(&self) -> usize {
        0
    }

    fn solve(
        &self,
        sampler: &mut Sampler<'_>,
        suffix: &[i64],
        epsilon: f64,
        delta: f64,
    ) -> Result<ValueSolve> {
        let mut stats = SampleStats::new(delta);
        sampler.sample_to_width(suffix, &mut stats, epsilon)?;
        Ok(ValueSolve {
            point: suffix.to_vec(),
            value: stats.estimate(sampler.sigma()),
        })
    }
}

/// Dimension one: enhanced adaptive sampling at `(epsilon / 2, delta / 2)`,
/// then a value certificate at the winner.
#[derive(Debug, Clone, Copy, Default)]
pub struct Eas1d;

impl SubGaussianSolver for Eas1d {
    fn dim(&self) -> usize {
        1
    }

    fn solve(
        &self,
        sampler: &mut Sampler<'_>,
        suffix: &[i64],
        epsilon: f64,
        delta: f64,
    ) -> Result<ValueSolve> {
        let n = grid_size(sampler.oracle())?;
        let mut step = vec![0; suffix.len() + 1];
        step[0] = 1;
        let line = Line::new(full_point(&[1], suffix), step, n)?;
        let sel = enhanced_adaptive_sampling(
            sampler,
            &line,
            Guarantee::pgs(epsilon / 2.0, delta / 2.0)?,
        )?;
        let value = value_certificate(sampler, &sel.point, epsilon, delta)?;
        Ok(ValueSolve {
            point: sel.point,
            value,
        })
    }
}

/// The marginal `f^{k-1}(x)` of a face, estimated by an inner solver.
pub struct MarginalOracle<'s> {
    pub inner: &'s dyn SubGaussianSolver,
    /// Coordinates fixed outside the marginalized face.
    pub suffix: Vec<i64>,
}

impl MarginalOracle<'_> {
    /// Estimate of `min_y f(y, x, suffix)` accurate to `h` with probability `1 - delta_prime`.
    pub fn estimate(
        &self,
        sampler: &mut Sampler<'_>,
        x: i64,
        h: f64,
        delta_prime: f64,
    ) -> Result<ValueSolve> {
        let n = grid_size(sampler.oracle())?;
        if x < 1 || x > n {
            return invalid(format!("marginal coordinate {x} outside [1, {n}]"));
        }
        let suffix = full_point(&[x], &self.suffix);
        self.inner.solve(sampler, &suffix, h, delta_prime)
    }
}

/// Outcome of the outer loop over the last free coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterSolve {
    pub index: i64,
    /// Inner witness at the winning index.
    pub witness: Vec<i64>,
    /// Final marginal estimate at the winning index.
    pub estimate: Estimate,
    pub steps: Vec<EasStep>,
    /// Active-set size and confidence width of every comparison.
    pub comparisons: Vec<(usize, f64)>,
    /// Active-set sizes at which the estimates were refreshed.
    pub refreshes: Vec<usize>,
}

/// Enhanced adaptive sampling over marginal estimates from `inner`.
pub struct MultiEas {
    inner: Box<dyn SubGaussianSolver>,
}

impl MultiEas {
    pub fn new(inner: Box<dyn SubGaussianSolver>) -> Self {
        MultiEas { inner }
    }

    /// Nested solver for `d` free coordinates, bottoming out at [`Eas1d`].
    pub fn for_dim(d: usize) -> Result<Box<dyn SubGaussianSolver>> {
        match d {
            0 => invalid("recursive solver needs d >= 1"),
            1 => Ok(Box::new(Eas1d)),
            _ => Ok(Box::new(MultiEas::new(MultiEas::for_dim(d - 1)?))),
        }
    }

    /// The outer loop for an `(epsilon, delta)`-PGS choice of the last free
    /// coordinate. Type-II thinning is the default whenever no pair separates.
    pub fn outer(
        &self,
        sampler: &mut Sampler<'_>,
        suffix: &[i64],
        epsilon: f64,
        delta: f64,
    ) -> Result<OuterSolve> {
        let n = grid_size(sampler.oracle())?;
        let marginal = MarginalOracle {
            inner: self.inner.as_ref(),
            suffix: suffix.to_vec(),
        };
        let level = delta / (2.0 * n as f64);
        let mut set = ActiveSet::full(n);
        let mut n_cur: Option<usize> = None;
        let mut h = f64::INFINITY;
        let mut memo: HashMap<i64, (f64, ValueSolve)> = HashMap::new();
        let mut out = OuterSolve {
            index: 1,
            witness: Vec::new(),
            estimate: Estimate::new(f64::NAN, f64::INFINITY),
            steps: Vec::new(),
            comparisons: Vec::new(),
            refreshes: Vec::new(),
        };

        while set.len() >= 3 {
            if n_cur.is_none_or(|c| 2 * set.len() <= c) {
                n_cur = Some(set.len());
                h = set.len() as f64 * epsilon / 160.0;
                out.refreshes.push(set.len());
                memo.clear();
            }
            for &x in &set.points {
                if let std::collections::hash_map::Entry::Vacant(e) = memo.entry(x) {
                    e.insert((h, marginal.estimate(sampler, x, h, level)?));
                }
            }
            let estimates: Vec<(i64, Estimate)> = set
                .points
                .iter()
                .map(|x| (*x, Estimate::new(memo[x].1.value.mean, h)))
                .collect();
            out.comparisons.push((set.len(), h));
            let before = set.clone();
            let op = shrink(&mut set, &estimates, f64::INFINITY)
                .expect("Type-II applies when nothing separates");
            out.steps.push(EasStep {
                op,
                before,
                after: set.clone(),
            });
        }

        let last = epsilon / 4.0;
        let mut best: Option<(i64, ValueSolve)> = None;
        for &x in &set.points {
            let v = match memo.remove(&x) {
                Some((w, v)) if w <= last => v,
                _ => marginal.estimate(sampler, x, last, level)?,
            };
            if best
                .as_ref()
                .is_none_or(|(_, b)| v.value.mean < b.value.mean)
            {
                best = Some((x, v));
            }
        }
        let (index, v) = best.expect("active set is nonempty");
        out.index = index;
        out.witness = v.point;
        out.estimate = Estimate::new(v.value.mean, last);
        Ok(out)
    }
}

impl SubGaussianSolver for MultiEas {
    fn dim(&self) -> usize {
        self.inner.dim() + 1
    }

    /// Outer loop at `(epsilon / 2, delta / 2)`, then a value certificate at
    /// the assembled witness.
    fn solve(
        &self,
        sampler: &mut Sampler<'_>,
        suffix: &[i64],
        epsilon: f64,
        delta: f64,
    ) -> Result<ValueSolve> {
        let o = self.outer(sampler, suffix, epsilon / 2.0, delta / 2.0)?;
        let value = value_certificate(sampler, &o.witness, epsilon, delta)?;
        Ok(ValueSolve {
            point: o.witness,
            value,
        })
    }
}

/// Recursive enhanced adaptive sampling over the whole grid for an
/// `(epsilon, delta)`-PGS guarantee; also estimates the optimal value.
pub fn solve_recursive(sampler: &mut Sampler<'_>, guarantee: Guarantee) -> Result<ValueSolve> {
    let (epsilon, delta) = guarantee.require_pgs()?;
    grid_size(sampler.oracle())?;
    let solver = MultiEas::for_dim(sampler.dim())?;
    solver.solve(sampler, &[], epsilon, delta)
}
