//! Polytope localization: volumetric (Vaidya), analytic-center and
//! hit-and-run centroid engines, and the stochastic cutting-plane solvers
//! built on chain-subgradient separation oracles.
//!
//! Polytopes are stored as rows `a . x >= b`. A cut from a subgradient `g`
//! queried at `z` keeps `{y : g . (y - z) <= 0}`, stored as `a = -g`, `b = a . z`.

use std::collections::BTreeMap;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::lovasz::{neighbor_chain, round_to_integer, so_sample_count, stochastic_subgradient};
use crate::oracle::{grid_size, Estimate, Guarantee, SampleStats, Sampler, Stream};

/// Newton decrement at which a center counts as converged.
pub const NEWTON_TOL: f64 = 1e-8;
/// Cut rows whose leverage falls below this are dropped by the Vaidya engine.
pub const REMOVAL_THRESHOLD: f64 = 1e-3;
/// A separation vector with sup-norm at or below this is treated as zero.
pub const ZERO_GRADIENT_TOL: f64 = 1e-12;
/// Default constant in `T_max = ceil(C_v * d * ln(8 d L N / epsilon))`.
pub const DEFAULT_CV: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub enum RowOrigin {
    Box,
    /// Cut generated by a separation oracle queried at this point.
    Cut(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub a: Vec<f64>,
    pub b: f64,
    pub origin: RowOrigin,
}

impl Row {
    pub fn slack(&self, x: &[f64]) -> f64 {
        dot(&self.a, x) - self.b
    }
}

/// `{x : a_i . x >= b_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    dim: usize,
    rows: Vec<Row>,
}

impl Polytope {
    pub fn new(dim: usize) -> Self {
        Polytope {
            dim,
            rows: Vec::new(),
        }
    }

    /// The box `[lo, hi]` as `2d` box rows.
    pub fn boxed(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return invalid("box bounds must be nonempty and of equal length");
        }
        let d = lo.len();
        let mut p = Polytope::new(d);
        for i in 0..d {
            if !(lo[i] < hi[i]) {
                return invalid(format!("box side {i} is empty: [{}, {}]", lo[i], hi[i]));
            }
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            p.push(e.clone(), lo[i], RowOrigin::Box)?;
            e[i] = -1.0;
            p.push(e, -hi[i], RowOrigin::Box)?;
        }
        Ok(p)
    }

    /// `[1, n]^d`.
    pub fn cube(d: usize, n: i64) -> Result<Self> {
        Polytope::boxed(&vec![1.0; d], &vec![n as f64; d])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, a: Vec<f64>, b: f64, origin: RowOrigin) -> Result<()> {
        if a.len() != self.dim {
            return invalid("row normal has the wrong dimension");
        }
        self.rows.push(Row { a, b, origin });
        Ok(())
    }

    pub fn remove(&mut self, i: usize) -> Row {
        self.rows.remove(i)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.rows.iter().all(|r| r.slack(x) >= -tol)
    }

    pub fn strictly_contains(&self, x: &[f64]) -> bool {
        self.rows.iter().all(|r| r.slack(x) > 0.0)
    }

    /// Query points of the cut rows, in insertion order.
    pub fn cut_points(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .filter_map(|r| match &r.origin {
                RowOrigin::Cut(z) => Some(z.clone()),
                RowOrigin::Box => None,
            })
            .collect()
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), self.dim, |i, j| self.rows[i].a[j])
    }

    fn slacks(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|r| r.slack(x.as_slice())),
        )
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rows scaled by inverse slacks, or `None` outside the interior.
fn scaled_rows(p: &Polytope, a: &DMatrix<f64>, x: &DVector<f64>) -> Option<DMatrix<f64>> {
    let s = p.slacks(x);
    if s.iter().any(|&si| !(si > 0.0)) {
        return None;
    }
    let mut ax = a.clone();
    for (i, si) in s.iter().enumerate() {
        ax.row_mut(i).scale_mut(1.0 / si);
    }
    Some(ax)
}

/// Hessian `sum a_i a_i^T / s_i^2` of the log barrier at `x`.
pub fn barrier_hessian(p: &Polytope, x: &[f64]) -> Result<DMatrix<f64>> {
    let a = p.matrix();
    let ax = scaled_rows(p, &a, &DVector::from_column_slice(x))
        .ok_or_else(|| Error::Numeric("point is not strictly inside the polytope".into()))?;
    Ok(ax.transpose() * ax)
}

/// Leverage scores `sigma_i = a_i^T H^{-1} a_i / s_i^2` at `x`; they sum to `d`.
pub fn leverage(p: &Polytope, x: &[f64]) -> Result<Vec<f64>> {
    let a = p.matrix();
    let ax = scaled_rows(p, &a, &DVector::from_column_slice(x))
        .ok_or_else(|| Error::Numeric("point is not strictly inside the polytope".into()))?;
    let chol = (ax.transpose() * &ax)
        .cholesky()
        .ok_or_else(|| Error::Numeric("barrier Hessian is singular".into()))?;
    Ok((0..ax.nrows())
        .map(|i| {
            let r = ax.row(i).transpose();
            r.dot(&chol.solve(&r))
        })
        .collect())
}

/// Minimizer of `-sum ln(a_i . x - b_i)` by damped Newton from a strictly
/// feasible `start`.
pub fn analytic_center(p: &Polytope, start: &[f64]) -> Result<Vec<f64>> {
    let a = p.matrix();
    let mut x = DVector::from_column_slice(start);
    let mut lambda = f64::INFINITY;
    for _ in 0..200 {
        let s = p.slacks(&x);
        if s.iter().any(|&si| !(si > 0.0)) {
            return Err(Error::Numeric(
                "analytic-center iterate left the polytope".into(),
            ));
        }
        let inv: DVector<f64> = s.map(|si| 1.0 / si);
        let g = -(a.transpose() * &inv);
        let mut ax = a.clone();
        for (i, w) in inv.iter().enumerate() {
            ax.row_mut(i).scale_mut(*w);
        }
        let h = ax.transpose() * &ax;
        let chol = h
            .cholesky()
            .ok_or_else(|| Error::Numeric("log-barrier Hessian is singular".into()))?;
        let dx = -chol.solve(&g);
        let prev = lambda;
        lambda = (-g.dot(&dx)).max(0.0).sqrt();
        // A quadratically converging decrement that stops halving has hit the
        // rounding floor of a thin polytope.
        if lambda <= NEWTON_TOL || (lambda < 1e-4 && lambda > 0.5 * prev) {
            return Ok(x.as_slice().to_vec());
        }
        let t = if lambda > 0.25 {
            1.0 / (1.0 + lambda)
        } else {
            1.0
        };
        x += dx * t;
    }
    Err(Error::Numeric(format!(
        "analytic-center Newton did not converge, decrement {lambda:e}"
    )))
}

/// `V(x) = 1/2 ln det(sum a_i a_i^T / s_i^2)`; `None` outside the interior.
fn volumetric_value(p: &Polytope, a: &DMatrix<f64>, x: &DVector<f64>) -> Option<f64> {
    let ax = scaled_rows(p, a, x)?;
    let chol = (ax.transpose() * &ax).cholesky()?;
    Some(chol.l().diagonal().iter().map(|v| v.ln()).sum())
}

/// Minimizer of the volumetric barrier by damped Newton with the exact
/// Hessian `A_x^T (3 Sigma - 2 P o P) A_x`.
pub fn volumetric_center(p: &Polytope, start: &[f64]) -> Result<Vec<f64>> {
    let a = p.matrix();
    let mut x = DVector::from_column_slice(start);
    for _ in 0..100 {
        let ax = scaled_rows(p, &a, &x)
            .ok_or_else(|| Error::Numeric("volumetric iterate left the polytope".into()))?;
        let chol = (ax.transpose() * &ax)
            .cholesky()
            .ok_or_else(|| Error::Numeric("barrier Hessian is singular".into()))?;
        let proj = &ax * chol.solve(&ax.transpose());
        let sigma = proj.diagonal();
        let g = -(ax.transpose() * &sigma);
        let mut w = proj.component_mul(&proj) * -2.0;
        for i in 0..w.nrows() {
            w[(i, i)] += 3.0 * sigma[i];
        }
        let q = ax.transpose() * w * &ax;
        let dx = match q.cholesky() {
            Some(c) => -c.solve(&g),
            None => {
                // Fall back to Vaidya's PSD model A_x^T Sigma A_x.
                let mut sx = ax.clone();
                for (i, si) in sigma.iter().enumerate() {
                    sx.row_mut(i).scale_mut(si.sqrt());
                }
                let c = (sx.transpose() * sx)
                    .cholesky()
                    .ok_or_else(|| Error::Numeric("volumetric Hessian is singular".into()))?;
                -c.solve(&g)
            }
        };
        let slope = g.dot(&dx);
        let lambda = (-slope).max(0.0).sqrt();
        if lambda <= NEWTON_TOL {
            return Ok(x.as_slice().to_vec());
        }
        if lambda < 0.1 {
            // Quadratic region: full steps, since Armijo tests drown in rounding here.
            let y = &x + &dx;
            if p.strictly_contains(y.as_slice()) {
                x = y;
                continue;
            }
        }
        let v0 = volumetric_value(p, &a, &x)
            .ok_or_else(|| Error::Numeric("volumetric value undefined".into()))?;
        let mut t = 1.0;
        loop {
            let y = &x + &dx * t;
            if let Some(v) = volumetric_value(p, &a, &y) {
                if v <= v0 + 0.25 * t * slope {
                    x = y;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-12 {
                // Round-off floor: the decrement is already tiny.
                if lambda <= 1e-5 {
                    return Ok(x.as_slice().to_vec());
                }
                return Err(Error::Numeric("volumetric line search stalled".into()));
            }
        }
    }
    Err(Error::Numeric("volumetric Newton did not converge".into()))
}

/// Mean of `samples` hit-and-run points after `burn_in` steps from the
/// strictly feasible `start`. Directions are Gaussian in the metric of the
/// barrier Hessian at `start`, which keeps thin bodies well mixed.
pub fn hit_and_run_centroid(
    p: &Polytope,
    start: &[f64],
    burn_in: usize,
    samples: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    let d = p.dim();
    if samples == 0 {
        return invalid("hit-and-run needs at least one sample");
    }
    if !p.strictly_contains(start) {
        return Err(Error::Numeric("hit-and-run start is not interior".into()));
    }
    let h = barrier_hessian(p, start)?;
    let hinv = h
        .try_inverse()
        .ok_or_else(|| Error::Numeric("barrier Hessian is singular".into()))?;
    let shape = hinv
        .cholesky()
        .ok_or_else(|| Error::Numeric("inverse Hessian is not positive definite".into()))?
        .l();
    let mut x = DVector::from_column_slice(start);
    let mut sum = DVector::zeros(d);
    for k in 0..burn_in + samples {
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let u = &shape * z;
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for r in p.rows() {
            let au: f64 = r.a.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
            let s = r.slack(x.as_slice());
            if au > 0.0 {
                lo = lo.max(-s / au);
            } else if au < 0.0 {
                hi = hi.min(-s / au);
            }
        }
        if lo.is_finite() && hi.is_finite() && lo < hi {
            let t = rng.gen_range(lo..hi);
            let y = &x + &u * t;
            if p.strictly_contains(y.as_slice()) {
                x = y;
            }
        }
        if k >= burn_in {
            sum += &x;
        }
    }
    Ok((sum / samples as f64).as_slice().to_vec())
}

/// Maximizes `v . x` over the polytope; returns the value and a maximizer.
pub fn support_lp(p: &Polytope, v: &[f64]) -> Result<(f64, Vec<f64>)> {
    if v.len() != p.dim() {
        return invalid("objective has the wrong dimension");
    }
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = v
        .iter()
        .map(|&c| lp.add_var(c, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    for r in p.rows() {
        let terms: Vec<_> = vars
            .iter()
            .zip(&r.a)
            .filter(|(_, &c)| c != 0.0)
            .map(|(&x, &c)| (x, c))
            .collect();
        if terms.is_empty() {
            if r.b > 0.0 {
                return Err(Error::Infeasible);
            }
            continue;
        }
        lp.add_constraint(terms.as_slice(), ComparisonOp::Ge, r.b);
    }
    match lp.solve() {
        Ok(sol) => Ok((sol.objective(), vars.iter().map(|&x| sol[x]).collect())),
        Err(minilp::Error::Infeasible) => Err(Error::Infeasible),
        Err(minilp::Error::Unbounded) => Err(Error::Unbounded),
    }
}

/// Center and radius of the largest Euclidean ball inside the polytope.
pub fn chebyshev_center(p: &Polytope) -> Result<(Vec<f64>, f64)> {
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..p.dim())
        .map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    let r = lp.add_var(1.0, (0.0, f64::INFINITY));
    for row in p.rows() {
        let norm = row.a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut terms: Vec<_> = vars
            .iter()
            .zip(&row.a)
            .filter(|(_, &c)| c != 0.0)
            .map(|(&x, &c)| (x, c))
            .collect();
        if terms.is_empty() {
            if row.b > 0.0 {
                return Err(Error::Infeasible);
            }
            continue;
        }
        terms.push((r, -norm));
        lp.add_constraint(terms.as_slice(), ComparisonOp::Ge, row.b);
    }
    match lp.solve() {
        Ok(sol) => Ok((vars.iter().map(|&x| sol[x]).collect(), sol[r])),
        Err(minilp::Error::Infeasible) => Err(Error::Infeasible),
        Err(minilp::Error::Unbounded) => Err(Error::Unbounded),
    }
}

/// Inward normal of the lowest-index box face that `z` violates: `+e_i` when
/// `z_i < 1`, `-e_i` when `z_i > n`.
pub fn out_of_box_cut(z: &[f64], n: i64) -> Option<Vec<f64>> {
    let d = z.len();
    out_of_bounds_cut(z, &vec![1.0; d], &vec![n as f64; d])
}

pub fn out_of_bounds_cut(z: &[f64], lo: &[f64], hi: &[f64]) -> Option<Vec<f64>> {
    (0..z.len()).find_map(|i| {
        let sign = if z[i] < lo[i] {
            1.0
        } else if z[i] > hi[i] {
            -1.0
        } else {
            return None;
        };
        let mut e = vec![0.0; z.len()];
        e[i] = sign;
        Some(e)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EngineKind {
    #[default]
    Vaidya,
    AnalyticCenter,
    RandomWalk,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EngineAction {
    Added { z: Vec<f64> },
    Removed(Row),
    CenterOnly,
}

/// A polytope with a maintained center; each [`CutEngine::step`] either
/// drops a low-leverage cut or cuts through the center.
pub struct CutEngine {
    kind: EngineKind,
    poly: Polytope,
    center: Vec<f64>,
    rng: Stream,
    removal_threshold: f64,
    fallbacks: usize,
}

impl CutEngine {
    /// Starts from `start`, which must be strictly feasible.
    pub fn new(kind: EngineKind, poly: Polytope, start: &[f64], rng: Stream) -> Result<Self> {
        if start.len() != poly.dim() || !poly.strictly_contains(start) {
            return invalid("engine start must be strictly inside the polytope");
        }
        let mut e = CutEngine {
            kind,
            poly,
            center: start.to_vec(),
            rng,
            removal_threshold: REMOVAL_THRESHOLD,
            fallbacks: 0,
        };
        e.recenter(start.to_vec())?;
        Ok(e)
    }

    pub fn with_removal_threshold(mut self, thr: f64) -> Self {
        self.removal_threshold = thr;
        self
    }

    pub fn kind(&self) -> EngineKind {
        self.kind
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn polytope(&self) -> &Polytope {
        &self.poly
    }

    /// Number of recenterings that fell back to the analytic center.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    /// One engine iteration. `separate` receives the center and returns the
    /// subgradient-style normal `g` to cut with, or `None` for no cut.
    pub fn step(
        &mut self,
        separate: impl FnOnce(&[f64]) -> Result<Option<Vec<f64>>>,
    ) -> Result<EngineAction> {
        if self.kind == EngineKind::Vaidya {
            let lev = leverage(&self.poly, &self.center)?;
            let weakest = self
                .poly
                .rows()
                .iter()
                .zip(&lev)
                .enumerate()
                .filter(|(_, (r, _))| matches!(r.origin, RowOrigin::Cut(_)))
                .min_by(|a, b| a.1 .1.total_cmp(b.1 .1));
            if let Some((i, (_, &s))) = weakest {
                if s < self.removal_threshold {
                    let row = self.poly.remove(i);
                    self.recenter(self.center.clone())?;
                    return Ok(EngineAction::Removed(row));
                }
            }
        }
        let z = self.center.clone();
        let g = match separate(&z)? {
            Some(g) if g.iter().any(|&v| v != 0.0) => g,
            _ => return Ok(EngineAction::CenterOnly),
        };
        self.cut(&g, RowOrigin::Cut(z.clone()))?;
        Ok(EngineAction::Added { z })
    }

    /// Adds the central cut `{y : g . (y - center) <= 0}` and recenters.
    pub fn cut(&mut self, g: &[f64], origin: RowOrigin) -> Result<()> {
        let z = self.center.clone();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return invalid("cut normal must be nonzero and finite");
        }
        let a: Vec<f64> = g.iter().map(|v| -v / norm).collect();
        let b = dot(&a, &z);
        // Restart inside the new polytope with a half Dikin step along a.
        let h = barrier_hessian(&self.poly, &z)?;
        let chol = h
            .cholesky()
            .ok_or_else(|| Error::Numeric("barrier Hessian is singular".into()))?;
        let av = DVector::from_column_slice(&a);
        let dir = chol.solve(&av);
        let norm = av.dot(&dir).sqrt();
        if !(norm > 0.0) {
            return Err(Error::Numeric("degenerate cut normal".into()));
        }
        let start: Vec<f64> = z
            .iter()
            .zip(dir.iter())
            .map(|(zi, di)| zi + 0.5 * di / norm)
            .collect();
        self.poly.push(a, b, origin)?;
        self.recenter(start)
    }

    fn recenter(&mut self, start: Vec<f64>) -> Result<()> {
        let next = match self.kind {
            EngineKind::Vaidya => match volumetric_center(&self.poly, &start) {
                Ok(c) => Ok(c),
                Err(_) => {
                    self.fallbacks += 1;
                    analytic_center(&self.poly, &start)
                }
            },
            EngineKind::AnalyticCenter => analytic_center(&self.poly, &start),
            EngineKind::RandomWalk => {
                let d = self.poly.dim();
                hit_and_run_centroid(&self.poly, &start, 10 * d * d * d, 50 * d, &mut self.rng)
            }
        };
        match next {
            Ok(c) if self.poly.strictly_contains(&c) => {
                self.center = c;
                Ok(())
            }
            Ok(_) => Err(Error::SolverFailed(
                "engine center left the polytope".into(),
            )),
            Err(e) => Err(Error::SolverFailed(format!("recentering failed: {e}"))),
        }
    }
}

/// Natural log of an upper bound on the polytope volume: the ellipsoid
/// `{(y - c)^T H (y - c) <= m (m - 1)}` around the analytic center `c`
/// contains the polytope. Returns the bound and the center.
pub fn ln_volume_bound(p: &Polytope, start: &[f64]) -> Result<(f64, Vec<f64>)> {
    let c = analytic_center(p, start)?;
    let h = barrier_hessian(p, &c)?;
    let chol = h
        .cholesky()
        .ok_or_else(|| Error::Numeric("barrier Hessian is singular".into()))?;
    let ln_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let d = p.dim() as f64;
    let m = p.len() as f64;
    let ln_ball = (d / 2.0) * std::f64::consts::PI.ln() - ln_gamma(d / 2.0 + 1.0);
    Ok((ln_ball + (d / 2.0) * (m * (m - 1.0)).ln() - 0.5 * ln_det, c))
}

/// `ln Gamma(x)` for the half-integers that appear in ball volumes.
fn ln_gamma(x: f64) -> f64 {
    let twice = (2.0 * x).round() as i64;
    if twice % 2 == 0 {
        (1..(x.round() as i64)).map(|k| (k as f64).ln()).sum()
    } else {
        // Gamma(k + 1/2) = sqrt(pi) * prod_{j<k} (j + 1/2)
        let k = (x - 0.5).round() as i64;
        0.5 * std::f64::consts::PI.ln() + (0..k).map(|j| (j as f64 + 0.5).ln()).sum::<f64>()
    }
}

/// Among fractional points, picks one whose extension value is within the
/// guarantee's epsilon of the best. Every grid point carrying chain weight
/// is sampled once to width `epsilon / 2`, the level split evenly across
/// those grid points.
pub fn finalist_pgs(
    sampler: &mut Sampler<'_>,
    points: &[Vec<f64>],
    guarantee: Guarantee,
) -> Result<(usize, Estimate)> {
    if points.is_empty() {
        return invalid("finalist set is empty");
    }
    let epsilon = guarantee.pgs_epsilon();
    let delta = guarantee.delta();
    let dims = sampler.oracle().domain().to_vec();
    let mut combos = Vec::with_capacity(points.len());
    let mut support: BTreeMap<Vec<i64>, Option<SampleStats>> = BTreeMap::new();
    for x in points {
        let chain = neighbor_chain(x, &dims)?;
        let combo: Vec<(Vec<i64>, f64)> = chain
            .points
            .iter()
            .cloned()
            .zip(chain.weights())
            .filter(|(_, w)| *w > 0.0)
            .collect();
        for (p, _) in &combo {
            support.entry(p.clone()).or_insert(None);
        }
        combos.push(combo);
    }
    let alpha = delta / support.len() as f64;
    let sigma = sampler.sigma();
    for (p, slot) in support.iter_mut() {
        let mut stats = SampleStats::new(alpha);
        sampler.sample_to_width(p, &mut stats, epsilon / 2.0)?;
        *slot = Some(stats);
    }
    let mut best: Option<(usize, Estimate)> = None;
    for (k, combo) in combos.iter().enumerate() {
        let mut mean = 0.0;
        let mut hw = 0.0;
        for (p, w) in combo {
            let e = support[p].as_ref().unwrap().estimate(sigma);
            mean += w * e.mean;
            hw += w * e.halfwidth;
        }
        if best.is_none_or(|(_, b)| mean < b.mean) {
            best = Some((k, Estimate::new(mean, hw)));
        }
    }
    Ok(best.unwrap())
}

/// Integer box `[lo, hi]` inside the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridBox {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl GridBox {
    pub fn cube(d: usize, n: i64) -> Self {
        GridBox {
            lo: vec![1; d],
            hi: vec![n; d],
        }
    }

    /// `[ceil(x - r), floor(x + r)]` clipped to `[1, n]^d`.
    pub fn around(x: &[f64], r: f64, n: i64) -> Self {
        let lo = x
            .iter()
            .map(|&v| ((v - r).ceil() as i64).clamp(1, n))
            .collect();
        let hi = x
            .iter()
            .map(|&v| ((v + r).floor() as i64).clamp(1, n))
            .collect();
        GridBox { lo, hi }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.iter()
            .zip(&self.lo)
            .zip(&self.hi)
            .all(|((v, l), h)| l <= v && v <= h)
    }

    fn free(&self) -> Vec<usize> {
        (0..self.lo.len())
            .filter(|&i| self.lo[i] < self.hi[i])
            .collect()
    }

    /// Largest side, counted in grid points.
    fn side(&self) -> i64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| h - l + 1)
            .max()
            .unwrap_or(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaidyaConfig {
    pub engine: EngineKind,
    pub c_v: f64,
    /// Multiplies the separation oracle precision; 1 keeps the guarantee rigorous.
    pub so_relax: f64,
    /// Stop once the average extension estimate of the last three queries
    /// fails to improve on the three before by `2 epsilon / (d sqrt(N))`.
    pub early_stop: bool,
}

impl Default for VaidyaConfig {
    fn default() -> Self {
        VaidyaConfig {
            engine: EngineKind::Vaidya,
            c_v: DEFAULT_CV,
            so_relax: 1.0,
            early_stop: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutExit {
    /// Ran all `T_max` iterations.
    Budget,
    ZeroGradient,
    EarlyStop,
    /// The search box is a single grid point.
    Degenerate,
    /// The localization polytope shrank below floating-point resolution.
    Collapsed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutSolve {
    pub point: Vec<i64>,
    pub estimate: Option<Estimate>,
    pub iterations: usize,
    pub queries: usize,
    pub removals: usize,
    pub fallbacks: usize,
    pub exit: CutExit,
    /// Search boxes of the accelerated solver, one per epoch.
    pub epochs: Vec<GridBox>,
}

/// Iteration budget `ceil(C_v * d * ln(8 d L N / epsilon))`, at least 1.
pub fn vaidya_tmax(c_v: f64, d: usize, lipschitz: f64, n: i64, epsilon: f64) -> usize {
    let arg = 8.0 * d as f64 * lipschitz * n as f64 / epsilon;
    if !(arg > 1.0) {
        return 1;
    }
    (c_v * d as f64 * arg.ln()).ceil().max(1.0) as usize
}

/// Stochastic Vaidya over the whole grid for an `(epsilon, delta)`-PGS guarantee.
pub fn stochastic_vaidya(
    sampler: &mut Sampler<'_>,
    guarantee: Guarantee,
    lipschitz: Option<f64>,
    cfg: VaidyaConfig,
) -> Result<CutSolve> {
    let (epsilon, delta) = guarantee.require_pgs()?;
    let lipschitz = lipschitz.ok_or_else(|| {
        Error::InvalidArgument("stochastic Vaidya needs a Lipschitz constant".into())
    })?;
    let n = grid_size(sampler.oracle())?;
    let d = sampler.dim();
    vaidya_on_box(
        sampler,
        &GridBox::cube(d, n),
        epsilon,
        delta,
        lipschitz,
        cfg,
    )
}

/// Stochastic Vaidya restricted to a sub-box; coordinates where the box is a
/// single value stay fixed.
pub fn vaidya_on_box(
    sampler: &mut Sampler<'_>,
    bx: &GridBox,
    epsilon: f64,
    delta: f64,
    lipschitz: f64,
    cfg: VaidyaConfig,
) -> Result<CutSolve> {
    if !(lipschitz >= 0.0) {
        return invalid("Lipschitz constant must be nonnegative");
    }
    if !(cfg.so_relax > 0.0) || !(cfg.c_v > 0.0) {
        return invalid("so_relax and C_v must be positive");
    }
    if bx.lo.len() != sampler.dim()
        || !sampler.oracle().contains(&bx.lo)
        || !sampler.oracle().contains(&bx.hi)
    {
        return invalid("search box must lie inside the oracle domain");
    }
    let mut out = CutSolve {
        point: bx.lo.clone(),
        estimate: None,
        iterations: 0,
        queries: 0,
        removals: 0,
        fallbacks: 0,
        exit: CutExit::Degenerate,
        epochs: Vec::new(),
    };
    let free = bx.free();
    if free.is_empty() {
        return Ok(out);
    }
    let dfree = free.len();
    let side = bx.side();
    let t_max = vaidya_tmax(cfg.c_v, dfree, lipschitz, side, epsilon);
    let n_so = so_sample_count(
        dfree,
        side,
        sampler.sigma(),
        cfg.so_relax * epsilon / 8.0,
        delta / (4.0 * t_max as f64),
    )?;
    let embed = |y: &[f64]| -> Vec<f64> {
        let mut x: Vec<f64> = bx.lo.iter().map(|&v| v as f64).collect();
        for (k, &i) in free.iter().enumerate() {
            x[i] = y[k];
        }
        x
    };
    let lo: Vec<f64> = free.iter().map(|&i| bx.lo[i] as f64).collect();
    let hi: Vec<f64> = free.iter().map(|&i| bx.hi[i] as f64).collect();
    let start: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
    let seed = sampler.rng().next_u64();
    let mut engine = CutEngine::new(
        cfg.engine,
        Polytope::boxed(&lo, &hi)?,
        &start,
        Stream::seed_from_u64(seed),
    )?;
    let stop_gap = 2.0 * epsilon / (dfree as f64 * (side as f64).sqrt());
    let mut values: Vec<f64> = Vec::new();
    let round_g = Guarantee::pgs(epsilon, delta)?;
    out.exit = CutExit::Budget;

    for _ in 0..t_max {
        out.iterations += 1;
        let mut zero = false;
        let action = engine.step(|z| {
            if let Some(e) = out_of_bounds_cut(z, &lo, &hi) {
                return Ok(Some(e.iter().map(|v| -v).collect()));
            }
            let est = stochastic_subgradient(sampler, &embed(z), n_so)?;
            out.queries += 1;
            values.push(est.value);
            let g: Vec<f64> = free.iter().map(|&i| est.g[i]).collect();
            if g.iter().all(|v| v.abs() <= ZERO_GRADIENT_TOL) {
                zero = true;
                return Ok(None);
            }
            Ok(Some(g))
        });
        let action = match action {
            Ok(a) => a,
            Err(Error::SolverFailed(_)) => {
                out.exit = CutExit::Collapsed;
                break;
            }
            Err(e) => return Err(e),
        };
        match action {
            EngineAction::Removed(_) => out.removals += 1,
            EngineAction::CenterOnly if zero => {
                let z = embed(engine.center());
                let r = round_to_integer(sampler, &z, round_g)?;
                out.point = r.point;
                out.estimate = Some(r.estimate);
                out.exit = CutExit::ZeroGradient;
                out.fallbacks = engine.fallbacks();
                return Ok(out);
            }
            _ => {}
        }
        if cfg.early_stop && stalled(&values, stop_gap) {
            out.exit = CutExit::EarlyStop;
            break;
        }
    }
    out.fallbacks = engine.fallbacks();

    let mut candidates: Vec<Vec<f64>> = engine
        .polytope()
        .cut_points()
        .iter()
        .map(|z| embed(z))
        .collect();
    if candidates.is_empty() {
        candidates.push(embed(engine.center()));
    }
    let (k, _) = finalist_pgs(
        sampler,
        &candidates,
        Guarantee::pgs(epsilon / 4.0, delta / 4.0)?,
    )?;
    let r = round_to_integer(sampler, &candidates[k], round_g)?;
    out.point = r.point;
    out.estimate = Some(r.estimate);
    Ok(out)
}

/// Whether the mean of the last three values failed to drop by `gap` below
/// the mean of the three before them.
pub(crate) fn stalled(values: &[f64], gap: f64) -> bool {
    let k = values.len();
    if k < 6 {
        return false;
    }
    let recent = values[k - 3..].iter().sum::<f64>() / 3.0;
    let before = values[k - 6..k - 3].iter().sum::<f64>() / 3.0;
    recent > before - gap
}

/// Accelerated stochastic Vaidya for a `(c, delta)`-PCS-IZ guarantee: epochs
/// halve both the precision and the search box around the last solution.
pub fn accelerated_vaidya_iz(
    sampler: &mut Sampler<'_>,
    guarantee: Guarantee,
    lipschitz: Option<f64>,
    cfg: VaidyaConfig,
) -> Result<CutSolve> {
    let (c, delta) = guarantee.require_iz()?;
    let lipschitz = lipschitz.ok_or_else(|| {
        Error::InvalidArgument("accelerated Vaidya needs a Lipschitz constant".into())
    })?;
    let n = grid_size(sampler.oracle())?;
    let d = sampler.dim();
    let epochs = (n as f64).log2().ceil() as usize + 1;
    let mut eps = c * n as f64 / 4.0;
    let mut bx = GridBox::cube(d, n);
    let mut boxes = Vec::new();
    let mut total = CutSolve {
        point: vec![1; d],
        estimate: None,
        iterations: 0,
        queries: 0,
        removals: 0,
        fallbacks: 0,
        exit: CutExit::Degenerate,
        epochs: Vec::new(),
    };
    for e in 0..epochs {
        boxes.push(bx.clone());
        let sol = vaidya_on_box(
            sampler,
            &bx,
            eps,
            delta / (2.0 * epochs as f64),
            lipschitz,
            cfg,
        )?;
        total.iterations += sol.iterations;
        total.queries += sol.queries;
        total.removals += sol.removals;
        total.fallbacks += sol.fallbacks;
        total.point = sol.point;
        total.estimate = sol.estimate;
        total.exit = sol.exit;
        eps /= 2.0;
        let r = n as f64 / 2f64.powi(e as i32 + 2);
        let x: Vec<f64> = total.point.iter().map(|&v| v as f64).collect();
        bx = GridBox::around(&x, r, n);
        if bx.is_point() {
            break;
        }
    }
    total.epochs = boxes;
    Ok(total)
}
