//! Dimension reduction without a Lipschitz constant: cut the localization
//! polytope until its integral points lie on one hyperplane, restrict to that
//! hyperplane through an exact integral parametrization, and finish on a line.
//!
//! Lattice reduction is generic over [`LatticeScalar`] so the same LLL code
//! runs in `f64` (hyperplane search) and in exact rationals (verification).

use std::fmt::Debug;
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};

use crate::cutplane::{
    analytic_center, barrier_hessian, chebyshev_center, finalist_pgs, support_lp, CutEngine,
    EngineAction, EngineKind, Polytope, ZERO_GRADIENT_TOL,
};
use crate::error::{invalid, Error, Result};
use crate::lovasz::{round_to_integer, so_sample_count, stochastic_subgradient};
use crate::onedim::{enhanced_adaptive_sampling, Line};
use crate::oracle::{grid_size, Estimate, Guarantee, Sampler, Stream};

/// Default Lovász parameter of the reduction.
pub const LLL_DELTA: f64 = 0.75;
/// Integer ranges of linear forms over a polytope are widened by this much.
pub const INTEGRALITY_TOL: f64 = 1e-7;
/// Chebyshev radius below which a restricted polytope counts as flat.
pub const FLAT_RADIUS: f64 = 1e-7;
const MAX_LLL_STEPS: usize = 100_000;

/// Scalar field for lattice reduction.
pub trait LatticeScalar: Clone + PartialOrd + Debug + Num + Neg<Output = Self> {
    fn from_i64(v: i64) -> Self;
    /// Nearest integer, halves rounded away from zero.
    fn round_i64(&self) -> Option<i64>;
    /// Whether a Gram-Schmidt pivot is indistinguishable from zero relative
    /// to the squared length `scale` of its vector.
    fn is_negligible(&self, scale: &Self) -> bool;
}

impl LatticeScalar for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn round_i64(&self) -> Option<i64> {
        let r = self.round();
        (r.is_finite() && r.abs() < 9.0e18).then_some(r as i64)
    }

    fn is_negligible(&self, scale: &Self) -> bool {
        *self <= 1e-12 * scale.abs()
    }
}

impl LatticeScalar for BigRational {
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn round_i64(&self) -> Option<i64> {
        self.round().to_integer().to_i64()
    }

    fn is_negligible(&self, _scale: &Self) -> bool {
        !self.is_positive()
    }
}

/// Basis vectors (rows) with their Gram matrix under a fixed inner product
/// and the integral change of basis from the vectors it was created with.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeBasis<T> {
    pub vectors: Vec<Vec<T>>,
    pub gram: Vec<Vec<T>>,
    /// Unimodular `U` with `vectors = U * original`.
    pub transform: Vec<Vec<i64>>,
}

impl<T: LatticeScalar> LatticeBasis<T> {
    /// Basis under the standard inner product.
    pub fn new(vectors: Vec<Vec<T>>) -> Result<Self> {
        let m = vectors.first().map_or(0, |v| v.len());
        let mut id = vec![vec![T::zero(); m]; m];
        for (i, row) in id.iter_mut().enumerate() {
            row[i] = T::one();
        }
        LatticeBasis::with_form(vectors, &id)
    }

    /// Basis under `<u, v> = u^T Q v`.
    pub fn with_form(vectors: Vec<Vec<T>>, form: &[Vec<T>]) -> Result<Self> {
        let m = form.len();
        if vectors.is_empty() {
            return invalid("lattice basis is empty");
        }
        if vectors.iter().any(|v| v.len() != m) || form.iter().any(|r| r.len() != m) {
            return invalid("basis vectors and form differ in dimension");
        }
        let qv: Vec<Vec<T>> = vectors
            .iter()
            .map(|v| (0..m).map(|i| dot(&form[i], v)).collect())
            .collect();
        let gram = vectors
            .iter()
            .map(|u| qv.iter().map(|w| dot(u, w)).collect())
            .collect();
        let n = vectors.len();
        Ok(LatticeBasis {
            vectors,
            gram,
            transform: identity(n),
        })
    }

    pub fn from_integers(rows: &[Vec<i64>]) -> Result<Self> {
        LatticeBasis::new(
            rows.iter()
                .map(|r| r.iter().map(|&v| T::from_i64(v)).collect())
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Gram-Schmidt coefficients `mu` (lower triangular, unit diagonal) and
    /// squared lengths of the orthogonalized vectors.
    pub fn gram_schmidt(&self) -> Result<(Vec<Vec<T>>, Vec<T>)> {
        gram_schmidt(&self.gram)
    }

    /// Size condition `|mu_ij| <= 1/2` and Lovász condition at `delta`.
    pub fn is_reduced(&self, delta: &T) -> Result<bool> {
        let (mu, bs) = self.gram_schmidt()?;
        let half = T::one() / T::from_i64(2);
        for i in 0..self.len() {
            for j in 0..i {
                if abs(&mu[i][j]) > half {
                    return Ok(false);
                }
            }
            if i > 0
                && bs[i]
                    < (delta.clone() - mu[i][i - 1].clone() * mu[i][i - 1].clone())
                        * bs[i - 1].clone()
            {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `b_k <- b_k - q b_j`.
    fn sub_multiple(&mut self, k: usize, j: usize, q: i64) -> Result<()> {
        let qt = T::from_i64(q);
        let bj = self.vectors[j].clone();
        for (x, y) in self.vectors[k].iter_mut().zip(&bj) {
            *x = x.clone() - qt.clone() * y.clone();
        }
        let uj = self.transform[j].clone();
        for (x, y) in self.transform[k].iter_mut().zip(&uj) {
            *x = y
                .checked_mul(q)
                .and_then(|p| x.checked_sub(p))
                .ok_or_else(|| Error::Numeric("basis transform overflowed i64".into()))?;
        }
        let n = self.len();
        let gkk = self.gram[k][k].clone() - T::from_i64(2) * qt.clone() * self.gram[k][j].clone()
            + qt.clone() * qt.clone() * self.gram[j][j].clone();
        for i in 0..n {
            if i != k {
                let v = self.gram[k][i].clone() - qt.clone() * self.gram[j][i].clone();
                self.gram[k][i] = v.clone();
                self.gram[i][k] = v;
            }
        }
        self.gram[k][k] = gkk;
        Ok(())
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.vectors.swap(a, b);
        self.transform.swap(a, b);
        self.gram.swap(a, b);
        for row in self.gram.iter_mut() {
            row.swap(a, b);
        }
    }
}

fn identity(n: usize) -> Vec<Vec<i64>> {
    (0..n)
        .map(|i| (0..n).map(|j| i64::from(i == j)).collect())
        .collect()
}

fn dot<T: LatticeScalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |s, (x, y)| s + x.clone() * y.clone())
}

fn abs<T: LatticeScalar>(x: &T) -> T {
    if *x < T::zero() {
        -x.clone()
    } else {
        x.clone()
    }
}

fn gram_schmidt<T: LatticeScalar>(g: &[Vec<T>]) -> Result<(Vec<Vec<T>>, Vec<T>)> {
    let n = g.len();
    let mut mu = vec![vec![T::zero(); n]; n];
    let mut bs: Vec<T> = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..i {
            let mut v = g[i][j].clone();
            for k in 0..j {
                v = v - mu[j][k].clone() * mu[i][k].clone() * bs[k].clone();
            }
            mu[i][j] = v / bs[j].clone();
        }
        let mut v = g[i][i].clone();
        for k in 0..i {
            v = v - mu[i][k].clone() * mu[i][k].clone() * bs[k].clone();
        }
        if v.is_negligible(&g[i][i]) {
            return invalid("basis vectors are linearly dependent");
        }
        mu[i][i] = T::one();
        bs.push(v);
    }
    Ok((mu, bs))
}

/// LLL reduction with parameter `delta` in `(1/4, 1)`.
pub fn lll_reduce<T: LatticeScalar>(basis: &LatticeBasis<T>, delta: T) -> Result<LatticeBasis<T>> {
    let quarter = T::one() / T::from_i64(4);
    if !(delta > quarter && delta < T::one()) {
        return invalid("LLL parameter must lie in (1/4, 1)");
    }
    let mut b = basis.clone();
    let n = b.len();
    let (mut mu, mut bs) = b.gram_schmidt()?;
    let mut k = 1;
    let mut steps = 0;
    while k < n {
        steps += 1;
        if steps > MAX_LLL_STEPS {
            return Err(Error::Numeric("LLL did not terminate".into()));
        }
        for j in (0..k).rev() {
            let q = mu[k][j]
                .round_i64()
                .ok_or_else(|| Error::Numeric("Gram-Schmidt coefficient out of range".into()))?;
            if q != 0 {
                b.sub_multiple(k, j, q)?;
                let qt = T::from_i64(q);
                for l in 0..j {
                    mu[k][l] = mu[k][l].clone() - qt.clone() * mu[j][l].clone();
                }
                mu[k][j] = mu[k][j].clone() - qt;
            }
        }
        let m = mu[k][k - 1].clone();
        if bs[k] >= (delta.clone() - m.clone() * m) * bs[k - 1].clone() {
            k += 1;
        } else {
            b.swap(k, k - 1);
            (mu, bs) = b.gram_schmidt()?;
            k = (k - 1).max(1);
        }
    }
    Ok(b)
}

/// `(g, p, q)` with `p a + q b = g = gcd(a, b) >= 0`.
pub fn extended_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut r0, mut r1) = (a as i128, b as i128);
    let (mut s0, mut s1) = (1i128, 0i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 < 0 {
        (r0, s0, t0) = (-r0, -s0, -t0);
    }
    (r0 as i64, s0 as i64, t0 as i64)
}

/// Columns `c_0..c_{n-1}` of a unimodular matrix with `v . c_0 = 1` and
/// `v . c_j = 0` for `j >= 1`. `v` must be primitive.
pub fn unimodular_completion(v: &[i64]) -> Result<Vec<Vec<i64>>> {
    let n = v.len();
    if n == 0 || v.iter().all(|&x| x == 0) {
        return invalid("hyperplane normal must be nonzero");
    }
    let overflow = || Error::Numeric("unimodular completion overflowed i64".into());
    let mut cols = identity(n);
    let mut a = v.to_vec();
    for i in 1..n {
        if a[i] == 0 {
            continue;
        }
        let (g, p, q) = extended_gcd(a[0], a[i]);
        let (u, w) = (-a[i] / g, a[0] / g);
        let (c0, ci) = (cols[0].clone(), cols[i].clone());
        for r in 0..n {
            cols[0][r] = p
                .checked_mul(c0[r])
                .and_then(|x| q.checked_mul(ci[r]).and_then(|y| x.checked_add(y)))
                .ok_or_else(overflow)?;
            cols[i][r] = u
                .checked_mul(c0[r])
                .and_then(|x| w.checked_mul(ci[r]).and_then(|y| x.checked_add(y)))
                .ok_or_else(overflow)?;
        }
        a[0] = g;
        a[i] = 0;
    }
    if a[0] < 0 {
        a[0] = -a[0];
        cols[0].iter_mut().for_each(|x| *x = -*x);
    }
    if a[0] != 1 {
        return invalid(format!("hyperplane normal {v:?} is not primitive"));
    }
    Ok(cols)
}

/// Integral affine map `t -> origin + sum_j t_j basis_j` from `Z^k` into the
/// original grid coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineSubgrid {
    pub origin: Vec<i64>,
    pub basis: Vec<Vec<i64>>,
}

impl AffineSubgrid {
    pub fn identity(d: usize) -> Self {
        AffineSubgrid {
            origin: vec![0; d],
            basis: identity(d),
        }
    }

    /// Number of local coordinates.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient(&self) -> usize {
        self.origin.len()
    }

    pub fn embed_int(&self, t: &[i64]) -> Vec<i64> {
        let mut x = self.origin.clone();
        for (tj, col) in t.iter().zip(&self.basis) {
            for (xi, ci) in x.iter_mut().zip(col) {
                *xi += tj * ci;
            }
        }
        x
    }

    pub fn embed(&self, t: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = self.origin.iter().map(|&v| v as f64).collect();
        for (tj, col) in t.iter().zip(&self.basis) {
            for (xi, ci) in x.iter_mut().zip(col) {
                *xi += tj * *ci as f64;
            }
        }
        x
    }

    /// Local gradient `B^T g` of an ambient gradient `g`.
    pub fn pullback(&self, g: &[f64]) -> Vec<f64> {
        self.basis
            .iter()
            .map(|col| col.iter().zip(g).map(|(c, gi)| *c as f64 * gi).sum())
            .collect()
    }

    /// This map after the local map `s -> origin + sum_j s_j basis_j`.
    pub fn compose(&self, origin: &[i64], basis: &[Vec<i64>]) -> Result<AffineSubgrid> {
        let linear = |t: &[i64]| -> Result<Vec<i64>> {
            let mut x = vec![0i64; self.ambient()];
            for (tj, col) in t.iter().zip(&self.basis) {
                for (xi, ci) in x.iter_mut().zip(col) {
                    *xi = tj
                        .checked_mul(*ci)
                        .and_then(|p| xi.checked_add(p))
                        .ok_or_else(|| Error::Numeric("subgrid map overflowed i64".into()))?;
                }
            }
            Ok(x)
        };
        let shift = linear(origin)?;
        Ok(AffineSubgrid {
            origin: self.origin.iter().zip(&shift).map(|(a, b)| a + b).collect(),
            basis: basis.iter().map(|c| linear(c)).collect::<Result<_>>()?,
        })
    }
}

/// Restricts the polytope to `{v . x = k}` in new integral coordinates.
pub fn project_polytope(
    p: &Polytope,
    v: &[i64],
    k: i64,
    embed: &AffineSubgrid,
) -> Result<(Polytope, AffineSubgrid)> {
    if v.len() != p.dim() || embed.dim() != p.dim() {
        return invalid("hyperplane normal, polytope and subgrid differ in dimension");
    }
    let cols = unimodular_completion(v)?;
    let origin: Vec<i64> = cols[0]
        .iter()
        .map(|&c| {
            c.checked_mul(k)
                .ok_or_else(|| Error::Numeric("hyperplane offset overflowed i64".into()))
        })
        .collect::<Result<_>>()?;
    let basis = &cols[1..];
    let mut out = Polytope::new(basis.len());
    for row in p.rows() {
        let a: Vec<f64> = basis
            .iter()
            .map(|c| c.iter().zip(&row.a).map(|(ci, ai)| *ci as f64 * ai).sum())
            .collect();
        let b = row.b
            - origin
                .iter()
                .zip(&row.a)
                .map(|(o, ai)| *o as f64 * ai)
                .sum::<f64>();
        let scale = row.a.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        if a.iter().all(|x| x.abs() <= 1e-12 * scale) {
            if b > INTEGRALITY_TOL * scale {
                return Err(Error::Infeasible);
            }
            continue;
        }
        out.push(a, b, row.origin.clone())?;
    }
    Ok((out, embed.compose(&origin, basis)?))
}

/// Outcome of a hyperplane search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HyperplaneSearch {
    /// Every integral point satisfies `v . x = k`.
    Hyperplane { v: Vec<i64>, k: i64 },
    /// No integral point remains.
    Empty,
    /// The integral points are affinely full-dimensional, or the search gave up.
    TooBig,
}

/// `[ceil(min v.x), floor(max v.x)]` over the polytope, widened by the tolerance.
fn integer_range(p: &Polytope, v: &[i64]) -> Result<(i64, i64)> {
    let vf: Vec<f64> = v.iter().map(|&x| x as f64).collect();
    let neg: Vec<f64> = vf.iter().map(|x| -x).collect();
    let (hi, _) = support_lp(p, &vf)?;
    let (lo, _) = support_lp(p, &neg)?;
    let tol = INTEGRALITY_TOL * (1.0 + vf.iter().map(|x| x.abs()).sum::<f64>());
    Ok(((-lo - tol).ceil() as i64, (hi + tol).floor() as i64))
}

/// Looks for a hyperplane holding every integral point of `p`.
///
/// Candidates are the LLL-reduced basis of `Z^d` under the inverse barrier
/// Hessian at the analytic center; a candidate works when its integer range
/// holds at most one value. Failing that, integral points are enumerated
/// (at most `limit` LP solves) until they are seen to be full-dimensional.
pub fn find_integral_hyperplane(
    p: &Polytope,
    center: &[f64],
    limit: usize,
) -> Result<HyperplaneSearch> {
    let d = p.dim();
    if d == 0 {
        return invalid("hyperplane search needs dimension >= 1");
    }
    for v in candidate_normals(p, center) {
        match integer_range(p, &v) {
            Err(Error::Infeasible) => return Ok(HyperplaneSearch::Empty),
            Err(e) => return Err(e),
            Ok((lo, hi)) if lo > hi => return Ok(HyperplaneSearch::Empty),
            Ok((lo, hi)) if lo == hi => return Ok(HyperplaneSearch::Hyperplane { v, k: lo }),
            Ok(_) => {}
        }
    }
    let mut hull = AffineHull::new(d);
    let walk = enumerate_integral_points(p, limit, &mut |x| hull.add(x) && hull.rank() == d)?;
    if walk != Walk::Done {
        return Ok(HyperplaneSearch::TooBig);
    }
    let Some(p0) = hull.points.first().cloned() else {
        return Ok(HyperplaneSearch::Empty);
    };
    let mut best: Option<(i64, Vec<i64>)> = None;
    for v in hull.normals()? {
        let (lo, hi) = integer_range(p, &v)?;
        if best.as_ref().is_none_or(|(w, _)| hi - lo < *w) {
            best = Some((hi - lo, v));
        }
    }
    let v = best.map(|(_, v)| v).expect("a deficient hull has a normal");
    let k = v.iter().zip(&p0).map(|(a, b)| a * b).sum();
    Ok(HyperplaneSearch::Hyperplane { v, k })
}

fn candidate_normals(p: &Polytope, center: &[f64]) -> Vec<Vec<i64>> {
    let d = p.dim();
    let units = identity(d);
    let c = analytic_center(p, center).unwrap_or_else(|_| center.to_vec());
    let Ok(h) = barrier_hessian(p, &c) else {
        return units;
    };
    let Some(q) = h.try_inverse() else {
        return units;
    };
    let form: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| q[(i, j)]).collect())
        .collect();
    let vectors: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    match LatticeBasis::with_form(vectors, &form).and_then(|b| lll_reduce(&b, LLL_DELTA)) {
        Ok(b) => {
            let mut out = b.transform;
            for u in units {
                if !out
                    .iter()
                    .any(|w| w.iter().zip(&u).all(|(a, b)| a.abs() == b.abs()))
                {
                    out.push(u);
                }
            }
            out
        }
        Err(_) => units,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Walk {
    Done,
    Stopped,
    Limit,
}

/// Visits integral points of `p` (widened by the integrality tolerance) in
/// lexicographic order until `visit` returns true or `limit` LP solves are used.
pub fn enumerate_integral_points(
    p: &Polytope,
    limit: usize,
    visit: &mut dyn FnMut(&[i64]) -> bool,
) -> Result<Walk> {
    let rows: Vec<(Vec<f64>, f64)> = p
        .rows()
        .iter()
        .map(|r| {
            let scale = r.a.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
            (r.a.clone(), r.b - INTEGRALITY_TOL * scale)
        })
        .collect();
    let mut budget = limit;
    let mut prefix = Vec::with_capacity(p.dim());
    walk(&rows, p.dim(), &mut prefix, &mut budget, visit)
}

fn walk(
    rows: &[(Vec<f64>, f64)],
    dim: usize,
    prefix: &mut Vec<i64>,
    budget: &mut usize,
    visit: &mut dyn FnMut(&[i64]) -> bool,
) -> Result<Walk> {
    if dim == 0 {
        if rows.iter().all(|(_, b)| *b <= 0.0) && visit(prefix) {
            return Ok(Walk::Stopped);
        }
        return Ok(Walk::Done);
    }
    let range = if dim == 1 {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (a, b) in rows {
            if a[0] > 0.0 {
                lo = lo.max(b / a[0]);
            } else if a[0] < 0.0 {
                hi = hi.min(b / a[0]);
            } else if *b > 0.0 {
                return Ok(Walk::Done);
            }
        }
        Some((lo, hi))
    } else {
        if *budget < 2 {
            return Ok(Walk::Limit);
        }
        *budget -= 2;
        let mut poly = Polytope::new(dim);
        for (a, b) in rows {
            if a.iter().all(|x| *x == 0.0) {
                if *b > 0.0 {
                    return Ok(Walk::Done);
                }
                continue;
            }
            poly.push(a.clone(), *b, crate::cutplane::RowOrigin::Box)?;
        }
        let mut e = vec![0.0; dim];
        e[0] = 1.0;
        match support_lp(&poly, &e) {
            Ok((hi, _)) => {
                e[0] = -1.0;
                let (lo, _) = support_lp(&poly, &e)?;
                Some((-lo, hi))
            }
            Err(Error::Infeasible) => None,
            Err(err) => return Err(err),
        }
    };
    let Some((lo, hi)) = range else {
        return Ok(Walk::Done);
    };
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Unbounded);
    }
    let (lo, hi) = ((lo - 1e-9).ceil() as i64, (hi + 1e-9).floor() as i64);
    for t in lo..=hi {
        let sliced: Vec<(Vec<f64>, f64)> = rows
            .iter()
            .map(|(a, b)| (a[1..].to_vec(), b - a[0] * t as f64))
            .collect();
        prefix.push(t);
        let w = walk(&sliced, dim - 1, prefix, budget, visit)?;
        prefix.pop();
        if w != Walk::Done {
            return Ok(w);
        }
    }
    Ok(Walk::Done)
}

/// Affinely independent subset of the integral points seen so far.
struct AffineHull {
    dim: usize,
    points: Vec<Vec<i64>>,
    /// Echelon rows spanning the differences to the first point.
    rows: Vec<(usize, Vec<BigRational>)>,
}

impl AffineHull {
    fn new(dim: usize) -> Self {
        AffineHull {
            dim,
            points: Vec::new(),
            rows: Vec::new(),
        }
    }

    fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Records `x`; returns whether the affine rank grew.
    fn add(&mut self, x: &[i64]) -> bool {
        let Some(p0) = self.points.first() else {
            self.points.push(x.to_vec());
            return false;
        };
        let mut v: Vec<BigRational> = x
            .iter()
            .zip(p0)
            .map(|(a, b)| BigRational::from_i64(a - b))
            .collect();
        for (piv, row) in &self.rows {
            if !v[*piv].is_zero() {
                let f = v[*piv].clone();
                for (vi, ri) in v.iter_mut().zip(row) {
                    *vi = vi.clone() - f.clone() * ri.clone();
                }
            }
        }
        let Some(piv) = v.iter().position(|c| !c.is_zero()) else {
            return false;
        };
        let f = v[piv].clone();
        v.iter_mut().for_each(|c| *c = c.clone() / f.clone());
        for (_, row) in self.rows.iter_mut() {
            if !row[piv].is_zero() {
                let g = row[piv].clone();
                for (ri, vi) in row.iter_mut().zip(&v) {
                    *ri = ri.clone() - g.clone() * vi.clone();
                }
            }
        }
        self.rows.push((piv, v));
        self.points.push(x.to_vec());
        true
    }

    /// Primitive integral basis of the orthogonal complement of the span.
    fn normals(&self) -> Result<Vec<Vec<i64>>> {
        let pivots: Vec<usize> = self.rows.iter().map(|(p, _)| *p).collect();
        let mut out = Vec::new();
        for f in (0..self.dim).filter(|c| !pivots.contains(c)) {
            let mut v = vec![BigRational::zero(); self.dim];
            v[f] = BigRational::one();
            for (p, row) in &self.rows {
                v[*p] = -row[f].clone();
            }
            out.push(primitive(&v)?);
        }
        Ok(out)
    }
}

fn primitive(v: &[BigRational]) -> Result<Vec<i64>> {
    use num_integer::Integer;
    let lcm = v.iter().fold(BigInt::one(), |l, c| l.lcm(c.denom()));
    let ints: Vec<BigInt> = v
        .iter()
        .map(|c| (c * BigRational::from_integer(lcm.clone())).to_integer())
        .collect();
    let g = ints.iter().fold(BigInt::zero(), |g, c| g.gcd(c));
    ints.iter()
        .map(|c| {
            (c / &g)
                .to_i64()
                .ok_or_else(|| Error::Numeric("hyperplane normal overflowed i64".into()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimRedConfig {
    pub engine: EngineKind,
    /// Multiplies the separation oracle precision; 1 keeps the guarantee rigorous.
    pub so_relax: f64,
    /// Anticipated oracle calls `ceil(budget_factor * d * (d + ln N))`.
    pub budget_factor: f64,
    /// Cutting iterations allowed across all dimensions.
    pub max_iterations: usize,
    /// LP solves allowed per integral-point enumeration.
    pub enumeration_limit: usize,
}

impl Default for DimRedConfig {
    fn default() -> Self {
        DimRedConfig {
            engine: EngineKind::Vaidya,
            so_relax: 1.0,
            budget_factor: 10.0,
            max_iterations: 10_000,
            enumeration_limit: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DimRedExit {
    /// Reduced to a line and solved it.
    Line,
    /// The localization polytope ran out of integral points.
    Empty,
    ZeroGradient,
    /// The restricted polytope was flat; its integral points were enumerated.
    Flat,
    IterationCap,
    /// The localization polytope shrank below floating-point resolution.
    Collapsed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimRedSolve {
    pub point: Vec<i64>,
    pub estimate: Estimate,
    pub iterations: usize,
    pub queries: usize,
    /// Hyperplanes `(v, k)` in the local coordinates of each reduction.
    pub hyperplanes: Vec<(Vec<i64>, i64)>,
    /// Local dimension at the start of each cutting phase.
    pub dims: Vec<usize>,
    pub finalists: usize,
    pub exit: DimRedExit,
}

/// Oracle-call schedule: epoch `e` admits `T_total * 2^e` calls, each at level
/// `delta / (T_total * 2^(2e + 3))`, so all epochs together spend `delta / 4`.
struct Budget {
    t_total: f64,
    epoch: i32,
    used: u64,
}

impl Budget {
    fn level(&mut self, delta: f64) -> f64 {
        let cap = self.t_total * 2f64.powi(self.epoch);
        if self.used as f64 >= cap {
            self.epoch += 1;
            self.used = 0;
        }
        self.used += 1;
        delta / (self.t_total * 2f64.powi(2 * self.epoch + 3))
    }
}

/// Dimension reduction for an `(epsilon, delta)`-PGS guarantee; needs no
/// Lipschitz constant.
pub fn dimension_reduction_solve(
    sampler: &mut Sampler<'_>,
    guarantee: Guarantee,
    cfg: DimRedConfig,
) -> Result<DimRedSolve> {
    let (epsilon, delta) = guarantee.require_pgs()?;
    if !(cfg.so_relax > 0.0) || !(cfg.budget_factor > 0.0) {
        return invalid("so_relax and budget_factor must be positive");
    }
    let n = grid_size(sampler.oracle())?;
    let d = sampler.dim();
    let mut out = DimRedSolve {
        point: vec![1; d],
        estimate: Estimate::new(f64::NAN, f64::INFINITY),
        iterations: 0,
        queries: 0,
        hyperplanes: Vec::new(),
        dims: Vec::new(),
        finalists: 0,
        exit: DimRedExit::Line,
    };
    if d == 1 {
        let sel = enhanced_adaptive_sampling(sampler, &Line::axis(n)?, guarantee)?;
        out.point = sel.point;
        out.estimate = sel.estimate;
        out.dims.push(1);
        return Ok(out);
    }

    let mut budget = Budget {
        t_total: (cfg.budget_factor * d as f64 * (d as f64 + (n as f64).ln()))
            .ceil()
            .max(1.0),
        epoch: 0,
        used: 0,
    };
    let so_eps = cfg.so_relax * epsilon / 4.0;
    let mut sub = AffineSubgrid::identity(d);
    let mut poly = Polytope::cube(d, n)?;
    let mut finalists: Vec<Vec<f64>> = Vec::new();

    'reduce: while sub.dim() >= 2 {
        out.dims.push(sub.dim());
        let start = match chebyshev_center(&poly) {
            Ok((c, r)) if r > FLAT_RADIUS => c,
            Ok(_) => {
                enumerate_into(&poly, &sub, cfg.enumeration_limit, &mut finalists)?;
                out.exit = DimRedExit::Flat;
                break 'reduce;
            }
            Err(Error::Infeasible) => {
                out.exit = DimRedExit::Empty;
                break 'reduce;
            }
            Err(e) => return Err(e),
        };
        let seed = sampler.rng().next_u64();
        let mut engine = CutEngine::new(
            cfg.engine,
            poly.clone(),
            &start,
            Stream::seed_from_u64(seed),
        )?;
        loop {
            match find_integral_hyperplane(
                engine.polytope(),
                engine.center(),
                cfg.enumeration_limit,
            )? {
                HyperplaneSearch::Empty => {
                    out.exit = DimRedExit::Empty;
                    break 'reduce;
                }
                HyperplaneSearch::Hyperplane { v, k } => {
                    match project_polytope(engine.polytope(), &v, k, &sub) {
                        Ok((p, s)) => {
                            poly = p;
                            sub = s;
                        }
                        Err(Error::Infeasible) => {
                            out.exit = DimRedExit::Empty;
                            break 'reduce;
                        }
                        Err(e) => return Err(e),
                    }
                    out.hyperplanes.push((v, k));
                    continue 'reduce;
                }
                HyperplaneSearch::TooBig => {}
            }
            if out.iterations >= cfg.max_iterations {
                out.exit = DimRedExit::IterationCap;
                break 'reduce;
            }
            out.iterations += 1;
            let mut zero = false;
            let action = engine.step(|z| {
                let x = sub.embed(z);
                let level = budget.level(delta);
                let n_so = so_sample_count(d, n, sampler.sigma(), so_eps, level)?;
                let est = stochastic_subgradient(sampler, &x, n_so)?;
                out.queries += 1;
                finalists.push(x);
                let g = sub.pullback(&est.g);
                if g.iter().all(|v| v.abs() <= ZERO_GRADIENT_TOL) {
                    zero = true;
                    return Ok(None);
                }
                Ok(Some(g))
            });
            let action = match action {
                Ok(a) => a,
                Err(Error::SolverFailed(_)) => {
                    out.exit = DimRedExit::Collapsed;
                    break 'reduce;
                }
                Err(e) => return Err(e),
            };
            if zero && action == EngineAction::CenterOnly {
                out.exit = DimRedExit::ZeroGradient;
                break 'reduce;
            }
        }
    }

    if sub.dim() == 1 && out.exit == DimRedExit::Line {
        out.dims.push(1);
        let range = match integer_range(&poly, &[1]) {
            Ok(r) => Some(r),
            Err(Error::Infeasible) => None,
            Err(e) => return Err(e),
        };
        if let Some((lo, hi)) = range.filter(|(lo, hi)| lo <= hi) {
            let line = Line::new(sub.embed_int(&[lo]), sub.basis[0].clone(), hi - lo + 1)?;
            let sel = enhanced_adaptive_sampling(
                sampler,
                &line,
                Guarantee::pgs(epsilon / 4.0, delta / 4.0)?,
            )?;
            finalists.push(sel.point.iter().map(|&v| v as f64).collect());
        }
    }
    if finalists.is_empty() {
        return Err(Error::SolverFailed(
            "dimension reduction ended without candidates".into(),
        ));
    }
    out.finalists = finalists.len();
    let (k, _) = finalist_pgs(
        sampler,
        &finalists,
        Guarantee::pgs(epsilon / 4.0, delta / 4.0)?,
    )?;
    let r = round_to_integer(sampler, &finalists[k], guarantee)?;
    out.point = r.point;
    out.estimate = r.estimate;
    Ok(out)
}

fn enumerate_into(
    poly: &Polytope,
    sub: &AffineSubgrid,
    limit: usize,
    finalists: &mut Vec<Vec<f64>>,
) -> Result<()> {
    let walk = enumerate_integral_points(poly, limit, &mut |t| {
        finalists.push(sub.embed_int(t).iter().map(|&v| v as f64).collect());
        false
    })?;
    if walk == Walk::Limit {
        return Err(Error::SolverFailed(
            "flat polytope holds too many integral points".into(),
        ));
    }
    Ok(())
}
