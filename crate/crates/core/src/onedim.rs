//! One-dimensional localization: trisection adaptive sampling for PGS and
//! PCS-IZ, and enhanced adaptive sampling with Type-I/Type-II shrinkage.
//!
//! All solvers run over a [`Line`], an arithmetic progression of grid points
//! indexed `1..=len`, so the same code serves a 1-d oracle, a coordinate
//! slice of a larger grid, or the final line left by dimension reduction.

use std::collections::HashMap;

use crate::error::{invalid, Result};
use crate::oracle::{compare_ci, CiOrder, Estimate, Guarantee, SampleStats, Sampler};

/// Grid points `anchor + (t - 1) * step` for `t = 1..=len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Line {
    pub anchor: Vec<i64>,
    pub step: Vec<i64>,
    pub len: i64,
}

impl Line {
    pub fn new(anchor: Vec<i64>, step: Vec<i64>, len: i64) -> Result<Self> {
        if anchor.len() != step.len() {
            return invalid("line anchor and step differ in dimension");
        }
        if len < 1 {
            return invalid(format!("line length must be positive, got {len}"));
        }
        Ok(Line { anchor, step, len })
    }

    /// The whole domain `[1, n]` of a one-dimensional oracle.
    pub fn axis(n: i64) -> Result<Self> {
        Line::new(vec![1], vec![1], n)
    }

    pub fn point(&self, t: i64) -> Vec<i64> {
        self.anchor
            .iter()
            .zip(&self.step)
            .map(|(&a, &s)| a + (t - 1) * s)
            .collect()
    }
}

/// Closed index interval `[lo, hi]` of the trisection solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub lo: i64,
    pub hi: i64,
}

impl Interval {
    pub fn size(&self) -> i64 {
        self.hi - self.lo + 1
    }
}

/// Strictly increasing candidate indices spaced `stride` apart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    pub points: Vec<i64>,
    pub stride: i64,
}

impl ActiveSet {
    pub fn full(n: i64) -> Self {
        ActiveSet {
            points: (1..=n).collect(),
            stride: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min(&self) -> i64 {
        self.points[0]
    }

    pub fn max(&self) -> i64 {
        self.points[self.points.len() - 1]
    }

    /// Type-II shrink: double the stride and keep `ceil(|S|/2)` points from `min S`.
    pub fn thin(&mut self) {
        let k = (self.points.len() as i64 + 1) / 2 - 1;
        let (lo, hi) = (self.min(), self.max());
        self.stride *= 2;
        self.points = (0..=k)
            .map(|j| lo + j * self.stride)
            .take_while(|&p| p <= hi)
            .collect();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EasOp {
    TypeI,
    TypeII,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EasStep {
    pub op: EasOp,
    pub before: ActiveSet,
    pub after: ActiveSet,
}

/// Outcome of a one-dimensional solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Winning index on the line.
    pub index: i64,
    /// Winning grid point.
    pub point: Vec<i64>,
    /// Estimate of the winner from the final stage.
    pub estimate: Estimate,
    pub iterations: usize,
    /// Interval at the start of every trisection iteration, then the final one.
    pub intervals: Vec<Interval>,
    /// Every shrink performed by enhanced adaptive sampling.
    pub steps: Vec<EasStep>,
}

/// Per-index tallies for one solve at a single confidence level.
struct Tallies {
    alpha: f64,
    stats: HashMap<i64, SampleStats>,
}

impl Tallies {
    fn new(alpha: f64) -> Self {
        Tallies {
            alpha,
            stats: HashMap::new(),
        }
    }

    fn get(&mut self, t: i64) -> &mut SampleStats {
        let alpha = self.alpha;
        self.stats
            .entry(t)
            .or_insert_with(|| SampleStats::new(alpha))
    }

    fn peek(&self, t: i64) -> SampleStats {
        self.stats
            .get(&t)
            .copied()
            .unwrap_or(SampleStats::new(self.alpha))
    }
}

/// `(floor((2L + U) / 3), ceil((L + 2U) / 3))`.
pub fn trisection_quantiles(l: i64, u: i64) -> Result<(i64, i64)> {
    if u - l <= 2 {
        return invalid(format!("trisection needs U - L > 2, got [{l}, {u}]"));
    }
    let lo = (2 * l + u).div_euclid(3);
    let hi = -(-(l + 2 * u)).div_euclid(3);
    Ok((lo, hi))
}

/// Maximal comparison count `log_1.5(N) + 2` of the trisection solvers.
pub fn trisection_tmax(n: i64) -> f64 {
    (n as f64).ln() / 1.5f64.ln() + 2.0
}

/// Samples each index to half-width `width` at level `1 - alpha` and returns
/// the empirical argmin, ties going to the smallest index.
pub fn finalist_subproblem(
    sampler: &mut Sampler<'_>,
    line: &Line,
    points: &[i64],
    width: f64,
    alpha: f64,
) -> Result<(i64, Estimate)> {
    let mut tallies = Tallies::new(alpha);
    finalist_with(sampler, line, points, width, &mut tallies)
}

fn finalist_with(
    sampler: &mut Sampler<'_>,
    line: &Line,
    points: &[i64],
    width: f64,
    tallies: &mut Tallies,
) -> Result<(i64, Estimate)> {
    if points.is_empty() {
        return invalid("finalist set is empty");
    }
    let sigma = sampler.sigma();
    let mut best: Option<(i64, Estimate)> = None;
    for &t in points {
        if t < 1 || t > line.len {
            return invalid(format!("index {t} outside line of length {}", line.len));
        }
        let x = line.point(t);
        let stats = tallies.get(t);
        sampler.sample_to_width(&x, stats, width)?;
        let est = stats.estimate(sigma);
        if best.is_none_or(|(bt, b)| est.mean < b.mean || (est.mean == b.mean && t < bt)) {
            best = Some((t, est));
        }
    }
    Ok(best.unwrap())
}

/// Adaptive sampling (trisection) for an `(epsilon, delta)`-PGS guarantee.
pub fn adaptive_sampling(
    sampler: &mut Sampler<'_>,
    line: &Line,
    guarantee: Guarantee,
) -> Result<Selection> {
    let (epsilon, delta) = guarantee.require_pgs()?;
    trisect(sampler, line, delta, |_, _| epsilon / 8.0, epsilon / 2.0)
}

/// Adaptive sampling for a `(c, delta)`-PCS-IZ guarantee.
pub fn adaptive_sampling_iz(
    sampler: &mut Sampler<'_>,
    line: &Line,
    guarantee: Guarantee,
) -> Result<Selection> {
    let (c, delta) = guarantee.require_iz()?;
    trisect(
        sampler,
        line,
        delta,
        |q1, q2| (q2 - q1) as f64 * c / 5.0,
        c / 3.0,
    )
}

fn trisect(
    sampler: &mut Sampler<'_>,
    line: &Line,
    delta: f64,
    flat_width: impl Fn(i64, i64) -> f64,
    final_width: f64,
) -> Result<Selection> {
    let alpha = delta / (2.0 * trisection_tmax(line.len));
    let sigma = sampler.sigma();
    let mut tallies = Tallies::new(alpha);
    let (mut l, mut u) = (1, line.len);
    let mut intervals = Vec::new();
    let mut iterations = 0;
    while u - l > 2 {
        intervals.push(Interval { lo: l, hi: u });
        iterations += 1;
        let (q1, q2) = trisection_quantiles(l, u)?;
        let (x1, x2) = (line.point(q1), line.point(q2));
        let thr = flat_width(q1, q2);
        loop {
            let (s1, s2) = (tallies.peek(q1), tallies.peek(q2));
            if s1.count() > 0 && s2.count() > 0 {
                let (e1, e2) = (s1.estimate(sigma), s2.estimate(sigma));
                match compare_ci(&e1, &e2) {
                    CiOrder::BBelow => {
                        l = q1;
                        break;
                    }
                    CiOrder::ABelow => {
                        u = q2;
                        break;
                    }
                    CiOrder::Overlap if e1.halfwidth <= thr && e2.halfwidth <= thr => {
                        l = q1;
                        u = q2;
                        break;
                    }
                    CiOrder::Overlap => {}
                }
            }
            sampler.step_toward(&x1, tallies.get(q1), thr)?;
            sampler.step_toward(&x2, tallies.get(q2), thr)?;
        }
    }
    intervals.push(Interval { lo: l, hi: u });
    let finalists: Vec<i64> = (l..=u).collect();
    let (index, estimate) = finalist_with(sampler, line, &finalists, final_width, &mut tallies)?;
    Ok(Selection {
        index,
        point: line.point(index),
        estimate,
        iterations,
        intervals,
        steps: Vec::new(),
    })
}

/// Enhanced adaptive sampling for an `(epsilon, delta)`-PGS guarantee.
///
/// Points are sampled round-robin, one batch each per round, until some pair
/// separates (Type-I) or every width is under the tier threshold
/// `N_cur * epsilon / 160` (Type-II). The tier is reset whenever the active
/// set has halved since it was last set.
pub fn enhanced_adaptive_sampling(
    sampler: &mut Sampler<'_>,
    line: &Line,
    guarantee: Guarantee,
) -> Result<Selection> {
    let (epsilon, delta) = guarantee.require_pgs()?;
    let alpha = delta / (2.0 * line.len as f64);
    let sigma = sampler.sigma();
    let mut tallies = Tallies::new(alpha);
    let mut set = ActiveSet::full(line.len);
    let mut n_cur: Option<usize> = None;
    let mut thr = f64::INFINITY;
    let mut steps = Vec::new();
    let mut iterations = 0;

    while set.len() >= 3 {
        iterations += 1;
        if n_cur.is_none_or(|c| 2 * set.len() <= c) {
            n_cur = Some(set.len());
            thr = set.len() as f64 * epsilon / 160.0;
        }
        let before = set.clone();
        loop {
            let estimates: Vec<(i64, Estimate)> = set
                .points
                .iter()
                .map(|&t| (t, tallies.peek(t).estimate(sigma)))
                .collect();
            if let Some(op) = shrink(&mut set, &estimates, thr) {
                steps.push(EasStep {
                    op,
                    before,
                    after: set.clone(),
                });
                break;
            }
            for &t in &set.points {
                let stats = tallies.get(t);
                if stats.halfwidth(sigma) > thr {
                    sampler.step_toward(&line.point(t), stats, thr)?;
                }
            }
        }
    }

    let (index, estimate) = finalist_with(sampler, line, &set.points, epsilon / 4.0, &mut tallies)?;
    Ok(Selection {
        index,
        point: line.point(index),
        estimate,
        iterations,
        intervals: Vec::new(),
        steps,
    })
}

/// Applies a Type-I or Type-II shrink when the current estimates allow one.
/// With `thr = f64::INFINITY`, Type-II is the fallback whenever no pair separates.
pub(crate) fn shrink(
    set: &mut ActiveSet,
    estimates: &[(i64, Estimate)],
    thr: f64,
) -> Option<EasOp> {
    if let Some((x, y)) = separated_pair(estimates) {
        if x < y {
            set.points.retain(|&z| z < y);
        } else {
            set.points.retain(|&z| z > y);
        }
        return Some(EasOp::TypeI);
    }
    if estimates.iter().all(|(_, e)| e.halfwidth <= thr) {
        set.thin();
        return Some(EasOp::TypeII);
    }
    None
}

/// The pair (lowest upper bound, highest lower bound), if it separates.
/// Any separating pair implies this one separates.
fn separated_pair(estimates: &[(i64, Estimate)]) -> Option<(i64, i64)> {
    let finite = || estimates.iter().filter(|(_, e)| e.halfwidth.is_finite());
    let x = finite().min_by(|a, b| a.1.upper().total_cmp(&b.1.upper()))?;
    let y = finite().max_by(|a, b| a.1.lower().total_cmp(&b.1.lower()))?;
    (compare_ci(&x.1, &y.1) == CiOrder::ABelow).then_some((x.0, y.0))
}
