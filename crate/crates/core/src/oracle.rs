//! Noisy evaluation oracles, Hoeffding confidence widths and the sequential
//! sampling controller every solver is built on.
//!
//! A [`Sampler`] wraps an oracle together with its own random stream and a
//! call counter, so the number of oracle evaluations a solve consumes is
//! always available as [`Sampler::calls`].

use std::collections::HashMap;

use num_traits::Float;
use rand::RngCore;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// Random stream handed to oracles. Counter-based, so derived streams are cheap.
pub type Stream = ChaCha8Rng;

/// Default per-point sample cap.
pub const DEFAULT_SAMPLE_CAP: u64 = 1_000_000_000;
/// First batch drawn for a point inside a sequential comparison loop.
pub const INITIAL_BATCH: u64 = 8;
/// Cumulative sample counts grow by this factor from batch to batch.
pub const BATCH_GROWTH: f64 = 1.5;

/// A noisy objective `F(x, xi)` on the integer grid `[1, N_1] x ... x [1, N_d]`.
///
/// Implementations must be safe to call from several replications at once;
/// each call receives the caller's own random stream.
pub trait StochasticOracle: Send + Sync {
    /// Grid extents `N_1..N_d`.
    fn domain(&self) -> &[i64];

    /// Known upper bound on the sub-Gaussian variance proxy of every point.
    fn sigma2(&self) -> f64;

    /// One independent evaluation at grid point `x`.
    fn sample(&self, x: &[i64], rng: &mut dyn RngCore) -> f64;

    /// Sum of `n` independent evaluations at `x`.
    ///
    /// Oracles whose noise law is closed under summation may override this
    /// with an exact draw of the sum.
    fn sample_sum(&self, x: &[i64], n: u64, rng: &mut dyn RngCore) -> f64 {
        (0..n).map(|_| self.sample(x, rng)).sum()
    }

    fn dim(&self) -> usize {
        self.domain().len()
    }

    fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.domain())
                .all(|(&xi, &n)| xi >= 1 && xi <= n)
    }
}

/// Side length of a cubic domain `[N]^d`; solvers other than the harness
/// only handle cubes.
pub fn grid_size(oracle: &dyn StochasticOracle) -> Result<i64> {
    let dom = oracle.domain();
    match dom.first() {
        None => invalid("oracle domain has dimension 0"),
        Some(&n) if n < 1 => invalid(format!("grid size must be positive, got {n}")),
        Some(&n) if dom.iter().all(|&m| m == n) => Ok(n),
        Some(_) => invalid(format!("domain {dom:?} is not a cube")),
    }
}

/// Hoeffding half-width `h(n, sigma, alpha) = sqrt(2 sigma^2 / n * ln(2 / alpha))`
/// of a `1 - alpha` confidence interval built from `n` sub-Gaussian draws.
pub fn hoeffding_halfwidth<T: Float>(n: u64, sigma: T, alpha: T) -> Result<T> {
    if n == 0 {
        return invalid("hoeffding_halfwidth needs n >= 1");
    }
    check_level(alpha)?;
    if !(sigma >= T::zero()) {
        return invalid("sigma must be nonnegative");
    }
    Ok(halfwidth_unchecked(n, sigma, alpha))
}

#[inline]
pub(crate) fn halfwidth_unchecked<T: Float>(n: u64, sigma: T, alpha: T) -> T {
    let two = T::one() + T::one();
    let n = T::from(n).unwrap_or_else(T::infinity);
    // The radicand 2 sigma^2 ln(2 / alpha) / n is carried as hi + lo using
    // fused residuals, so the only rounding left is in `ln` and the final
    // root, which halves it.
    let q = two / alpha;
    let l = q.ln() + (-q).mul_add(alpha, two) / alpha / q;
    let s2 = sigma * sigma;
    let s2_lo = sigma.mul_add(sigma, -s2);
    let p = s2 * l;
    let p_lo = s2.mul_add(l, -p) + s2_lo * l;
    let v = p / n;
    let v_lo = ((-v).mul_add(n, p) + p_lo) / n;
    let (v, v_lo) = (two * v, two * v_lo);
    if !(v > T::zero()) || v.is_infinite() {
        return v.sqrt();
    }
    let r = v.sqrt();
    r + ((-r).mul_add(r, v) + v_lo) / (two * r)
}

/// Least `n >= 1` with `h(n, sigma, alpha) <= target_h`.
pub fn samples_for_width<T: Float>(target_h: T, sigma: T, alpha: T) -> Result<u64> {
    if !(target_h > T::zero()) {
        return invalid("target half-width must be positive");
    }
    check_level(alpha)?;
    if !(sigma >= T::zero()) {
        return invalid("sigma must be nonnegative");
    }
    if sigma == T::zero() {
        return Ok(1);
    }
    let two = T::one() + T::one();
    let raw = two * sigma * sigma * (two / alpha).ln() / (target_h * target_h);
    let limit = T::from(u64::MAX / 4).unwrap();
    if !(raw < limit) {
        return Ok(u64::MAX);
    }
    let mut n = raw.ceil().to_u64().unwrap_or(1).max(1);
    // The closed form can land one off after rounding; settle against h itself.
    while n > 1 && halfwidth_unchecked(n - 1, sigma, alpha) <= target_h {
        n -= 1;
    }
    while halfwidth_unchecked(n, sigma, alpha) > target_h {
        n += 1;
    }
    Ok(n)
}

fn check_level<T: Float>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha < T::one() {
        Ok(())
    } else {
        invalid("confidence level alpha must lie in (0, 1)")
    }
}

/// `(epsilon, delta)`-PGS or `(c, delta)`-PCS-IZ target of a solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Guarantee {
    Pgs { epsilon: f64, delta: f64 },
    PcsIz { c: f64, delta: f64 },
}

impl Guarantee {
    pub fn pgs(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return invalid("epsilon must be positive");
        }
        check_level(delta)?;
        Ok(Guarantee::Pgs { epsilon, delta })
    }

    pub fn pcs_iz(c: f64, delta: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return invalid("indifference-zone gap c must be positive");
        }
        check_level(delta)?;
        Ok(Guarantee::PcsIz { c, delta })
    }

    pub fn delta(&self) -> f64 {
        match *self {
            Guarantee::Pgs { delta, .. } | Guarantee::PcsIz { delta, .. } => delta,
        }
    }

    pub fn is_iz(&self) -> bool {
        matches!(self, Guarantee::PcsIz { .. })
    }

    /// Precision used when a PGS-style routine runs under this guarantee;
    /// an indifference zone `c` maps to `c / 2`.
    pub fn pgs_epsilon(&self) -> f64 {
        match *self {
            Guarantee::Pgs { epsilon, .. } => epsilon,
            Guarantee::PcsIz { c, .. } => c / 2.0,
        }
    }

    pub(crate) fn require_pgs(&self) -> Result<(f64, f64)> {
        match *self {
            Guarantee::Pgs { epsilon, delta } => Ok((epsilon, delta)),
            Guarantee::PcsIz { .. } => invalid("this solver needs a PGS guarantee"),
        }
    }

    pub(crate) fn require_iz(&self) -> Result<(f64, f64)> {
        match *self {
            Guarantee::PcsIz { c, delta } => Ok((c, delta)),
            Guarantee::Pgs { .. } => invalid("this solver needs a PCS-IZ guarantee"),
        }
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
}

/// A point estimate with a symmetric confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub halfwidth: f64,
}

impl Estimate {
    pub fn new(mean: f64, halfwidth: f64) -> Self {
        Estimate { mean, halfwidth }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.halfwidth
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.halfwidth
    }

    pub fn interval(&self) -> ConfidenceInterval {
        ConfidenceInterval {
            lo: self.lower(),
            hi: self.upper(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiOrder {
    /// `a` lies entirely below `b`.
    ABelow,
    BBelow,
    Overlap,
}

/// Orders two confidence intervals.
///
/// Touching intervals count as separated, but a separation also needs the
/// means to differ: two identical zero-width intervals overlap.
pub fn compare_ci(a: &Estimate, b: &Estimate) -> CiOrder {
    if a.upper() <= b.lower() && a.mean < b.mean {
        CiOrder::ABelow
    } else if b.upper() <= a.lower() && b.mean < a.mean {
        CiOrder::BBelow
    } else {
        CiOrder::Overlap
    }
}

/// Running tally for one point at a fixed confidence level `1 - alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    count: u64,
    sum: f64,
    alpha: f64,
}

impl SampleStats {
    pub fn new(alpha: f64) -> Self {
        SampleStats {
            count: 0,
            sum: 0.0,
            alpha,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sum(&self) -> f64 {
        self.sum
    }

    /// Empirical mean; `NaN` before the first draw.
    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.sum / self.count as f64
        }
    }

    pub fn record(&mut self, sum: f64, n: u64) {
        self.sum += sum;
        self.count += n;
    }

    /// Half-width at the tally's own level; infinite while empty.
    pub fn halfwidth(&self, sigma: f64) -> f64 {
        if self.count == 0 {
            f64::INFINITY
        } else {
            halfwidth_unchecked(self.count, sigma, self.alpha)
        }
    }

    pub fn estimate(&self, sigma: f64) -> Estimate {
        Estimate::new(self.mean(), self.halfwidth(sigma))
    }

    pub fn interval(&self, sigma: f64) -> ConfidenceInterval {
        self.estimate(sigma).interval()
    }
}

/// Size of the next batch for a tally currently holding `count` samples.
pub fn next_batch(count: u64) -> u64 {
    if count == 0 {
        INITIAL_BATCH
    } else {
        ((count as f64) * (BATCH_GROWTH - 1.0)).ceil().max(1.0) as u64
    }
}

/// An oracle bound to a random stream, with cost accounting and a per-point cap.
pub struct Sampler<'a> {
    oracle: &'a dyn StochasticOracle,
    rng: Stream,
    sigma: f64,
    calls: u64,
    cap: u64,
    ledger: Option<HashMap<Vec<i64>, u64>>,
}

impl<'a> Sampler<'a> {
    pub fn new(oracle: &'a dyn StochasticOracle, rng: Stream) -> Self {
        Sampler {
            oracle,
            rng,
            sigma: oracle.sigma2().max(0.0).sqrt(),
            calls: 0,
            cap: DEFAULT_SAMPLE_CAP,
            ledger: None,
        }
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    /// Also keep a per-point count of every evaluation drawn.
    pub fn with_ledger(mut self) -> Self {
        self.ledger = Some(HashMap::new());
        self
    }

    pub fn oracle(&self) -> &'a dyn StochasticOracle {
        self.oracle
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.oracle.dim()
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    /// Oracle evaluations consumed so far.
    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub fn ledger(&self) -> Option<&HashMap<Vec<i64>, u64>> {
        self.ledger.as_ref()
    }

    pub fn rng(&mut self) -> &mut Stream {
        &mut self.rng
    }

    /// Draws `n` fresh evaluations at `x` into `stats`.
    pub fn draw(&mut self, x: &[i64], stats: &mut SampleStats, n: u64) -> Result<()> {
        if n == 0 {
            return Ok(());
        }
        if !self.oracle.contains(x) {
            return invalid(format!("point {x:?} is outside the oracle domain"));
        }
        let requested = stats.count.saturating_add(n);
        if requested > self.cap {
            return Err(Error::BudgetExceeded {
                point: x.to_vec(),
                requested,
                cap: self.cap,
            });
        }
        let sum = self.oracle.sample_sum(x, n, &mut self.rng);
        stats.record(sum, n);
        self.calls += n;
        if let Some(ledger) = self.ledger.as_mut() {
            *ledger.entry(x.to_vec()).or_insert(0) += n;
        }
        Ok(())
    }

    /// Empirical mean of `n >= 1` fresh evaluations at `x`.
    pub fn sample_mean(&mut self, x: &[i64], n: u64) -> Result<f64> {
        if n == 0 {
            return invalid("sample_mean needs n >= 1");
        }
        let mut stats = SampleStats::new(0.5);
        self.draw(x, &mut stats, n)?;
        Ok(stats.mean())
    }

    /// Samples `x` until `h(count, sigma, alpha) <= target_h`, keeping every
    /// draw already in `stats`.
    pub fn sample_to_width(
        &mut self,
        x: &[i64],
        stats: &mut SampleStats,
        target_h: f64,
    ) -> Result<()> {
        let needed = samples_for_width(target_h, self.sigma, stats.alpha)?;
        if needed > stats.count {
            self.draw(x, stats, needed - stats.count)?;
        }
        Ok(())
    }

    /// One batch toward `target_h`; the final batch is trimmed so the
    /// width target is met exactly. Returns whether the target is met.
    pub fn step_toward(
        &mut self,
        x: &[i64],
        stats: &mut SampleStats,
        target_h: f64,
    ) -> Result<bool> {
        let needed = samples_for_width(target_h, self.sigma, stats.alpha)?;
        if stats.count >= needed {
            return Ok(true);
        }
        let batch = next_batch(stats.count).min(needed - stats.count);
        self.draw(x, stats, batch)?;
        Ok(stats.count >= needed)
    }
}
