//! Benchmark models and reference solvers: the separable convex family with
//! known optimum, the two-queue staffing simulation, a projected stochastic
//! subgradient baseline and exhaustive search.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp, Gamma, LogNormal};

use crate::error::{invalid, Error, Result};
use crate::lovasz::{round_to_integer, stochastic_subgradient};
use crate::oracle::{grid_size, Estimate, Guarantee, Sampler, StochasticOracle};

/// `sqrt(y*/y) - 1` left of the optimum, `sqrt((N+1-y*)/(N+1-y)) - 1` right of it.
pub fn separable_g(y_star: i64, y: i64, n: i64) -> Result<f64> {
    if !(1..=n).contains(&y) || !(1..=n).contains(&y_star) {
        return invalid(format!(
            "separable_g needs 1 <= y, y* <= N, got y={y}, y*={y_star}, N={n}"
        ));
    }
    Ok(g_unchecked(y_star, y, n))
}

fn g_unchecked(y_star: i64, y: i64, n: i64) -> f64 {
    if y <= y_star {
        (y_star as f64 / y as f64).sqrt() - 1.0
    } else {
        ((n + 1 - y_star) as f64 / (n + 1 - y) as f64).sqrt() - 1.0
    }
}

/// `f(x) = sum_i c_i g(x*_i; x_i)` plus Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableModel {
    pub n: i64,
    pub weights: Vec<f64>,
    pub optimum: Vec<i64>,
    pub noise_sigma: f64,
    dom: Vec<i64>,
}

impl SeparableModel {
    pub fn new(n: i64, weights: Vec<f64>, optimum: Vec<i64>, noise_sigma: f64) -> Result<Self> {
        if n < 1 || weights.is_empty() || weights.len() != optimum.len() {
            return invalid("separable model needs N >= 1 and matching weights and optimum");
        }
        if optimum.iter().any(|&o| o < 1 || o > n) {
            return invalid("optimum lies outside the grid");
        }
        if weights.iter().any(|&c| !(c > 0.0)) || !(noise_sigma >= 0.0) {
            return invalid("weights must be positive and noise nonnegative");
        }
        let dom = vec![n; weights.len()];
        Ok(SeparableModel {
            n,
            weights,
            optimum,
            noise_sigma,
            dom,
        })
    }

    /// Weights uniform on `[0.75, 1.25]`, optimum coordinates uniform on
    /// `{1, ..., max(1, floor(0.3 N))}`.
    pub fn random(d: usize, n: i64, noise_sigma: f64, rng: &mut dyn RngCore) -> Result<Self> {
        if d == 0 {
            return invalid("separable model needs d >= 1");
        }
        let top = ((0.3 * n as f64).floor() as i64).max(1).min(n.max(1));
        let weights = (0..d).map(|_| rng.gen_range(0.75..=1.25)).collect();
        let optimum = (0..d).map(|_| rng.gen_range(1..=top)).collect();
        SeparableModel::new(n, weights, optimum, noise_sigma)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn value(&self, x: &[i64]) -> f64 {
        self.weights
            .iter()
            .zip(&self.optimum)
            .zip(x)
            .map(|((c, &o), &xi)| c * g_unchecked(o, xi, self.n))
            .sum()
    }

    /// Largest change of `f` along one coordinate step.
    pub fn lipschitz(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.optimum)
            .map(|(c, &o)| {
                (1..self.n)
                    .map(|y| (g_unchecked(o, y + 1, self.n) - g_unchecked(o, y, self.n)).abs())
                    .fold(0.0, f64::max)
                    * c
            })
            .fold(0.0, f64::max)
    }
}

/// A coordinate-step Lipschitz bound valid for every random separable model on `[N]^d`.
pub fn separable_lipschitz_bound(n: i64) -> f64 {
    1.25 * (1.0 - 0.5f64.sqrt()) * (n as f64).sqrt()
}

impl StochasticOracle for SeparableModel {
    fn domain(&self) -> &[i64] {
        &self.dom
    }

    fn sigma2(&self) -> f64 {
        self.noise_sigma * self.noise_sigma
    }

    fn sample(&self, x: &[i64], rng: &mut dyn RngCore) -> f64 {
        let z: f64 = if self.noise_sigma > 0.0 {
            rng.sample(rand_distr::StandardNormal)
        } else {
            0.0
        };
        self.value(x) + self.noise_sigma * z
    }

    /// The sum of `n` Gaussian draws is itself Gaussian; one draw suffices.
    fn sample_sum(&self, x: &[i64], n: u64, rng: &mut dyn RngCore) -> f64 {
        let nf = n as f64;
        let z: f64 = if self.noise_sigma > 0.0 {
            rng.sample(rand_distr::StandardNormal)
        } else {
            0.0
        };
        nf * self.value(x) + self.noise_sigma * nf.sqrt() * z
    }
}

/// Arrival times on `[0, T]` of a Poisson process with intensity
/// `gamma_scale * rate(t)`, by thinning candidates at `gamma_scale * rate_max`.
pub fn nhpp_arrivals(
    rate: impl Fn(f64) -> f64,
    rate_max: f64,
    gamma_scale: f64,
    horizon: f64,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    if !(rate_max > 0.0) || !(gamma_scale >= 0.0) || !(horizon >= 0.0) {
        return invalid("thinning needs rate_max > 0, gamma_scale >= 0, T >= 0");
    }
    let mut out = Vec::new();
    if gamma_scale == 0.0 {
        return Ok(out);
    }
    let gap =
        Exp::new(gamma_scale * rate_max).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut t = 0.0;
    loop {
        t += gap.sample(rng);
        if t > horizon {
            return Ok(out);
        }
        let r = rate(t);
        if r > rate_max * (1.0 + 1e-12) {
            return invalid(format!(
                "rate {r} at t={t} exceeds the thinning bound {rate_max}"
            ));
        }
        if rng.gen::<f64>() * rate_max < r {
            out.push(t);
        }
    }
}

pub fn lambda1(t: f64) -> f64 {
    75.0 + 25.0 * (0.3 * t).sin()
}

pub fn lambda2(t: f64) -> f64 {
    80.0 + 40.0 * (0.2 * t).sin()
}

/// Two independently staffed FCFS queues sharing `N + 1` servers.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueModel {
    pub n: i64,
    pub horizon: f64,
    pub service1_mean: f64,
    pub service1_var: f64,
    pub service2_mean: f64,
    pub service2_var: f64,
}

impl QueueModel {
    pub fn new(n: i64) -> Result<Self> {
        if n < 1 {
            return invalid("queue model needs N >= 1");
        }
        Ok(QueueModel {
            n,
            horizon: 2.0,
            service1_mean: 0.75,
            service1_var: 0.1,
            service2_mean: 0.65,
            service2_var: 0.1,
        })
    }

    /// Log-normal law whose own mean and variance match queue 1's.
    pub fn service1(&self) -> Result<LogNormal<f64>> {
        let m = self.service1_mean;
        let s2 = (1.0 + self.service1_var / (m * m)).ln();
        LogNormal::new(m.ln() - s2 / 2.0, s2.sqrt())
            .map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    /// Gamma law with shape `mean^2 / var` and scale `var / mean`.
    pub fn service2(&self) -> Result<Gamma<f64>> {
        let m = self.service2_mean;
        let v = self.service2_var;
        Gamma::new(m * m / v, v / m).map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Time(f64);

impl Eq for Time {}

impl PartialOrd for Time {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Time {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    /// Departures sort first at equal times so a freed server is reused at once.
    Departure,
    Arrival(usize),
}

/// Population counts right after one event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueSnapshot {
    pub time: f64,
    pub arrived: usize,
    pub waiting: usize,
    pub in_service: usize,
    pub served: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueueRun {
    /// Service start of each customer, in arrival order.
    pub starts: Vec<f64>,
    pub waits: Vec<f64>,
    pub trace: Vec<QueueSnapshot>,
}

/// Event-driven FCFS queue with `servers` identical servers and unlimited
/// waiting room, run until every customer has been served.
pub fn simulate_fcfs(
    arrivals: &[f64],
    services: &[f64],
    servers: usize,
    trace: bool,
) -> Result<QueueRun> {
    if arrivals.len() != services.len() {
        return invalid("every arrival needs a service time");
    }
    if servers == 0 {
        return invalid("a queue needs at least one server");
    }
    if arrivals.windows(2).any(|w| w[0] > w[1]) {
        return invalid("arrival times must be sorted");
    }
    let mut heap: BinaryHeap<Reverse<(Time, Event, u64)>> = BinaryHeap::new();
    let mut seq = 0u64;
    for (i, &t) in arrivals.iter().enumerate() {
        heap.push(Reverse((Time(t), Event::Arrival(i), seq)));
        seq += 1;
    }
    let mut run = QueueRun {
        starts: vec![f64::NAN; arrivals.len()],
        waits: vec![f64::NAN; arrivals.len()],
        trace: Vec::new(),
    };
    let mut line = std::collections::VecDeque::new();
    let (mut busy, mut arrived, mut served) = (0usize, 0usize, 0usize);
    while let Some(Reverse((Time(now), ev, _))) = heap.pop() {
        match ev {
            Event::Arrival(i) => {
                arrived += 1;
                line.push_back(i);
            }
            Event::Departure => {
                busy -= 1;
                served += 1;
            }
        }
        while busy < servers {
            let Some(i) = line.pop_front() else { break };
            busy += 1;
            run.starts[i] = now;
            run.waits[i] = now - arrivals[i];
            heap.push(Reverse((Time(now + services[i]), Event::Departure, seq)));
            seq += 1;
        }
        if trace {
            run.trace.push(QueueSnapshot {
                time: now,
                arrived,
                waiting: line.len(),
                in_service: busy,
                served,
            });
        }
    }
    Ok(run)
}

/// Arrivals and service times of both streams for one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueScenario {
    pub gamma: (f64, f64),
    pub arrivals: (Vec<f64>, Vec<f64>),
    pub services: (Vec<f64>, Vec<f64>),
}

/// Draws `(Gamma_1, Gamma_2) = (X + Z, Y - Z)`, both arrival streams and all service times.
pub fn queue_scenario(model: &QueueModel, rng: &mut dyn RngCore) -> Result<QueueScenario> {
    let x = rng.gen_range(0.75..=1.25);
    let y = rng.gen_range(0.75..=1.25);
    let z = rng.gen_range(-0.5..=0.5);
    let gamma = (x + z, y - z);
    let a1 = nhpp_arrivals(lambda1, 100.0, gamma.0, model.horizon, rng)?;
    let a2 = nhpp_arrivals(lambda2, 120.0, gamma.1, model.horizon, rng)?;
    let (s1, s2) = (model.service1()?, model.service2()?);
    let v1 = (0..a1.len()).map(|_| s1.sample(rng)).collect();
    let v2 = (0..a2.len()).map(|_| s2.sample(rng)).collect();
    Ok(QueueScenario {
        gamma,
        arrivals: (a1, a2),
        services: (v1, v2),
    })
}

/// Average wait over both streams when queue 1 gets `x` servers and queue 2 gets `N + 1 - x`.
pub fn scenario_average_wait(scenario: &QueueScenario, n: i64, x: i64) -> Result<f64> {
    if x < 1 || x > n {
        return invalid(format!("staffing level {x} outside [1, {n}]"));
    }
    let q1 = simulate_fcfs(
        &scenario.arrivals.0,
        &scenario.services.0,
        x as usize,
        false,
    )?;
    let q2 = simulate_fcfs(
        &scenario.arrivals.1,
        &scenario.services.1,
        (n + 1 - x) as usize,
        false,
    )?;
    let count = q1.waits.len() + q2.waits.len();
    if count == 0 {
        return Ok(0.0);
    }
    Ok((q1.waits.iter().sum::<f64>() + q2.waits.iter().sum::<f64>()) / count as f64)
}

/// One replication of the staffing simulation.
pub fn queue_sim_run(model: &QueueModel, x: i64, rng: &mut dyn RngCore) -> Result<f64> {
    if x < 1 || x > model.n {
        return invalid(format!("staffing level {x} outside [1, {}]", model.n));
    }
    scenario_average_wait(&queue_scenario(model, rng)?, model.n, x)
}

/// The staffing simulation as an oracle on `[N]` with a stated variance bound.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueOracle {
    pub model: QueueModel,
    pub sigma2: f64,
    dom: Vec<i64>,
}

impl QueueOracle {
    pub fn new(model: QueueModel, sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0) {
            return invalid("variance bound must be nonnegative");
        }
        let dom = vec![model.n];
        Ok(QueueOracle { model, sigma2, dom })
    }
}

impl StochasticOracle for QueueOracle {
    fn domain(&self) -> &[i64] {
        &self.dom
    }

    fn sigma2(&self) -> f64 {
        self.sigma2
    }

    fn sample(&self, x: &[i64], rng: &mut dyn RngCore) -> f64 {
        queue_sim_run(&self.model, x[0], rng).expect("sampler checks the domain")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgradientConfig {
    /// Constant in `K = ceil(C_b d N^2 L^2 / epsilon^2 ln(1 / delta))`.
    pub c_b: f64,
    /// Stop when the running mean of observed values fails to drop by
    /// `epsilon / sqrt(N)` over `ceil(window_factor * d / epsilon^2 ln(1 / delta))` iterations.
    pub early_stop: bool,
    pub window_factor: f64,
}

impl Default for SubgradientConfig {
    fn default() -> Self {
        SubgradientConfig {
            c_b: 1.0,
            early_stop: false,
            window_factor: 200.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientSolve {
    pub point: Vec<i64>,
    pub estimate: Estimate,
    pub iterations: u64,
    pub budget: u64,
    pub early_stopped: bool,
}

/// Projected stochastic subgradient descent on the Lovász extension with
/// step `N / (L sqrt(K))`; the averaged iterate is rounded to the grid.
pub fn subgradient_baseline(
    sampler: &mut Sampler<'_>,
    guarantee: Guarantee,
    lipschitz: f64,
    cfg: SubgradientConfig,
) -> Result<SubgradientSolve> {
    let (epsilon, delta) = guarantee.require_pgs()?;
    if !(lipschitz >= 0.0) || !(cfg.c_b > 0.0) || !(cfg.window_factor > 0.0) {
        return invalid(
            "Lipschitz constant must be nonnegative, C_b and the window factor positive",
        );
    }
    let n = grid_size(sampler.oracle())?;
    let d = sampler.dim();
    let nf = n as f64;
    let mid = (1.0 + nf) / 2.0;
    let mut x = vec![mid; d];
    let mut avg = x.clone();
    let ln = (1.0 / delta).ln();
    let budget =
        (cfg.c_b * d as f64 * nf * nf * lipschitz * lipschitz / (epsilon * epsilon) * ln).ceil();
    let budget = if budget.is_finite() {
        budget.min(u64::MAX as f64) as u64
    } else {
        u64::MAX
    };
    let mut iterations = 0u64;
    let mut early_stopped = false;
    if lipschitz > 0.0 && budget > 0 {
        let eta = nf / (lipschitz * (budget as f64).sqrt());
        let window = (cfg.window_factor * d as f64 / (epsilon * epsilon) * ln)
            .ceil()
            .max(1.0) as u64;
        let gap = epsilon / nf.sqrt();
        let mut value_sum = 0.0;
        let mut checkpoint = f64::INFINITY;
        let mut sum = vec![0.0; d];
        while iterations < budget {
            let est = stochastic_subgradient(sampler, &x, 1)?;
            iterations += 1;
            value_sum += est.value;
            for (s, xi) in sum.iter_mut().zip(&x) {
                *s += xi;
            }
            for (xi, gi) in x.iter_mut().zip(&est.g) {
                *xi = (*xi - eta * gi).clamp(1.0, nf);
            }
            if cfg.early_stop && iterations.is_multiple_of(window) {
                let mean = value_sum / iterations as f64;
                if mean > checkpoint - gap {
                    early_stopped = true;
                    break;
                }
                checkpoint = mean;
            }
        }
        avg = sum
            .iter()
            .map(|s| (s / iterations as f64).clamp(1.0, nf))
            .collect();
    }
    let r = round_to_integer(sampler, &avg, guarantee)?;
    Ok(SubgradientSolve {
        point: r.point,
        estimate: r.estimate,
        iterations,
        budget,
        early_stopped,
    })
}

/// Exhaustive minimum over `[N]^d`; ties go to the lexicographically smallest point.
pub fn brute_force_min(f: impl Fn(&[i64]) -> f64, d: usize, n: i64) -> Result<(Vec<i64>, f64)> {
    if d == 0 || n < 1 {
        return invalid("brute force needs d >= 1 and N >= 1");
    }
    let total = (n as f64).powi(d as i32);
    if total > 1e7 {
        return invalid(format!("N^d = {total} exceeds the brute-force limit 1e7"));
    }
    let mut x = vec![1i64; d];
    let mut best = (x.clone(), f(&x));
    loop {
        let mut i = d;
        loop {
            if i == 0 {
                return Ok(best);
            }
            i -= 1;
            if x[i] < n {
                x[i] += 1;
                break;
            }
            x[i] = 1;
        }
        let v = f(&x);
        if v < best.1 {
            best = (x.clone(), v);
        }
    }
}
