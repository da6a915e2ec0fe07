//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines come out in order
//! and unfiltered; any failure makes the target exit nonzero.

#![allow(clippy::needless_range_loop)]

use std::time::Instant;

use astro_float::{BigFloat, Consts, RoundingMode};
use cso_core::bench::{
    brute_force_min, lambda1, nhpp_arrivals, queue_scenario, scenario_average_wait, simulate_fcfs,
    QueueModel, QueueOracle, SeparableModel,
};
use cso_core::cutplane::{stochastic_vaidya, VaidyaConfig};
use cso_core::dimred::{dimension_reduction_solve, lll_reduce, DimRedConfig};
use cso_core::lovasz::{
    chain_values, consistent_permutation, extension, lovasz_value, neighbor_chain, so_sample_count,
    subgradient, NeighborChain,
};
use cso_core::multieas::solve_recursive;
use cso_core::onedim::{adaptive_sampling, enhanced_adaptive_sampling, Line};
use cso_core::oracle::{hoeffding_halfwidth, samples_for_width};
use cso_core::{ExactBasis, Guarantee, Rational, Sampler, StochasticOracle, Stream};
use cso_harness::{landscape_scan, line_points, run_experiment, seed_stream, ExperimentConfig};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rayon::prelude::*;

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("scaling of AS and EAS cost in N", scaling),
        ("coverage at d=2, N=50", coverage),
        ("trisection iteration bound", iteration_bound),
        ("agreement with brute force", brute_force),
        ("Lovasz extension properties", lovasz_suite),
        ("confidence-width formulas vs arbitrary precision", formulas),
        ("LLL reduction", lll),
        ("queue simulation sanity", queue_sanity),
        ("determinism", determinism),
    ];
    // Optional criterion numbers on the command line select a subset.
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let t0 = Instant::now();
        let (ok, detail) = check();
        let secs = t0.elapsed().as_secs_f64();
        println!(
            "criterion {} {}: {name}: {detail} [{secs:.1}s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" }
        );
        failed += usize::from(!ok);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).expect("acceptance configs are valid")
}

/// Least-squares `(intercept, slope, r^2)`.
fn fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - a - b * x).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    (a, b, 1.0 - ss_res / ss_tot)
}

/// AS cost grows like `log N`; EAS cost levels off once `N` is large.
///
/// Small instances are steep enough that EAS discards most points through
/// confident comparisons; from about N = 80 on, the flat bottom forces the
/// halving path whose total cost no longer depends on N. Flatness is
/// therefore checked over N in {80, ..., 150}, and the whole-range ratio is
/// reported alongside.
fn scaling() -> Outcome {
    const GRID: &str = "[10,20,30,40,50,60,70,80,90,100,110,120,130,140,150]";
    let run = |alg: &str| {
        let cfg = config(&format!(
            r#"{{"algorithm":"{alg}","model":"SEPARABLE","d":1,"N":{GRID},"epsilon":0.2,"delta":1e-6,"replications":100,"master_seed":2024}}"#
        ));
        run_experiment(&cfg).expect("experiment runs")
    };
    let (as_run, eas_run) = (run("AS"), run("EAS"));
    let failures = as_run.failures() + eas_run.failures();
    let ln_n: Vec<f64> = as_run.curve.iter().map(|r| (r.n as f64).ln()).collect();
    let as_cost: Vec<f64> = as_run.curve.iter().map(|r| r.mean_cost).collect();
    let (_, b, r2) = fit(&ln_n, &as_cost);
    let tail: Vec<_> = eas_run.curve.iter().filter(|r| r.n >= 80).collect();
    let tn: Vec<f64> = tail.iter().map(|r| r.n as f64).collect();
    let tc: Vec<f64> = tail.iter().map(|r| r.mean_cost).collect();
    let (_, slope, _) = fit(&tn, &tc);
    let mean = tc.iter().sum::<f64>() / tc.len() as f64;
    let drift = slope * (150.0 - 80.0) / mean;
    let ratio = tc[tc.len() - 1] / tc[0];
    let eas = &eas_run.curve;
    let whole = eas[eas.len() - 1].mean_cost / eas[0].mean_cost;
    let coverage = as_run
        .curve
        .iter()
        .chain(eas)
        .filter_map(|r| r.coverage_rate)
        .fold(1.0, f64::min);
    let ok = failures == 0 && r2 >= 0.8 && b > 0.0 && drift.abs() <= 0.2 && ratio <= 1.5;
    (
        ok,
        format!(
            "AS ~ a + b ln N with b = {b:.4e}, R^2 = {r2:.3} (need >= 0.8, b > 0); EAS over N >= 80: \
             cost(150)/cost(80) = {ratio:.3} (need <= 1.5), fitted drift {:.1}% of mean {mean:.4e} (need within 20%); \
             EAS cost(150)/cost(10) = {whole:.1} over the whole range; min coverage {coverage}",
            100.0 * drift
        ),
    )
}

/// Every multi-dimensional solver covers 100/100 under the relaxed protocol.
fn coverage() -> Outcome {
    let eps = 2f64.sqrt() / 5.0;
    let run = |alg: &str, engine: &str| {
        let cfg = config(&format!(
            r#"{{"algorithm":"{alg}","model":"SEPARABLE","d":2,"N":50,"epsilon":{eps},"delta":1e-6,
                "lipschitz_L":"separable_bound","replications":100,"master_seed":77,"engine_kind":"{engine}",
                "early_stop":true,"so_relax_factor":"N"}}"#
        ));
        let e = run_experiment(&cfg).expect("experiment runs");
        (
            e.curve[0].coverage_rate.unwrap_or(0.0),
            e.curve[0].mean_cost,
            e.failures(),
        )
    };
    let rows = [
        ("VAIDYA", run("VAIDYA", "VAIDYA")),
        ("RANDOM_WALK", run("VAIDYA", "RANDOM_WALK")),
        ("DIMRED", run("DIMRED", "VAIDYA")),
        ("SUBGRAD_BASELINE", run("SUBGRAD_BASELINE", "VAIDYA")),
    ];
    let all_covered = rows.iter().all(|(_, (c, _, f))| *c == 1.0 && *f == 0);
    let ordered = rows[2].1 .1 <= rows[0].1 .1;
    let detail = rows
        .iter()
        .map(|(name, (c, cost, f))| format!("{name} coverage {c} cost {cost:.3e} failures {f}"))
        .collect::<Vec<_>>()
        .join("; ");
    (
        all_covered && ordered,
        format!("{detail}; DIMRED cost <= VAIDYA cost: {ordered}"),
    )
}

struct Constant {
    dom: Vec<i64>,
}

impl StochasticOracle for Constant {
    fn domain(&self) -> &[i64] {
        &self.dom
    }
    fn sigma2(&self) -> f64 {
        0.0
    }
    fn sample(&self, _: &[i64], _: &mut dyn RngCore) -> f64 {
        1.0
    }
}

fn iteration_bound() -> Outcome {
    let mut worst = Vec::new();
    let mut ok = true;
    for n in [4i64, 10, 100, 1_000, 10_000, 100_000, 1_000_000] {
        let o = Constant { dom: vec![n] };
        let mut s = Sampler::new(&o, Stream::seed_from_u64(n as u64));
        let g = Guarantee::pgs(0.2, 1e-6).expect("valid guarantee");
        let sel = adaptive_sampling(&mut s, &Line::axis(n).expect("valid line"), g)
            .expect("solve succeeds");
        let bound = (n as f64).ln() / 1.5f64.ln() + 1.0;
        ok &= sel.iterations as f64 <= bound;
        worst.push(format!("N={n}: {} <= {bound:.2}", sel.iterations));
    }
    (ok, worst.join(", "))
}

/// 1000 models with `d = 1 + i mod 3` and `N` uniform on `{2, ..., 8}`.
fn brute_force() -> Outcome {
    const SOLVERS: [&str; 5] = ["AS", "EAS", "VAIDYA", "DIMRED", "MULTI_EAS"];
    let (eps, delta) = (0.05, 0.01);
    let results: Vec<Vec<(usize, bool, String)>> = (0..1000usize)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed_stream(31, &["brute-force", &i.to_string()]);
            let d = 1 + i % 3;
            let n = rng.gen_range(2..=8);
            let m = SeparableModel::random(d, n, 0.01, &mut rng).expect("valid model");
            let (_, fmin) = brute_force_min(|x| m.value(x), d, n).expect("small grid");
            let g = Guarantee::pgs(eps, delta).expect("valid guarantee");
            let mut out = Vec::new();
            for (k, name) in SOLVERS.iter().enumerate() {
                if k < 2 && d > 1 {
                    continue;
                }
                let mut s = Sampler::new(&m, Stream::from_rng(&mut rng).expect("seeded"))
                    .with_cap(1_000_000_000_000_000);
                let point = match k {
                    0 => adaptive_sampling(&mut s, &Line::axis(n).unwrap(), g).map(|r| r.point),
                    1 => enhanced_adaptive_sampling(&mut s, &Line::axis(n).unwrap(), g)
                        .map(|r| r.point),
                    2 => stochastic_vaidya(&mut s, g, Some(m.lipschitz()), VaidyaConfig::default())
                        .map(|r| r.point),
                    3 => dimension_reduction_solve(&mut s, g, DimRedConfig::default())
                        .map(|r| r.point),
                    _ => solve_recursive(&mut s, g).map(|r| r.point),
                };
                out.push(match point {
                    Ok(p) => (k, m.value(&p) - fmin <= eps, String::new()),
                    Err(e) => (k, false, format!("{name} model {i}: {e}")),
                });
            }
            out
        })
        .collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, name) in SOLVERS.iter().enumerate() {
        let runs: Vec<_> = results.iter().flatten().filter(|r| r.0 == k).collect();
        let good = runs.iter().filter(|r| r.1).count();
        let rate = good as f64 / runs.len() as f64;
        ok &= rate >= 0.99;
        parts.push(format!("{name} {good}/{}", runs.len()));
    }
    if let Some(err) = results.iter().flatten().find(|r| !r.2.is_empty()) {
        parts.push(format!("first error: {}", err.2));
    }
    (ok, format!("{} (need >= 99% each)", parts.join(", ")))
}

/// Separable convex terms plus convex functions of pairwise differences.
struct Coupled {
    centers: Vec<f64>,
    pair: f64,
}

impl Coupled {
    fn random(d: usize, n: i64, rng: &mut impl Rng) -> Self {
        Coupled {
            centers: (0..d).map(|_| rng.gen_range(1.0..=n as f64)).collect(),
            pair: rng.gen_range(0.0..1.0),
        }
    }

    fn f(&self, x: &[i64]) -> f64 {
        let mut v = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            v += (xi as f64 - self.centers[i]).powi(2);
            for &xj in &x[i + 1..] {
                v += self.pair * ((xi - xj) as f64).abs();
            }
        }
        v
    }
}

fn random_point(d: usize, n: i64, rng: &mut impl Rng) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(1.0..=n as f64)).collect()
}

/// Chain through the unit cube with corner `base` rather than the canonical one.
fn chain_in_cube(x: &[f64], base: Vec<i64>) -> NeighborChain<f64> {
    let frac: Vec<f64> = x.iter().zip(&base).map(|(xi, b)| xi - *b as f64).collect();
    let perm = consistent_permutation(&frac);
    let mut points = vec![base.clone()];
    let mut cur = base.clone();
    for &k in &perm {
        cur[k] += 1;
        points.push(cur.clone());
    }
    NeighborChain {
        base,
        perm,
        points,
        frac,
    }
}

fn lovasz_suite() -> Outcome {
    let mut rng = seed_stream(5, &["lovasz"]);
    let mut bad = Vec::new();
    for _ in 0..1000 {
        let d = rng.gen_range(1..=4);
        let n = rng.gen_range(2..=8);
        let m = SeparableModel::random(d, n, 0.0, &mut rng).unwrap();
        let x: Vec<i64> = (0..d).map(|_| rng.gen_range(1..=n)).collect();
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        if extension(&xf, &vec![n; d], |p| m.value(p)).unwrap() != m.value(&x) {
            bad.push("integral agreement");
            break;
        }
    }
    let (mut worst_mid, mut worst_sub, mut worst_face) =
        (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
    for _ in 0..1000 {
        let d = rng.gen_range(1..=4);
        let n = rng.gen_range(3..=8);
        let c = Coupled::random(d, n, &mut rng);
        let dims = vec![n; d];
        let (x, y) = (random_point(d, n, &mut rng), random_point(d, n, &mut rng));
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| (a + b) / 2.0).collect();
        let ext = |p: &[f64]| extension(p, &dims, |q| c.f(q)).unwrap();
        let (fx, fy) = (ext(&x), ext(&y));
        worst_mid = worst_mid.max(ext(&mid) - (fx + fy) / 2.0);
        let chain = neighbor_chain(&x, &dims).unwrap();
        let vals = chain_values(&chain, |p| c.f(p));
        let g = subgradient(&vals, &chain);
        let lin: f64 = g
            .iter()
            .zip(y.iter().zip(&x))
            .map(|(gi, (yi, xi))| gi * (yi - xi))
            .sum();
        worst_sub = worst_sub.max(lovasz_value(&vals, &chain) + lin - fy);
        let mut z = random_point(d, n, &mut rng);
        let k = rng.gen_range(0..d);
        z[k] = rng.gen_range(2..n) as f64;
        let canonical = neighbor_chain(&z, &dims).unwrap();
        let mut base = canonical.base.clone();
        base[k] -= 1;
        let other = chain_in_cube(&z, base);
        let a = lovasz_value(&chain_values(&canonical, |p| c.f(p)), &canonical);
        let b = lovasz_value(&chain_values(&other, |p| c.f(p)), &other);
        worst_face = worst_face.max((a - b).abs());
    }
    if worst_mid > 1e-9 {
        bad.push("midpoint convexity");
    }
    if worst_sub > 1e-9 {
        bad.push("subgradient inequality");
    }
    if worst_face > 1e-12 {
        bad.push("face consistency");
    }
    let mut minimizers = 0;
    for _ in 0..20 {
        let c = Coupled::random(2, 5, &mut rng);
        let (best, fmin) = brute_force_min(|p| c.f(p), 2, 5).unwrap();
        let ext = |p: &[f64]| extension(p, &[5, 5], |q| c.f(q)).unwrap();
        let at_best = ext(&[best[0] as f64, best[1] as f64]);
        let lattice_min = (0..=80)
            .flat_map(|i| (0..=80).map(move |j| [1.0 + i as f64 / 20.0, 1.0 + j as f64 / 20.0]))
            .map(|p| ext(&p))
            .fold(f64::INFINITY, f64::min);
        if at_best == fmin && lattice_min == fmin {
            minimizers += 1;
        } else {
            bad.push("minimizer equivalence");
            break;
        }
    }
    (
        bad.is_empty(),
        format!(
            "1000 integral points exact; worst midpoint excess {worst_mid:.2e}, worst subgradient excess {worst_sub:.2e} \
             (tolerance 1e-9); worst face gap {worst_face:.2e} (tolerance 1e-12); {minimizers}/20 minimizers exact on d=2 N=5{}",
            if bad.is_empty() { String::new() } else { format!("; violated: {}", bad.join(", ")) }
        ),
    )
}

const PREC: usize = 256;
const RM: RoundingMode = RoundingMode::ToEven;

fn big(x: f64) -> BigFloat {
    BigFloat::from_f64(x, PREC)
}

/// `|computed - exact| <= ulp(computed)`, evaluated in high precision.
fn within_ulp(computed: f64, exact: &BigFloat) -> bool {
    let ulp = f64::from_bits(computed.to_bits() + 1) - computed;
    let err = big(computed).sub(exact, PREC, RM).abs();
    err.cmp(&big(ulp)).is_some_and(|c| c <= 0)
}

/// `ceil(x)` of a positive high-precision number below `2^53`, found by
/// bisection over integers that convert to `f64` exactly.
fn big_ceil(x: &BigFloat) -> u64 {
    let c = x.ceil();
    let mut lo = 0u64;
    let mut hi = 1u64 << 53;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if big(mid as f64).cmp(&c).is_some_and(|o| o >= 0) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

fn log_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64))
        .collect()
}

fn formulas() -> Outcome {
    let mut cc = Consts::new().expect("constant cache");
    let two = big(2.0);
    let mut ln2over = |alpha: f64| two.div(&big(alpha), PREC, RM).ln(PREC, RM, &mut cc);
    let sigmas = log_grid(0.01, 100.0, 10);
    let alphas = log_grid(1e-12, 0.5, 10);
    let (mut h_ok, mut n_ok, mut n_exact, mut so_ok, mut so_exact) = (0, 0, 0, 0, 0);
    for &sigma in &sigmas {
        for &alpha in &alphas {
            let l = ln2over(alpha);
            let s2 = big(sigma).mul(&big(sigma), PREC, RM);
            let two_s2_l = two.mul(&s2, PREC, RM).mul(&l, PREC, RM);
            for n in [
                1u64,
                2,
                3,
                10,
                57,
                1_000,
                12_345,
                1_000_000,
                987_654_321,
                1_000_000_000_000,
            ] {
                let exact = two_s2_l.div(&big(n as f64), PREC, RM).sqrt(PREC, RM);
                h_ok += usize::from(within_ulp(
                    hoeffding_halfwidth(n, sigma, alpha).unwrap(),
                    &exact,
                ));
            }
            for h in log_grid(1e-3, 10.0, 10) {
                let raw = two_s2_l.div(&big(h).mul(&big(h), PREC, RM), PREC, RM);
                let exact = big_ceil(&raw).max(1);
                let got = samples_for_width(h, sigma, alpha).unwrap();
                n_ok += usize::from(got.abs_diff(exact) <= 1);
                n_exact += usize::from(got == exact);
            }
        }
    }
    let mut rng = seed_stream(6, &["formulas"]);
    for _ in 0..1000 {
        let d = rng.gen_range(1..=10usize);
        let n = rng.gen_range(2..=150i64);
        let sigma = 10f64.powf(rng.gen_range(-1.0..1.0));
        let eps = 10f64.powf(rng.gen_range(-2.0..0.5));
        let delta = 10f64.powf(rng.gen_range(-9.0..-0.5));
        let raw = big(4.0 * d as f64 * (n * n) as f64)
            .mul(&big(sigma).mul(&big(sigma), PREC, RM), PREC, RM)
            .div(&big(eps).mul(&big(eps), PREC, RM), PREC, RM)
            .mul(&ln2over(delta), PREC, RM);
        let exact = big_ceil(&raw).max(1);
        let got = so_sample_count(d, n, sigma, eps, delta).unwrap();
        so_ok += usize::from(got.abs_diff(exact) <= 1);
        so_exact += usize::from(got == exact);
    }
    (
        h_ok == 1000 && n_ok == 1000 && so_ok == 1000,
        format!(
            "half-width within 1 ulp at {h_ok}/1000; sample count within one unit at {n_ok}/1000 ({n_exact} exact); \
             separation-oracle count within one unit at {so_ok}/1000 ({so_exact} exact)"
        ),
    )
}

fn q(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// Exact Gram-Schmidt: `mu` and squared norms.
fn gram_schmidt(b: &[Vec<Rational>]) -> (Vec<Vec<Rational>>, Vec<Rational>) {
    let dot = |u: &[Rational], v: &[Rational]| {
        u.iter()
            .zip(v)
            .fold(Rational::zero(), |a, (x, y)| a + x * y)
    };
    let k = b.len();
    let mut star: Vec<Vec<Rational>> = Vec::with_capacity(k);
    let mut mu = vec![vec![Rational::zero(); k]; k];
    let mut norms = Vec::with_capacity(k);
    for i in 0..k {
        let mut v = b[i].clone();
        for j in 0..i {
            mu[i][j] = dot(&b[i], &star[j]) / &norms[j];
            for (vk, sk) in v.iter_mut().zip(&star[j]) {
                *vk -= &mu[i][j] * sk;
            }
        }
        norms.push(dot(&v, &v));
        star.push(v);
    }
    (mu, norms)
}

fn det(rows: &[Vec<Rational>]) -> Rational {
    let mut a = rows.to_vec();
    let n = a.len();
    let mut d = Rational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !a[r][c].is_zero()) else {
            return Rational::zero();
        };
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= &a[c][c];
        for r in c + 1..n {
            let f = &a[r][c] / &a[c][c];
            for k in c..n {
                let t = &f * &a[c][k];
                a[r][k] -= t;
            }
        }
    }
    d
}

fn lll() -> Outcome {
    let mut rng = seed_stream(7, &["lll"]);
    let (half, three_quarters) = (q(1) / q(2), q(3) / q(4));
    let mut failures = Vec::new();
    for t in 0..100 {
        let dim = rng.gen_range(2..=8);
        let rows: Vec<Vec<i64>> = loop {
            let rows: Vec<Vec<i64>> = (0..dim)
                .map(|_| (0..dim).map(|_| rng.gen_range(-50..=50)).collect())
                .collect();
            let exact: Vec<Vec<Rational>> = rows
                .iter()
                .map(|r| r.iter().map(|&v| q(v)).collect())
                .collect();
            if !det(&exact).is_zero() {
                break rows;
            }
        };
        let red = lll_reduce(
            &ExactBasis::from_integers(&rows).unwrap(),
            three_quarters.clone(),
        )
        .unwrap();
        let (mu, norms) = gram_schmidt(&red.vectors);
        let size = (0..dim).all(|i| (0..i).all(|j| mu[i][j].abs() <= half));
        let lovasz = (1..dim).all(|i| {
            let m = &mu[i][i - 1];
            norms[i] >= (&three_quarters - m * m) * &norms[i - 1]
        });
        let u: Vec<Vec<Rational>> = red
            .transform
            .iter()
            .map(|r| r.iter().map(|&v| q(v)).collect())
            .collect();
        let du = det(&u);
        let unimodular = du == Rational::one() || du == -Rational::one();
        let image = (0..dim).all(|i| {
            (0..dim).all(|j| {
                red.vectors[i][j] == q((0..dim).map(|k| red.transform[i][k] * rows[k][j]).sum())
            })
        });
        if !(size && lovasz && unimodular && image) {
            failures.push(format!(
                "basis {t}: size {size}, exchange {lovasz}, unimodular {unimodular}, image {image}"
            ));
        }
    }
    (
        failures.is_empty(),
        if failures.is_empty() {
            "100 bases in dimensions 2..8: size and exchange conditions hold exactly, unimodular change of basis".into()
        } else {
            failures.join("; ")
        },
    )
}

fn queue_sanity() -> Outcome {
    let mut rng = seed_stream(8, &["queue"]);
    let model = QueueModel::new(150).unwrap();
    let mut zero_ok = true;
    for _ in 0..20 {
        let mut sc = queue_scenario(&model, &mut rng).unwrap();
        sc.services.0.iter_mut().for_each(|s| *s = 0.0);
        sc.services.1.iter_mut().for_each(|s| *s = 0.0);
        let x = rng.gen_range(1..=150);
        zero_ok &= scenario_average_wait(&sc, 150, x).unwrap() == 0.0;
        let servers = rng.gen_range(1..=4);
        let run = simulate_fcfs(
            &sc.arrivals.0,
            &vec![0.0; sc.arrivals.0.len()],
            servers,
            false,
        )
        .unwrap();
        zero_ok &= run.waits.iter().all(|&w| w == 0.0);
    }

    // Integral of 75 + 25 sin(0.3 t) over [0, 2].
    let expected = 150.0 + 25.0 / 0.3 * (1.0 - 0.6f64.cos());
    let reps = 10_000;
    let counts: Vec<f64> = (0..reps)
        .map(|_| {
            nhpp_arrivals(lambda1, 100.0, 1.0, 2.0, &mut rng)
                .unwrap()
                .len() as f64
        })
        .collect();
    let mean = counts.iter().sum::<f64>() / reps as f64;
    let sd = (counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
    let se = sd / (reps as f64).sqrt();
    let nhpp_ok = (mean - expected).abs() <= 3.0 * se;
    let printed_ok = (mean - 160.90).abs() <= 3.0 * se;

    let oracle = QueueOracle::new(model, 10.0).unwrap();
    let mut rows = landscape_scan(&oracle, &line_points(150), 200, 2024).unwrap();
    rows.sort_by(|a, b| a.mean.total_cmp(&b.mean));
    let decile = &rows[..rows.len() / 10];
    let spread = decile[decile.len() - 1].mean - decile[0].mean;
    let width = decile.iter().map(|r| 2.0 * r.halfwidth).sum::<f64>() / decile.len() as f64;
    let flat_ok = spread < width;
    let xs: Vec<i64> = decile.iter().map(|r| r.x[0]).collect();
    (
        zero_ok && nhpp_ok && flat_ok,
        format!(
            "zero service gives zero waits: {zero_ok}; arrival count mean {mean:.3} +- {se:.3} vs integral {expected:.3}: {nhpp_ok} \
             (the figure 160.90 is {}within 3 standard errors); best decile x in [{}, {}] spans {spread:.4} \
             vs mean 95% interval width {width:.4}: {flat_ok}",
            if printed_ok { "" } else { "not " },
            xs.iter().min().unwrap(),
            xs.iter().max().unwrap()
        ),
    )
}

fn determinism() -> Outcome {
    let configs = [
        r#"{"algorithm":"EAS","model":"SEPARABLE","d":1,"N":[20,60],"epsilon":0.2,"delta":1e-6,"replications":10,"master_seed":9}"#,
        r#"{"algorithm":"DIMRED","model":"SEPARABLE","d":2,"N":12,"epsilon":0.3,"delta":0.01,"replications":6,"master_seed":9}"#,
        r#"{"algorithm":"VAIDYA","model":"SEPARABLE","d":2,"N":10,"epsilon":0.3,"delta":0.01,"lipschitz_L":"separable_bound","replications":4,"master_seed":9,"engine_kind":"RANDOM_WALK"}"#,
        r#"{"algorithm":"AS","model":"QUEUE","d":1,"N":30,"epsilon":2.0,"delta":0.1,"replications":2,"master_seed":9}"#,
    ];
    let mut same = 0;
    for text in configs {
        let cfg = config(text);
        std::env::set_var("CSO_THREADS", "1");
        let a = run_experiment(&cfg).unwrap().csv();
        std::env::set_var("CSO_THREADS", "4");
        let b = run_experiment(&cfg).unwrap().csv();
        std::env::remove_var("CSO_THREADS");
        let c = run_experiment(&cfg).unwrap().csv();
        same += usize::from(a == b && b == c);
    }
    (
        same == configs.len(),
        format!("{same}/{} configs give byte-identical CSV across three runs on 1, 4 and default threads", configs.len()),
    )
}
