//! Quick property checks run by `cso selftest`.

use cso_core::bench::{brute_force_min, simulate_fcfs, SeparableModel};
use cso_core::dimred::{lll_reduce, LatticeBasis};
use cso_core::lovasz::extension;
use cso_core::onedim::{enhanced_adaptive_sampling, Line};
use cso_core::oracle::{hoeffding_halfwidth, samples_for_width};
use cso_core::{Guarantee, Rational, Sampler, StochasticOracle};
use num_traits::{One, Zero};
use rand::{Rng, RngCore};

use crate::seeds::seed_stream;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, run: impl FnOnce() -> Result<String, String>) -> Check {
    match run() {
        Ok(detail) => Check {
            name,
            passed: true,
            detail,
        },
        Err(detail) => Check {
            name,
            passed: false,
            detail,
        },
    }
}

/// Runs every check; the outcome is deterministic.
pub fn run_selftest() -> Vec<Check> {
    vec![
        check("sample count is minimal", hoeffding_minimality),
        check("extension agrees on the grid", lovasz_agreement),
        check("extension is midpoint convex", lovasz_convexity),
        check("LLL output is reduced and unimodular", lll_bases),
        check("noiseless EAS finds the optimum", noiseless_eas),
        check("zero service means zero wait", zero_service),
        check("seed streams reproduce", seed_reproduction),
    ]
}

fn hoeffding_minimality() -> Result<String, String> {
    let mut rng = seed_stream(0, &["selftest", "hoeffding"]);
    for _ in 0..1000 {
        let sigma = rng.gen_range(0.1..10.0);
        let alpha = 10f64.powf(rng.gen_range(-9.0..-0.5));
        let h = rng.gen_range(0.01..5.0);
        let n = samples_for_width(h, sigma, alpha).map_err(|e| e.to_string())?;
        let at = hoeffding_halfwidth(n, sigma, alpha).map_err(|e| e.to_string())?;
        let before = if n > 1 {
            hoeffding_halfwidth(n - 1, sigma, alpha).map_err(|e| e.to_string())?
        } else {
            f64::INFINITY
        };
        if at > h || before <= h {
            return Err(format!(
                "n={n} is not the least count for h={h}, sigma={sigma}, alpha={alpha}"
            ));
        }
    }
    Ok("1000 parameter draws".into())
}

fn separable(d: usize, n: i64, tag: &str) -> SeparableModel {
    let mut rng = seed_stream(0, &["selftest", tag]);
    SeparableModel::random(d, n, 0.0, &mut rng).expect("valid model")
}

fn lovasz_agreement() -> Result<String, String> {
    let m = separable(3, 6, "agree");
    let mut count = 0;
    for a in 1..=6 {
        for b in 1..=6 {
            for c in 1..=6 {
                let x = [a, b, c];
                let xf = [a as f64, b as f64, c as f64];
                let v = extension(&xf, StochasticOracle::domain(&m), |p| m.value(p))
                    .map_err(|e| e.to_string())?;
                if v != m.value(&x) {
                    return Err(format!(
                        "extension {v} differs from f = {} at {x:?}",
                        m.value(&x)
                    ));
                }
                count += 1;
            }
        }
    }
    Ok(format!("{count} grid points"))
}

fn lovasz_convexity() -> Result<String, String> {
    let m = separable(3, 8, "convex");
    let dims = StochasticOracle::domain(&m).to_vec();
    let mut rng = seed_stream(0, &["selftest", "midpoint"]);
    for _ in 0..1000 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(1.0..8.0)).collect();
        let y: Vec<f64> = (0..3).map(|_| rng.gen_range(1.0..8.0)).collect();
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let f = |p: &[f64]| extension(p, &dims, |q| m.value(q)).map_err(|e| e.to_string());
        let (fx, fy, fm) = (f(&x)?, f(&y)?, f(&mid)?);
        if fm > 0.5 * (fx + fy) + 1e-9 {
            return Err(format!("midpoint of {x:?} and {y:?} violates convexity"));
        }
    }
    Ok("1000 pairs".into())
}

fn lll_bases() -> Result<String, String> {
    let mut rng = seed_stream(0, &["selftest", "lll"]);
    let delta = Rational::new(3.into(), 4.into());
    let int = |v: i64| Rational::from_integer(v.into());
    for _ in 0..20 {
        let d = rng.gen_range(2..=5);
        let rows: Vec<Vec<i64>> = loop {
            let rows: Vec<Vec<i64>> = (0..d)
                .map(|_| (0..d).map(|_| rng.gen_range(-50..=50)).collect())
                .collect();
            let exact: Vec<Vec<Rational>> = rows
                .iter()
                .map(|r| r.iter().map(|&v| int(v)).collect())
                .collect();
            if !rational_det(&exact).is_zero() {
                break rows;
            }
        };
        let basis = LatticeBasis::<Rational>::from_integers(&rows).map_err(|e| e.to_string())?;
        let reduced = lll_reduce(&basis, delta.clone()).map_err(|e| e.to_string())?;
        if !reduced.is_reduced(&delta).map_err(|e| e.to_string())? {
            return Err(format!("basis {rows:?} was not reduced"));
        }
        let u: Vec<Vec<Rational>> = reduced
            .transform
            .iter()
            .map(|r| r.iter().map(|&v| int(v)).collect())
            .collect();
        let det = rational_det(&u);
        if det != Rational::one() && det != -Rational::one() {
            return Err(format!("basis {rows:?} has a non-unimodular transform"));
        }
        for (i, v) in reduced.vectors.iter().enumerate() {
            for (j, x) in v.iter().enumerate() {
                let want = (0..d).fold(Rational::zero(), |acc, k| {
                    acc + int(reduced.transform[i][k] * rows[k][j])
                });
                if *x != want {
                    return Err(format!(
                        "basis {rows:?}: reduced vectors are not the transform image"
                    ));
                }
            }
        }
    }
    Ok("20 random bases".into())
}

fn rational_det(rows: &[Vec<Rational>]) -> Rational {
    let mut a = rows.to_vec();
    let n = a.len();
    let mut det = Rational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !a[r][c].is_zero()) else {
            return Rational::zero();
        };
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= a[c][c].clone();
        for r in c + 1..n {
            let f = a[r][c].clone() / a[c][c].clone();
            for k in c..n {
                let t = f.clone() * a[c][k].clone();
                a[r][k] -= t;
            }
        }
    }
    det
}

fn noiseless_eas() -> Result<String, String> {
    for n in [2, 7, 40, 150] {
        let m = separable(1, n, "eas");
        let mut sampler = Sampler::new(&m, seed_stream(0, &["selftest", "eas-run"]));
        let g = Guarantee::pgs(0.1, 0.01).map_err(|e| e.to_string())?;
        let sel =
            enhanced_adaptive_sampling(&mut sampler, &Line::axis(n).map_err(|e| e.to_string())?, g)
                .map_err(|e| e.to_string())?;
        let (best, _) = brute_force_min(|x| m.value(x), 1, n).map_err(|e| e.to_string())?;
        if m.value(&sel.point) != m.value(&best) {
            return Err(format!("N={n}: chose {:?}, optimum {:?}", sel.point, best));
        }
    }
    Ok("N in {2, 7, 40, 150}".into())
}

fn zero_service() -> Result<String, String> {
    let mut rng = seed_stream(0, &["selftest", "queue"]);
    let mut arrivals: Vec<f64> = (0..500).map(|_| rng.gen_range(0.0..2.0)).collect();
    arrivals.sort_by(f64::total_cmp);
    let run = simulate_fcfs(&arrivals, &vec![0.0; arrivals.len()], 1, false)
        .map_err(|e| e.to_string())?;
    if run.waits.iter().any(|&w| w != 0.0) {
        return Err("a customer waited with zero service times".into());
    }
    Ok(format!("{} customers", run.waits.len()))
}

fn seed_reproduction() -> Result<String, String> {
    let mut a = seed_stream(42, &["x", "1"]);
    let mut b = seed_stream(42, &["x", "1"]);
    let mut c = seed_stream(42, &["x", "2"]);
    let same = (0..1000).all(|_| a.next_u64() == b.next_u64());
    let differ = (0..1000).any(|_| a.next_u64() != c.next_u64());
    if same && differ {
        Ok("1000 draws".into())
    } else {
        Err("streams do not reproduce or do not separate".into())
    }
}
