#![allow(clippy::needless_range_loop)]

use cso_core::bench::{
    brute_force_min, lambda1, nhpp_arrivals, queue_scenario, scenario_average_wait, separable_g,
    simulate_fcfs, subgradient_baseline, QueueModel, SeparableModel, SubgradientConfig,
};
use cso_core::{Guarantee, Sampler, StochasticOracle, Stream};
use proptest::prelude::*;
use rand::{Rng, RngCore, SeedableRng};
use rand_distr::Distribution;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, k: usize) -> f64 {
    let h = (b - a) / (2 * k) as f64;
    let mut s = f(a) + f(b);
    for i in 1..2 * k {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn separable_examples() {
    assert!((separable_g(31, 100, 150).unwrap() - ((120.0f64 / 51.0).sqrt() - 1.0)).abs() < 1e-15);
    assert_eq!(separable_g(7, 7, 10).unwrap(), 0.0);
    assert!(separable_g(0, 1, 10).is_err());
    let m = SeparableModel::new(10, vec![1.0, 2.0], vec![3, 8], 0.0).unwrap();
    assert_eq!(
        brute_force_min(|x| m.value(x), 2, 10).unwrap(),
        (vec![3, 8], 0.0)
    );
}

#[test]
fn brute_force_small_cases() {
    let t = [3.0, 1.0, 2.0];
    assert_eq!(
        brute_force_min(|x| t[(x[0] - 1) as usize], 1, 3).unwrap(),
        (vec![2], 1.0)
    );
    // Ties go to the lexicographically smallest point.
    assert_eq!(brute_force_min(|_| 0.0, 2, 3).unwrap(), (vec![1, 1], 0.0));
    assert!(brute_force_min(|_| 0.0, 8, 10).is_err());

    let mut rng = Stream::seed_from_u64(1);
    for _ in 0..50 {
        let c: Vec<f64> = (0..2).map(|_| rng.gen_range(1.0..4.0)).collect();
        let w = rng.gen_range(0.0..1.0);
        let f = |x: &[i64]| {
            (x[0] as f64 - c[0]).powi(2)
                + (x[1] as f64 - c[1]).powi(2)
                + w * ((x[0] - x[1]) as f64).abs()
        };
        let mut best = (vec![0, 0], f64::INFINITY);
        for a in 1..=4 {
            for b in 1..=4 {
                if f(&[a, b]) < best.1 {
                    best = (vec![a, b], f(&[a, b]));
                }
            }
        }
        assert_eq!(brute_force_min(f, 2, 4).unwrap(), best);
    }
}

#[test]
fn nhpp_counts_match_the_intensity() {
    let reps = 10_000;
    let cuts = [0.0, 0.5, 1.0, 1.5, 2.0];
    let mut counts = [0u64; 4];
    let mut rng = Stream::seed_from_u64(2);
    for _ in 0..reps {
        for t in nhpp_arrivals(lambda1, 100.0, 1.0, 2.0, &mut rng).unwrap() {
            counts[cuts.iter().skip(1).position(|&c| t <= c).unwrap()] += 1;
        }
    }
    for i in 0..4 {
        let expect = simpson(lambda1, cuts[i], cuts[i + 1], 1000);
        let mean = counts[i] as f64 / reps as f64;
        let sd = (expect / reps as f64).sqrt();
        assert!(
            (mean - expect).abs() <= 3.0 * sd,
            "[{}, {}]: {mean} vs {expect}",
            cuts[i],
            cuts[i + 1]
        );
    }
    let total = simpson(lambda1, 0.0, 2.0, 1000);
    assert!((total - (150.0 + 25.0 / 0.3 * (1.0 - 0.6f64.cos()))).abs() < 1e-9);
}

#[test]
fn service_laws_match_their_moments() {
    let model = QueueModel::new(150).unwrap();
    let mut rng = Stream::seed_from_u64(3);
    let k = 200_000;
    let s1: Vec<f64> = (0..k)
        .map(|_| model.service1().unwrap().sample(&mut rng))
        .collect();
    let s2: Vec<f64> = (0..k)
        .map(|_| model.service2().unwrap().sample(&mut rng))
        .collect();
    for (s, mean, var) in [(&s1, 0.75, 0.1), (&s2, 0.65, 0.1)] {
        let m = s.iter().sum::<f64>() / k as f64;
        let v = s.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1) as f64;
        assert!((m - mean).abs() < 0.005, "mean {m}");
        assert!((v - var).abs() < 0.005, "var {v}");
    }
}

#[test]
fn instant_service_never_waits() {
    let arrivals = [0.1, 0.1, 0.2, 0.7, 0.7, 0.7];
    let run = simulate_fcfs(&arrivals, &[0.0; 6], 1, false).unwrap();
    assert!(run.waits.iter().all(|&w| w == 0.0));
}

#[test]
fn hand_worked_queue() {
    // One server: starts 0, 2, 3; waits 0, 1, 1.
    let run = simulate_fcfs(&[0.0, 1.0, 2.0], &[2.0, 1.0, 1.0], 1, false).unwrap();
    assert_eq!(run.starts, vec![0.0, 2.0, 3.0]);
    assert_eq!(run.waits, vec![0.0, 1.0, 1.0]);
    let run = simulate_fcfs(&[0.0, 1.0, 2.0], &[2.0, 1.0, 1.0], 2, false).unwrap();
    assert_eq!(run.waits, vec![0.0, 0.0, 0.0]);
}

fn random_stream(rng: &mut impl Rng, k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut t = 0.0;
    let arrivals = (0..k)
        .map(|_| {
            t += rng.gen_range(0.0..0.3);
            t
        })
        .collect();
    let services = (0..k).map(|_| rng.gen_range(0.0..1.5)).collect();
    (arrivals, services)
}

proptest! {
    #[test]
    fn queue_conserves_customers(seed in any::<u64>(), servers in 1usize..5, k in 0usize..60) {
        let mut rng = Stream::seed_from_u64(seed);
        let (a, s) = random_stream(&mut rng, k);
        let run = simulate_fcfs(&a, &s, servers, true).unwrap();
        for snap in &run.trace {
            prop_assert_eq!(snap.served + snap.waiting + snap.in_service, snap.arrived);
            prop_assert!(snap.in_service <= servers);
        }
        if let Some(last) = run.trace.last() {
            prop_assert_eq!(last.served, k);
        }
    }

    #[test]
    fn service_starts_follow_arrival_order(seed in any::<u64>(), servers in 1usize..5, k in 1usize..60) {
        let mut rng = Stream::seed_from_u64(seed);
        let (a, s) = random_stream(&mut rng, k);
        let run = simulate_fcfs(&a, &s, servers, false).unwrap();
        for w in run.starts.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        for i in 0..k {
            prop_assert!(run.waits[i] >= 0.0);
            prop_assert_eq!(run.starts[i] - a[i], run.waits[i]);
        }
    }

    #[test]
    fn extra_servers_never_add_wait(seed in any::<u64>(), servers in 1usize..6, k in 1usize..80) {
        let mut rng = Stream::seed_from_u64(seed);
        let (a, s) = random_stream(&mut rng, k);
        let w1: f64 = simulate_fcfs(&a, &s, servers, false).unwrap().waits.iter().sum();
        let w2: f64 = simulate_fcfs(&a, &s, servers + 1, false).unwrap().waits.iter().sum();
        prop_assert!(w2 <= w1 + 1e-9);
    }

    #[test]
    fn separable_model_is_zero_only_at_the_optimum(seed in any::<u64>(), d in 1usize..4, n in 2i64..12) {
        let mut rng = Stream::seed_from_u64(seed);
        let m = SeparableModel::random(d, n, 0.0, &mut rng).unwrap();
        let x: Vec<i64> = (0..d).map(|_| rng.gen_range(1..=n)).collect();
        let v = m.value(&x);
        prop_assert!(v >= 0.0);
        prop_assert_eq!(v == 0.0, x == m.optimum);
    }
}

#[test]
fn common_random_numbers_queue_one_monotone() {
    let model = QueueModel::new(40).unwrap();
    let mut rng = Stream::seed_from_u64(4);
    for _ in 0..20 {
        let sc = queue_scenario(&model, &mut rng).unwrap();
        let mut prev = f64::INFINITY;
        for x in 1..=40usize {
            let w: f64 = simulate_fcfs(&sc.arrivals.0, &sc.services.0, x, false)
                .unwrap()
                .waits
                .iter()
                .sum();
            assert!(w <= prev + 1e-9);
            prev = w;
        }
        assert!(scenario_average_wait(&sc, 40, 20).unwrap() >= 0.0);
    }
}

#[test]
fn queue_oracle_draws_independent_streams() {
    let o = cso_core::bench::QueueOracle::new(QueueModel::new(150).unwrap(), 10.0).unwrap();
    assert_eq!(o.sigma2(), 10.0);
    let mut rng = Stream::seed_from_u64(5);
    let a = o.sample(&[75], &mut rng);
    let b = o.sample(&[75], &mut rng);
    assert_ne!(a, b);
}

struct Flat {
    dom: Vec<i64>,
}

impl StochasticOracle for Flat {
    fn domain(&self) -> &[i64] {
        &self.dom
    }
    fn sigma2(&self) -> f64 {
        0.0
    }
    fn sample(&self, _: &[i64], _: &mut dyn RngCore) -> f64 {
        2.0
    }
}

#[test]
fn subgradient_baseline_on_exact_models() {
    let mut rng = Stream::seed_from_u64(6);
    for r in 0..10u64 {
        let m = SeparableModel::random(2, 20, 0.0, &mut rng).unwrap();
        let mut s = Sampler::new(&m, Stream::seed_from_u64(r));
        let sol = subgradient_baseline(
            &mut s,
            Guarantee::pgs(0.05, 0.01).unwrap(),
            m.lipschitz(),
            SubgradientConfig::default(),
        )
        .unwrap();
        assert!(
            m.value(&sol.point) <= 0.05,
            "{:?} vs {:?}",
            sol.point,
            m.optimum
        );
        assert_eq!(sol.iterations, sol.budget);
    }
    let flat = Flat { dom: vec![9, 9] };
    let mut s = Sampler::new(&flat, Stream::seed_from_u64(7));
    let sol = subgradient_baseline(
        &mut s,
        Guarantee::pgs(0.1, 0.1).unwrap(),
        0.0,
        SubgradientConfig::default(),
    )
    .unwrap();
    assert_eq!(sol.iterations, 0);
    assert_eq!(sol.estimate.mean, 2.0);
}
