use cso_core::bench::SeparableModel;
use cso_core::onedim::{adaptive_sampling, enhanced_adaptive_sampling, EasOp, Line};
use cso_core::{Guarantee, Sampler, StochasticOracle, Stream};
use proptest::prelude::*;
use rand::{RngCore, SeedableRng};

struct Table {
    dom: Vec<i64>,
    values: Vec<f64>,
}

impl Table {
    fn new(values: Vec<f64>) -> Self {
        Table {
            dom: vec![values.len() as i64],
            values,
        }
    }
}

impl StochasticOracle for Table {
    fn domain(&self) -> &[i64] {
        &self.dom
    }
    fn sigma2(&self) -> f64 {
        0.0
    }
    fn sample(&self, x: &[i64], _: &mut dyn RngCore) -> f64 {
        self.values[(x[0] - 1) as usize]
    }
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

/// Convex table from sorted slopes bounded away from zero.
fn convex_table(neg: Vec<f64>, pos: Vec<f64>) -> Vec<f64> {
    let mut slopes: Vec<f64> = neg.iter().map(|s| -s).chain(pos).collect();
    slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut v = vec![10.0];
    for s in slopes {
        v.push(v.last().unwrap() + s);
    }
    v
}

fn argmin(v: &[f64]) -> usize {
    (0..v.len())
        .min_by(|&i, &j| v[i].partial_cmp(&v[j]).unwrap())
        .unwrap()
}

#[test]
fn trisection_iterations_on_flat_objective() {
    for &n in &[4i64, 10, 100, 1_000, 10_000, 100_000, 1_000_000] {
        let o = Constant { dom: vec![n] };
        let mut s = Sampler::new(&o, Stream::seed_from_u64(n as u64));
        let sel = adaptive_sampling(
            &mut s,
            &Line::axis(n).unwrap(),
            Guarantee::pgs(0.2, 1e-6).unwrap(),
        )
        .unwrap();
        let bound = (n as f64).ln() / 1.5f64.ln() + 1.0;
        assert!(
            sel.iterations as f64 <= bound,
            "N={n}: {} > {bound}",
            sel.iterations
        );
    }
}

#[test]
fn trisection_interval_recurrence() {
    for seed in 0..50u64 {
        let mut rng = Stream::seed_from_u64(seed);
        let m = SeparableModel::random(1, 150, 1.0, &mut rng).unwrap();
        let mut s = Sampler::new(&m, Stream::seed_from_u64(100 + seed));
        let sel = adaptive_sampling(
            &mut s,
            &Line::axis(150).unwrap(),
            Guarantee::pgs(0.2, 1e-6).unwrap(),
        )
        .unwrap();
        for w in sel.intervals.windows(2) {
            assert!(
                w[1].size() <= 2 * w[0].size() / 3 + 1,
                "{:?}",
                sel.intervals
            );
        }
    }
}

#[test]
fn thinning_preserves_minimum_and_doubles_stride() {
    let mut thinned = 0;
    for seed in 0..50u64 {
        let mut rng = Stream::seed_from_u64(seed);
        let m = SeparableModel::random(1, 120, 1.0, &mut rng).unwrap();
        let mut s = Sampler::new(&m, Stream::seed_from_u64(500 + seed));
        let sel = enhanced_adaptive_sampling(
            &mut s,
            &Line::axis(120).unwrap(),
            Guarantee::pgs(0.2, 1e-6).unwrap(),
        )
        .unwrap();
        for st in &sel.steps {
            assert!(st.after.len() < st.before.len());
            if st.op == EasOp::TypeII {
                thinned += 1;
                assert_eq!(st.after.min(), st.before.min());
                assert_eq!(st.after.len(), st.before.len().div_ceil(2));
                assert_eq!(st.after.stride, 2 * st.before.stride);
            }
        }
    }
    assert!(thinned > 0);
}

#[test]
fn good_selection_on_separable_line() {
    let g = Guarantee::pgs(0.2, 1e-6).unwrap();
    let line = Line::axis(50).unwrap();
    for seed in 0..400u64 {
        let mut rng = Stream::seed_from_u64(seed);
        let m = SeparableModel::random(1, 50, 1.0, &mut rng).unwrap();
        let mut s = Sampler::new(&m, Stream::seed_from_u64(10_000 + seed));
        let a = adaptive_sampling(&mut s, &line, g).unwrap();
        let e = enhanced_adaptive_sampling(&mut s, &line, g).unwrap();
        assert!(m.value(&a.point) <= 0.2, "trisection seed {seed}");
        assert!(m.value(&e.point) <= 0.2, "enhanced seed {seed}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noiseless_solvers_find_the_minimizer(
        neg in prop::collection::vec(0.5f64..3.0, 0..30),
        pos in prop::collection::vec(0.5f64..3.0, 0..30),
        seed in any::<u64>(),
    ) {
        let v = convex_table(neg, pos);
        prop_assume!(v.len() >= 2);
        let best = argmin(&v) as i64 + 1;
        let o = Table::new(v);
        let n = o.dom[0];
        let g = Guarantee::pgs(0.1, 0.01).unwrap();
        let mut s = Sampler::new(&o, Stream::seed_from_u64(seed));
        let a = adaptive_sampling(&mut s, &Line::axis(n).unwrap(), g).unwrap();
        let e = enhanced_adaptive_sampling(&mut s, &Line::axis(n).unwrap(), g).unwrap();
        prop_assert_eq!(a.index, best);
        prop_assert_eq!(e.index, best);
    }
}
