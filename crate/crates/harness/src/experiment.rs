//! Seeded replication studies: one solve per `(N, replicate)`, run on a
//! worker pool, with exact cost accounting and a CSV record per run.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use cso_core::bench::{
    subgradient_baseline, QueueModel, QueueOracle, SeparableModel, SubgradientConfig,
};
use cso_core::cutplane::{accelerated_vaidya_iz, stochastic_vaidya, VaidyaConfig};
use cso_core::dimred::{dimension_reduction_solve, DimRedConfig};
use cso_core::multieas::solve_recursive;
use cso_core::onedim::{adaptive_sampling, adaptive_sampling_iz, enhanced_adaptive_sampling, Line};
use cso_core::{Guarantee, Sampler, StochasticOracle};
use rayon::prelude::*;

use crate::config::{Algorithm, ExperimentConfig, Model};
use crate::error::{HarnessError, Result};
use crate::seeds::{seed_key, seed_tag};

pub const CSV_HEADER: &str =
    "algorithm,model,d,N,epsilon,delta,replicate,seed,total_samples,wall_ms,solution,gap,success";

/// Worker pool capped by `CSO_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("CSO_THREADS") {
        let k: usize = v.trim().parse().map_err(|_| {
            HarnessError::Config(format!("CSO_THREADS must be a positive integer, got {v:?}"))
        })?;
        if k == 0 {
            return Err(HarnessError::Config("CSO_THREADS must be positive".into()));
        }
        b = b.num_threads(k);
    }
    b.build()
        .map_err(|e| HarnessError::Config(format!("cannot start worker pool: {e}")))
}

/// One benchmark instance.
pub enum Instance {
    Separable(SeparableModel),
    Queue(QueueOracle),
}

impl Instance {
    pub fn oracle(&self) -> &dyn StochasticOracle {
        match self {
            Instance::Separable(m) => m,
            Instance::Queue(q) => q,
        }
    }

    /// Instance for replicate `rep` at grid size `n`; shared by every
    /// algorithm run with the same master seed.
    pub fn build(cfg: &ExperimentConfig, n: i64, rep: usize) -> Result<Self> {
        match cfg.model {
            Model::Separable => {
                let (d, ns, r) = (cfg.d.to_string(), n.to_string(), rep.to_string());
                let mut rng = crate::seeds::seed_stream(
                    cfg.master_seed,
                    &["model", cfg.model.name(), &d, &ns, &r],
                );
                Ok(Instance::Separable(SeparableModel::random(
                    cfg.d,
                    n,
                    cfg.noise_sigma,
                    &mut rng,
                )?))
            }
            Model::Queue => Ok(Instance::Queue(QueueOracle::new(
                QueueModel::new(n)?,
                cfg.queue_sigma2,
            )?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub model: Model,
    pub d: usize,
    pub n: i64,
    pub epsilon: f64,
    pub delta: f64,
    pub replicate: usize,
    pub seed: u64,
    pub total_samples: u64,
    pub wall_ms: u128,
    pub solution: Option<Vec<i64>>,
    /// True optimality gap, when the model's optimum is known.
    pub gap: Option<f64>,
    pub success: Option<bool>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn csv_line(&self) -> String {
        let solution = self
            .solution
            .as_ref()
            .map(|p| {
                p.iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(";")
            })
            .unwrap_or_default();
        let gap = self.gap.map(|g| g.to_string()).unwrap_or_default();
        let success = match (&self.error, self.success) {
            (Some(_), _) => "error".to_string(),
            (None, Some(s)) => s.to_string(),
            (None, None) => "NA".to_string(),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.algorithm.name(),
            self.model.name(),
            self.d,
            self.n,
            self.epsilon,
            self.delta,
            self.replicate,
            self.seed,
            self.total_samples,
            self.wall_ms,
            solution,
            gap,
            success
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostRow {
    pub n: i64,
    pub mean_cost: f64,
    pub std_cost: f64,
    /// `None` when the model's optimum is unknown.
    pub coverage_rate: Option<f64>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub curve: Vec<CostRow>,
    pub records: Vec<RunRecord>,
}

impl Experiment {
    pub fn csv(&self) -> String {
        records_csv(&self.records)
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }
}

pub fn records_csv(records: &[RunRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{}", r.csv_line());
    }
    out
}

pub fn write_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    std::fs::write(path, records_csv(records))?;
    Ok(())
}

/// Dispatches one solve and returns the chosen grid point.
pub fn solve(
    cfg: &ExperimentConfig,
    n: i64,
    sampler: &mut Sampler<'_>,
) -> cso_core::Result<Vec<i64>> {
    let relax = cfg.so_relax_factor.factor(n);
    let vaidya = VaidyaConfig {
        engine: cfg.engine_kind.into(),
        so_relax: relax,
        early_stop: cfg.early_stop,
        ..VaidyaConfig::default()
    };
    let pgs = || Guarantee::pgs(cfg.epsilon.unwrap_or(f64::NAN), cfg.delta);
    let iz = || Guarantee::pcs_iz(cfg.iz_c.unwrap_or(f64::NAN), cfg.delta);
    let lipschitz = cfg.lipschitz_for(n);
    Ok(match cfg.algorithm {
        Algorithm::As => adaptive_sampling(sampler, &Line::axis(n)?, pgs()?)?.point,
        Algorithm::AsIz => adaptive_sampling_iz(sampler, &Line::axis(n)?, iz()?)?.point,
        Algorithm::Eas => enhanced_adaptive_sampling(sampler, &Line::axis(n)?, pgs()?)?.point,
        Algorithm::Vaidya => stochastic_vaidya(sampler, pgs()?, lipschitz, vaidya)?.point,
        Algorithm::VaidyaAcc => accelerated_vaidya_iz(sampler, iz()?, lipschitz, vaidya)?.point,
        Algorithm::Dimred => {
            let dcfg = DimRedConfig {
                engine: cfg.engine_kind.into(),
                so_relax: relax,
                ..DimRedConfig::default()
            };
            dimension_reduction_solve(sampler, pgs()?, dcfg)?.point
        }
        Algorithm::MultiEas => solve_recursive(sampler, pgs()?)?.point,
        Algorithm::SubgradBaseline => {
            let scfg = SubgradientConfig {
                early_stop: cfg.early_stop,
                ..SubgradientConfig::default()
            };
            let l = lipschitz.ok_or_else(|| {
                cso_core::Error::InvalidArgument("baseline needs a Lipschitz constant".into())
            })?;
            subgradient_baseline(sampler, pgs()?, l, scfg)?.point
        }
    })
}

/// Runs replicate `rep` at grid size `n`. Solver failures are recorded, not raised.
pub fn run_one(cfg: &ExperimentConfig, n: i64, rep: usize) -> RunRecord {
    let (d, ns, r) = (cfg.d.to_string(), n.to_string(), rep.to_string());
    let key = seed_key(
        cfg.master_seed,
        &["solve", cfg.algorithm.name(), cfg.model.name(), &d, &ns, &r],
    );
    let mut rec = RunRecord {
        algorithm: cfg.algorithm,
        model: cfg.model,
        d: cfg.d,
        n,
        epsilon: cfg.precision(),
        delta: cfg.delta,
        replicate: rep,
        seed: seed_tag(&key),
        total_samples: 0,
        wall_ms: 0,
        solution: None,
        gap: None,
        success: None,
        error: None,
    };
    let inst = match Instance::build(cfg, n, rep) {
        Ok(i) => i,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    let stream = <cso_core::Stream as rand::SeedableRng>::from_seed(key);
    let mut sampler = Sampler::new(inst.oracle(), stream)
        .with_cap(cfg.sample_cap)
        .with_ledger();
    let t0 = Instant::now();
    let out = solve(cfg, n, &mut sampler);
    if cfg.record_wall_time {
        rec.wall_ms = t0.elapsed().as_millis();
    }
    rec.total_samples = sampler.calls();
    let tallied: u64 = sampler.ledger().map_or(0, |l| l.values().sum());
    match out {
        Err(e) => rec.error = Some(e.to_string()),
        Ok(_) if tallied != rec.total_samples => {
            rec.error = Some(format!(
                "cost accounting mismatch: {tallied} tallied, {} counted",
                rec.total_samples
            ));
        }
        Ok(p) => {
            if let Instance::Separable(m) = &inst {
                let gap = m.value(&p);
                rec.gap = Some(gap);
                rec.success = Some(if cfg.algorithm.is_iz() {
                    p == m.optimum
                } else {
                    gap <= cfg.precision()
                });
            }
            rec.solution = Some(p);
        }
    }
    rec
}

fn summarize(n: i64, recs: &[RunRecord], truth_known: bool) -> CostRow {
    let k = recs.len() as f64;
    let mean = recs.iter().map(|r| r.total_samples as f64).sum::<f64>() / k;
    let var = if recs.len() > 1 {
        recs.iter()
            .map(|r| (r.total_samples as f64 - mean).powi(2))
            .sum::<f64>()
            / (k - 1.0)
    } else {
        0.0
    };
    let coverage =
        truth_known.then(|| recs.iter().filter(|r| r.success == Some(true)).count() as f64 / k);
    CostRow {
        n,
        mean_cost: mean,
        std_cost: var.sqrt(),
        coverage_rate: coverage,
        failures: recs.iter().filter(|r| r.error.is_some()).count(),
    }
}

/// Every replicate at every grid size, ordered by `(N, replicate)`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    cfg.validate()?;
    let sizes = cfg.n.values();
    let jobs: Vec<(i64, usize)> = sizes
        .iter()
        .flat_map(|&n| (0..cfg.replications).map(move |r| (n, r)))
        .collect();
    let pool = thread_pool()?;
    let records: Vec<RunRecord> =
        pool.install(|| jobs.par_iter().map(|&(n, r)| run_one(cfg, n, r)).collect());
    let curve = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            summarize(
                n,
                &records[i * cfg.replications..(i + 1) * cfg.replications],
                cfg.model == Model::Separable,
            )
        })
        .collect();
    Ok(Experiment { curve, records })
}
