//! Experiment configuration, read from a single JSON document. Unknown keys
//! are rejected and algorithm/model compatibility is checked before any run.

use std::path::{Path, PathBuf};

use cso_core::cutplane::EngineKind;
use serde::{Deserialize, Serialize};

use crate::error::{config_error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Algorithm {
    As,
    AsIz,
    Eas,
    Vaidya,
    VaidyaAcc,
    Dimred,
    MultiEas,
    SubgradBaseline,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::As => "AS",
            Algorithm::AsIz => "AS_IZ",
            Algorithm::Eas => "EAS",
            Algorithm::Vaidya => "VAIDYA",
            Algorithm::VaidyaAcc => "VAIDYA_ACC",
            Algorithm::Dimred => "DIMRED",
            Algorithm::MultiEas => "MULTI_EAS",
            Algorithm::SubgradBaseline => "SUBGRAD_BASELINE",
        }
    }

    /// Exact-optimum guarantee driven by `iz_c` instead of `epsilon`.
    pub fn is_iz(self) -> bool {
        matches!(self, Algorithm::AsIz | Algorithm::VaidyaAcc)
    }

    fn one_dimensional(self) -> bool {
        matches!(self, Algorithm::As | Algorithm::AsIz | Algorithm::Eas)
    }

    fn needs_lipschitz(self) -> bool {
        matches!(
            self,
            Algorithm::Vaidya | Algorithm::VaidyaAcc | Algorithm::SubgradBaseline
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Model {
    Separable,
    Queue,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Separable => "SEPARABLE",
            Model::Queue => "QUEUE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Engine {
    #[default]
    Vaidya,
    AnalyticCenter,
    RandomWalk,
}

impl From<Engine> for EngineKind {
    fn from(e: Engine) -> Self {
        match e {
            Engine::Vaidya => EngineKind::Vaidya,
            Engine::AnalyticCenter => EngineKind::AnalyticCenter,
            Engine::RandomWalk => EngineKind::RandomWalk,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSizes {
    One(i64),
    Many(Vec<i64>),
}

impl GridSizes {
    pub fn values(&self) -> Vec<i64> {
        match self {
            GridSizes::One(n) => vec![*n],
            GridSizes::Many(v) => v.clone(),
        }
    }
}

/// A Lipschitz constant, or the bound that holds for every random separable model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Lipschitz {
    Value(f64),
    Named(LipschitzRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzRule {
    SeparableBound,
}

/// Separation-oracle relaxation: a fixed factor or the grid size `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Relax {
    Factor(f64),
    Named(RelaxRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelaxRule {
    N,
}

impl Default for Relax {
    fn default() -> Self {
        Relax::Factor(1.0)
    }
}

impl Relax {
    pub fn factor(self, n: i64) -> f64 {
        match self {
            Relax::Factor(f) => f,
            Relax::Named(RelaxRule::N) => n as f64,
        }
    }
}

fn default_sigma() -> f64 {
    1.0
}

fn default_queue_sigma2() -> f64 {
    10.0
}

fn default_cap() -> u64 {
    cso_core::oracle::DEFAULT_SAMPLE_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub model: Model,
    pub d: usize,
    #[serde(rename = "N")]
    pub n: GridSizes,
    #[serde(default)]
    pub epsilon: Option<f64>,
    pub delta: f64,
    #[serde(default)]
    pub iz_c: Option<f64>,
    #[serde(default, rename = "lipschitz_L")]
    pub lipschitz: Option<Lipschitz>,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub engine_kind: Engine,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    /// Noise standard deviation of the separable model.
    #[serde(default = "default_sigma")]
    pub noise_sigma: f64,
    /// Variance bound handed to solvers on the queueing model.
    #[serde(default = "default_queue_sigma2")]
    pub queue_sigma2: f64,
    #[serde(default)]
    pub so_relax_factor: Relax,
    #[serde(default)]
    pub early_stop: bool,
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default = "default_cap")]
    pub sample_cap: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ExperimentConfig::from_json(&std::fs::read_to_string(path)?)
    }

    /// Precision written to the CSV: `epsilon`, or `c` for indifference-zone runs.
    pub fn precision(&self) -> f64 {
        if self.algorithm.is_iz() {
            self.iz_c.unwrap_or(f64::NAN)
        } else {
            self.epsilon.unwrap_or(f64::NAN)
        }
    }

    pub fn lipschitz_for(&self, n: i64) -> Option<f64> {
        self.lipschitz.map(|l| match l {
            Lipschitz::Value(v) => v,
            Lipschitz::Named(LipschitzRule::SeparableBound) => {
                cso_core::bench::separable_lipschitz_bound(n)
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        let alg = self.algorithm;
        if self.d == 0 {
            return config_error("d must be at least 1");
        }
        let sizes = self.n.values();
        if sizes.is_empty() {
            return config_error("N list is empty");
        }
        if let Some(n) = sizes.iter().find(|&&n| n < 2) {
            return config_error(format!("every N must be at least 2, got {n}"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return config_error("delta must lie in (0, 1)");
        }
        if self.replications == 0 {
            return config_error("replications must be positive");
        }
        if alg.is_iz() {
            match self.iz_c {
                Some(c) if c > 0.0 => {}
                _ => return config_error(format!("{} requires a positive iz_c", alg.name())),
            }
        } else {
            match self.epsilon {
                Some(e) if e > 0.0 => {}
                _ => return config_error(format!("{} requires a positive epsilon", alg.name())),
            }
        }
        if alg.one_dimensional() && self.d != 1 {
            return config_error(format!("{} is one-dimensional; d must be 1", alg.name()));
        }
        if self.model == Model::Queue && self.d != 1 {
            return config_error("the queueing model has one decision variable; d must be 1");
        }
        if alg.needs_lipschitz() {
            match self.lipschitz {
                Some(Lipschitz::Value(v)) if v >= 0.0 => {}
                Some(Lipschitz::Named(LipschitzRule::SeparableBound))
                    if self.model == Model::Separable => {}
                Some(Lipschitz::Named(_)) => {
                    return config_error(
                        "lipschitz_L \"separable_bound\" only applies to the SEPARABLE model",
                    )
                }
                _ => return config_error(format!("{} requires lipschitz_L", alg.name())),
            }
        }
        if !(self.noise_sigma >= 0.0) || !(self.queue_sigma2 >= 0.0) {
            return config_error("noise parameters must be nonnegative");
        }
        if let Relax::Factor(f) = self.so_relax_factor {
            if !(f > 0.0) {
                return config_error("so_relax_factor must be positive");
            }
        }
        if self.sample_cap == 0 {
            return config_error("sample_cap must be positive");
        }
        Ok(())
    }
}
