//! Batch experiments: seeded repeats of several algorithm configurations on
//! one environment, aggregated into a [`ResultTable`] with rank statistics.
//!
//! Plans are TOML documents:
//!
//! ```toml
//! environment = "CartPole"
//! repeats = 30
//! base_seed = 1
//!
//! [[config]]
//! label = "SMBNE DynSet 10"
//! algorithm = "smbne"
//! input_set = "dyn"
//! num_s = 10
//!
//! [[config]]
//! label = "CGP MutRate 5"
//! algorithm = "cgp"
//! mutation_rate = 0.05
//! ```
//!
//! Repeat `j` of every configuration runs with seed `base_seed + j`.

mod report;
pub mod stats;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use report::{emit_results, read_results_csv, results_csv, StoredResults};
pub use stats::{conover_posthoc, kruskal_wallis, KruskalWallis};

use crate::cgp::CgpConfig;
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::phd::InputStrategy;
use crate::smbne::{Algorithm, Archive, RunResult, SmbneConfig};

/// Significance level used when reporting test outcomes.
pub const ALPHA: f64 = 0.05;

/// Default episode budget per environment: 20 + 3000 and 20 + 5000.
pub fn default_budget(env: EnvKind) -> usize {
    match env {
        EnvKind::CartPole => 3020,
        EnvKind::MountainCar => 5020,
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PlanEntry {
    pub label: String,
    /// `smbne`, `cgp` or `rs`.
    pub algorithm: String,
    pub budget: Option<usize>,
    /// Per-gene mutation rate, for the CGP baseline and for the surrogate
    /// search of SMB-NE.
    pub mutation_rate: Option<f64>,
    /// `pre`, `init`, `lhs` or `dyn`.
    pub input_set: Option<String>,
    pub num_s: Option<usize>,
    pub lhs_samples: Option<usize>,
    pub reference: Option<PathBuf>,
    pub surrogate_evals: Option<usize>,
    pub num_m: Option<usize>,
    pub init_size: Option<usize>,
}

impl PlanEntry {
    pub fn to_algorithm(&self, env: EnvKind) -> Result<Algorithm> {
        let budget = self.budget.unwrap_or_else(|| default_budget(env));
        let bad = |m: String| Error::InvalidConfig(format!("config {:?}: {m}", self.label));
        let algorithm = match self.algorithm.to_ascii_lowercase().as_str() {
            "rs" | "random" => Algorithm::Rs { budget },
            "cgp" | "es" => Algorithm::Cgp {
                mutation_rate: self.mutation_rate.unwrap_or(0.05),
                budget,
            },
            "smbne" | "smb-ne" => {
                let num_s = self.num_s.unwrap_or(5);
                let strategy = match self.input_set.as_deref().unwrap_or("dyn") {
                    "dyn" => InputStrategy::Dyn { num_s },
                    "init" => InputStrategy::Init { num_s },
                    "pre" => InputStrategy::Pre {
                        num_s,
                        path: self.reference.clone(),
                    },
                    "lhs" => match self.lhs_samples {
                        Some(sample_count) => InputStrategy::Lhs { sample_count },
                        None => InputStrategy::lhs_for(env),
                    },
                    other => return Err(bad(format!("unknown input set {other:?}"))),
                };
                let mut cfg = SmbneConfig::new(strategy, budget);
                if let Some(r) = self.mutation_rate {
                    cfg.es_mutation_rate = r;
                }
                if let Some(s) = self.surrogate_evals {
                    cfg.surrogate_evals = s;
                }
                if let Some(m) = self.num_m {
                    cfg.num_m = m;
                }
                if let Some(k) = self.init_size {
                    cfg.init_size = k;
                }
                Algorithm::Smbne(cfg)
            }
            other => return Err(bad(format!("unknown algorithm {other:?}"))),
        };
        algorithm.validate().map_err(|e| bad(e.to_string()))?;
        Ok(algorithm)
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CgpOverrides {
    pub nodes: Option<usize>,
    pub arity: Option<usize>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    environment: String,
    #[serde(default = "default_repeats")]
    repeats: usize,
    #[serde(default)]
    base_seed: u64,
    output: Option<PathBuf>,
    workers: Option<usize>,
    #[serde(default)]
    cgp: CgpOverrides,
    config: Vec<PlanEntry>,
}

fn default_repeats() -> usize {
    30
}

#[derive(Clone, Debug)]
pub struct ExperimentPlan {
    pub env: EnvKind,
    pub configs: Vec<(String, Algorithm)>,
    pub repeats: usize,
    pub base_seed: u64,
    pub output: Option<PathBuf>,
    pub workers: Option<usize>,
    pub cgp: CgpConfig,
}

impl ExperimentPlan {
    pub fn new(env: EnvKind, configs: Vec<(String, Algorithm)>, repeats: usize, base_seed: u64) -> Result<Self> {
        let plan = ExperimentPlan {
            env,
            configs,
            repeats,
            base_seed,
            output: None,
            workers: None,
            cgp: CgpConfig::for_env(env),
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: PlanFile = toml::from_str(text).map_err(|e| Error::Parse {
            what: "plan file",
            detail: e.to_string(),
        })?;
        let env: EnvKind = file.environment.parse()?;
        let configs = file
            .config
            .iter()
            .map(|c| Ok((c.label.clone(), c.to_algorithm(env)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut cgp = CgpConfig::for_env(env);
        if let Some(n) = file.cgp.nodes {
            cgp.num_nodes = n;
        }
        if let Some(a) = file.cgp.arity {
            cgp.arity = a;
        }
        cgp.validate()?;
        let plan = ExperimentPlan {
            env,
            configs,
            repeats: file.repeats,
            base_seed: file.base_seed,
            output: file.output,
            workers: file.workers,
            cgp,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats < 2 {
            return Err(Error::InvalidConfig("a plan needs at least two repeats".into()));
        }
        if self.configs.is_empty() {
            return Err(Error::InvalidConfig("a plan needs at least one configuration".into()));
        }
        let mut seen = HashSet::new();
        for (label, _) in &self.configs {
            if !seen.insert(label) {
                return Err(Error::InvalidConfig(format!("duplicate label {label:?}")));
            }
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repeats as u64).map(|j| self.base_seed + j).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub iteration: usize,
    pub mean_reward: f64,
    pub sd_reward: f64,
}

/// Outcome of one (configuration, seed) cell.
#[derive(Clone, Debug)]
pub enum RunCell {
    Done(Box<RunResult>),
    Failed(String),
}

#[derive(Clone, Debug)]
pub struct ConfigResult {
    pub label: String,
    pub algorithm: Algorithm,
    /// Episodes to solve per repeat; failed or unsolved runs count the full budget.
    pub episodes: Vec<usize>,
    pub solved: Vec<bool>,
    pub runs: Vec<RunCell>,
    pub mean: f64,
    pub sd: f64,
}

impl ConfigResult {
    pub fn solved_count(&self) -> usize {
        self.solved.iter().filter(|&&s| s).count()
    }

    /// Mean and sd of the candidate reward per true episode, over the runs
    /// that reached that episode.
    pub fn convergence(&self) -> Vec<ConvergencePoint> {
        let traces: Vec<&[f64]> = self
            .runs
            .iter()
            .filter_map(|c| match c {
                RunCell::Done(r) => Some(r.candidate_reward.as_slice()),
                RunCell::Failed(_) => None,
            })
            .collect();
        let len = traces.iter().map(|t| t.len()).max().unwrap_or(0);
        (0..len)
            .map(|i| {
                let xs: Vec<f64> = traces.iter().filter_map(|t| t.get(i).copied()).collect();
                let (mean_reward, sd_reward) = mean_sd(&xs);
                ConvergencePoint {
                    iteration: i + 1,
                    mean_reward,
                    sd_reward,
                }
            })
            .collect()
    }
}

/// Sample mean and standard deviation (n - 1 denominator; 0 for n < 2).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StatsSummary {
    pub labels: Vec<String>,
    pub kruskal_wallis: KruskalWallis,
    /// Conover p-values, indexed like `labels`.
    pub posthoc: Vec<Vec<f64>>,
    pub alpha: f64,
}

impl StatsSummary {
    pub fn compute(labels: Vec<String>, groups: &[Vec<f64>]) -> Result<Self> {
        Ok(StatsSummary {
            kruskal_wallis: kruskal_wallis(groups)?,
            posthoc: conover_posthoc(groups)?,
            labels,
            alpha: ALPHA,
        })
    }

    pub fn p_between(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.posthoc[i][j])
    }
}

#[derive(Clone, Debug)]
pub struct ResultTable {
    pub env: EnvKind,
    pub seeds: Vec<u64>,
    pub configs: Vec<ConfigResult>,
    pub stats: Option<StatsSummary>,
}

impl ResultTable {
    pub fn config(&self, label: &str) -> Option<&ConfigResult> {
        self.configs.iter().find(|c| c.label == label)
    }
}

fn run_cell(env: EnvKind, cgp: &Arc<CgpConfig>, label: &str, algorithm: &Algorithm, seed: u64) -> RunCell {
    match algorithm.run(env, cgp.clone(), seed) {
        Ok(mut r) => {
            info!(
                "{label} seed {seed}: {} after {} episodes",
                if r.solved { "solved" } else { "unsolved" },
                r.episodes_to_solve
            );
            // Archives are large; the table keeps summaries only.
            r.archive = Archive::new();
            RunCell::Done(Box::new(r))
        }
        Err(e) => {
            warn!("{label} seed {seed} failed: {e}");
            RunCell::Failed(e.to_string())
        }
    }
}

/// Runs every configuration on every seed. Failures are recorded per cell.
pub fn run_plan(plan: &ExperimentPlan) -> Result<ResultTable> {
    plan.validate()?;
    let seeds = plan.seeds();
    let cgp = Arc::new(plan.cgp.clone());
    let jobs: Vec<(usize, u64)> = (0..plan.configs.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let execute = || -> Vec<RunCell> {
        jobs.par_iter()
            .map(|&(c, seed)| {
                let (label, algorithm) = &plan.configs[c];
                run_cell(plan.env, &cgp, label, algorithm, seed)
            })
            .collect()
    };
    let cells = match plan.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?
            .install(execute),
        None => execute(),
    };
    let mut cells = cells.into_iter();
    let configs: Vec<ConfigResult> = plan
        .configs
        .iter()
        .map(|(label, algorithm)| {
            let runs: Vec<RunCell> = cells.by_ref().take(seeds.len()).collect();
            let budget = algorithm.budget();
            let episodes: Vec<usize> = runs
                .iter()
                .map(|c| match c {
                    RunCell::Done(r) => r.episodes_to_solve,
                    RunCell::Failed(_) => budget,
                })
                .collect();
            let solved = runs
                .iter()
                .map(|c| matches!(c, RunCell::Done(r) if r.solved))
                .collect();
            let (mean, sd) = mean_sd(&episodes.iter().map(|&e| e as f64).collect::<Vec<_>>());
            ConfigResult {
                label: label.clone(),
                algorithm: algorithm.clone(),
                episodes,
                solved,
                runs,
                mean,
                sd,
            }
        })
        .collect();
    let stats = if configs.len() >= 2 {
        let labels = configs.iter().map(|c| c.label.clone()).collect();
        let groups: Vec<Vec<f64>> = configs
            .iter()
            .map(|c| c.episodes.iter().map(|&e| e as f64).collect())
            .collect();
        match StatsSummary::compute(labels, &groups) {
            Ok(s) => Some(s),
            Err(e) => {
                warn!("statistics skipped: {e}");
                None
            }
        }
    } else {
        None
    };
    Ok(ResultTable {
        env: plan.env,
        seeds,
        configs,
        stats,
    })
}
