//! Optimization loops: surrogate-assisted neuroevolution, the model-free
//! (1+4) evolution strategy and random search.
//!
//! All three share the same bookkeeping: every true episode goes through
//! [`Evaluator`], which derives the episode's start state from the run seed
//! and the episode index (so algorithms sharing a seed see the same start
//! states), enforces the budget and records convergence data.

mod archive;
mod baselines;
mod surrogate;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use archive::{Archive, ArchiveRecord};
pub use baselines::{run_cgp_es, run_random_search, INITIAL_DESIGN};
pub use surrogate::{propose_candidate, run_smbne, select_model_subset, SmbneConfig};

use crate::cgp::{CgpConfig, Genotype};
use crate::envs::{self, EnvKind, EnvSpec, EpisodeResult, SolvedReport};
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

/// One algorithm configuration as it appears in experiment plans.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
pub enum Algorithm {
    Smbne(SmbneConfig),
    Cgp { mutation_rate: f64, budget: usize },
    Rs { budget: usize },
}

impl Algorithm {
    pub fn budget(&self) -> usize {
        match self {
            Algorithm::Smbne(c) => c.budget,
            Algorithm::Cgp { budget, .. } | Algorithm::Rs { budget } => *budget,
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Algorithm::Smbne(_) => "smbne",
            Algorithm::Cgp { .. } => "cgp",
            Algorithm::Rs { .. } => "rs",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Algorithm::Smbne(c) => c.validate(),
            Algorithm::Cgp {
                mutation_rate,
                budget,
            } => {
                if !(*mutation_rate > 0.0 && *mutation_rate <= 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "mutation rate must be in (0, 1], got {mutation_rate}"
                    )));
                }
                if *budget < INITIAL_DESIGN {
                    return Err(Error::InvalidConfig(format!(
                        "budget must cover the initial design of {INITIAL_DESIGN}"
                    )));
                }
                Ok(())
            }
            Algorithm::Rs { budget } => {
                if *budget == 0 {
                    return Err(Error::InvalidConfig("budget must be positive".into()));
                }
                Ok(())
            }
        }
    }

    pub fn run(&self, env: EnvKind, cgp: Arc<CgpConfig>, seed: u64) -> Result<RunResult> {
        let spec = env.spec();
        match self {
            Algorithm::Smbne(c) => run_smbne(c, &spec, cgp, seed),
            Algorithm::Cgp {
                mutation_rate,
                budget,
            } => run_cgp_es(&spec, cgp, *mutation_rate, *budget, seed),
            Algorithm::Rs { budget } => run_random_search(&spec, cgp, *budget, seed),
        }
    }
}

/// Outcome of one seeded run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub env: EnvKind,
    pub seed: u64,
    pub solved: bool,
    /// Episodes used when the solved check first passed, or the full budget.
    pub episodes_to_solve: usize,
    pub evaluations: usize,
    /// Best fitness after each true episode.
    pub best_fitness: Vec<f64>,
    /// Reward of the candidate evaluated in each true episode.
    pub candidate_reward: Vec<f64>,
    pub solved_checks: Vec<SolvedReport>,
    /// Archive index of the genotype that passed the solved check.
    #[serde(default)]
    pub solved_record: Option<usize>,
    /// Iterations in which the surrogate could not be fitted.
    pub model_failures: usize,
    #[serde(skip)]
    pub archive: Archive,
}

impl RunResult {
    pub fn best_genotype(&self) -> Option<&Genotype> {
        self.archive.best().map(|r| &r.genotype)
    }

    /// The genotype that passed the solved check, if any and if the archive
    /// was kept.
    pub fn solved_genotype(&self) -> Option<&Genotype> {
        self.solved_record
            .and_then(|i| self.archive.records().get(i))
            .map(|r| &r.genotype)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Budgeted true-episode evaluation shared by all loops.
pub(crate) struct Evaluator<'a> {
    spec: &'a EnvSpec,
    seed: u64,
    budget: usize,
    pub(crate) archive: Archive,
    best_fitness: Vec<f64>,
    candidate_reward: Vec<f64>,
    solved_checks: Vec<SolvedReport>,
    solved_at: Option<usize>,
    solved_index: Option<usize>,
    pub(crate) model_failures: usize,
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(spec: &'a EnvSpec, seed: u64, budget: usize) -> Self {
        Evaluator {
            spec,
            seed,
            budget,
            archive: Archive::new(),
            best_fitness: Vec::new(),
            candidate_reward: Vec::new(),
            solved_checks: Vec::new(),
            solved_at: None,
            solved_index: None,
            model_failures: 0,
        }
    }

    pub(crate) fn evaluations(&self) -> usize {
        self.archive.len()
    }

    pub(crate) fn exhausted(&self) -> bool {
        self.evaluations() >= self.budget
    }

    pub(crate) fn remaining(&self) -> usize {
        self.budget.saturating_sub(self.evaluations())
    }

    pub(crate) fn done(&self) -> bool {
        self.solved_at.is_some() || self.exhausted()
    }

    /// Runs one episode and archives it. Returns the episode and whether
    /// the record became the archive best.
    pub(crate) fn evaluate(
        &mut self,
        genotype: Genotype,
        iteration: usize,
    ) -> Result<(EpisodeResult, bool)> {
        if self.exhausted() {
            return Err(Error::InvalidConfig("evaluation budget exhausted".into()));
        }
        let index = self.evaluations() as u64;
        let mut rng = seed::rng_for(self.seed, Stream::Episode, index);
        let net = genotype.decode_active();
        let episode = envs::run_episode(self.spec, &net, &mut rng)?;
        let became_best = self
            .archive
            .push(ArchiveRecord::new(genotype, episode.clone(), iteration));
        self.candidate_reward.push(episode.total_reward);
        self.best_fitness.push(self.archive.best_fitness());
        Ok((episode, became_best))
    }

    /// Runs the 100-trial solved check on the current archive best.
    pub(crate) fn check_best(&mut self) -> Result<bool> {
        let index = self.archive.best_index().expect("check on an empty archive");
        self.check_record(index)
    }

    /// Runs the 100-trial solved check on the most recent record.
    pub(crate) fn check_latest(&mut self) -> Result<bool> {
        let index = self.archive.len().checked_sub(1).expect("check on an empty archive");
        self.check_record(index)
    }

    /// Checks the latest record when it is a new best or its own episode
    /// already met the solved threshold.
    pub(crate) fn check_if_promising(&mut self, episode: &EpisodeResult, became_best: bool) -> Result<bool> {
        if became_best || episode.solved_flag {
            self.check_latest()
        } else {
            Ok(false)
        }
    }

    fn check_record(&mut self, index: usize) -> Result<bool> {
        let net = self.archive.get(index).genotype.decode_active();
        let check_seed = seed::derive(self.seed, Stream::SolvedCheck, self.solved_checks.len() as u64);
        let report = envs::solved_check(self.spec, &net, check_seed)?;
        let solved = report.solved;
        self.solved_checks.push(report);
        if solved {
            self.solved_at = Some(self.evaluations());
            self.solved_index = Some(index);
        }
        Ok(solved)
    }

    pub(crate) fn finish(self, algorithm: Algorithm) -> RunResult {
        let evaluations = self.evaluations();
        RunResult {
            algorithm,
            env: self.spec.kind,
            seed: self.seed,
            solved: self.solved_at.is_some(),
            episodes_to_solve: self.solved_at.unwrap_or(self.budget),
            evaluations,
            best_fitness: self.best_fitness,
            candidate_reward: self.candidate_reward,
            solved_checks: self.solved_checks,
            solved_record: self.solved_index,
            model_failures: self.model_failures,
            archive: self.archive,
        }
    }
}
