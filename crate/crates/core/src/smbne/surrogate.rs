use std::sync::Arc;

use log::{debug, warn};
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgp::{CgpConfig, Genotype};
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::kriging::{KrigingModel, ThetaBounds};
use crate::phd::{build_input_vector, phenotype, InputStrategy, InputVector, Phenotype};
use crate::seed::{self, Stream};

use super::baselines::{initial_design, INITIAL_DESIGN};
use super::{Algorithm, Archive, Evaluator, RunResult};

fn default_init_size() -> usize {
    INITIAL_DESIGN
}

fn default_num_m() -> usize {
    100
}

fn default_best_fraction() -> f64 {
    0.2
}

fn default_surrogate_evals() -> usize {
    1000
}

fn default_rate() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmbneConfig {
    #[serde(default = "default_init_size")]
    pub init_size: usize,
    /// Maximum number of true episodes, initial design included.
    pub budget: usize,
    /// Upper bound on the model training set.
    #[serde(default = "default_num_m")]
    pub num_m: usize,
    /// Share of the model set reserved for the best archived solutions.
    #[serde(default = "default_best_fraction")]
    pub best_fraction: f64,
    #[serde(default = "default_surrogate_evals")]
    pub surrogate_evals: usize,
    #[serde(default = "default_rate")]
    pub es_mutation_rate: f64,
    pub strategy: InputStrategy,
    #[serde(default)]
    pub theta_bounds: ThetaBounds,
}

impl SmbneConfig {
    pub fn new(strategy: InputStrategy, budget: usize) -> Self {
        SmbneConfig {
            init_size: INITIAL_DESIGN,
            budget,
            num_m: default_num_m(),
            best_fraction: default_best_fraction(),
            surrogate_evals: default_surrogate_evals(),
            es_mutation_rate: default_rate(),
            strategy,
            theta_bounds: ThetaBounds::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.init_size < 2 {
            return fail("initial design needs at least two genotypes".into());
        }
        if self.budget < self.init_size {
            return fail(format!(
                "budget {} smaller than the initial design {}",
                self.budget, self.init_size
            ));
        }
        if self.num_m < 5 {
            return fail("model subset size must be at least 5".into());
        }
        if !(self.best_fraction > 0.0 && self.best_fraction < 1.0) {
            return fail("best fraction must lie in (0, 1)".into());
        }
        if self.surrogate_evals == 0 {
            return fail("surrogate search needs at least one evaluation".into());
        }
        if !(self.es_mutation_rate > 0.0 && self.es_mutation_rate <= 1.0) {
            return fail("mutation rate must lie in (0, 1]".into());
        }
        self.strategy.validate()
    }
}

/// Training set for the next model: everything while the archive is small,
/// otherwise the `ceil(best_fraction * num_m)` best records plus a uniform
/// sample without replacement from the rest.
pub fn select_model_subset<R: Rng + ?Sized>(
    archive: &Archive,
    num_m: usize,
    best_fraction: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if num_m < 5 {
        return Err(Error::InvalidConfig("model subset size must be at least 5".into()));
    }
    if archive.len() <= num_m {
        return Ok((0..archive.len()).collect());
    }
    let n_best = ((best_fraction * num_m as f64) - 1e-9).ceil() as usize;
    let n_best = n_best.clamp(1, num_m);
    let ranked = archive.ranked();
    let (best, rest) = ranked.split_at(n_best);
    let mut chosen = best.to_vec();
    chosen.extend(
        index::sample(rng, rest.len(), num_m - n_best)
            .into_iter()
            .map(|i| rest[i]),
    );
    Ok(chosen)
}

fn score(model: &KrigingModel, v: &InputVector, g: &Genotype, y_best: f64) -> Result<f64> {
    let p = phenotype(&g.decode_active(), v)?;
    model.expected_improvement(&p, y_best)
}

/// Maximizes expected improvement with a (1+4)-ES started from `start`.
/// Each generation scores four mutants; the best replaces the parent when
/// its EI is at least as high. Stops after `evals` surrogate evaluations.
pub fn propose_candidate<R: Rng + ?Sized>(
    model: &KrigingModel,
    v: &InputVector,
    start: &Genotype,
    y_best: f64,
    evals: usize,
    rate: f64,
    rng: &mut R,
) -> Result<(Genotype, f64)> {
    let mut parent = start.clone();
    let mut parent_ei = score(model, v, &parent, y_best)?;
    let mut remaining = evals;
    while remaining > 0 {
        let lambda = remaining.min(4);
        remaining -= lambda;
        let children: Vec<Genotype> = (0..lambda)
            .map(|_| parent.mutate_random(rate, rng))
            .collect::<Result<_>>()?;
        let scores: Vec<f64> = children
            .par_iter()
            .map(|c| score(model, v, c, y_best))
            .collect::<Result<_>>()?;
        // Later offspring win ties.
        let (best, best_ei) = scores
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &s)| if s >= acc.1 { (i, s) } else { acc });
        if best_ei >= parent_ei {
            parent = children.into_iter().nth(best).expect("child");
            parent_ei = best_ei;
        }
    }
    Ok((parent, parent_ei))
}

/// Phenotypes of archive records under the current input vector.
struct PhenotypeCache {
    entries: Vec<Option<Phenotype>>,
}

impl PhenotypeCache {
    fn get(&mut self, archive: &Archive, v: &InputVector, i: usize) -> Result<&Phenotype> {
        if self.entries.len() < archive.len() {
            self.entries.resize(archive.len(), None);
        }
        if self.entries[i].is_none() {
            let net = archive.get(i).genotype.decode_active();
            self.entries[i] = Some(phenotype(&net, v)?);
        }
        Ok(self.entries[i].as_ref().unwrap())
    }

    fn invalidate(&mut self) {
        self.entries.clear();
    }
}

fn fit_model(
    cfg: &SmbneConfig,
    archive: &Archive,
    v: &InputVector,
    cache: &mut PhenotypeCache,
    subset: &[usize],
) -> Result<KrigingModel> {
    let mut phenos = Vec::with_capacity(subset.len());
    let mut y = Vec::with_capacity(subset.len());
    for &i in subset {
        phenos.push(cache.get(archive, v, i)?.clone());
        y.push(archive.get(i).fitness);
    }
    KrigingModel::fit(&phenos, &y, cfg.theta_bounds)
}

/// Surrogate model-based neuroevolution.
///
/// After a random initial design, every iteration fits a Kriging model on
/// phenotypes of (a subset of) the archive, searches for the genotype with
/// the highest expected improvement, and spends exactly one true episode on
/// it. With the dynamic input strategy the input vector absorbs the trace of
/// every strictly improving candidate.
pub fn run_smbne(cfg: &SmbneConfig, spec: &EnvSpec, cgp: Arc<CgpConfig>, seed: u64) -> Result<RunResult> {
    cfg.validate()?;
    let algorithm = Algorithm::Smbne(cfg.clone());
    let mut eval = Evaluator::new(spec, seed, cfg.budget);
    let mut rng = seed::rng_for(seed, Stream::Optimizer, 0);
    if initial_design(&mut eval, &cgp, cfg.init_size, &mut rng)? {
        return Ok(eval.finish(algorithm));
    }
    if eval.done() {
        return Ok(eval.finish(algorithm));
    }

    let mut v_rng = seed::rng_for(seed, Stream::InputVector, 0);
    let mut v = build_input_vector(&cfg.strategy, &eval.archive.trace_refs(), spec, &mut v_rng)?;
    let mut cache = PhenotypeCache {
        entries: Vec::new(),
    };
    let mut iteration = 1;
    while !eval.done() {
        let subset = if iteration == 1 {
            (0..eval.archive.len()).collect()
        } else {
            select_model_subset(&eval.archive, cfg.num_m, cfg.best_fraction, &mut rng)?
        };
        let y_best = eval.archive.best_fitness();
        let candidate = match fit_model(cfg, &eval.archive, &v, &mut cache, &subset) {
            Ok(model) => {
                let start = &eval.archive.best().expect("archive").genotype;
                let (g, ei) = propose_candidate(
                    &model,
                    &v,
                    start,
                    y_best,
                    cfg.surrogate_evals,
                    cfg.es_mutation_rate,
                    &mut rng,
                )?;
                debug!(
                    "iter {iteration}: best={y_best:.4} theta={:.3e} nugget={:.0e} ei={ei:.4e}",
                    model.theta(),
                    model.nugget()
                );
                g
            }
            Err(e @ (Error::FitFailure { .. } | Error::ModelInput(_))) => {
                warn!("iteration {iteration}: model fit failed ({e}); evaluating a random genotype");
                eval.model_failures += 1;
                Genotype::random(cgp.clone(), &mut rng)
            }
            Err(e) => return Err(e),
        };
        let (episode, became_best) = eval.evaluate(candidate, iteration)?;
        if cfg.strategy.is_dynamic() && episode.fitness < y_best {
            v = v.update_dynamic(&episode.trace, episode.fitness);
            cache.invalidate();
        }
        if eval.check_if_promising(&episode, became_best)? {
            break;
        }
        iteration += 1;
    }
    Ok(eval.finish(algorithm))
}
