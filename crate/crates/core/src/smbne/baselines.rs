use std::sync::Arc;

use crate::cgp::{CgpConfig, Genotype};
use crate::envs::EnvSpec;
use crate::error::Result;
use crate::seed::{self, Stream};

use super::{Algorithm, Evaluator, RunResult};

/// Size of the random initial design shared by all algorithms.
pub const INITIAL_DESIGN: usize = 20;

/// Evaluates up to `count` random genotypes, checking every new best and
/// every genotype whose own episode met the solved threshold.
/// Returns true once the task is solved.
pub(crate) fn initial_design(
    eval: &mut Evaluator<'_>,
    cgp: &Arc<CgpConfig>,
    count: usize,
    rng: &mut seed::Rng,
) -> Result<bool> {
    for _ in 0..count {
        if eval.exhausted() {
            break;
        }
        let g = Genotype::random(cgp.clone(), rng);
        let (episode, became_best) = eval.evaluate(g, 0)?;
        if eval.check_if_promising(&episode, became_best)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// The model-free (1+4)-ES: starts from the best of 20 random genotypes,
/// then evaluates four mutants per generation. The best mutant replaces the
/// elitist when its fitness is equal or better. Mutants whose episode met
/// the solved threshold are checked at once; a new elitist at the end of
/// its generation.
pub fn run_cgp_es(
    spec: &EnvSpec,
    cgp: Arc<CgpConfig>,
    mutation_rate: f64,
    budget: usize,
    seed: u64,
) -> Result<RunResult> {
    let algorithm = Algorithm::Cgp {
        mutation_rate,
        budget,
    };
    algorithm.validate()?;
    let mut eval = Evaluator::new(spec, seed, budget);
    let mut rng = seed::rng_for(seed, Stream::Optimizer, 0);
    if initial_design(&mut eval, &cgp, INITIAL_DESIGN, &mut rng)? {
        return Ok(eval.finish(algorithm));
    }
    let mut elitist = eval.archive.best().expect("initial design").clone();
    let mut generation = 1;
    'search: while !eval.done() {
        let lambda = eval.remaining().min(4);
        // (genotype, fitness, already checked)
        let mut champion: Option<(Genotype, f64, bool)> = None;
        for _ in 0..lambda {
            let child = elitist.genotype.mutate_random(mutation_rate, &mut rng)?;
            let (episode, _) = eval.evaluate(child.clone(), generation)?;
            let checked = episode.solved_flag;
            if checked && eval.check_latest()? {
                break 'search;
            }
            if champion
                .as_ref()
                .is_none_or(|(_, f, _)| episode.fitness <= *f)
            {
                champion = Some((child, episode.fitness, checked));
            }
        }
        let (child, fitness, checked) = champion.expect("at least one offspring");
        if fitness <= elitist.fitness {
            elitist = eval.archive.best().expect("archive").clone();
            debug_assert_eq!(elitist.genotype, child);
            if !checked && eval.check_best()? {
                break;
            }
        }
        generation += 1;
    }
    Ok(eval.finish(algorithm))
}

/// Independent random genotypes until the budget is spent or one solves.
pub fn run_random_search(spec: &EnvSpec, cgp: Arc<CgpConfig>, budget: usize, seed: u64) -> Result<RunResult> {
    let algorithm = Algorithm::Rs { budget };
    algorithm.validate()?;
    let mut eval = Evaluator::new(spec, seed, budget);
    let mut rng = seed::rng_for(seed, Stream::Optimizer, 0);
    initial_design(&mut eval, &cgp, budget, &mut rng)?;
    Ok(eval.finish(algorithm))
}
