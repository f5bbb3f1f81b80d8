use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use smbne_core::envs::{self, run_episode};
use smbne_core::harness::{emit_results, read_results_csv, run_plan, PlanEntry};
use smbne_core::phd::{write_reference_traces, ReferenceTrace};
use smbne_core::seed::{self, Stream};
use smbne_core::{CgpConfig, EnvKind, ExperimentPlan, Genotype};

#[derive(Parser)]
#[command(name = "smbne", version, about = "Surrogate model-based neuroevolution experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configuration of a plan file over all seeds.
    Run {
        plan: PathBuf,
        /// Output directory (overrides the plan's `output`).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Parallel runs (overrides the plan's `workers`).
        #[arg(short, long)]
        workers: Option<usize>,
    },
    /// Run a single configuration with one seed.
    Solve(SolveArgs),
    /// Recompute statistics from a stored results.csv.
    Stats {
        results: PathBuf,
        /// Write stats.json here instead of printing it.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Replay a saved genotype and export its episode traces.
    Trace {
        genotype: PathBuf,
        #[arg(short, long)]
        env: String,
        #[arg(short, long, default_value_t = 0)]
        seed: u64,
        #[arg(short = 'n', long, default_value_t = 1)]
        episodes: usize,
        /// Directory for per-episode CSV files.
        #[arg(short, long)]
        output: PathBuf,
        /// Also write the traces as a reference trace file usable by the
        /// `pre` input set.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(short, long)]
    env: String,
    /// smbne, cgp or rs.
    #[arg(short, long, default_value = "smbne")]
    algorithm: String,
    #[arg(short, long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    mutation_rate: Option<f64>,
    /// pre, init, lhs or dyn.
    #[arg(long)]
    input_set: Option<String>,
    #[arg(long)]
    num_s: Option<usize>,
    #[arg(long)]
    surrogate_evals: Option<usize>,
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Save the solving genotype (or the best one) as JSON.
    #[arg(long)]
    save_best: Option<PathBuf>,
    /// Write the run result as JSON.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_env(name: &str) -> Result<EnvKind> {
    Ok(name.parse::<EnvKind>()?)
}

fn run(plan_path: &Path, output: Option<PathBuf>, workers: Option<usize>) -> Result<()> {
    let mut plan = ExperimentPlan::load(plan_path)?;
    if workers.is_some() {
        plan.workers = workers;
    }
    let dir = output
        .or_else(|| plan.output.clone())
        .context("no output directory: pass --output or set `output` in the plan")?;
    info!(
        "{} configurations x {} repeats on {}",
        plan.configs.len(),
        plan.repeats,
        plan.env
    );
    let table = run_plan(&plan)?;
    emit_results(&table, &dir)?;
    for c in &table.configs {
        println!(
            "{:<24} {:>9.2} +- {:>8.2}  solved {}/{}",
            c.label,
            c.mean,
            c.sd,
            c.solved_count(),
            c.episodes.len()
        );
    }
    if let Some(s) = &table.stats {
        println!(
            "Kruskal-Wallis H = {:.4}, df = {}, p = {:.4e}",
            s.kruskal_wallis.h, s.kruskal_wallis.df, s.kruskal_wallis.p
        );
    }
    println!("results written to {}", dir.display());
    Ok(())
}

fn solve(args: SolveArgs) -> Result<()> {
    let env = parse_env(&args.env)?;
    let entry = PlanEntry {
        label: "solve".into(),
        algorithm: args.algorithm,
        budget: args.budget,
        mutation_rate: args.mutation_rate,
        input_set: args.input_set,
        num_s: args.num_s,
        reference: args.reference,
        surrogate_evals: args.surrogate_evals,
        ..PlanEntry::default()
    };
    let algorithm = entry.to_algorithm(env)?;
    let result = algorithm.run(env, Arc::new(CgpConfig::for_env(env)), args.seed)?;
    println!(
        "{} on {} seed {}: {} after {} episodes (best fitness {:.3})",
        algorithm.id(),
        env,
        args.seed,
        if result.solved { "solved" } else { "unsolved" },
        result.episodes_to_solve,
        result.best_fitness.last().copied().unwrap_or(f64::NAN)
    );
    if let Some(path) = &args.save_best {
        let best = result
            .solved_genotype()
            .or_else(|| result.best_genotype())
            .context("run produced no genotype")?;
        best.save(path)?;
    }
    if let Some(path) = &args.output {
        fs::write(path, result.to_json()?).with_context(|| path.display().to_string())?;
    }
    Ok(())
}

fn stats(results: &Path, output: Option<PathBuf>) -> Result<()> {
    let stored = read_results_csv(results)?;
    let summary = stored.stats()?;
    let json = serde_json::to_string_pretty(&summary)?;
    match output {
        Some(path) => fs::write(&path, json).with_context(|| path.display().to_string())?,
        None => println!("{json}"),
    }
    Ok(())
}

fn trace(
    genotype: &Path,
    env: &str,
    seed: u64,
    episodes: usize,
    output: &Path,
    reference: Option<PathBuf>,
) -> Result<()> {
    let env = parse_env(env)?;
    let spec = env.spec();
    let g = Genotype::load(genotype)?;
    let net = g.decode_active();
    if episodes == 0 {
        bail!("at least one episode is required");
    }
    fs::create_dir_all(output).with_context(|| output.display().to_string())?;
    let mut refs = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let mut rng = seed::rng_for(seed, Stream::Episode, i as u64);
        let ep = run_episode(&spec, &net, &mut rng)?;
        let path = output.join(format!("episode_{i}.csv"));
        let file = File::create(&path).with_context(|| path.display().to_string())?;
        ep.write_csv(BufWriter::new(file))?;
        println!(
            "episode {i}: reward {} fitness {:.4} steps {}",
            ep.total_reward, ep.fitness, ep.steps
        );
        refs.push(ReferenceTrace {
            fitness: ep.fitness,
            states: ep.trace,
        });
    }
    if let Some(path) = reference {
        let file = File::create(&path).with_context(|| path.display().to_string())?;
        write_reference_traces(BufWriter::new(file), &refs, spec.obs_dim)?;
    }
    let report = envs::solved_check(&spec, &net, seed)?;
    println!(
        "mean reward over {} trials: {:.2} ({})",
        report.trials,
        report.mean_reward,
        if report.solved { "solved" } else { "not solved" }
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            plan,
            output,
            workers,
        } => run(&plan, output, workers),
        Command::Solve(args) => solve(args),
        Command::Stats { results, output } => stats(&results, output),
        Command::Trace {
            genotype,
            env,
            seed,
            episodes,
            output,
            reference,
        } => trace(&genotype, &env, seed, episodes, &output, reference),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

