//! Phenotypic distance between networks.
//!
//! Networks are compared by their outputs on a shared input vector of
//! environment states. The input vector is built by one of four
//! strategies: stored reference traces (`Pre`), the best traces of the
//! initial design (`Init`), a Latin hypercube over the normalized state box
//! (`Lhs`), or the best traces seen so far, refreshed whenever the run finds
//! a new best network (`Dyn`).

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cgp::ActiveNetwork;
use crate::envs::{EnvKind, EnvSpec};
use crate::error::{Error, Result};

/// Total number of scalars an input vector aims for.
pub const TARGET_SCALARS: usize = 800;

const CARTPOLE_REFERENCE: &str = include_str!("../fixtures/cartpole_reference.csv");
const MOUNTAINCAR_REFERENCE: &str = include_str!("../fixtures/mountaincar_reference.csv");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InputStrategy {
    /// Reference traces from a previously solved run. Without a path the
    /// traces bundled for the environment are used.
    Pre {
        num_s: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
    },
    Init {
        num_s: usize,
    },
    Lhs {
        sample_count: usize,
    },
    Dyn {
        num_s: usize,
    },
}

impl InputStrategy {
    /// Default LHS size: 800 scalars in total.
    pub fn lhs_for(env: EnvKind) -> Self {
        InputStrategy::Lhs {
            sample_count: TARGET_SCALARS / env.spec().obs_dim,
        }
    }

    pub fn is_dynamic(&self) -> bool {
        matches!(self, InputStrategy::Dyn { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let n = match self {
            InputStrategy::Pre { num_s, .. }
            | InputStrategy::Init { num_s }
            | InputStrategy::Dyn { num_s } => *num_s,
            InputStrategy::Lhs { sample_count } => *sample_count,
        };
        if n == 0 {
            return Err(Error::InvalidConfig(
                "input strategy needs at least one trace or sample".into(),
            ));
        }
        Ok(())
    }
}

/// States kept per contributing trace so that `num_s` traces fill roughly
/// [`TARGET_SCALARS`] values.
pub fn per_trace_cap(num_s: usize, obs_dim: usize) -> usize {
    (TARGET_SCALARS / (num_s * obs_dim)).max(1)
}

/// Keeps at most `cap` states, evenly spread over the trace with the first
/// and last state always included.
pub fn subsample(states: &[f64], obs_dim: usize, cap: usize) -> Vec<f64> {
    let len = states.len() / obs_dim;
    if len <= cap {
        return states.to_vec();
    }
    if cap == 1 {
        return states[..obs_dim].to_vec();
    }
    let mut out = Vec::with_capacity(cap * obs_dim);
    for i in 0..cap {
        let idx = ((i * (len - 1)) as f64 / (cap - 1) as f64).round() as usize;
        out.extend_from_slice(&states[idx * obs_dim..(idx + 1) * obs_dim]);
    }
    out
}

/// A trace offered to the input-vector builder.
#[derive(Clone, Copy, Debug)]
pub struct TraceRef<'a> {
    pub fitness: f64,
    /// Row-major normalized states.
    pub states: &'a [f64],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Slot {
    fitness: f64,
    states: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputVector {
    obs_dim: usize,
    capacity: usize,
    per_trace_cap: usize,
    /// Contributing traces, best fitness first. Empty for sampled vectors.
    slots: Vec<Slot>,
    entries: Vec<f64>,
}

impl InputVector {
    fn from_slots(obs_dim: usize, capacity: usize, per_trace_cap: usize, slots: Vec<Slot>) -> Self {
        let mut v = InputVector {
            obs_dim,
            capacity,
            per_trace_cap,
            slots,
            entries: Vec::new(),
        };
        v.rebuild();
        v
    }

    /// A vector of sampled states with no contributing traces.
    pub fn from_samples(obs_dim: usize, entries: Vec<f64>) -> Self {
        InputVector {
            obs_dim,
            capacity: 0,
            per_trace_cap: 0,
            slots: Vec::new(),
            entries,
        }
    }

    fn rebuild(&mut self) {
        self.entries = self.slots.iter().flat_map(|s| s.states.iter().copied()).collect();
    }

    /// Row-major normalized states.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn num_states(&self) -> usize {
        self.entries.len() / self.obs_dim
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn per_trace_cap(&self) -> usize {
        self.per_trace_cap
    }

    pub fn source_fitnesses(&self) -> Vec<f64> {
        self.slots.iter().map(|s| s.fitness).collect()
    }

    /// Number of states each contributing trace supplies, in order.
    pub fn trace_lengths(&self) -> Vec<usize> {
        self.slots.iter().map(|s| s.states.len() / self.obs_dim).collect()
    }

    /// Inserts the trace of a new best network. The worst contributing
    /// trace is dropped once all `num_s` slots are taken.
    pub fn update_dynamic(&self, new_trace: &[f64], new_fitness: f64) -> InputVector {
        let mut slots = self.slots.clone();
        if slots.len() >= self.capacity && !slots.is_empty() {
            // Sorted best first, so the worst is last.
            slots.pop();
        }
        // The newer trace ranks ahead of equal fitnesses.
        let at = slots.partition_point(|s| s.fitness < new_fitness);
        slots.insert(
            at,
            Slot {
                fitness: new_fitness,
                states: subsample(new_trace, self.obs_dim, self.per_trace_cap),
            },
        );
        InputVector::from_slots(self.obs_dim, self.capacity, self.per_trace_cap, slots)
    }
}

/// Selects the `num_s` best traces (ties favor later traces), orders them
/// best first, subsamples and concatenates.
fn from_best_traces(traces: &[TraceRef<'_>], num_s: usize, obs_dim: usize) -> InputVector {
    let cap = per_trace_cap(num_s, obs_dim);
    let mut order: Vec<usize> = (0..traces.len()).collect();
    order.sort_by(|&a, &b| {
        traces[a]
            .fitness
            .total_cmp(&traces[b].fitness)
            .then(b.cmp(&a))
    });
    let slots = order
        .into_iter()
        .take(num_s)
        .map(|i| Slot {
            fitness: traces[i].fitness,
            states: subsample(traces[i].states, obs_dim, cap),
        })
        .collect();
    InputVector::from_slots(obs_dim, num_s, cap, slots)
}

pub fn build_input_vector<R: Rng + ?Sized>(
    strategy: &InputStrategy,
    archive: &[TraceRef<'_>],
    spec: &EnvSpec,
    rng: &mut R,
) -> Result<InputVector> {
    strategy.validate()?;
    match strategy {
        InputStrategy::Init { num_s } | InputStrategy::Dyn { num_s } => {
            if archive.is_empty() {
                return Err(Error::EmptyArchive);
            }
            Ok(from_best_traces(archive, *num_s, spec.obs_dim))
        }
        InputStrategy::Lhs { sample_count } => Ok(InputVector::from_samples(
            spec.obs_dim,
            latin_hypercube(*sample_count, spec.obs_dim, rng),
        )),
        InputStrategy::Pre { num_s, path } => {
            let reference = match path {
                Some(p) => load_reference_traces(p, spec.obs_dim)?,
                None => builtin_reference(spec.kind)?,
            };
            if reference.is_empty() {
                return Err(Error::MissingReference("reference file holds no traces".into()));
            }
            let refs: Vec<TraceRef<'_>> = reference
                .iter()
                .map(|t| TraceRef {
                    fitness: t.fitness,
                    states: &t.states,
                })
                .collect();
            Ok(from_best_traces(&refs, *num_s, spec.obs_dim))
        }
    }
}

/// `n` points in `[-1, 1]^dim`, one per stratum of width `2/n` in every
/// dimension, strata paired across dimensions by random permutations.
pub fn latin_hypercube<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Vec<f64> {
    let mut points = vec![0.0; n * dim];
    let mut perm: Vec<usize> = (0..n).collect();
    for d in 0..dim {
        perm.shuffle(rng);
        for (i, &stratum) in perm.iter().enumerate() {
            let u: f64 = rng.random();
            points[i * dim + d] = -1.0 + 2.0 * (stratum as f64 + u) / n as f64;
        }
    }
    points
}

/// Network outputs on every state of an input vector, concatenated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phenotype(pub Vec<f64>);

impl Phenotype {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn phenotype(net: &ActiveNetwork, v: &InputVector) -> Result<Phenotype> {
    if net.num_inputs() != v.obs_dim() {
        return Err(Error::LengthMismatch {
            expected: v.obs_dim(),
            actual: net.num_inputs(),
        });
    }
    Ok(Phenotype(net.forward_batch(v.entries())?))
}

#[inline]
pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn manhattan(a: &Phenotype, b: &Phenotype) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(l1(&a.0, &b.0))
}

/// `exp(-theta * manhattan(a, b))`.
pub fn kernel_phd(a: &Phenotype, b: &Phenotype, theta: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::NonPositiveTheta(theta));
    }
    Ok((-theta * manhattan(a, b)?).exp())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceTrace {
    pub fitness: f64,
    pub states: Vec<f64>,
}

/// Writes traces as CSV blocks. Each block starts with a `#fitness,<value>`
/// header followed by one row of normalized observations per state.
pub fn write_reference_traces<W: Write>(mut w: W, traces: &[ReferenceTrace], obs_dim: usize) -> Result<()> {
    let io = |e| Error::io("<reference csv>", e);
    for t in traces {
        writeln!(w, "#fitness,{}", t.fitness).map_err(io)?;
        for row in t.states.chunks_exact(obs_dim) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", cells.join(",")).map_err(io)?;
        }
    }
    Ok(())
}

pub fn read_reference_traces<R: BufRead>(reader: R, obs_dim: usize) -> Result<Vec<ReferenceTrace>> {
    let bad = |detail: String| Error::Parse {
        what: "reference trace file",
        detail,
    };
    let mut traces: Vec<ReferenceTrace> = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<reference csv>", e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(f) = line.strip_prefix("#fitness,") {
            let fitness = f
                .trim()
                .parse()
                .map_err(|_| bad(format!("line {}: bad fitness {f:?}", n + 1)))?;
            traces.push(ReferenceTrace {
                fitness,
                states: Vec::new(),
            });
            continue;
        }
        let current = traces
            .last_mut()
            .ok_or_else(|| bad(format!("line {}: state before any fitness header", n + 1)))?;
        let row: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("line {}: {e}", n + 1)))?;
        if row.len() != obs_dim {
            return Err(bad(format!(
                "line {}: expected {obs_dim} values, found {}",
                n + 1,
                row.len()
            )));
        }
        if row.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(bad(format!("line {}: state outside [-1, 1]", n + 1)));
        }
        current.states.extend(row);
    }
    if let Some(t) = traces.iter().find(|t| t.states.is_empty()) {
        return Err(bad(format!("trace with fitness {} has no states", t.fitness)));
    }
    Ok(traces)
}

pub fn load_reference_traces(path: &Path, obs_dim: usize) -> Result<Vec<ReferenceTrace>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::MissingReference(format!("{}: {e}", path.display())))?;
    read_reference_traces(std::io::BufReader::new(file), obs_dim)
}

pub fn builtin_reference(env: EnvKind) -> Result<Vec<ReferenceTrace>> {
    let (text, dim) = match env {
        EnvKind::CartPole => (CARTPOLE_REFERENCE, 4),
        EnvKind::MountainCar => (MOUNTAINCAR_REFERENCE, 2),
    };
    read_reference_traces(text.as_bytes(), dim)
}
