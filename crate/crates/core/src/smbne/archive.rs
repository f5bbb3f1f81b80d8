use crate::cgp::Genotype;
use crate::envs::EpisodeResult;
use crate::phd::TraceRef;

#[derive(Clone, Debug)]
pub struct ArchiveRecord {
    pub genotype: Genotype,
    pub fitness: f64,
    pub total_reward: f64,
    /// Row-major normalized states observed during the episode.
    pub trace: Vec<f64>,
    pub initial_state: Vec<f64>,
    /// Loop iteration that produced the record (0 for the initial design).
    pub iteration: usize,
}

impl ArchiveRecord {
    pub fn new(genotype: Genotype, episode: EpisodeResult, iteration: usize) -> Self {
        ArchiveRecord {
            genotype,
            fitness: episode.fitness,
            total_reward: episode.total_reward,
            trace: episode.trace,
            initial_state: episode.initial_state,
            iteration,
        }
    }
}

/// Every truly evaluated genotype of a run, in evaluation order.
///
/// The best record is the one with minimal fitness; among equal fitness the
/// most recently added wins.
#[derive(Clone, Debug, Default)]
pub struct Archive {
    records: Vec<ArchiveRecord>,
    best_index: Option<usize>,
}

impl Archive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record and reports whether it became the best.
    pub fn push(&mut self, record: ArchiveRecord) -> bool {
        let becomes_best = self
            .best()
            .is_none_or(|best| record.fitness <= best.fitness);
        self.records.push(record);
        if becomes_best {
            self.best_index = Some(self.records.len() - 1);
        }
        becomes_best
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[ArchiveRecord] {
        &self.records
    }

    pub fn get(&self, i: usize) -> &ArchiveRecord {
        &self.records[i]
    }

    pub fn best_index(&self) -> Option<usize> {
        self.best_index
    }

    pub fn best(&self) -> Option<&ArchiveRecord> {
        self.best_index.map(|i| &self.records[i])
    }

    pub fn best_fitness(&self) -> f64 {
        self.best().map_or(f64::INFINITY, |r| r.fitness)
    }

    /// Indices sorted best first; ties go to the more recent record.
    pub fn ranked(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.records.len()).collect();
        order.sort_by(|&a, &b| {
            self.records[a]
                .fitness
                .total_cmp(&self.records[b].fitness)
                .then(b.cmp(&a))
        });
        order
    }

    pub fn trace_refs(&self) -> Vec<TraceRef<'_>> {
        self.records
            .iter()
            .map(|r| TraceRef {
                fitness: r.fitness,
                states: &r.trace,
            })
            .collect()
    }
}
